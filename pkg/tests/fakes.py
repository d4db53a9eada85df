import json
import sys
sys.path.append('..')
import numpy as np

from src.hydromission.env import TerrainGrid, VortexField, WorldSnapshot
from src.hydromission.graph import TaskEdge, TaskGraph
from src.hydromission.world import World


class FakeClock():
    '''
        Fake a clock advancing by a fixed tick on every read
    '''
    def __init__(self, tick: float = 1.0, start: float = 0.0):
        self.tick = tick
        self.now = start - tick

    def __call__(self) -> float:
        self.now += self.tick
        return self.now


class ScriptedLegTime():
    '''
        Fake the realized flight time of legs: a factor per edge, 1 for the others
    '''
    def __init__(self, factors: dict = None, default: float = 1.0):
        self.factors = factors or {}
        self.default = default
        self.calls = []

    def __call__(self, edge, ground, expected):
        self.calls.append((tuple(edge), ground, expected))
        return ground * self.factors.get(tuple(edge), self.default)


class ScriptedWorld(World):
    '''
        Fake a world whose current follows a script, one field per step, the last one repeating
    '''
    def __init__(self, terrain: TerrainGrid, fields, obstacles=(), **kwargs):
        fields = list(fields)
        super().__init__(terrain, fields[0], obstacles, **kwargs)
        self.script = fields[1:]

    def next_field(self) -> VortexField:
        return self.script.pop(0) if self.script else self.field


def still_field(depth_extent: float = 1000.0) -> VortexField:
    return VortexField(((),), depth_extent)


def open_snapshot(size: int = 100, cell_size: float = 10.0, depth_extent: float = 100.0, field: VortexField = None,
                  obstacles=()) -> WorldSnapshot:
    terrain = TerrainGrid.open_water(size, size, cell_size, depth_extent)
    return WorldSnapshot(0.0, terrain, field if field is not None else still_field(depth_extent), tuple(obstacles))


def small_graph(start: int = 0, dest: int = 4) -> TaskGraph:
    r'''
        Five nodes, speed 1 so expected times equal distances

        0 -10- 1 -10- 4, 0 -10- 2 -10- 4, 1 -5- 2 -5- 3 -5- 4
    '''
    edges = [
        TaskEdge(0, 1, 10.0, 0.0, 5.0),
        TaskEdge(1, 4, 10.0, 0.0, 1.0),
        TaskEdge(0, 2, 10.0, 0.0, 2.0),
        TaskEdge(2, 4, 10.0, 0.0, 2.0),
        TaskEdge(1, 2, 5.0, 0.0, 1.0),
        TaskEdge(2, 3, 5.0, 0.0, 3.0),
        TaskEdge(3, 4, 5.0, 0.0, 3.0),
    ]
    return TaskGraph(np.zeros((5, 3)), edges, 1.0, start, dest)


def line_scenario(nodes: int = 3, t_available: float = 1000.0, seed: int = 0, leg_updates: int = 1) -> dict:
    r'''
        Open water scenario with waypoints 300 m apart on a line, each edge carrying a 10 s task
    '''
    waypoints = [[100.0 + 300.0 * i, 100.0, 50.0] for i in range(nodes)]
    roster = [{"i": i, "j": i + 1, "duration": 10.0, "priority": 5.0} for i in range(nodes - 1)]
    return {
        "name": "line",
        "seed": seed,
        "map": {"source": "synthetic:open", "size": 60, "cell_size": 20.0, "depth_extent": 200.0},
        "current": {"layers": 1},
        "graph": {"waypoints": waypoints, "roster": roster},
        "bbo": {
            "path": {"n_pop": 10, "iter_max": 5},
            "mission": {"n_pop": 6, "iter_max": 4, "rate_model": "constant", "mu": 0.2},
        },
        "mission": {"t_available": t_available},
        "executive": {"leg_updates": leg_updates},
    }


def write_scenario(path, raw: dict) -> str:
    with open(path, 'w') as file:
        json.dump(raw, file, indent=2)
    return str(path)
