from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Optional, get_args, get_origin, get_type_hints

import numpy as np

from .bbo import BboConfig
from .env import TerrainGrid, VortexField, VortexParams, cluster_map, read_pgm, read_raw_grid, synthetic_map
from .graph import TaskGraph, build_graph
from .interfaces import ILog
from .obstacles import Obstacle, ObstacleFactory
from .pathplan import PathWeights, SplineConfig, VehicleModel
from .profile import Profile, Stopwatch
from .utils import ConfigError, HydroMissionException, derive_rng
from .world import World


SCENARIO_DIR = Path(__file__).parent / 'scenarios'

GRAPH_STREAM = 20
CURRENT_STREAM = 21
OBSTACLE_STREAM = 22
WAYPOINT_CLEARANCE = 50.0


@dataclass
class MapConfig():
    r'''
    ``source`` is ``synthetic:open``, ``synthetic:archipelago`` or the path of a
    ``.pgm`` / ``.npy`` map. ``seed`` fixes the synthetic map across runs.
    '''
    source: str = "synthetic:open"
    size: int = 1000
    cell_size: float = 10.0
    depth_extent: float = 1000.0
    land_fraction: float = 0.2
    rim_fraction: float = 0.08
    seed: Optional[int] = None


@dataclass
class CurrentConfig():
    r'''
    ``vortices`` are placed explicitly, ``random_per_layer`` more are drawn in every layer
    '''
    layers: int = 4
    epsilon: float = 1.0
    radius_floor: float = 10.0
    vortices: list[VortexParams] = field(default_factory=list)
    random_per_layer: int = 0
    strength_range: list = field(default_factory=lambda: [500.0, 1500.0])
    radius_range: list = field(default_factory=lambda: [300.0, 800.0])
    gamma: float = 0.1
    update_rate: float = 1.0
    sigma_center: float = 50.0
    sigma_radius: float = 10.0
    sigma_strength: float = 50.0


@dataclass
class ObstaclesConfig():
    items: list = field(default_factory=list)
    random_count: int = 0
    random_kinds: list = field(default_factory=lambda: ["static", "afloat", "self_motivated"])
    radius_range: list = field(default_factory=lambda: [20.0, 60.0])
    uncertainty_range: list = field(default_factory=lambda: [0.0, 1.0])
    speed_max: float = 0.3
    growth: float = 0.01
    sensor_range: float = 2000.0
    noise_scale: float = 1.0
    clearance: float = 5.0


@dataclass
class GraphConfig():
    nodes: int = 40
    k: int = 5
    duration_range: list = field(default_factory=lambda: [60.0, 600.0])
    priority_range: list = field(default_factory=lambda: [1.0, 10.0])
    waypoints: Optional[list] = None
    roster: Optional[list] = None
    start: int = 0
    dest: Optional[int] = None


@dataclass
class BboSection():
    path: BboConfig = field(default_factory=lambda: BboConfig(n_pop=100, iter_max=100, m_max=0.1))
    mission: BboConfig = field(default_factory=lambda: BboConfig(n_pop=150, iter_max=200, rate_model="constant", mu=0.2))


@dataclass
class MissionConfig():
    r'''
    ``reserve`` is the share of the remaining budget the mission planner keeps aside, none by default
    '''
    t_available: float = 14400.0
    phi1: float = 1.0
    phi2: float = 100.0
    reserve: float = 0.0

    def __post_init__(self):
        if self.t_available <= 0:
            raise HydroMissionException("t_available must be positive", "SCENARIO")
        if not 0.0 <= self.reserve < 1.0:
            raise HydroMissionException("reserve must lie in [0, 1)", "SCENARIO")


@dataclass
class ExecutiveConfig():
    leg_updates: int = 1
    warm_fraction: float = 0.3
    straight_seed: bool = True

    def __post_init__(self):
        if self.leg_updates < 0:
            raise HydroMissionException("leg_updates must be non negative", "SCENARIO")


@dataclass
class TimingConfig():
    mode: str = "virtual"
    eval_seconds: float = 1e-4

    def stopwatch(self) -> Stopwatch:
        return Stopwatch(self.mode, self.eval_seconds)


@dataclass
class ScenarioConfig():
    r'''
    Everything a run needs, every field has a default

    Sections: ``map``, ``current``, ``obstacles``, ``graph``, ``vehicle``, ``spline``,
    ``weights``, ``bbo`` (``path`` and ``mission``), ``mission``, ``executive`` and
    ``timing``. Unknown keys are rejected.
    '''
    name: str = "scenario"
    seed: int = 0
    workers: int = 1
    map: MapConfig = field(default_factory=MapConfig)
    current: CurrentConfig = field(default_factory=CurrentConfig)
    obstacles: ObstaclesConfig = field(default_factory=ObstaclesConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    vehicle: VehicleModel = field(default_factory=VehicleModel)
    spline: SplineConfig = field(default_factory=SplineConfig)
    weights: PathWeights = field(default_factory=PathWeights)
    bbo: BboSection = field(default_factory=BboSection)
    mission: MissionConfig = field(default_factory=MissionConfig)
    executive: ExecutiveConfig = field(default_factory=ExecutiveConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)

    @staticmethod
    def from_dict(raw: dict, source: Optional[str] = None, text: Optional[str] = None) -> ScenarioConfig:
        return _build(ScenarioConfig, raw, "", source, text)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    def dump_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def with_seed(self, seed: int) -> ScenarioConfig:
        return replace(self, seed=seed)

    def profile(self, **kwargs) -> Profile:
        return Profile(self.seed, self.workers, self.timing.stopwatch(), **kwargs)


def _line_of(text: Optional[str], dotted: str) -> Optional[int]:
    r'''
    Line of a dotted key such as ``bbo.mission.n_pop``, each key searched from the line of its section
    '''
    if not text:
        return None
    lines = text.splitlines()
    number = 0
    for key in re.sub(r"\[\d+\]", "", dotted).split('.'):
        needle = f'"{key}"'
        number = next((i for i in range(number, len(lines)) if needle in lines[i]), None)
        if number is None:
            return None
    return number + 1


def _build(cls, raw: Any, path: str, source: Optional[str], text: Optional[str]):
    where = path or "scenario"
    if not isinstance(raw, dict):
        raise ConfigError(f"'{where}' must be an object", source, _line_of(text, path) if path else 1)
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        dotted = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(f"unknown key '{dotted}'", source, _line_of(text, dotted))

    hints = get_type_hints(cls)
    kwargs = {}
    for name, value in raw.items():
        dotted = f"{path}.{name}" if path else name
        hint = hints[name]
        if is_dataclass(hint):
            kwargs[name] = _build(hint, value, dotted, source, text)
        elif get_origin(hint) is list and get_args(hint) and is_dataclass(get_args(hint)[0]):
            if not isinstance(value, list):
                raise ConfigError(f"'{dotted}' must be a list", source, _line_of(text, dotted))
            kwargs[name] = [_build(get_args(hint)[0], item, f"{dotted}[{i}]", source, text) for i, item in enumerate(value)]
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except HydroMissionException as e:
        raise ConfigError(f"'{where}': {e.message}", source, _line_of(text, path) if path else None) from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"'{where}': {e}", source, _line_of(text, path) if path else None) from e


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob('*.json'))


def resolve_scenario_path(reference) -> Path:
    r'''
    A file path, or the name of a bundled scenario (``scenario1``, ``montecarlo``...)
    '''
    path = Path(reference)
    if path.is_file():
        return path
    bundled = SCENARIO_DIR / f"{reference}.json"
    if path.suffix == '' and bundled.is_file():
        return bundled
    raise ConfigError(f"scenario not found (bundled scenarios : {', '.join(bundled_scenarios())})", str(reference))


def load_scenario(reference) -> ScenarioConfig:
    r'''
    Load and validate a scenario file

    Raises
    ------
        ConfigError
            With the file path and the line of the offending key or syntax error
    '''
    path = resolve_scenario_path(reference)
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON, {e.msg} (column {e.colno})", str(path), e.lineno) from e
    return ScenarioConfig.from_dict(raw, str(path), text)


# ----------------------------------------------------------------------------
# Building a scenario
# ----------------------------------------------------------------------------

@dataclass(eq=False)
class Scenario():
    r'''
    A resolved configuration with its terrain, world and task graph built
    '''
    config: ScenarioConfig
    seed: int
    terrain: TerrainGrid
    world: World
    graph: TaskGraph

    @property
    def t_available(self) -> float:
        return self.config.mission.t_available


def load_terrain(config: MapConfig, seed: int) -> TerrainGrid:
    r'''
    Terrain of a map section, synthetic maps are drawn from ``config.seed`` or ``seed``
    '''
    source = config.source
    if source.startswith('synthetic:'):
        kind = source.split(':', 1)[1]
        if kind not in ('open', 'archipelago'):
            raise ConfigError(f"unknown synthetic map '{source}'")
        gray, _ = synthetic_map(kind, config.size, config.seed if config.seed is not None else seed,
                                config.land_fraction, config.rim_fraction)
        # open maps are uniform by construction
        return cluster_map(gray, 3, config.cell_size, config.depth_extent, warning=kind != 'open')

    path = Path(source)
    if not path.is_file():
        raise ConfigError(f"map file not found: {path}", str(path))
    if path.suffix == '.npy':
        gray, cell_size = read_raw_grid(path)
        return cluster_map(gray, 3, cell_size, config.depth_extent)
    return cluster_map(read_pgm(path), 3, config.cell_size, config.depth_extent)


def build_field(config: CurrentConfig, terrain: TerrainGrid, rng: np.random.Generator) -> VortexField:
    if config.layers < 1:
        raise ConfigError("'current.layers' must be at least 1")
    layers = [[] for _ in range(config.layers)]
    for vortex in config.vortices:
        if not 0 <= vortex.layer < config.layers:
            raise ConfigError(f"vortex layer {vortex.layer} outside the {config.layers} current layers")
        layers[vortex.layer].append(vortex)
    for index, layer in enumerate(layers):
        for _ in range(config.random_per_layer):
            strength = rng.uniform(*config.strength_range) * rng.choice([-1.0, 1.0])
            layer.append(VortexParams(
                center=(rng.uniform(0.0, terrain.extent_x), rng.uniform(0.0, terrain.extent_y)),
                strength=float(strength),
                radius=float(rng.uniform(*config.radius_range)),
                gamma=config.gamma,
                layer=index,
                update_rate=config.update_rate,
                sigma_sx=config.sigma_center,
                sigma_sy=config.sigma_center,
                sigma_radius=config.sigma_radius,
                sigma_strength=config.sigma_strength,
            ))
    return VortexField(tuple(tuple(layer) for layer in layers), terrain.depth_extent, config.epsilon, config.radius_floor)


def build_obstacles(config: ObstaclesConfig, terrain: TerrainGrid, waypoints: np.ndarray, rng: np.random.Generator) -> list[Obstacle]:
    r'''
    Listed obstacles plus ``random_count`` random ones placed in water, away from every waypoint
    '''
    factory = ObstacleFactory()
    obstacles = []
    for index, item in enumerate(config.items):
        try:
            obstacles.append(factory.from_dict(item))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"'obstacles.items[{index}]': {e}") from e

    high = np.array([terrain.extent_x, terrain.extent_y, terrain.depth_extent])
    for index in range(config.random_count):
        kind = str(rng.choice(config.random_kinds))
        radius = float(rng.uniform(*config.radius_range))
        for _ in range(10000):
            position = rng.uniform(0.0, high)
            far = np.all(np.linalg.norm(waypoints - position, axis=1) > radius + config.clearance + WAYPOINT_CLEARANCE)
            if far and terrain.is_water(position):
                break
        else:
            raise ConfigError("could not place a random obstacle in water away from the waypoints")
        velocity = (0.0, 0.0, 0.0)
        if kind == "self_motivated":
            heading = rng.uniform(-np.pi, np.pi)
            speed = rng.uniform(0.0, config.speed_max)
            velocity = (speed * np.cos(heading), speed * np.sin(heading), 0.0)
        obstacles.append(factory.create_obstacle(kind, f"obstacle-{index}", position, radius,
                                                 uncertainty=float(rng.uniform(*config.uncertainty_range)),
                                                 velocity=velocity, growth=config.growth))
    return obstacles


def build_scenario(config: ScenarioConfig, seed: Optional[int] = None, profile: Profile = None, **kwargs) -> Scenario:
    r'''
    Build terrain, world and task graph of a configuration

    Parameters
    ----------
        config : ScenarioConfig
        seed : int, optional
            Run seed, ``config.seed`` when not given. The graph topology, the random
            vortices and the random obstacles are drawn from it.
        profile : Profile, optional
    '''
    seed = config.seed if seed is None else seed
    log = ILog(header="SCENARIO", profile=profile, **kwargs)
    terrain = load_terrain(config.map, seed)
    log.debug(f"terrain {terrain.width}x{terrain.height} px, fractions {[round(v, 3) for v in terrain.fractions().values()]}")

    graph_config = config.graph
    try:
        graph = build_graph(terrain, derive_rng(seed, GRAPH_STREAM), config.vehicle.speed, graph_config.nodes, graph_config.k,
                            graph_config.waypoints, graph_config.roster, graph_config.start, graph_config.dest,
                            tuple(graph_config.duration_range), tuple(graph_config.priority_range), profile, **kwargs)
    except ConfigError:
        raise
    except HydroMissionException as e:
        raise ConfigError(f"'graph': {e.message}") from e

    field_ = build_field(config.current, terrain, derive_rng(seed, CURRENT_STREAM))
    obstacles = build_obstacles(config.obstacles, terrain, graph.waypoints, derive_rng(seed, OBSTACLE_STREAM))
    world = World(terrain, field_, obstacles, seed, profile, **kwargs)
    log.debug(f"{graph}, {len(obstacles)} obstacles, {sum(len(layer) for layer in field_.layers)} vortices")
    return Scenario(config, seed, terrain, world, graph)
