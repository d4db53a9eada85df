from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Optional, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components, csgraph_from_dense, dijkstra
from scipy.spatial import cKDTree

from .interfaces import ILog
from .utils import HydroMissionException, TerrainClass

if TYPE_CHECKING:
    from .env import TerrainGrid
    from .profile import Profile


DEFAULT_NEIGHBOURS = 5
DURATION_RANGE = (60.0, 600.0)
PRIORITY_RANGE = (1.0, 10.0)
MAX_DRAWS_PER_WAYPOINT = 10000
MAX_TOPOLOGY_DRAWS = 50


def edge_key(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass
class TaskEdge():
    r'''
    Undirected edge carrying a task

    Properties
    ----------
        i, j : int
            End nodes, ``i < j``
        distance : float
            Euclidean distance between the end waypoints (m)
        duration : float
            Task duration delta (s)
        priority : float
            Task priority rho, strictly positive
        traversed : bool
            Set once the vehicle flew the edge
    '''
    i: int
    j: int
    distance: float
    duration: float
    priority: float
    traversed: bool = False

    def __post_init__(self):
        self.i, self.j = edge_key(int(self.i), int(self.j))
        if self.priority <= 0:
            raise HydroMissionException(f"edge {self.key} priority must be positive", "TASK GRAPH")
        if self.duration < 0:
            raise HydroMissionException(f"edge {self.key} duration must be non negative", "TASK GRAPH")

    @property
    def key(self) -> tuple[int, int]:
        return (self.i, self.j)

    def to_dict(self) -> dict:
        return {'i': self.i, 'j': self.j, 'distance': self.distance, 'duration': self.duration,
                'priority': self.priority, 'traversed': self.traversed}


class TaskGraph(ILog):
    r'''
    Waypoint network of the mission

    - Log header : TASK GRAPH

    Parameters
    ----------
        waypoints : array like
            (n, 3) waypoint positions (m)
        edges : iterable of TaskEdge
        speed : float
            Vehicle water speed used for the expected edge times (m/s)
        start, dest : int
            Start and destination node indices
        profile : Profile, optional
    '''
    def __init__(self, waypoints, edges: Iterable[TaskEdge], speed: float, start: int = 0, dest: Optional[int] = None,
                 profile: Profile = None, **kwargs) -> None:
        ILog.__init__(self, header="TASK GRAPH", profile=profile, **kwargs)
        self._profile = profile
        self._waypoints = np.asarray(waypoints, dtype=float).reshape(-1, 3)
        self._speed = float(speed)
        self._start = int(start)
        self._dest = int(dest) if dest is not None else self.node_count - 1
        self._edges: dict[tuple[int, int], TaskEdge] = {}

        if self._speed <= 0:
            self.error("speed must be positive")
        for node in (self._start, self._dest):
            if not 0 <= node < self.node_count:
                self.error(f"node {node} is not in the graph")
        for edge in edges:
            if edge.i == edge.j or edge.j >= self.node_count:
                self.error(f"invalid edge {edge.key}")
            self._edges[edge.key] = edge
        self._waypoints.setflags(write=False)

    @property
    def waypoints(self) -> np.ndarray:
        return self._waypoints

    @property
    def node_count(self) -> int:
        return self._waypoints.shape[0]

    @property
    def speed(self) -> float:
        return self._speed

    @property
    def start(self) -> int:
        return self._start

    @property
    def dest(self) -> int:
        return self._dest

    @property
    def edges(self) -> list[TaskEdge]:
        return list(self._edges.values())

    def has_edge(self, i: int, j: int, include_traversed: bool = False) -> bool:
        edge = self._edges.get(edge_key(i, j))
        return edge is not None and (include_traversed or not edge.traversed)

    def edge(self, i: int, j: int) -> TaskEdge:
        try:
            return self._edges[edge_key(i, j)]
        except KeyError:
            self.error(f"no edge between {i} and {j}")

    def edge_time(self, i: int, j: int) -> float:
        r'''
        Returns
        -------
            Expected time ``t_ij = d_ij / |v| + delta_ij`` (s)
        '''
        edge = self.edge(i, j)
        return edge.distance / self._speed + edge.duration

    def neighbors(self, node: int, include_traversed: bool = False) -> list[int]:
        found = []
        for edge in self._edges.values():
            if edge.traversed and not include_traversed:
                continue
            if edge.i == node:
                found.append(edge.j)
            elif edge.j == node:
                found.append(edge.i)
        return sorted(found)

    def adjacency(self, include_traversed: bool = False) -> np.ndarray:
        r'''
        Returns
        -------
            Symmetric boolean adjacency matrix
        '''
        matrix = np.zeros((self.node_count, self.node_count), dtype=bool)
        for edge in self._edges.values():
            if edge.traversed and not include_traversed:
                continue
            matrix[edge.i, edge.j] = matrix[edge.j, edge.i] = True
        return matrix

    def time_matrix(self, excluded: Iterable[int] = ()) -> np.ndarray:
        r'''
        Dense matrix of expected edge times, ``inf`` where there is no usable edge

        Edges touching an ``excluded`` node and traversed edges are left out.
        '''
        excluded = set(excluded)
        matrix = np.full((self.node_count, self.node_count), np.inf)
        for edge in self._edges.values():
            if edge.traversed or edge.i in excluded or edge.j in excluded:
                continue
            matrix[edge.i, edge.j] = matrix[edge.j, edge.i] = edge.distance / self._speed + edge.duration
        return matrix

    def shortest_times(self, target: int, excluded: Iterable[int] = ()) -> np.ndarray:
        r'''
        Shortest expected time from every node to ``target`` over untraversed edges
        '''
        graph = csgraph_from_dense(self.time_matrix(excluded), null_value=np.inf)
        return dijkstra(graph, directed=False, indices=target)

    def shortest_path(self, source: int, target: int, excluded: Iterable[int] = ()) -> Optional[list[int]]:
        r'''
        Node list of the fastest route, None when ``target`` cannot be reached
        '''
        graph = csgraph_from_dense(self.time_matrix(excluded), null_value=np.inf)
        times, predecessors = dijkstra(graph, directed=False, indices=source, return_predecessors=True)
        if not np.isfinite(times[target]):
            return None
        path = [target]
        while path[-1] != source:
            path.append(int(predecessors[path[-1]]))
        return path[::-1]

    def is_connected(self, source: Optional[int] = None, target: Optional[int] = None) -> bool:
        source = self._start if source is None else source
        target = self._dest if target is None else target
        graph = csgraph_from_dense(self.time_matrix(), null_value=np.inf)
        _, labels = connected_components(graph, directed=False)
        return labels[source] == labels[target]

    def mark_traversed(self, i: int, j: int) -> None:
        self.edge(i, j).traversed = True

    def working_copy(self, start: Optional[int] = None) -> TaskGraph:
        r'''
        Independent copy, optionally moving the start node
        '''
        edges = [TaskEdge(**e.to_dict()) for e in self._edges.values()]
        return TaskGraph(self._waypoints.copy(), edges, self._speed, self._start if start is None else start, self._dest,
                         self._profile, **self.log_kwargs())

    def remaining(self, start: Optional[int] = None) -> TaskGraph:
        r'''
        Copy without the traversed edges
        '''
        edges = [TaskEdge(**e.to_dict()) for e in self._edges.values() if not e.traversed]
        return TaskGraph(self._waypoints.copy(), edges, self._speed, self._start if start is None else start, self._dest,
                         self._profile, **self.log_kwargs())

    def to_dict(self) -> dict:
        return {'speed': self._speed, 'start': self._start, 'dest': self._dest,
                'waypoints': self._waypoints.tolist(), 'edges': [e.to_dict() for e in self._edges.values()]}

    @staticmethod
    def from_dict(raw: dict, profile: Profile = None, **kwargs) -> TaskGraph:
        return TaskGraph(raw['waypoints'], [TaskEdge(**e) for e in raw['edges']], raw['speed'], raw['start'], raw['dest'], profile, **kwargs)

    def dump_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @staticmethod
    def load_json(path, profile: Profile = None, **kwargs) -> TaskGraph:
        return TaskGraph.from_dict(json.loads(Path(path).read_text()), profile, **kwargs)

    def __str__(self) -> str:
        return f'TaskGraph : {self.node_count} nodes, {len(self._edges)} edges, {self._start} -> {self._dest}'


def random_waypoints(terrain: TerrainGrid, count: int, rng: np.random.Generator) -> np.ndarray:
    r'''
    Waypoints drawn uniformly over the terrain volume, redrawn until they land in water
    '''
    high = np.array([terrain.extent_x, terrain.extent_y, terrain.depth_extent])
    waypoints = np.empty((count, 3))
    for index in range(count):
        for _ in range(MAX_DRAWS_PER_WAYPOINT):
            point = rng.uniform(0.0, high)
            if terrain.class_at(point) == TerrainClass.WATER:
                waypoints[index] = point
                break
        else:
            raise HydroMissionException("could not draw a waypoint in water, is the map almost all land ?", "TASK GRAPH")
    return waypoints


def knn_edges(waypoints: np.ndarray, k: int = DEFAULT_NEIGHBOURS) -> list[tuple[int, int]]:
    r'''
    Undirected k nearest neighbour connectivity, sorted
    '''
    count = waypoints.shape[0]
    if count < 2:
        return []
    _, neighbours = cKDTree(waypoints).query(waypoints, k=min(k + 1, count))
    keys = set()
    for i, row in enumerate(np.atleast_2d(neighbours)):
        for j in row:
            if int(j) != i and int(j) < count:
                keys.add(edge_key(i, int(j)))
    return sorted(keys)


def build_graph(terrain: TerrainGrid, rng: np.random.Generator, speed: float = 2.0, node_count: int = 40, k: int = DEFAULT_NEIGHBOURS,
                waypoints: Optional[Sequence] = None, roster: Optional[Sequence[dict]] = None, start: int = 0, dest: Optional[int] = None,
                duration_range: tuple[float, float] = DURATION_RANGE, priority_range: tuple[float, float] = PRIORITY_RANGE,
                profile: Profile = None, **kwargs) -> TaskGraph:
    r'''
    Build the mission task graph

    Parameters
    ----------
        terrain : TerrainGrid
            Waypoints must lie in its water cells
        rng : np.random.Generator
        speed : float
            Vehicle speed (m/s)
        node_count : int
            Waypoints to draw when ``waypoints`` is not given
        k : int
            Neighbours linked to every waypoint
        waypoints : sequence, optional
            Explicit (n, 3) waypoints
        roster : sequence of dict, optional
            Explicit edges ``{"i", "j", "duration", "priority"}``, replacing the k nearest rule
        start, dest : int
            Start and destination nodes (default destination : the last node)
        duration_range, priority_range : (float, float)
            Uniform ranges of the task durations and priorities left unset by the roster

    Returns
    -------
        A :class:`TaskGraph` where start and destination are connected

    Notes
    -----
        Drawn waypoints are redrawn as a whole when the k nearest topology leaves
        start and destination disconnected. Explicit waypoints are never redrawn.
    '''
    log = ILog(header="TASK GRAPH", profile=profile, **kwargs)
    explicit = waypoints is not None
    if explicit:
        waypoints = np.asarray(waypoints, dtype=float).reshape(-1, 3)
        for index, point in enumerate(waypoints):
            if terrain.class_at(point) != TerrainClass.WATER:
                log.error(f"waypoint {index} {point.tolist()} is not in water")
    elif node_count < 2:
        log.error("a task graph needs at least two nodes")

    for attempt in range(1 if explicit else MAX_TOPOLOGY_DRAWS):
        points = waypoints if explicit else random_waypoints(terrain, node_count, rng)
        last = points.shape[0] - 1 if dest is None else dest
        if roster is not None:
            entries = [(edge_key(int(r['i']), int(r['j'])), r) for r in roster]
        else:
            entries = [(key, {}) for key in knn_edges(points, k)]
        edges = []
        for (i, j), entry in entries:
            distance = float(np.linalg.norm(points[i] - points[j]))
            duration = float(entry['duration']) if 'duration' in entry else float(rng.uniform(*duration_range))
            priority = float(entry['priority']) if 'priority' in entry else float(rng.uniform(*priority_range))
            edges.append(TaskEdge(i, j, distance, duration, priority))
        graph = TaskGraph(points, edges, speed, start, last, profile, **kwargs)
        if graph.is_connected():
            log.debug(f"{graph} built after {attempt + 1} draw(s)")
            return graph
        log.debug(f"draw {attempt + 1} left start and destination disconnected")
    log.error("start and destination are disconnected")
