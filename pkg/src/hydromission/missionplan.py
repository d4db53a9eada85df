from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Sequence

import numpy as np

from .bbo import BboConfig, BiogeographyOptimizer, GenerationRecord
from .graph import TaskGraph, edge_key
from .interfaces import Encoding, IPlanner
from .profile import Profile, Stopwatch
from .utils import HydroMissionException, InfeasibleError


PRIORITY_LOW = -200.0
PRIORITY_HIGH = 100.0
VISITED_PRIORITY = -1e9
OVER_BUDGET_PENALTY = 1e6
UNDECODABLE_COST = 1e12


class SequenceCriterion(Enum):
    r'''
    Validity criteria of a task sequence
    '''
    ENDPOINTS = "starts_at_start_and_ends_at_destination"
    EDGES_EXIST = "consecutive_nodes_are_linked"
    NO_REPEATED_NODE = "no_repeated_node"
    NO_REPEATED_EDGE = "no_repeated_edge"
    WITHIN_BUDGET = "total_time_within_budget"

    def __str__(self) -> str:
        return self.value


@dataclass
class TaskSequence():
    r'''
    A start to destination walk on the task graph

    Properties
    ----------
        nodes : tuple[int, ...]
            Visited nodes, start first
        priorities : np.ndarray, optional
            Priority vector it was decoded from
        expected_time : float
            Sum of the expected edge times (s)
        total_priority : float
            Sum of the edge priorities
        feasible : bool
            False when decoding could not reach the destination
    '''
    nodes: tuple
    priorities: Optional[np.ndarray] = None
    expected_time: float = 0.0
    total_priority: float = 0.0
    feasible: bool = True

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [edge_key(a, b) for a, b in zip(self.nodes[:-1], self.nodes[1:])]

    def indicator(self, graph: TaskGraph) -> np.ndarray:
        r'''
        Selected edge indicator, aligned on ``graph.edges``
        '''
        selected = set(self.edges)
        return np.array([1 if e.key in selected else 0 for e in graph.edges], dtype=int)

    def to_dict(self) -> dict:
        return {'nodes': list(self.nodes), 'expected_time': self.expected_time, 'total_priority': self.total_priority,
                'feasible': self.feasible}


@dataclass
class MissionCostInputs():
    r'''
    Coefficients of the mission cost ``phi1 |sum(Cost + delta) - T_available| + phi2 sum(1 / rho)``
    '''
    t_available: float
    phi1: float = 1.0
    phi2: float = 100.0

    def __post_init__(self):
        if self.phi1 < 0 or self.phi2 < 0:
            raise HydroMissionException("phi1 and phi2 must be non negative", "MISSION PLANNER")


@dataclass
class MissionPlan():
    sequence: TaskSequence
    cost: float
    history: list[GenerationRecord] = field(default_factory=list)
    evaluations: int = 0
    compute_time: float = 0.0


def _sequence(graph: TaskGraph, nodes: Sequence[int], priorities=None, feasible: bool = True) -> TaskSequence:
    time, priority = 0.0, 0.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        if graph.has_edge(a, b):
            time += graph.edge_time(a, b)
            priority += graph.edge(a, b).priority
    return TaskSequence(tuple(int(n) for n in nodes), priorities, time, priority, feasible)


def decode_sequence(graph: TaskGraph, priorities, start: int, dest: int, t_available: float = np.inf,
                    shortest: Optional[np.ndarray] = None) -> TaskSequence:
    r'''
    Decode a priority vector into a walk

    From ``start``, repeatedly move to the unvisited neighbour of highest priority
    whose edge time plus its shortest time to ``dest`` still fits the remaining
    budget. Ties go to the lowest node index. A dead end falls back to the fastest
    route to ``dest`` through unvisited nodes.

    Parameters
    ----------
        graph : TaskGraph
            Traversed edges are ignored
        priorities : array like
            One value per node
        start, dest : int
        t_available : float
            Time budget (s)
        shortest : np.ndarray, optional
            Precomputed ``graph.shortest_times(dest)``

    Returns
    -------
        A :class:`TaskSequence`, marked not feasible when ``dest`` is unreachable
    '''
    priorities = np.asarray(priorities, dtype=float)
    if priorities.shape != (graph.node_count,):
        raise HydroMissionException(f"expected {graph.node_count} priorities, got {priorities.shape}", "MISSION PLANNER")
    if shortest is None:
        shortest = graph.shortest_times(dest)

    working = priorities.copy()
    working[start] = VISITED_PRIORITY
    nodes = [start]
    visited = {start}
    elapsed = 0.0
    current = start
    while current != dest:
        best, best_priority = None, -np.inf
        for candidate in graph.neighbors(current):
            if candidate in visited:
                continue
            step = graph.edge_time(current, candidate)
            if elapsed + step + shortest[candidate] >= t_available:
                continue
            if working[candidate] > best_priority:
                best, best_priority = candidate, working[candidate]
        if best is None:
            break
        elapsed += graph.edge_time(current, best)
        working[best] = VISITED_PRIORITY
        visited.add(best)
        nodes.append(best)
        current = best

    if current != dest:
        route = graph.shortest_path(current, dest, excluded=visited - {current})
        if route is None:
            return _sequence(graph, nodes, priorities, feasible=False)
        nodes.extend(route[1:])
    return _sequence(graph, nodes, priorities)


def validate_sequence(graph: TaskGraph, sequence: TaskSequence, t_available: float, start: Optional[int] = None,
                      dest: Optional[int] = None) -> list[SequenceCriterion]:
    r'''
    List every validity criterion the sequence violates, empty when valid

    Never raises.
    '''
    start = graph.start if start is None else start
    dest = graph.dest if dest is None else dest
    nodes = list(sequence.nodes)
    violated = []
    if not nodes or nodes[0] != start or nodes[-1] != dest:
        violated.append(SequenceCriterion.ENDPOINTS)
    pairs = list(zip(nodes[:-1], nodes[1:]))
    if any(not graph.has_edge(a, b) for a, b in pairs):
        violated.append(SequenceCriterion.EDGES_EXIST)
    if len(set(nodes)) != len(nodes):
        violated.append(SequenceCriterion.NO_REPEATED_NODE)
    keys = [edge_key(a, b) for a, b in pairs]
    if len(set(keys)) != len(keys):
        violated.append(SequenceCriterion.NO_REPEATED_EDGE)
    total = sum(graph.edge_time(a, b) for a, b in pairs if graph.has_edge(a, b))
    if not total < t_available:
        violated.append(SequenceCriterion.WITHIN_BUDGET)
    return violated


def mission_cost(sequence: TaskSequence, graph: TaskGraph, inputs: MissionCostInputs,
                 leg_costs: Optional[dict[tuple[int, int], float]] = None) -> float:
    r'''
    Mission cost of a sequence

    ``phi1 |sum(Cost_ij + delta_ij) - T_available| + phi2 sum(1 / rho_ij)`` over the
    selected edges. ``Cost_ij`` comes from ``leg_costs`` (keyed by sorted node pair)
    or, without it, from the expected flight time ``d_ij / |v|``. A total above the
    budget adds ``1e6`` plus the overshoot.

    Raises
    ------
        HydroMissionException
            When ``leg_costs`` is given without an entry for a selected edge
    '''
    total, inverse_priority = 0.0, 0.0
    for key in sequence.edges:
        edge = graph.edge(*key)
        if leg_costs is None:
            leg = edge.distance / graph.speed
        elif key in leg_costs:
            leg = leg_costs[key]
        else:
            raise HydroMissionException(f"no leg cost for edge {key}", "MISSION PLANNER")
        total += leg + edge.duration
        inverse_priority += 1.0 / edge.priority
    cost = inputs.phi1 * abs(total - inputs.t_available) + inputs.phi2 * inverse_priority
    if total > inputs.t_available:
        cost += OVER_BUDGET_PENALTY + (total - inputs.t_available)
    return cost


class PriorityEncoding(Encoding):
    r'''
    One priority in [-200, 100] per node, decoded into a task sequence
    '''
    def __init__(self, graph: TaskGraph, start: int, dest: int, inputs: MissionCostInputs, mutation_scale: float = 0.1):
        self.graph = graph
        self.start = start
        self.dest = dest
        self.inputs = inputs
        self.sigma = mutation_scale * (PRIORITY_HIGH - PRIORITY_LOW)
        self.shortest = graph.shortest_times(dest)

    def decode(self, solution: np.ndarray) -> TaskSequence:
        return decode_sequence(self.graph, solution, self.start, self.dest, self.inputs.t_available, self.shortest)

    def random_feasible(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(PRIORITY_LOW, PRIORITY_HIGH, self.graph.node_count)

    def evaluate(self, solution: np.ndarray, context: Any = None) -> tuple[float, float]:
        sequence = self.decode(solution)
        if not sequence.feasible:
            return UNDECODABLE_COST, UNDECODABLE_COST
        overshoot = max(0.0, sequence.expected_time - self.inputs.t_available)
        return mission_cost(sequence, self.graph, self.inputs), overshoot

    def cost(self, solution: np.ndarray, context: Any = None) -> float:
        return self.evaluate(solution, context)[0]

    def violation(self, solution: np.ndarray, context: Any = None) -> float:
        return self.evaluate(solution, context)[1]

    def exchange_siv(self, receiver: np.ndarray, donor: np.ndarray, index: int, rng: np.random.Generator) -> np.ndarray:
        child = np.array(receiver, dtype=float)
        child[index] = donor[index]
        return child

    def mutate(self, solution: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
        mask = rng.random(solution.shape) < rate
        return np.where(mask, solution + rng.normal(0.0, self.sigma, solution.shape), solution)

    def repair(self, solution: np.ndarray) -> np.ndarray:
        return np.clip(solution, PRIORITY_LOW, PRIORITY_HIGH)

    def infeasibility(self, solution: np.ndarray) -> Optional[str]:
        sequence = self.decode(solution)
        if not sequence.feasible:
            return str(SequenceCriterion.ENDPOINTS)
        violated = validate_sequence(self.graph, sequence, self.inputs.t_available, self.start, self.dest)
        return str(violated[0]) if violated else None


class MissionPlanner(IPlanner):
    r'''
    BBO global mission planner

    - Log header : MISSION PLANNER

    Parameters
    ----------
        config : BboConfig
            Optimizer settings (the mission planner uses the constant rate model)
        phi1, phi2 : float
            Mission cost coefficients
        profile : Profile, optional
    '''
    def __init__(self, config: BboConfig = None, phi1: float = 1.0, phi2: float = 100.0, profile: Profile = None, **kwargs) -> None:
        IPlanner.__init__(self, header="MISSION PLANNER", profile=profile, **kwargs)
        self.config = config if config is not None else BboConfig(n_pop=150, iter_max=200, rate_model="constant")
        self.phi1 = phi1
        self.phi2 = phi2
        self.stopwatch = profile.get_stopwatch() if profile is not None else Stopwatch()
        self.compute_time = 0.0

    def plan_mission(self, graph: TaskGraph, start: int, dest: int, t_available: float, rng: np.random.Generator) -> MissionPlan:
        r'''
        Select and order the tasks of a start to destination walk fitting ``t_available``

        Raises
        ------
            InfeasibleError
                When even the fastest route misses the budget, ``time_gap`` holding the overshoot
        '''
        started = self.stopwatch.start()
        shortest = graph.shortest_times(dest)[start]
        if not shortest < t_available:
            gap = float(shortest - t_available)
            raise InfeasibleError(f"fastest route from {start} to {dest} takes {shortest:.1f} s for a budget of {t_available:.1f} s",
                                  time_gap=gap, criteria=[str(SequenceCriterion.WITHIN_BUDGET)], header=self.header)

        inputs = MissionCostInputs(t_available, self.phi1, self.phi2)
        encoding = PriorityEncoding(graph, start, dest, inputs, self.config.mutation_scale)
        result = BiogeographyOptimizer(encoding, self.config, self.profile, **self.log_kwargs()).run(rng)
        sequence = encoding.decode(result.best.siv)
        violated = validate_sequence(graph, sequence, t_available, start, dest)
        elapsed = self.stopwatch.elapsed(started, result.evaluations)
        self.evaluations += result.evaluations
        self.compute_time += elapsed
        if violated:
            raise InfeasibleError(f"no feasible sequence after {self.config.iter_max} generations",
                                  time_gap=float(sequence.expected_time - t_available),
                                  criteria=[str(c) for c in violated], header=self.header)

        self.debug(f"sequence {list(sequence.nodes)} : {sequence.expected_time:.1f} s, priority {sequence.total_priority:.1f}, cost {result.best.cost:.2f}")
        return MissionPlan(sequence, result.best.cost, result.history, result.evaluations, elapsed)

    def replan_mission(self, graph: TaskGraph, current: int, t_residual: float, rng: np.random.Generator) -> MissionPlan:
        r'''
        Plan again from ``current`` with the residual budget, traversed edges removed

        Returns an empty remaining walk when ``current`` already is the destination.
        '''
        if current == graph.dest:
            return MissionPlan(TaskSequence((current,)), 0.0)
        if t_residual <= 0:
            raise InfeasibleError("no residual time left", time_gap=-t_residual, header=self.header)
        working = graph.remaining(start=current)
        return self.plan_mission(working, current, working.dest, t_residual, rng)

    def perform(self, graph: TaskGraph, t_available: float, rng: np.random.Generator) -> MissionPlan:
        return self.plan_mission(graph, graph.start, graph.dest, t_available, rng)


def plan_mission(graph: TaskGraph, start: int, dest: int, t_available: float, config: BboConfig, rng: np.random.Generator,
                 profile: Profile = None, phi1: float = 1.0, phi2: float = 100.0) -> MissionPlan:
    return MissionPlanner(config, phi1, phi2, profile).plan_mission(graph, start, dest, t_available, rng)


def replan_mission(graph: TaskGraph, current: int, t_residual: float, config: BboConfig, rng: np.random.Generator,
                   profile: Profile = None, phi1: float = 1.0, phi2: float = 100.0) -> MissionPlan:
    return MissionPlanner(config, phi1, phi2, profile).replan_mission(graph, current, t_residual, rng)


def enumerate_sequences(graph: TaskGraph, start: int, dest: int, t_available: float) -> list[TaskSequence]:
    r'''
    Every valid sequence, by depth first search. Only meant for small graphs.
    '''
    found = []

    def walk(nodes: list[int], elapsed: float):
        current = nodes[-1]
        if current == dest:
            found.append(_sequence(graph, nodes))
            return
        for neighbour in graph.neighbors(current):
            if neighbour in nodes:
                continue
            step = graph.edge_time(current, neighbour)
            if elapsed + step < t_available:
                walk(nodes + [neighbour], elapsed + step)

    walk([start], 0.0)
    return found


def oracle_minimum(graph: TaskGraph, start: int, dest: int, inputs: MissionCostInputs) -> tuple[Optional[TaskSequence], float]:
    r'''
    Lowest mission cost over all valid sequences, ``(None, inf)`` when there is none
    '''
    best, best_cost = None, np.inf
    for sequence in enumerate_sequences(graph, start, dest, inputs.t_available):
        cost = mission_cost(sequence, graph, inputs)
        if cost < best_cost:
            best, best_cost = sequence, cost
    return best, best_cost
