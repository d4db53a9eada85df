from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .config import Scenario, ScenarioConfig
from .graph import TaskGraph, edge_key
from .interfaces import ILog
from .missionplan import MissionCostInputs, MissionPlanner, TaskSequence, mission_cost
from .pathplan import PathCandidate, PathPlanner, PathProblem, advance_along, collision_samples
from .profile import Profile, Stopwatch
from .utils import InfeasibleError, MissionOutcome, ReplanDecision, derive_rng


MISSION_STREAM = 3
PATH_STREAM = 4
# relative slack on the overrun test
TRIGGER_RTOL = 1e-9

LegTimeHook = Callable[[tuple, float, float], float]


@dataclass
class LegRecord():
    r'''
    One flown edge

    Properties
    ----------
        edge : (int, int)
            Nodes in flight order
        expected : float
            Expected time ``t_ij`` (s)
        nominal : float
            Water referenced flight time of the executed path pieces (s)
        ground : float
            Flight time with the current (s)
        duration : float
            Task duration (s)
        realized : float
            ``ground + duration`` (s)
        decision : ReplanDecision
        path_calls : int
            Path planner invocations on this leg
        collisions : int
            Executed samples in coast cells or obstacles, against the true world at planning time
        path_cost : float
            Planner cost of the executed path pieces, the leg's term of the mission cost
    '''
    edge: tuple
    expected: float
    nominal: float
    ground: float
    duration: float
    realized: float
    decision: ReplanDecision = ReplanDecision.CONTINUE
    path_calls: int = 0
    collisions: int = 0
    path_cost: float = 0.0

    @property
    def replan(self) -> bool:
        return self.decision == ReplanDecision.REPLAN_MISSION

    def to_dict(self) -> dict:
        return {'edge': list(self.edge), 'expected': self.expected, 'nominal': self.nominal, 'ground': self.ground,
                'duration': self.duration, 'realized': self.realized, 'decision': str(self.decision),
                'replan': int(self.replan), 'path_calls': self.path_calls, 'collisions': self.collisions,
                'path_cost': self.path_cost}


@dataclass
class MissionLedger():
    r'''
    Running time account of a mission

    ``t_residual = t_available - t_mission`` and ``cost_total = cost_mission + sum(compute_samples)``
    '''
    t_available: float
    t_mission: float = 0.0
    cost_mission: float = 0.0
    compute_samples: list[float] = field(default_factory=list)
    replan_count: int = 0
    legs: list[LegRecord] = field(default_factory=list)

    @property
    def t_residual(self) -> float:
        return self.t_available - self.t_mission

    @property
    def compute_total(self) -> float:
        return float(sum(self.compute_samples))

    @property
    def cost_total(self) -> float:
        return self.cost_mission + self.compute_total

    def accrue(self, leg: LegRecord) -> None:
        self.legs.append(leg)
        self.t_mission += leg.realized

    def to_dict(self) -> dict:
        return {'t_available': self.t_available, 't_mission': self.t_mission, 't_residual': self.t_residual,
                'cost_mission': self.cost_mission, 'cost_total': self.cost_total, 'compute_samples': list(self.compute_samples),
                'replan_count': self.replan_count}


@dataclass
class MissionTrace():
    r'''
    Ordered event log of a mission plus its final ledger and outcome
    '''
    seed: int
    ledger: MissionLedger
    events: list[dict] = field(default_factory=list)
    outcome: Optional[MissionOutcome] = None
    path_calls: int = 0
    cpu_path: float = 0.0
    cpu_mission: float = 0.0
    world_log: list[dict] = field(default_factory=list)
    final_node: Optional[int] = None

    def add_event(self, kind: str, time: float, **payload) -> dict:
        r'''
        Append an event, events are numbered and their times never decrease
        '''
        if self.events and time < self.events[-1]['time']:
            raise ValueError(f"event '{kind}' at {time} s precedes the previous event")
        event = {'seq': len(self.events), 'time': float(time), 'kind': kind, **payload}
        self.events.append(event)
        return event

    @property
    def legs(self) -> list[LegRecord]:
        return self.ledger.legs

    def summary(self, run: int = 0) -> dict:
        r'''
        One row of the summary table
        '''
        ledger = self.ledger
        return {
            'run': run,
            'seed': self.seed,
            'outcome': str(self.outcome),
            'T_Available': ledger.t_available,
            'T_Mission': ledger.t_mission,
            'T_Residual': ledger.t_residual,
            'replans': ledger.replan_count,
            'path_calls': self.path_calls,
            'legs': len(ledger.legs),
            'cost_mission': ledger.cost_mission,
            'compute_total': ledger.compute_total,
            'cost_total': ledger.cost_total,
            'cpu_path': self.cpu_path,
            'cpu_mission': self.cpu_mission,
        }

    def write_jsonl(self, path) -> None:
        with open(Path(path), 'w') as file:
            for event in self.events:
                file.write(json.dumps(event) + '\n')


def check_replan_trigger(leg: LegRecord, ledger: MissionLedger) -> ReplanDecision:
    r'''
    Mission replanning is needed iff the leg took longer than expected

    A leg within ``TRIGGER_RTOL`` of its expectation is on time.
    '''
    overrun = leg.realized > leg.expected * (1.0 + TRIGGER_RTOL)
    return ReplanDecision.REPLAN_MISSION if overrun else ReplanDecision.CONTINUE


class Executive(ILog):
    r'''
    The hierarchical control loop

    The mission planner orders the tasks, then every leg of the sequence is flown:
    the world advances one step, the path planner plans against the sensed
    world, and the leg is split into ``leg_updates + 1`` stretches, the world advancing
    and the path being replanned with warm start after each but the last one. After
    every leg the realized time is checked against the expectation and the mission
    is replanned from the current node when it overran.

    - Log header : EXECUTIVE

    Parameters
    ----------
        profile : Profile, optional
        leg_time_hook : Callable[[edge, ground, expected], float], optional
            Rewrites the realized flight time of every leg, for scripted runs
    '''
    def __init__(self, profile: Profile = None, leg_time_hook: Optional[LegTimeHook] = None, **kwargs) -> None:
        ILog.__init__(self, header="EXECUTIVE", profile=profile, **kwargs)
        self.profile = profile
        self.leg_time_hook = leg_time_hook
        self.stopwatch = profile.get_stopwatch() if profile is not None else Stopwatch()

    def __budget__(self, config: ScenarioConfig, residual: float) -> float:
        return residual * (1.0 - config.mission.reserve)

    def __fly_leg__(self, scenario: Scenario, planner: PathPlanner, trace: MissionTrace, a: int, b: int,
                    position: np.ndarray, rng: np.random.Generator) -> tuple[float, float, float, int, int]:
        config = scenario.config
        world = scenario.world
        goal = scenario.graph.waypoints[b]
        if np.array_equal(position, goal):
            return 0.0, 0.0, 0.0, 0, 0
        problem = PathProblem(position, goal, world.observe(position, config.obstacles.sensor_range, config.obstacles.noise_scale),
                              config.vehicle, config.spline, config.weights, config.obstacles.clearance)
        truth = world.snapshot()
        candidate = planner.plan_path(problem, rng)
        calls = 1
        trace.add_event('path_plan', trace.ledger.t_mission, edge=[a, b], candidate=candidate.to_dict())

        nominal, ground, cost, collisions = 0.0, 0.0, 0.0, 0
        stretches = config.executive.leg_updates + 1
        for stretch in range(stretches):
            fraction = 1.0 / (stretches - stretch)
            position_next, index = advance_along(candidate, fraction)
            ground += fraction * candidate.ground_time
            nominal += fraction * candidate.nominal_time
            cost += fraction * candidate.cost
            collisions += collision_samples(candidate, truth, index)
            trace.add_event('stretch', trace.ledger.t_mission + ground, edge=[a, b],
                            positions=np.vstack([candidate.positions[:index + 1], position_next]).tolist())
            if stretch == stretches - 1 or np.array_equal(position_next, goal):
                break
            world.advance(fraction * candidate.ground_time)
            observed = world.observe(position_next, config.obstacles.sensor_range, config.obstacles.noise_scale)
            truth = world.snapshot()
            candidate = planner.replan_path(candidate, position_next, observed, problem, rng)
            calls += 1
            trace.add_event('path_replan', trace.ledger.t_mission + ground, edge=[a, b], candidate=candidate.to_dict())
        return nominal, ground, cost, calls, collisions

    def run_mission(self, scenario: Scenario, rng: Optional[np.random.Generator] = None) -> MissionTrace:
        r'''
        Fly a scenario from its start node to its destination

        Parameters
        ----------
            scenario : Scenario
                Built scenario, its world is advanced in place
            rng : np.random.Generator, optional
                Planner randomness, derived from the scenario seed by default

        Returns
        -------
            The :class:`MissionTrace`, its outcome is ``success``, ``failure`` or ``infeasible``
        '''
        config = scenario.config
        graph = scenario.graph.working_copy()
        world = scenario.world
        seed = scenario.seed
        mission_rng = derive_rng(seed, MISSION_STREAM) if rng is None else rng
        path_rng = derive_rng(seed, PATH_STREAM) if rng is None else rng

        ledger = MissionLedger(config.mission.t_available)
        trace = MissionTrace(seed, ledger)
        mission_planner = MissionPlanner(config.bbo.mission, config.mission.phi1, config.mission.phi2, self.profile, **self.log_kwargs())
        path_planner = PathPlanner(config.bbo.path, self.profile, config.executive.warm_fraction, config.executive.straight_seed,
                                   **self.log_kwargs())

        current = graph.start
        try:
            plan = mission_planner.plan_mission(graph, current, graph.dest, self.__budget__(config, ledger.t_residual), mission_rng)
        except InfeasibleError as e:
            return self.__finish__(trace, graph, world, current, MissionOutcome.INFEASIBLE, path_planner, mission_planner,
                                   reason=e.message, time_gap=e.time_gap)
        sequence = plan.sequence
        trace.add_event('mission_plan', 0.0, sequence=sequence.to_dict(), cost=plan.cost,
                        history=[r.to_dict() for r in plan.history])
        self.info(f"initial sequence {list(sequence.nodes)} : {sequence.expected_time:.1f} s expected")

        position = graph.waypoints[current].copy()
        step = 0
        while current != graph.dest:
            step += 1
            a, b = sequence.nodes[step - 1], sequence.nodes[step]
            edge = graph.edge(a, b)
            expected = graph.edge_time(a, b)

            world.advance(max(ledger.t_mission - world.time, 0.0))
            first = len(trace.events)
            nominal, ground, cost, calls, collisions = self.__fly_leg__(scenario, path_planner, trace, a, b, position, path_rng)
            if self.leg_time_hook is not None:
                scripted = float(self.leg_time_hook((a, b), ground, expected))
                # the leg events follow the scripted clock
                scale = scripted / ground if ground > 0 else 1.0
                for event in trace.events[first:]:
                    event['time'] = ledger.t_mission + (event['time'] - ledger.t_mission) * scale
                ground = scripted
            leg = LegRecord((a, b), expected, nominal, ground, edge.duration, ground + edge.duration, path_calls=calls,
                            collisions=collisions, path_cost=cost)

            ledger.accrue(leg)
            graph.mark_traversed(a, b)
            current, position = b, graph.waypoints[b].copy()
            trace.path_calls += calls

            started = self.stopwatch.start()
            leg.decision = check_replan_trigger(leg, ledger)
            evaluations = 1
            replanned = None
            if leg.decision == ReplanDecision.REPLAN_MISSION and ledger.t_residual > 0:
                ledger.replan_count += 1
                try:
                    replanned = mission_planner.replan_mission(graph, current, self.__budget__(config, ledger.t_residual), mission_rng)
                    evaluations += replanned.evaluations
                except InfeasibleError as e:
                    ledger.compute_samples.append(self.stopwatch.elapsed(started, evaluations))
                    trace.add_event('leg', ledger.t_mission, leg=leg.to_dict(), ledger=ledger.to_dict())
                    return self.__finish__(trace, graph, world, current, MissionOutcome.INFEASIBLE, path_planner, mission_planner,
                                           reason=e.message, time_gap=e.time_gap)
            elif leg.decision == ReplanDecision.REPLAN_MISSION:
                ledger.replan_count += 1
            ledger.compute_samples.append(self.stopwatch.elapsed(started, evaluations))

            trace.add_event('leg', ledger.t_mission, leg=leg.to_dict(), ledger=ledger.to_dict())
            self.debug(f"leg {a} -> {b} : realized {leg.realized:.1f} s, expected {expected:.1f} s, {leg.decision}")

            if ledger.t_residual <= 0:
                return self.__finish__(trace, graph, world, current, MissionOutcome.FAILURE, path_planner, mission_planner,
                                       reason="time budget exhausted")
            if replanned is not None:
                sequence, step = replanned.sequence, 0
                trace.add_event('mission_replan', ledger.t_mission, sequence=sequence.to_dict(), cost=replanned.cost,
                                history=[r.to_dict() for r in replanned.history])
                self.debug(f"new sequence {list(sequence.nodes)}")

        return self.__finish__(trace, graph, world, current, MissionOutcome.SUCCESS, path_planner, mission_planner)

    def __finish__(self, trace: MissionTrace, graph: TaskGraph, world, current: int, outcome: MissionOutcome,
                   path_planner: PathPlanner, mission_planner: MissionPlanner, **details) -> MissionTrace:
        ledger = trace.ledger
        flown = TaskSequence(tuple([graph.start] + [leg.edge[1] for leg in ledger.legs]))
        leg_costs = {edge_key(*leg.edge): leg.path_cost for leg in ledger.legs}
        ledger.cost_mission = mission_cost(flown, graph, MissionCostInputs(ledger.t_available, mission_planner.phi1, mission_planner.phi2), leg_costs)
        trace.outcome = outcome
        trace.final_node = current
        trace.cpu_path = path_planner.compute_time
        trace.cpu_mission = mission_planner.compute_time
        trace.world_log = list(world.log)
        trace.add_event('outcome', max(ledger.t_mission, trace.events[-1]['time'] if trace.events else 0.0),
                        outcome=str(outcome), node=current, ledger=ledger.to_dict(), **details)
        self.info(f"{outcome} at node {current} : T_Mission {ledger.t_mission:.1f} s, T_Residual {ledger.t_residual:.1f} s, "
                  f"{ledger.replan_count} mission replan(s), {trace.path_calls} path planner call(s)")
        return trace


def run_mission(scenario: Scenario, config: Optional[ScenarioConfig] = None, rng: Optional[np.random.Generator] = None,
                profile: Profile = None, leg_time_hook: Optional[LegTimeHook] = None, **kwargs) -> MissionTrace:
    r'''
    Functional front end of :meth:`Executive.run_mission`, ``config`` replaces the scenario's own when given
    '''
    if config is not None:
        scenario = Scenario(config, scenario.seed, scenario.terrain, scenario.world, scenario.graph)
    return Executive(profile, leg_time_hook, **kwargs).run_mission(scenario, rng)
