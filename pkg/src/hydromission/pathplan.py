from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, Optional, Sequence

import numpy as np
from scipy.interpolate import BSpline

from .bbo import BboConfig, BiogeographyOptimizer, GenerationRecord
from .env import CurrentSample, WorldSnapshot
from .interfaces import Encoding, IPlanner
from .obstacles import collision_mask
from .profile import Profile, Stopwatch
from .utils import HydroMissionException, TerrainClass, derive_rng, spawn_seed


BOUNDS_MARGIN = 0.25
GROUND_SPEED_FLOOR = 0.1
DEFAULT_WARM_FRACTION = 0.3


@dataclass(frozen=True)
class VehicleModel():
    r'''
    Kinematic vehicle limits

    Properties
    ----------
        speed : float
            Water referenced speed |v| (m/s)
        u_max : float
            Surge limit (m/s)
        v_min, v_max : float
            Sway interval (m/s)
        psi_min, psi_max : float
            Heading change allowed between two samples (rad)
    '''
    speed: float = 2.0
    u_max: float = 3.5
    v_min: float = -1.5
    v_max: float = 1.5
    psi_min: float = -0.5
    psi_max: float = 0.5

    def __post_init__(self):
        if self.speed <= 0:
            raise HydroMissionException("vehicle speed must be positive", "PATH PLANNER")
        if self.v_min > self.v_max or self.psi_min > self.psi_max:
            raise HydroMissionException("vehicle limit intervals must not be empty", "PATH PLANNER")


@dataclass(frozen=True)
class SplineConfig():
    r'''
    B-spline shape: ``n`` control points of order ``order`` (degree ``order - 1``)
    '''
    n: int = 6
    order: int = 3
    samples_per_span: int = 20

    def __post_init__(self):
        if self.order < 2 or self.n < self.order:
            raise HydroMissionException(f"a spline needs n >= order >= 2, got n={self.n} order={self.order}", "PATH PLANNER")
        if self.samples_per_span < 1:
            raise HydroMissionException("samples_per_span must be at least 1", "PATH PLANNER")

    @property
    def spans(self) -> int:
        return self.n - self.order + 1

    @property
    def sample_count(self) -> int:
        return self.spans * self.samples_per_span + 1


@dataclass(frozen=True)
class PathWeights():
    surge: float = 50.0
    sway: float = 50.0
    heading: float = 50.0
    collision: float = 1e4


@lru_cache(maxsize=64)
def basis_matrix(n: int, order: int, samples: int) -> np.ndarray:
    r'''
    Clamped uniform B-spline basis, shape (samples, n), rows sum to 1
    '''
    degree = order - 1
    knots = np.concatenate([np.zeros(degree), np.linspace(0.0, 1.0, n - degree + 1), np.ones(degree)])
    basis = BSpline(knots, np.eye(n), degree)(np.linspace(0.0, 1.0, samples))
    basis.setflags(write=False)
    return basis


def evaluate_spline(control_points, order: int = 3, samples: Optional[int] = None, samples_per_span: int = 20) -> np.ndarray:
    r'''
    Sample the B-spline of the given control points

    Parameters
    ----------
        control_points : array like
            (n, 3) control points
        order : int
            Spline order K, the degree is K - 1
        samples : int, optional
            Sample count, ``(n - K + 1) * samples_per_span + 1`` by default

    Returns
    -------
        (samples, 3) positions, the first and last equal the end control points
    '''
    control_points = np.asarray(control_points, dtype=float)
    n = control_points.shape[0]
    if order < 2 or n < order:
        raise HydroMissionException(f"cannot evaluate a spline of order {order} on {n} control points", "PATH PLANNER")
    if samples is None:
        samples = (n - order + 1) * samples_per_span + 1
    return basis_matrix(n, order, samples) @ control_points


def orientations(positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r'''
    Heading and pitch of every path segment

    ``psi = atan2(dY, dX)`` and ``theta = atan2(-dZ, sqrt(dX^2 + dY^2))``, depth growing
    downwards. A zero length segment keeps the orientation of the previous one.

    Returns
    -------
        (psi, theta), one value per segment
    '''
    positions = np.asarray(positions, dtype=float)
    if positions.shape[0] < 2:
        raise HydroMissionException("orientations need at least two samples", "PATH PLANNER")
    delta = np.diff(positions, axis=0)
    horizontal = np.hypot(delta[:, 0], delta[:, 1])
    psi = np.arctan2(delta[:, 1], delta[:, 0])
    theta = np.arctan2(-delta[:, 2], horizontal)
    for i in np.flatnonzero(np.linalg.norm(delta, axis=1) == 0.0):
        psi[i] = psi[i - 1] if i > 0 else 0.0
        theta[i] = theta[i - 1] if i > 0 else 0.0
    return psi, theta


def compose_velocity(speed: float, psi: float, theta: float, current: CurrentSample) -> tuple[float, float, float]:
    r'''
    Vehicle velocity plus current, both resolved on the same axes

    ``u = |v| cos(theta) cos(psi) + |Vc| cos(theta_c) cos(psi_c)``
    ``v = |v| cos(theta) sin(psi) + |Vc| cos(theta_c) sin(psi_c)``
    ``w = |v| sin(theta) + |Vc| sin(theta_c)``
    '''
    c = current.magnitude
    u = speed * np.cos(theta) * np.cos(psi) + c * np.cos(current.theta) * np.cos(current.psi)
    v = speed * np.cos(theta) * np.sin(psi) + c * np.cos(current.theta) * np.sin(current.psi)
    w = speed * np.sin(theta) + c * np.sin(current.theta)
    return float(u), float(v), float(w)


def _unit_directions(psi: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return np.column_stack([np.cos(theta) * np.cos(psi), np.cos(theta) * np.sin(psi), np.sin(theta)])


def _wrap(angle: np.ndarray) -> np.ndarray:
    return (angle + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(eq=False)
class PathCandidate():
    r'''
    A sampled B-spline path and its cost breakdown

    Properties
    ----------
        control_points : np.ndarray
            (n, 3) control points, pinned to the start and the goal
        positions : np.ndarray
            (N, 3) samples
        psi, theta : np.ndarray
            Orientation of the N - 1 segments
        velocity : np.ndarray
            (N - 1, 3) composed velocity on every segment
        segment_times : np.ndarray
            Ground time spent on every segment
        length : float
            Sum of the segment lengths (m)
        nominal_time : float
            ``length / |v|`` (s)
        ground_time : float
            Time to fly the path with the current (s)
        cost : float
            ``nominal_time + violation``
        violation : float
            Weighted sum of the penalty terms
        breakdown : dict
            Unweighted ``surge``, ``sway``, ``heading`` and ``collision`` terms
        collision_count : int
            Samples inside coast cells or obstacles
    '''
    control_points: np.ndarray
    positions: np.ndarray
    psi: np.ndarray
    theta: np.ndarray
    velocity: np.ndarray
    segment_times: np.ndarray
    length: float
    nominal_time: float
    ground_time: float
    cost: float
    violation: float
    breakdown: dict
    collision_count: int
    history: list[GenerationRecord] = field(default_factory=list)
    evaluations: int = 0
    compute_time: float = 0.0

    @staticmethod
    def stationary(point) -> PathCandidate:
        r'''
        Zero length path of a vehicle already at ``point``
        '''
        point = np.asarray(point, dtype=float).reshape(1, 3)
        return PathCandidate(point.copy(), point.copy(), np.zeros(0), np.zeros(0), np.zeros((0, 3)), np.zeros(0),
                             0.0, 0.0, 0.0, 0.0, 0.0, {'surge': 0.0, 'sway': 0.0, 'heading': 0.0, 'collision': 0.0}, 0)

    @property
    def start(self) -> np.ndarray:
        return self.positions[0]

    @property
    def goal(self) -> np.ndarray:
        return self.positions[-1]

    def to_dict(self) -> dict:
        return {
            'control_points': self.control_points.tolist(),
            'positions': self.positions.tolist(),
            'psi': self.psi.tolist(),
            'theta': self.theta.tolist(),
            'length': self.length,
            'nominal_time': self.nominal_time,
            'ground_time': self.ground_time,
            'cost': self.cost,
            'violation': self.violation,
            'breakdown': dict(self.breakdown),
            'collision_count': self.collision_count,
            'history': [record.to_dict() for record in self.history],
        }


@dataclass(frozen=True, eq=False)
class PathProblem():
    r'''
    Plan a path from ``start`` to ``goal`` inside ``world``

    ``clearance`` inflates every obstacle while planning, ``margin`` sizes the
    control point box as a fraction of the start goal distance.
    '''
    start: np.ndarray
    goal: np.ndarray
    world: WorldSnapshot
    vehicle: VehicleModel = VehicleModel()
    spline: SplineConfig = SplineConfig()
    weights: PathWeights = PathWeights()
    clearance: float = 0.0
    margin: float = BOUNDS_MARGIN

    def __post_init__(self):
        object.__setattr__(self, 'start', np.asarray(self.start, dtype=float).reshape(3))
        object.__setattr__(self, 'goal', np.asarray(self.goal, dtype=float).reshape(3))
        if np.array_equal(self.start, self.goal):
            raise HydroMissionException("start and goal must differ", "PATH PLANNER")

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(self.goal - self.start))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        r'''
        Box around the start goal segment inflated by ``margin`` times its length, clipped to the terrain
        '''
        terrain = self.world.terrain
        pad = self.margin * self.distance
        lower = np.minimum(self.start, self.goal) - pad
        upper = np.maximum(self.start, self.goal) + pad
        limit = np.array([terrain.extent_x, terrain.extent_y, terrain.depth_extent])
        return np.clip(lower, 0.0, limit), np.clip(upper, 0.0, limit)

    def with_start(self, start) -> PathProblem:
        return replace(self, start=start)

    def with_world(self, world: WorldSnapshot) -> PathProblem:
        return replace(self, world=world)


def path_cost(control_points, problem: PathProblem) -> PathCandidate:
    r'''
    Evaluate a control polygon against a problem

    Notes
    -----
        - The nominal time ignores the current, the ground time projects the
          composed velocity on the path tangent, floored at ``0.1 |v|``.
        - Vehicular limits are checked on the composed velocity resolved into the
          path frame (surge along the segment, sway across it) and on the heading
          change between consecutive segments.
        - Each sample in a coast cell, outside the terrain or inside an obstacle
          counts 1 collision, a sample in an uncertain cell counts its risk.
    '''
    control_points = np.asarray(control_points, dtype=float)
    vehicle, weights, world = problem.vehicle, problem.weights, problem.world
    positions = evaluate_spline(control_points, problem.spline.order, problem.spline.sample_count)

    segments = np.linalg.norm(np.diff(positions, axis=0), axis=1)
    length = float(segments.sum())
    nominal_time = length / vehicle.speed

    psi, theta = orientations(positions)
    directions = _unit_directions(psi, theta)
    midpoints = 0.5 * (positions[:-1] + positions[1:])
    velocity = vehicle.speed * directions + world.field.velocity(midpoints)

    surge = np.sum(velocity * directions, axis=1)
    sway = -velocity[:, 0] * np.sin(psi) + velocity[:, 1] * np.cos(psi)
    turn = _wrap(np.diff(psi))

    surge_term = float(np.sum(np.maximum(0.0, surge - vehicle.u_max)))
    sway_term = float(np.sum(np.maximum(0.0, sway - vehicle.v_max) + np.maximum(0.0, vehicle.v_min - sway)))
    heading_term = float(np.sum(np.maximum(0.0, turn - vehicle.psi_max) + np.maximum(0.0, vehicle.psi_min - turn)))

    codes = world.terrain.classify(positions)
    hard = (codes == TerrainClass.COAST.value) | collision_mask(world.obstacles, positions, problem.clearance)
    soft = np.where(codes == TerrainClass.UNCERTAIN.value, world.terrain.risk_at(positions), 0.0)
    collision_term = float(np.sum(np.where(hard, 1.0, soft)))

    segment_times = segments / np.maximum(surge, GROUND_SPEED_FLOOR * vehicle.speed)
    violation = (weights.surge * surge_term + weights.sway * sway_term
                 + weights.heading * heading_term + weights.collision * collision_term)

    return PathCandidate(
        control_points=control_points,
        positions=positions,
        psi=psi,
        theta=theta,
        velocity=velocity,
        segment_times=segment_times,
        length=length,
        nominal_time=nominal_time,
        ground_time=float(segment_times.sum()),
        cost=nominal_time + violation,
        violation=violation,
        breakdown={'surge': surge_term, 'sway': sway_term, 'heading': heading_term, 'collision': collision_term},
        collision_count=int(np.count_nonzero(hard)),
    )


class PathEncoding(Encoding):
    r'''
    Free control points (x, y, z of every interior point) flattened into one SIV vector
    '''
    def __init__(self, problem: PathProblem, mutation_scale: float = 0.1):
        self.problem = problem
        lower, upper = problem.bounds()
        free = problem.spline.n - 2
        self.lower = np.tile(lower, free)
        self.upper = np.tile(upper, free)
        self.sigma = mutation_scale * (self.upper - self.lower)

    def control_points(self, solution: np.ndarray) -> np.ndarray:
        return np.vstack([self.problem.start, np.asarray(solution, dtype=float).reshape(-1, 3), self.problem.goal])

    def straight_line(self) -> np.ndarray:
        r'''
        Interior control points evenly spread on the start goal segment
        '''
        n = self.problem.spline.n
        steps = np.arange(1, n - 1)[:, None] / (n - 1)
        return self.repair((self.problem.start + steps * (self.problem.goal - self.problem.start)).ravel())

    def candidate(self, solution: np.ndarray) -> PathCandidate:
        return path_cost(self.control_points(solution), self.problem)

    def random_feasible(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)

    def cost(self, solution: np.ndarray, context: Any = None) -> float:
        return self.candidate(solution).cost

    def evaluate(self, solution: np.ndarray, context: Any = None) -> tuple[float, float]:
        candidate = self.candidate(solution)
        return candidate.cost, candidate.violation

    def exchange_siv(self, receiver: np.ndarray, donor: np.ndarray, index: int, rng: np.random.Generator) -> np.ndarray:
        child = np.array(receiver, dtype=float)
        child[index] = donor[index]
        return child

    def mutate(self, solution: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
        mask = rng.random(solution.shape) < rate
        return np.where(mask, solution + rng.normal(0.0, 1.0, solution.shape) * self.sigma, solution)

    def repair(self, solution: np.ndarray) -> np.ndarray:
        return np.clip(solution, self.lower, self.upper)


def nearest_sample(candidate: PathCandidate, position) -> int:
    return int(np.argmin(np.linalg.norm(candidate.positions - np.asarray(position, dtype=float), axis=1)))


def advance_along(candidate: PathCandidate, fraction: float) -> tuple[np.ndarray, int]:
    r'''
    Vehicle position after flying ``fraction`` of the candidate's ground time

    Returns
    -------
        (position, index) where ``index`` is the last sample passed
    '''
    last = candidate.positions.shape[0] - 1
    if fraction >= 1.0 or candidate.ground_time == 0.0:
        return candidate.positions[-1].copy(), last
    target = max(fraction, 0.0) * candidate.ground_time
    elapsed = np.concatenate([[0.0], np.cumsum(candidate.segment_times)])
    i = int(np.clip(np.searchsorted(elapsed, target, side='right') - 1, 0, last - 1))
    span = candidate.segment_times[i]
    local = (target - elapsed[i]) / span if span > 0 else 0.0
    position = candidate.positions[i] + local * (candidate.positions[i + 1] - candidate.positions[i])
    return position, i


def collision_samples(candidate: PathCandidate, snapshot: WorldSnapshot, stop: Optional[int] = None) -> int:
    r'''
    Samples of the candidate (up to index ``stop`` included) in coast cells, outside the
    terrain or inside an obstacle effective radius of ``snapshot``
    '''
    positions = candidate.positions if stop is None else candidate.positions[:stop + 1]
    coast = snapshot.terrain.classify(positions) == TerrainClass.COAST.value
    return int(np.count_nonzero(coast | collision_mask(snapshot.obstacles, positions)))


def iterations_to_reach(history: Sequence[GenerationRecord], target: float, rtol: float = 0.0) -> Optional[int]:
    r'''
    First iteration whose best cost is at most ``target * (1 + rtol)``, None if never reached
    '''
    for record in history:
        if record.best_cost <= target * (1.0 + rtol):
            return record.iteration
    return None


def warm_start_population(previous: PathCandidate, problem: PathProblem, count: int, rng: np.random.Generator,
                          mutation_scale: float = 0.1) -> list[np.ndarray]:
    r'''
    Solutions reusing the part of a previous path still ahead of the vehicle

    The remaining polyline, starting at ``problem.start``, is resampled by arc length
    and fitted by least squares with both end control points pinned. The first
    solution is the fit itself, the others are jittered copies.
    '''
    encoding = PathEncoding(problem, mutation_scale)
    k = nearest_sample(previous, problem.start)
    remaining = np.vstack([problem.start, previous.positions[k + 1:]])
    if remaining.shape[0] < 2:
        return []
    spline = problem.spline
    samples = spline.sample_count
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(remaining, axis=0), axis=1))])
    if arc[-1] == 0.0:
        return []
    target = np.linspace(0.0, arc[-1], samples)
    resampled = np.column_stack([np.interp(target, arc, remaining[:, axis]) for axis in range(3)])

    basis = basis_matrix(spline.n, spline.order, samples)
    rhs = resampled - np.outer(basis[:, 0], problem.start) - np.outer(basis[:, -1], problem.goal)
    interior, *_ = np.linalg.lstsq(basis[:, 1:-1], rhs, rcond=None)
    fitted = encoding.repair(interior.ravel())

    seeds = [fitted]
    for _ in range(count - 1):
        seeds.append(encoding.repair(fitted + rng.normal(0.0, 0.5, fitted.shape) * encoding.sigma))
    return seeds


class PathPlanner(IPlanner):
    r'''
    BBO local path planner

    - Log header : PATH PLANNER

    Parameters
    ----------
        config : BboConfig
            Optimizer settings (the path planner uses the rank linear rate model)
        profile : Profile, optional
            Seed, workers, stopwatch and log settings
        warm_fraction : float
            Share of the replanning population seeded from the previous best path
        straight_seed : bool
            Seed one habitat of every plan with the straight start goal segment

    Notes
    -----
        Habitats not seeded are random inside the control point box.
    '''
    def __init__(self, config: BboConfig = None, profile: Profile = None, warm_fraction: float = DEFAULT_WARM_FRACTION,
                 straight_seed: bool = True, **kwargs) -> None:
        IPlanner.__init__(self, header="PATH PLANNER", profile=profile, **kwargs)
        if not 0.0 <= warm_fraction <= 1.0:
            self.error("warm_fraction must lie in [0, 1]")
        self.config = config if config is not None else BboConfig()
        self.warm_fraction = warm_fraction
        self.straight_seed = straight_seed
        self.stopwatch = profile.get_stopwatch() if profile is not None else Stopwatch()
        self.compute_time = 0.0
        self.calls = 0

    def __check_endpoints__(self, problem: PathProblem):
        for name, point in (('start', problem.start), ('goal', problem.goal)):
            if problem.world.terrain.class_at(point) == TerrainClass.COAST:
                self.error(f"{name} {point.tolist()} lies in a coast cell or outside the terrain")

    def plan_path(self, problem: PathProblem, rng: np.random.Generator, initial: Optional[Sequence[np.ndarray]] = None) -> PathCandidate:
        r'''
        Optimize a path for ``problem``

        Parameters
        ----------
            problem : PathProblem
            rng : np.random.Generator
            initial : sequence of solutions, optional
                Extra warm start solutions

        Returns
        -------
            The best :class:`PathCandidate`, with its generation history
        '''
        self.__check_endpoints__(problem)
        encoding = PathEncoding(problem, self.config.mutation_scale)
        seeds = ([encoding.straight_line()] if self.straight_seed else []) + list(initial or [])

        started = self.stopwatch.start()
        result = BiogeographyOptimizer(encoding, self.config, self.profile, **self.log_kwargs()).run(rng, seeds)
        elapsed = self.stopwatch.elapsed(started, result.evaluations)

        candidate = encoding.candidate(result.best.siv)
        candidate.history = result.history
        candidate.evaluations = result.evaluations
        candidate.compute_time = elapsed
        self.evaluations += result.evaluations
        self.compute_time += elapsed
        self.calls += 1
        self.debug(f"path {problem.start.round(1).tolist()} -> {problem.goal.round(1).tolist()} : "
                   f"cost {candidate.cost:.2f} T {candidate.nominal_time:.2f} Tg {candidate.ground_time:.2f} collisions {candidate.collision_count}")
        return candidate

    def replan_path(self, previous: PathCandidate, vehicle_pos, world: WorldSnapshot, problem: PathProblem,
                    rng: np.random.Generator) -> PathCandidate:
        r'''
        Replan from the vehicle position against an updated world

        A share ``warm_fraction`` of the population reuses the part of ``previous``
        ahead of the vehicle. A fully traversed previous path falls back to a cold plan,
        a vehicle already on the goal gets a zero length path.
        '''
        if np.allclose(vehicle_pos, problem.goal):
            return PathCandidate.stationary(problem.goal)
        updated = replace(problem, start=vehicle_pos, world=world)
        if nearest_sample(previous, updated.start) >= previous.positions.shape[0] - 1:
            self.debug("previous path fully traversed, planning from scratch")
            return self.plan_path(updated, rng)
        count = max(1, int(round(self.warm_fraction * self.config.n_pop))) if self.warm_fraction > 0 else 0
        seeds = warm_start_population(previous, updated, count, derive_rng(spawn_seed(rng)), self.config.mutation_scale) if count else []
        return self.plan_path(updated, rng, initial=seeds)

    def perform(self, problem: PathProblem, rng: np.random.Generator) -> PathCandidate:
        return self.plan_path(problem, rng)


def plan_path(problem: PathProblem, config: BboConfig, rng: np.random.Generator, profile: Profile = None) -> PathCandidate:
    return PathPlanner(config, profile).plan_path(problem, rng)


def replan_path(previous: PathCandidate, vehicle_pos, world: WorldSnapshot, problem: PathProblem, rng: np.random.Generator,
                config: BboConfig = None, profile: Profile = None, warm_fraction: float = DEFAULT_WARM_FRACTION) -> PathCandidate:
    return PathPlanner(config, profile, warm_fraction).replan_path(previous, vehicle_pos, world, problem, rng)
