import math
import pytest
import sys
sys.path.append('..')
import numpy as np

from src.hydromission.bbo import BboConfig, GenerationRecord
from src.hydromission.env import CurrentSample, TerrainGrid, WorldSnapshot
from src.hydromission.obstacles import StaticObstacle
from src.hydromission.pathplan import basis_matrix, evaluate_spline, orientations, compose_velocity, path_cost
from src.hydromission.pathplan import VehicleModel, SplineConfig, PathProblem, PathEncoding, PathPlanner
from src.hydromission.pathplan import advance_along, collision_samples, iterations_to_reach, warm_start_population, nearest_sample
from src.hydromission.utils import HydroMissionException, TerrainClass, derive_rng
from tests.fakes import open_snapshot, still_field


START = np.array([100.0, 100.0, 50.0])
GOAL = np.array([900.0, 500.0, 50.0])


def de_boor_basis(knots, degree, i, t):
    r'''
        Cox-de Boor recursion, the last non empty span is closed on the right
    '''
    if degree == 0:
        if knots[i] <= t < knots[i + 1]:
            return 1.0
        return 1.0 if t == knots[-1] and knots[i] < knots[i + 1] == knots[-1] else 0.0
    value = 0.0
    if knots[i + degree] > knots[i]:
        value += (t - knots[i]) / (knots[i + degree] - knots[i]) * de_boor_basis(knots, degree - 1, i, t)
    if knots[i + degree + 1] > knots[i + 1]:
        value += (knots[i + degree + 1] - t) / (knots[i + degree + 1] - knots[i + 1]) * de_boor_basis(knots, degree - 1, i + 1, t)
    return value


def distance_to_line(points, a, b):
    direction = (b - a) / np.linalg.norm(b - a)
    offsets = points - a
    return np.linalg.norm(offsets - np.outer(offsets @ direction, direction), axis=1)


class TestSpline():
    def test_matches_de_boor(self):
        n, order, samples = 6, 3, 41
        degree = order - 1
        knots = np.concatenate([np.zeros(degree), np.linspace(0.0, 1.0, n - degree + 1), np.ones(degree)])
        control_points = derive_rng(5).uniform(0.0, 100.0, (n, 3))
        expected = np.array([[sum(de_boor_basis(knots, degree, i, t) * control_points[i, axis] for i in range(n)) for axis in range(3)]
                             for t in np.linspace(0.0, 1.0, samples)])
        assert np.max(np.abs(evaluate_spline(control_points, order, samples) - expected)) < 1e-9

    def test_basis_partition_of_unity(self):
        basis = basis_matrix(7, 4, 50)
        assert basis.shape == (50, 7)
        assert np.allclose(basis.sum(axis=1), 1.0)

    def test_ends_are_clamped(self):
        control_points = derive_rng(6).uniform(0.0, 100.0, (6, 3))
        positions = evaluate_spline(control_points)
        assert positions.shape == (SplineConfig().sample_count, 3)
        assert positions[0] == pytest.approx(control_points[0])
        assert positions[-1] == pytest.approx(control_points[-1])

    def test_invalid(self):
        with pytest.raises(HydroMissionException):
            evaluate_spline(np.zeros((2, 3)), order=3)
        with pytest.raises(HydroMissionException):
            SplineConfig(n=2, order=3)


def test_orientations():
    positions = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, -1.0]])
    psi, theta = orientations(positions)
    assert psi.tolist() == pytest.approx([0.0, 0.0, math.pi / 2])
    assert theta.tolist() == pytest.approx([0.0, 0.0, math.atan2(1.0, 1.0)])
    psi, theta = orientations(np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))
    assert psi.tolist() == pytest.approx([0.0, math.pi / 2])
    with pytest.raises(HydroMissionException):
        orientations(np.zeros((1, 3)))

def test_compose_velocity():
    still = CurrentSample.from_velocity(0.0, 0.0, 0.0)
    assert compose_velocity(2.0, 0.0, 0.0, still) == (2.0, 0.0, 0.0)
    assert compose_velocity(2.0, 0.0, math.pi / 2, still) == pytest.approx((0.0, 0.0, 2.0), abs=1e-12)
    head_on = CurrentSample.from_velocity(-0.5, 0.0, 0.0)
    assert compose_velocity(2.0, 0.0, 0.0, head_on) == pytest.approx((1.5, 0.0, 0.0), abs=1e-12)
    cross = CurrentSample.from_velocity(0.0, 1.0, 0.0)
    assert compose_velocity(2.0, math.pi / 2, 0.0, cross) == pytest.approx((0.0, 3.0, 0.0), abs=1e-12)


class TestPathCost():
    @pytest.fixture
    def problem(self):
        return PathProblem(START, GOAL, open_snapshot())

    @pytest.fixture
    def straight(self, problem):
        encoding = PathEncoding(problem)
        return encoding.control_points(encoding.straight_line())

    def test_straight_line_in_still_water(self, problem, straight):
        candidate = path_cost(straight, problem)
        distance = np.linalg.norm(GOAL - START)
        assert candidate.length == pytest.approx(distance, rel=1e-9)
        assert candidate.nominal_time == pytest.approx(distance / 2.0, rel=1e-9)
        assert candidate.ground_time == pytest.approx(candidate.nominal_time, rel=1e-9)
        assert candidate.violation == 0.0
        assert candidate.cost == candidate.nominal_time
        assert candidate.collision_count == 0
        assert candidate.breakdown == {'surge': 0.0, 'sway': 0.0, 'heading': 0.0, 'collision': 0.0}
        assert np.all(distance_to_line(candidate.positions, START, GOAL) < 1e-9)

    def test_obstacle_on_the_line(self, problem, straight):
        rock = StaticObstacle("rock", 0.5 * (START + GOAL), 30.0)
        candidate = path_cost(straight, problem.with_world(problem.world.with_obstacles([rock])))
        assert candidate.collision_count > 0
        assert candidate.breakdown['collision'] == candidate.collision_count
        assert candidate.violation == pytest.approx(1e4 * candidate.collision_count)

    def test_clearance_inflates_obstacles(self, problem, straight):
        rock = StaticObstacle("rock", 0.5 * (START + GOAL) + np.array([0.0, 0.0, 20.0]), 10.0)
        world = problem.world.with_obstacles([rock])
        assert path_cost(straight, problem.with_world(world)).collision_count == 0
        inflated = PathProblem(START, GOAL, world, clearance=15.0)
        assert path_cost(straight, inflated).collision_count > 0

    def test_coast_and_uncertain_cells(self, straight):
        classes = np.full((100, 100), TerrainClass.WATER.value, dtype=np.int8)
        risk = np.zeros((100, 100))
        classes[:, 48:52] = TerrainClass.COAST.value
        classes[:, 28:32] = TerrainClass.UNCERTAIN.value
        risk[:, 28:32] = 0.2
        terrain = TerrainGrid(classes, risk, 10.0, 100.0)
        problem = PathProblem(START, GOAL, WorldSnapshot(0.0, terrain, still_field(100.0)))
        candidate = path_cost(straight, problem)
        hard = candidate.collision_count
        soft = np.count_nonzero(terrain.classify(candidate.positions) == TerrainClass.UNCERTAIN.value)
        assert hard > 0 and soft > 0
        assert candidate.breakdown['collision'] == pytest.approx(hard + 0.2 * soft)

    def test_sharp_turn_is_penalized(self, problem):
        zigzag = np.array([START, [500.0, 900.0, 50.0], [200.0, 100.0, 50.0], [800.0, 900.0, 50.0], [300.0, 300.0, 50.0], GOAL])
        candidate = path_cost(zigzag, problem)
        assert candidate.breakdown['heading'] > 0.0
        assert candidate.cost > candidate.nominal_time

    def test_start_equals_goal(self):
        with pytest.raises(HydroMissionException):
            PathProblem(START, START, open_snapshot())
        with pytest.raises(HydroMissionException):
            VehicleModel(speed=0.0)

    def test_bounds_box(self, problem):
        lower, upper = problem.bounds()
        pad = 0.25 * np.linalg.norm(GOAL - START)
        assert lower == pytest.approx(np.clip(START - pad, 0.0, None))
        assert upper == pytest.approx(np.minimum(GOAL + pad, [1000.0, 1000.0, 100.0]))


class TestAlongPath():
    @pytest.fixture
    def candidate(self):
        problem = PathProblem(START, GOAL, open_snapshot())
        encoding = PathEncoding(problem)
        return encoding.candidate(encoding.straight_line())

    def test_advance_half_way(self, candidate):
        position, index = advance_along(candidate, 0.5)
        assert position == pytest.approx(0.5 * (START + GOAL), abs=1e-6)
        assert 0 < index < candidate.positions.shape[0] - 1

    def test_advance_to_the_end(self, candidate):
        position, index = advance_along(candidate, 1.0)
        assert position == pytest.approx(GOAL)
        assert index == candidate.positions.shape[0] - 1
        assert advance_along(candidate, 0.0)[0] == pytest.approx(START)

    def test_nearest_sample(self, candidate):
        assert nearest_sample(candidate, START) == 0
        assert nearest_sample(candidate, GOAL + 1.0) == candidate.positions.shape[0] - 1

    def test_collision_samples(self, candidate):
        snapshot = open_snapshot()
        assert collision_samples(candidate, snapshot) == 0
        rock = StaticObstacle("rock", GOAL, 50.0)
        assert collision_samples(candidate, snapshot.with_obstacles([rock])) > 0
        assert collision_samples(candidate, snapshot.with_obstacles([rock]), stop=5) == 0


def test_iterations_to_reach():
    history = [GenerationRecord(i, cost, cost, 0.0, 10 * i) for i, cost in enumerate([9.0, 7.0, 5.0, 5.0, 4.0], start=1)]
    assert iterations_to_reach(history, 5.0) == 3
    assert iterations_to_reach(history, 4.0) == 5
    assert iterations_to_reach(history, 3.0) is None
    assert iterations_to_reach(history, 4.6, rtol=0.1) == 3


class TestPathPlanner():
    @pytest.fixture
    def planner(self):
        return PathPlanner(BboConfig(n_pop=20, iter_max=15))

    @pytest.fixture
    def problem(self):
        return PathProblem(START, GOAL, open_snapshot())

    def test_plan_in_empty_world_is_straight(self, planner, problem):
        candidate = planner.plan_path(problem, derive_rng(1))
        assert candidate.cost == pytest.approx(problem.distance / 2.0, rel=1e-9)
        assert candidate.start == pytest.approx(START)
        assert candidate.goal == pytest.approx(GOAL)
        assert len(candidate.history) == 15
        assert planner.calls == 1
        assert planner.compute_time == pytest.approx(candidate.evaluations * 1e-4)

    def test_avoids_an_obstacle(self, planner, problem):
        rock = StaticObstacle("rock", 0.5 * (START + GOAL), 60.0)
        candidate = PathPlanner(BboConfig(n_pop=40, iter_max=40)).plan_path(problem.with_world(problem.world.with_obstacles([rock])), derive_rng(2))
        straight = PathEncoding(problem.with_world(problem.world.with_obstacles([rock])))
        assert candidate.cost < straight.candidate(straight.straight_line()).cost

    def test_rejects_coast_endpoints(self, planner):
        classes = np.full((100, 100), TerrainClass.WATER.value, dtype=np.int8)
        classes[:20, :20] = TerrainClass.COAST.value
        world = WorldSnapshot(0.0, TerrainGrid(classes, np.zeros((100, 100)), 10.0, 100.0), still_field(100.0))
        with pytest.raises(HydroMissionException):
            planner.plan_path(PathProblem(START, GOAL, world), derive_rng(1))

    def test_warm_start_reuses_the_remaining_path(self, planner, problem):
        previous = planner.plan_path(problem, derive_rng(1))
        middle = 0.5 * (START + GOAL)
        seeds = warm_start_population(previous, problem.with_start(middle), 5, derive_rng(3))
        assert len(seeds) == 5
        encoding = PathEncoding(problem.with_start(middle))
        fitted = encoding.candidate(seeds[0])
        assert np.all(distance_to_line(fitted.positions, middle, GOAL) < 1e-6)
        assert all(np.all((s >= encoding.lower) & (s <= encoding.upper)) for s in seeds)

    def test_replan_starts_at_the_vehicle(self, planner, problem):
        previous = planner.plan_path(problem, derive_rng(1))
        position, _ = advance_along(previous, 0.5)
        replanned = planner.replan_path(previous, position, problem.world, problem, derive_rng(2))
        assert replanned.start == pytest.approx(position)
        assert replanned.goal == pytest.approx(GOAL)
        assert planner.calls == 2

    def test_replan_after_the_last_sample(self, planner, problem):
        previous = planner.plan_path(problem, derive_rng(1))
        near_goal = GOAL - np.array([0.5, 0.0, 0.0])
        replanned = planner.replan_path(previous, near_goal, problem.world, problem, derive_rng(2))
        assert replanned.start == pytest.approx(near_goal)

    def test_invalid_warm_fraction(self):
        with pytest.raises(HydroMissionException):
            PathPlanner(warm_fraction=1.5)

    def test_optimizer_progress_without_the_straight_seed(self, problem):
        planner = PathPlanner(BboConfig(n_pop=30, iter_max=40), straight_seed=False)
        candidate = planner.plan_path(problem, derive_rng(4))
        costs = [record.best_cost for record in candidate.history]
        assert all(later <= earlier for earlier, later in zip(costs, costs[1:]))
        assert candidate.cost == costs[-1]
        assert candidate.cost < costs[0]
        assert candidate.nominal_time >= problem.distance / 2.0 * (1.0 - 1e-9)

    def test_replan_in_an_unchanged_world(self, planner, problem):
        previous = planner.plan_path(problem, derive_rng(1))
        position, _ = advance_along(previous, 0.5)
        remaining = np.linalg.norm(GOAL - position) / 2.0
        cold = PathPlanner(BboConfig(n_pop=20, iter_max=15), straight_seed=False)
        replanned = cold.replan_path(previous, position, problem.world, problem, derive_rng(2))
        assert replanned.cost <= 1.01 * remaining

    @pytest.mark.parametrize("seed", range(3))
    def test_replan_clears_an_obstacle_on_the_previous_path(self, planner, problem, seed):
        previous = planner.plan_path(problem, derive_rng(seed))
        position, _ = advance_along(previous, 0.5)
        rock = StaticObstacle("rock", START + 0.75 * (GOAL - START), 30.0)
        world = problem.world.with_obstacles([rock])
        assert collision_samples(previous, world) > 0
        replanned = PathPlanner(BboConfig(n_pop=40, iter_max=40)).replan_path(previous, position, world, problem, derive_rng(seed, 1))
        assert replanned.collision_count == 0
        assert collision_samples(replanned, world) == 0

    def test_replan_on_the_goal(self, planner, problem):
        previous = planner.plan_path(problem, derive_rng(1))
        replanned = planner.replan_path(previous, GOAL.copy(), problem.world, problem, derive_rng(2))
        assert replanned.positions.tolist() == [GOAL.tolist()]
        assert replanned.length == 0.0
        assert replanned.ground_time == 0.0
        assert replanned.cost == 0.0
        assert planner.calls == 1
        assert advance_along(replanned, 0.5)[0] == pytest.approx(GOAL)
        assert collision_samples(replanned, problem.world) == 0
