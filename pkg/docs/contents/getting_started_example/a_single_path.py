import numpy as np
from hydromission import BboConfig, PathPlanner, PathProblem, load_scenario, build_scenario

scenario = build_scenario(load_scenario('scenario2'))
start, goal = scenario.graph.waypoints[0], scenario.graph.waypoints[1]

planner = PathPlanner(BboConfig(n_pop=50, iter_max=50))
problem = PathProblem(start, goal, scenario.world.snapshot(), clearance=5.0)
candidate = planner.plan_path(problem, np.random.default_rng(0))

print(candidate.cost, candidate.ground_time, candidate.collision_count)
print(candidate.breakdown)
