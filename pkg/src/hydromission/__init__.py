from .utils import HydroMissionException, ConfigError, InfeasibleError, StepSizeError, TerrainClass, ObstacleKind, MissionOutcome, ReplanDecision
from .profile import Profile, Stopwatch
from .env import TerrainGrid, VortexParams, VortexField, WorldSnapshot, cluster_map, sample_current
from .obstacles import Obstacle, StaticObstacle, AfloatObstacle, SelfMotivatedObstacle, ObstacleFactory
from .world import World
from .bbo import BboConfig, BiogeographyOptimizer, BoundedEncoding
from .pathplan import VehicleModel, SplineConfig, PathWeights, PathProblem, PathCandidate, PathPlanner, plan_path, replan_path
from .graph import TaskGraph, TaskEdge, build_graph
from .missionplan import TaskSequence, MissionPlan, MissionPlanner, decode_sequence, validate_sequence, mission_cost, plan_mission, replan_mission
from .config import ScenarioConfig, Scenario, load_scenario, build_scenario
from .executive import Executive, MissionTrace, MissionLedger, LegRecord, run_mission
