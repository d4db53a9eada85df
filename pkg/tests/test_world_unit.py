import pytest
import sys
sys.path.append('..')

from src.hydromission.env import TerrainGrid, VortexParams, VortexField
from src.hydromission.obstacles import StaticObstacle, SelfMotivatedObstacle
from src.hydromission.utils import HydroMissionException
from src.hydromission.world import World
from tests.fakes import ScriptedWorld, still_field


def drifting_vortex() -> VortexField:
    vortex = VortexParams((500.0, 500.0), 1000.0, 100.0, update_rate=1.0, sigma_sx=5.0, sigma_sy=5.0)
    return VortexField(((vortex,),), depth_extent=100.0)


class TestWorld():
    @pytest.fixture
    def world(self):
        terrain = TerrainGrid.open_water(100, 100, 10.0, 100.0)
        obstacles = (StaticObstacle("rock", [200.0, 200.0, 50.0], 10.0),
                     SelfMotivatedObstacle("sub", [800.0, 800.0, 50.0], 10.0, velocity=(1.0, 0.0, 0.0)))
        return World(terrain, drifting_vortex(), obstacles, seed=3)

    def test_advance(self, world):
        snapshot = world.advance(10.0)
        assert world.time == 10.0
        assert world.steps == 1
        assert snapshot.time == 10.0
        assert world.obstacles[0].position.tolist() == [200.0, 200.0, 50.0]
        assert world.obstacles[1].position[0] > 800.0
        assert len(world.log) == 2

    def test_still_water_motion(self):
        terrain = TerrainGrid.open_water(100, 100, 10.0, 100.0)
        world = World(terrain, still_field(100.0), (SelfMotivatedObstacle("sub", [800.0, 800.0, 50.0], 10.0, velocity=(1.0, 0.0, 0.0)),))
        world.advance(10.0)
        assert world.obstacles[0].position.tolist() == pytest.approx([810.0, 800.0, 50.0])
        assert world.obstacles[0].age == 10.0

    def test_snapshots_do_not_follow_the_world(self, world):
        before = world.snapshot()
        world.advance(10.0)
        assert before.time == 0.0
        assert before.obstacles[1].position.tolist() == [800.0, 800.0, 50.0]
        assert before.field != world.field

    def test_no_going_back(self, world):
        with pytest.raises(HydroMissionException):
            world.advance(-1.0)

    def test_observe_within_range(self, world):
        observed = world.observe([200.0, 210.0, 50.0], 100.0)
        assert [o.id for o in observed.obstacles] == ["rock"]
        assert len(world.snapshot().obstacles) == 2

    def test_scripted_field(self, world):
        world.replace_field(still_field(100.0))
        assert world.snapshot().field == still_field(100.0)

    def test_log_entries(self, world):
        world.advance(5.0)
        entry = world.log[-1]
        assert entry['step'] == 1
        assert entry['obstacles']['type'] == "FeatureCollection"
        assert len(entry['obstacles']['features']) == 2

    def test_seeded(self):
        terrain = TerrainGrid.open_water(100, 100, 10.0, 100.0)
        first, second = World(terrain, drifting_vortex(), seed=5), World(terrain, drifting_vortex(), seed=5)
        for _ in range(3):
            first.advance(1.0)
            second.advance(1.0)
        assert first.log == second.log


def test_scripted_world():
    terrain = TerrainGrid.open_water(100, 100, 10.0, 100.0)
    world = ScriptedWorld(terrain, [still_field(100.0), drifting_vortex()])
    assert world.field == still_field(100.0)
    world.advance(1.0)
    assert world.field == drifting_vortex()
    world.advance(1.0)
    assert world.field == drifting_vortex()
    assert world.log[1]['field'] == drifting_vortex().to_dict()
