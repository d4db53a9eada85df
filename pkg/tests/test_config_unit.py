import json
import pytest
import sys
sys.path.append('..')
import numpy as np

from src.hydromission.config import ScenarioConfig, bundled_scenarios, load_scenario, resolve_scenario_path, build_scenario, load_terrain, MapConfig
from src.hydromission.env import write_pgm
from src.hydromission.utils import ConfigError, TerrainClass
from tests.fakes import line_scenario, write_scenario


def test_bundled_scenarios():
    assert bundled_scenarios() == ['montecarlo', 'scenario1', 'scenario2', 'scenario3']
    assert resolve_scenario_path('scenario2').name == 'scenario2.json'
    with pytest.raises(ConfigError):
        resolve_scenario_path('scenario9')

def test_load_bundled_scenario():
    config = load_scenario('scenario1')
    assert config.name == "scenario1"
    assert config.seed == 1
    assert config.graph.nodes == 8
    assert config.bbo.mission.rate_model == "constant"
    assert config.mission.t_available == 14400.0
    assert config.obstacles.clearance == 5.0

def test_every_bundled_scenario_is_valid():
    for name in bundled_scenarios():
        assert load_scenario(name).name == name


class TestErrors():
    def test_unknown_key_has_a_location(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text('{\n  "graph": {\n    "nodez": 3\n  }\n}\n')
        with pytest.raises(ConfigError) as excinfo:
            load_scenario(path)
        assert excinfo.value.line == 3
        assert excinfo.value.path == str(path)
        assert "graph.nodez" in excinfo.value.message

    def test_repeated_key_points_at_its_own_section(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text('{\n  "current": {\n    "layers": 1\n  },\n  "bbo": {\n    "mission": {\n      "layers": 2\n    }\n  }\n}\n')
        with pytest.raises(ConfigError) as excinfo:
            load_scenario(path)
        assert "bbo.mission.layers" in excinfo.value.message
        assert excinfo.value.line == 7

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text('{\n  "seed": 1,\n}\n')
        with pytest.raises(ConfigError) as excinfo:
            load_scenario(path)
        assert excinfo.value.line == 3

    def test_section_must_be_an_object(self):
        with pytest.raises(ConfigError) as excinfo:
            ScenarioConfig.from_dict({"map": 3})
        assert "'map' must be an object" in excinfo.value.message

    def test_invalid_value(self):
        with pytest.raises(ConfigError) as excinfo:
            ScenarioConfig.from_dict({"mission": {"t_available": -1.0}})
        assert "t_available must be positive" in excinfo.value.message
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"bbo": {"path": {"rate_model": "quadratic"}}})

    def test_missing_map_file(self, tmp_path):
        config = ScenarioConfig.from_dict({"map": {"source": str(tmp_path / 'missing.pgm')}})
        with pytest.raises(ConfigError) as excinfo:
            build_scenario(config)
        assert "map file not found" in excinfo.value.message

    def test_vortex_outside_the_layers(self):
        raw = line_scenario()
        raw["current"] = {"layers": 2, "vortices": [{"center": [0.0, 0.0], "strength": 100.0, "radius": 50.0, "layer": 5}]}
        with pytest.raises(ConfigError):
            build_scenario(ScenarioConfig.from_dict(raw))

    def test_waypoint_on_land(self, tmp_path):
        gray = np.full((60, 60), 220, dtype=np.uint8)
        gray[:, :10] = 20
        write_pgm(tmp_path / 'map.pgm', gray)
        raw = line_scenario()
        raw["map"] = {"source": str(tmp_path / 'map.pgm'), "cell_size": 20.0, "depth_extent": 200.0}
        raw["graph"]["waypoints"][0] = [50.0, 100.0, 50.0]
        with pytest.raises(ConfigError):
            build_scenario(ScenarioConfig.from_dict(raw))


def test_dict_round_trip():
    config = load_scenario('montecarlo')
    assert ScenarioConfig.from_dict(config.to_dict()) == config

def test_json_file_round_trip(tmp_path):
    config = ScenarioConfig.from_dict(line_scenario())
    config.dump_json(tmp_path / 'config.json')
    assert load_scenario(tmp_path / 'config.json') == config

def test_with_seed_and_profile():
    config = load_scenario('montecarlo').with_seed(42)
    profile = config.profile()
    assert profile.get_seed() == 42
    assert profile.get_stopwatch().eval_seconds == config.timing.eval_seconds


class TestBuildScenario():
    def test_line_scenario(self, tmp_path):
        config = load_scenario(write_scenario(tmp_path / 'line.json', line_scenario(nodes=4)))
        scenario = build_scenario(config)
        assert scenario.graph.node_count == 4
        assert scenario.graph.edge_time(0, 1) == pytest.approx(160.0)
        assert scenario.terrain.fractions()[TerrainClass.WATER] == 1.0
        assert scenario.t_available == 1000.0
        assert scenario.world.time == 0.0

    def test_seeded(self):
        config = load_scenario('scenario2')
        first, second = build_scenario(config), build_scenario(config)
        assert first.graph.to_dict() == second.graph.to_dict()
        assert first.world.field.to_dict() == second.world.field.to_dict()
        assert [o.to_dict() for o in first.world.obstacles] == [o.to_dict() for o in second.world.obstacles]
        assert build_scenario(config, seed=5).graph.to_dict() != first.graph.to_dict()

    def test_random_obstacles_keep_clear_of_waypoints(self):
        scenario = build_scenario(load_scenario('scenario2'))
        assert len(scenario.world.obstacles) == 5
        for obstacle in (o for o in scenario.world.obstacles if o.id.startswith("obstacle-")):
            distances = np.linalg.norm(scenario.graph.waypoints - obstacle.position, axis=1)
            assert np.all(distances > obstacle.radius)

    def test_random_vortices(self):
        scenario = build_scenario(load_scenario('scenario1'))
        assert len(scenario.world.field.layers) == 4
        assert all(len(layer) == 2 for layer in scenario.world.field.layers)


def test_load_terrain_from_raw_grid(tmp_path):
    gray = np.full((20, 30), 220, dtype=np.uint8)
    gray[:, :10] = 20
    np.save(tmp_path / 'map.npy', gray)
    (tmp_path / 'map.json').write_text(json.dumps({'width': 30, 'height': 20, 'cell_size': 5.0}))
    terrain = load_terrain(MapConfig(source=str(tmp_path / 'map.npy'), depth_extent=50.0), 0)
    assert (terrain.width, terrain.height) == (30, 20)
    assert terrain.cell_size == 5.0
    assert terrain.fractions()[TerrainClass.COAST] == pytest.approx(1 / 3)
