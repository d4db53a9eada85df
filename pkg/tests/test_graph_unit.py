import pytest
import sys
sys.path.append('..')
import numpy as np

from src.hydromission.env import TerrainGrid
from src.hydromission.graph import TaskEdge, TaskGraph, edge_key, knn_edges, build_graph, random_waypoints
from src.hydromission.utils import HydroMissionException, TerrainClass, derive_rng


def line_graph() -> TaskGraph:
    r'''
        0 - 1 - 2 - 3 spaced 100 m apart, plus a slow shortcut 0 - 3
    '''
    waypoints = [[100.0 * i, 0.0, 0.0] for i in range(4)]
    edges = [TaskEdge(0, 1, 100.0, 0.0, 1.0), TaskEdge(1, 2, 100.0, 0.0, 1.0), TaskEdge(2, 3, 100.0, 0.0, 1.0),
             TaskEdge(0, 3, 300.0, 100.0, 1.0)]
    return TaskGraph(waypoints, edges, 2.0, 0, 3)


class TestTaskEdge():
    def test_ends_are_ordered(self):
        edge = TaskEdge(3, 1, 10.0, 0.0, 1.0)
        assert edge.key == (1, 3)
        assert edge_key(5, 2) == (2, 5)

    def test_invalid(self):
        with pytest.raises(HydroMissionException):
            TaskEdge(0, 1, 10.0, 0.0, 0.0)
        with pytest.raises(HydroMissionException):
            TaskEdge(0, 1, 10.0, -1.0, 1.0)


class TestTaskGraph():
    @pytest.fixture
    def graph(self):
        return line_graph()

    def test_edge_times(self, graph):
        assert graph.edge_time(1, 0) == 50.0
        assert graph.edge_time(0, 3) == 250.0
        assert graph.neighbors(0) == [1, 3]
        with pytest.raises(HydroMissionException):
            graph.edge(0, 2)

    def test_shortest_times(self, graph):
        assert graph.shortest_times(3).tolist() == [150.0, 100.0, 50.0, 0.0]
        assert graph.shortest_path(0, 3) == [0, 1, 2, 3]
        assert graph.shortest_path(0, 3, excluded=[1]) == [0, 3]

    def test_mark_traversed(self, graph):
        graph.mark_traversed(1, 0)
        assert not graph.has_edge(0, 1)
        assert graph.has_edge(0, 1, include_traversed=True)
        assert graph.shortest_path(0, 3) == [0, 3]
        assert graph.adjacency().sum() == 6
        assert len(graph.remaining().edges) == 3

    def test_working_copy_is_independent(self, graph):
        copy = graph.working_copy(start=2)
        copy.mark_traversed(0, 1)
        assert copy.start == 2
        assert graph.has_edge(0, 1)

    def test_connectivity(self):
        waypoints = [[100.0 * i, 0.0, 0.0] for i in range(3)]
        graph = TaskGraph(waypoints, [TaskEdge(0, 1, 100.0, 0.0, 1.0)], 2.0, 0, 2)
        assert not graph.is_connected()
        assert graph.is_connected(0, 1)
        assert graph.shortest_path(0, 2) is None

    def test_invalid(self):
        with pytest.raises(HydroMissionException):
            TaskGraph(np.zeros((2, 3)), [TaskEdge(0, 1, 0.0, 0.0, 1.0)], 0.0)
        with pytest.raises(HydroMissionException):
            TaskGraph(np.zeros((2, 3)), [TaskEdge(0, 2, 0.0, 0.0, 1.0)], 1.0)
        with pytest.raises(HydroMissionException):
            TaskGraph(np.zeros((2, 3)), [], 1.0, 0, 5)

    def test_json_file(self, graph, tmp_path):
        graph.mark_traversed(2, 3)
        graph.dump_json(tmp_path / 'graph.json')
        loaded = TaskGraph.load_json(tmp_path / 'graph.json')
        assert loaded.to_dict() == graph.to_dict()
        assert not loaded.has_edge(2, 3)


def test_knn_edges():
    waypoints = np.array([[0.0, 0.0, 0.0], [100.0, 0.0, 0.0], [250.0, 0.0, 0.0], [450.0, 0.0, 0.0]])
    assert knn_edges(waypoints, 1) == [(0, 1), (1, 2), (2, 3)]
    assert len(knn_edges(waypoints, 3)) == 6
    assert knn_edges(waypoints[:1], 3) == []


class TestBuildGraph():
    @pytest.fixture
    def terrain(self):
        return TerrainGrid.open_water(50, 50, 20.0, 200.0)

    def test_random_graph(self, terrain):
        graph = build_graph(terrain, derive_rng(1), node_count=10, k=3)
        assert graph.node_count == 10
        assert (graph.start, graph.dest) == (0, 9)
        assert graph.is_connected()
        assert all(1.0 <= e.priority <= 10.0 for e in graph.edges)
        assert all(60.0 <= e.duration <= 600.0 for e in graph.edges)
        for e in graph.edges:
            assert e.distance == pytest.approx(np.linalg.norm(graph.waypoints[e.i] - graph.waypoints[e.j]))

    def test_seeded(self, terrain):
        first = build_graph(terrain, derive_rng(2), node_count=8, k=3)
        second = build_graph(terrain, derive_rng(2), node_count=8, k=3)
        assert first.to_dict() == second.to_dict()

    def test_explicit_waypoints_and_roster(self, terrain):
        waypoints = [[100.0, 100.0, 50.0], [400.0, 100.0, 50.0], [700.0, 100.0, 50.0]]
        roster = [{"i": 0, "j": 1, "duration": 10.0, "priority": 5.0}, {"i": 2, "j": 1, "duration": 20.0, "priority": 2.0}]
        graph = build_graph(terrain, derive_rng(1), waypoints=waypoints, roster=roster)
        assert [e.key for e in graph.edges] == [(0, 1), (1, 2)]
        assert graph.edge_time(0, 1) == 160.0
        assert graph.edge_time(1, 2) == 170.0
        assert graph.dest == 2

    def test_disconnected_roster(self, terrain):
        waypoints = [[100.0, 100.0, 50.0], [400.0, 100.0, 50.0], [700.0, 100.0, 50.0]]
        with pytest.raises(HydroMissionException):
            build_graph(terrain, derive_rng(1), waypoints=waypoints, roster=[{"i": 0, "j": 1}])

    def test_waypoint_on_coast(self):
        classes = np.full((10, 10), TerrainClass.WATER.value, dtype=np.int8)
        classes[:, :2] = TerrainClass.COAST.value
        terrain = TerrainGrid(classes, np.zeros((10, 10)), 10.0, 50.0)
        with pytest.raises(HydroMissionException):
            build_graph(terrain, derive_rng(1), waypoints=[[5.0, 5.0, 5.0], [80.0, 80.0, 5.0]])
        points = random_waypoints(terrain, 20, derive_rng(3))
        assert np.all(points[:, 0] >= 20.0)
