import math
import pytest
import sys
sys.path.append('..')

from src.hydromission.cli import main, execute, read_csv, read_trace, config_keys, path3d_rows, cputime_rows, timebudget_rows
from src.hydromission.cli import OUTPUT_ENV, SUMMARY_COLUMNS, CONVERGENCE_COLUMNS, PATH3D_COLUMNS, LEGS_COLUMNS, CPUTIME_COLUMNS, CURRENT_COLUMNS
from src.hydromission.config import load_scenario
from src.hydromission.utils import MissionOutcome
from tests.fakes import line_scenario, write_scenario


def header(path) -> list[str]:
    return path.read_text().splitlines()[0].split(',')


@pytest.fixture
def scenario(tmp_path):
    return write_scenario(tmp_path / 'line.json', line_scenario(nodes=2))


class TestRun():
    def test_writes_the_artifacts(self, scenario, tmp_path):
        out = tmp_path / 'out'
        assert main(['run', scenario, '--out', str(out)]) == 0
        assert header(out / 'summary.csv') == SUMMARY_COLUMNS
        assert header(out / 'convergence.csv') == CONVERGENCE_COLUMNS
        assert header(out / 'path3d.csv') == PATH3D_COLUMNS
        assert header(out / 'current.csv') == CURRENT_COLUMNS
        assert load_scenario(out / 'config.json').name == "line"
        rows = read_csv(out / 'summary.csv')
        assert len(rows) == 1
        assert rows[0]['outcome'] == "success"
        events = read_trace(out / 'trace.jsonl')
        assert events[0]['kind'] == 'mission_plan'
        assert events[-1]['kind'] == 'outcome'

    def test_seed_override(self, scenario, tmp_path):
        assert main(['run', scenario, '--seed', '7', '--out', str(tmp_path / 'out')]) == 0
        assert read_csv(tmp_path / 'out' / 'summary.csv')[0]['seed'] == '7'

    def test_output_directory_from_environment(self, scenario, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / 'env_out'))
        assert main(['run', scenario]) == 0
        assert (tmp_path / 'env_out' / 'summary.csv').is_file()

    def test_missing_scenario(self, tmp_path, capsys):
        assert main(['run', str(tmp_path / 'nowhere.json'), '--out', str(tmp_path / 'out')]) == 1
        assert "scenario not found" in capsys.readouterr().err

    def test_invalid_scenario(self, tmp_path, capsys):
        path = tmp_path / 'bad.json'
        path.write_text('{\n  "graph": {\n    "nodez": 3\n  }\n}\n')
        assert main(['run', str(path), '--out', str(tmp_path / 'out')]) == 1
        assert f"{path}:3:" in capsys.readouterr().err


class TestMonteCarlo():
    def test_tables(self, scenario, tmp_path):
        out = tmp_path / 'mc'
        assert main(['montecarlo', scenario, '--runs', '2', '--out', str(out)]) == 0
        summary = read_csv(out / 'summary.csv')
        assert [row['run'] for row in summary] == ['0', '1']
        assert [row['seed'] for row in summary] == ['0', '1']
        assert header(out / 'legs.csv') == LEGS_COLUMNS
        assert header(out / 'cputime.csv') == CPUTIME_COLUMNS
        assert len(read_csv(out / 'legs.csv')) == 2

    def test_seed_base(self, scenario, tmp_path):
        assert main(['montecarlo', scenario, '--runs', '2', '--seed-base', '10', '--out', str(tmp_path / 'mc')]) == 0
        assert [row['seed'] for row in read_csv(tmp_path / 'mc' / 'summary.csv')] == ['10', '11']

    def test_batches_are_reproducible(self, scenario, tmp_path):
        assert main(['montecarlo', scenario, '--runs', '3', '--out', str(tmp_path / 'a')]) == 0
        assert main(['montecarlo', scenario, '--runs', '3', '--jobs', '3', '--out', str(tmp_path / 'b')]) == 0
        for name in ('summary.csv', 'legs.csv', 'cputime.csv'):
            assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()

    def test_single_run_matches_run(self, scenario, tmp_path):
        assert main(['run', scenario, '--out', str(tmp_path / 'run')]) == 0
        assert main(['montecarlo', scenario, '--runs', '1', '--out', str(tmp_path / 'mc')]) == 0
        assert read_csv(tmp_path / 'run' / 'summary.csv') == read_csv(tmp_path / 'mc' / 'summary.csv')

    def test_no_runs(self, scenario, tmp_path):
        assert main(['montecarlo', scenario, '--runs', '0', '--out', str(tmp_path / 'mc')]) == 1


class TestPlotData():
    @pytest.fixture
    def run_dir(self, scenario, tmp_path):
        out = tmp_path / 'out'
        assert main(['run', scenario, '--out', str(out)]) == 0
        return out

    def test_convergence(self, run_dir):
        target = run_dir / 'first.csv'
        assert main(['plotdata', str(run_dir / 'trace.jsonl'), '--kind', 'convergence', '--out', str(target)]) == 0
        rows = read_csv(target)
        assert [row['iteration'] for row in rows] == ['1', '2', '3', '4', '5']
        costs = [float(row['best_cost']) for row in rows]
        assert all(later <= earlier for earlier, later in zip(costs, costs[1:]))
        assert main(['plotdata', str(run_dir / 'trace.jsonl'), '--kind', 'convergence', '--call', '1', '--out', str(target)]) == 0
        assert main(['plotdata', str(run_dir / 'trace.jsonl'), '--kind', 'convergence', '--call', '99']) == 1

    def test_path3d_next_to_the_trace(self, run_dir):
        assert main(['plotdata', str(run_dir / 'trace.jsonl'), '--kind', 'path3d']) == 0
        rows = read_csv(run_dir / 'path3d.csv')
        assert float(rows[0]['s']) == 0.0
        assert float(rows[-1]['X']) == pytest.approx(400.0)

    def test_timebudget_and_cputime(self, run_dir):
        assert main(['plotdata', str(run_dir / 'summary.csv'), '--kind', 'timebudget']) == 0
        assert main(['plotdata', str(run_dir / 'summary.csv'), '--kind', 'cputime']) == 0
        budget = read_csv(run_dir / 'timebudget.csv')[0]
        assert float(budget['T_Mission']) + float(budget['T_Residual']) == pytest.approx(1000.0)
        shares = read_csv(run_dir / 'cputime.csv')[0]
        assert float(shares['path_share']) + float(shares['mission_share']) == pytest.approx(1.0)

    def test_wrong_input(self, run_dir):
        assert main(['plotdata', str(run_dir / 'summary.csv'), '--kind', 'convergence']) == 1
        assert main(['plotdata', str(run_dir / 'missing.jsonl'), '--kind', 'path3d']) == 1

    def test_unknown_kind(self, run_dir):
        with pytest.raises(SystemExit) as excinfo:
            main(['plotdata', str(run_dir / 'trace.jsonl'), '--kind', 'histogram'])
        assert excinfo.value.code != 0


def test_path3d_rows():
    events = [{'kind': 'stretch', 'positions': [[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]]},
              {'kind': 'leg'},
              {'kind': 'stretch', 'positions': [[3.0, 4.0, 0.0], [3.0, 4.0, -5.0]]}]
    rows = path3d_rows(events)
    assert [row['s'] for row in rows] == [0.0, 5.0, 10.0]
    assert rows[0]['psi'] == pytest.approx(math.atan2(4.0, 3.0))
    assert rows[1]['theta'] == pytest.approx(math.pi / 2)
    assert rows[2]['theta'] == rows[1]['theta']
    assert path3d_rows([]) == []

def test_summary_rows():
    summary = [{'run': 0, 'cpu_path': '3.0', 'cpu_mission': '1.0', 'T_Mission': 10.0, 'T_Residual': 5.0},
               {'run': 1, 'cpu_path': '0', 'cpu_mission': '0', 'T_Mission': 0.0, 'T_Residual': 15.0}]
    rows = cputime_rows(summary)
    assert (rows[0]['path_share'], rows[0]['mission_share']) == (0.75, 0.25)
    assert (rows[1]['path_share'], rows[1]['mission_share']) == (0.0, 0.0)
    assert timebudget_rows(summary)[1] == {'run': 1, 'T_Mission': 0.0, 'T_Residual': 15.0}

def test_config_keys():
    keys = config_keys()
    assert "graph.nodes (default : 40)" in keys
    assert any(key.startswith("bbo.path") for key in keys)


@pytest.mark.slow
def test_bundled_scenario_mission():
    config = load_scenario('scenario1')
    scenario, trace = execute(config, config.seed)
    assert trace.outcome in (MissionOutcome.SUCCESS, MissionOutcome.FAILURE, MissionOutcome.INFEASIBLE)
    ledger = trace.ledger
    assert ledger.t_mission + ledger.t_residual == pytest.approx(ledger.t_available)
    assert ledger.cost_total - ledger.cost_mission == pytest.approx(sum(ledger.compute_samples))
    assert scenario.world.steps >= len(trace.legs)
