from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields, is_dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .config import Scenario, ScenarioConfig, build_scenario, bundled_scenarios, load_scenario
from .env import current_raster
from .executive import Executive, MissionTrace
from .interfaces import ILog
from .pathplan import orientations
from .utils import HydroMissionException


OUTPUT_ENV = 'HYDROMISSION_OUT'
DEFAULT_OUTPUT = 'hydromission_out'

SUMMARY_COLUMNS = ['run', 'seed', 'outcome', 'T_Available', 'T_Mission', 'T_Residual', 'replans', 'path_calls', 'legs',
                   'cost_mission', 'compute_total', 'cost_total', 'cpu_path', 'cpu_mission']
CONVERGENCE_COLUMNS = ['iteration', 'best_cost', 'mean_cost', 'mean_violation']
PATH3D_COLUMNS = ['s', 'X', 'Y', 'Z', 'psi', 'theta']
TIMEBUDGET_COLUMNS = ['run', 'T_Mission', 'T_Residual']
CPUTIME_COLUMNS = ['run', 'cpu_path', 'cpu_mission', 'path_share', 'mission_share']
LEGS_COLUMNS = ['run', 'i', 'j', 't_ij', 'realized', 'decision']
CURRENT_COLUMNS = ['x', 'y', 'magnitude']
PLOT_KINDS = ('convergence', 'path3d', 'timebudget', 'cputime')
CURRENT_RASTER_CELLS = 50


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT))


def write_csv(path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    with open(path, 'w', newline='') as file:
        writer = csv.DictWriter(file, fieldnames=list(columns), extrasaction='ignore', lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_csv(path) -> list[dict]:
    with open(path, newline='') as file:
        return list(csv.DictReader(file))


def read_trace(path) -> list[dict]:
    with open(path) as file:
        return [json.loads(line) for line in file if line.strip()]


def config_keys(cls=ScenarioConfig, prefix: str = '') -> list[str]:
    r'''
    Dotted keys of every scenario setting
    '''
    keys = []
    instance = cls()
    for f in fields(cls):
        value = getattr(instance, f.name)
        dotted = f"{prefix}{f.name}"
        if is_dataclass(value):
            keys.extend(config_keys(type(value), dotted + '.'))
        else:
            keys.append(f"{dotted} (default : {value!r})")
    return keys


# ----------------------------------------------------------------------------
# Plot data
# ----------------------------------------------------------------------------

def convergence_rows(events: list[dict], call: int = 0) -> list[dict]:
    r'''
    Generation history of the ``call``-th path planner call of a trace
    '''
    plans = [e['candidate'] for e in events if e['kind'] in ('path_plan', 'path_replan')]
    if not 0 <= call < len(plans):
        raise HydroMissionException(f"the trace holds {len(plans)} path planner call(s), cannot export call {call}", "CLI")
    return plans[call]['history']


def path3d_rows(events: list[dict]) -> list[dict]:
    r'''
    Executed polyline of a trace with arc length and segment orientations
    '''
    points = []
    for event in events:
        if event['kind'] != 'stretch':
            continue
        for point in event['positions']:
            if not points or point != points[-1]:
                points.append(point)
    if len(points) < 2:
        return [{'s': 0.0, 'X': p[0], 'Y': p[1], 'Z': p[2], 'psi': 0.0, 'theta': 0.0} for p in points]
    positions = np.asarray(points, dtype=float)
    psi, theta = orientations(positions)
    psi = np.append(psi, psi[-1])
    theta = np.append(theta, theta[-1])
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(positions, axis=0), axis=1))])
    return [{'s': s[k], 'X': x, 'Y': y, 'Z': z, 'psi': psi[k], 'theta': theta[k]} for k, (x, y, z) in enumerate(positions)]


def timebudget_rows(summary: list[dict]) -> list[dict]:
    return [{'run': row['run'], 'T_Mission': row['T_Mission'], 'T_Residual': row['T_Residual']} for row in summary]


def cputime_rows(summary: list[dict]) -> list[dict]:
    rows = []
    for row in summary:
        path, mission = float(row['cpu_path']), float(row['cpu_mission'])
        total = path + mission
        rows.append({'run': row['run'], 'cpu_path': path, 'cpu_mission': mission,
                     'path_share': path / total if total > 0 else 0.0, 'mission_share': mission / total if total > 0 else 0.0})
    return rows


def current_rows(scenario: Scenario, depth: float = 0.0) -> list[dict]:
    terrain = scenario.terrain
    step = max(terrain.extent_x, terrain.extent_y) / CURRENT_RASTER_CELLS
    xs, ys, magnitude = current_raster(scenario.world.field, depth, terrain.extent_x, terrain.extent_y, step)
    return [{'x': x, 'y': y, 'magnitude': magnitude[r, c]} for r, y in enumerate(ys) for c, x in enumerate(xs)]


def leg_rows(trace: MissionTrace, run: int) -> list[dict]:
    return [{'run': run, 'i': leg.edge[0], 'j': leg.edge[1], 't_ij': leg.expected, 'realized': leg.realized,
             'decision': str(leg.decision)} for leg in trace.legs]


# ----------------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------------

def execute(config: ScenarioConfig, seed: int, **kwargs) -> tuple[Scenario, MissionTrace]:
    r'''
    Build and fly one mission
    '''
    profile = config.with_seed(seed).profile(**kwargs)
    scenario = build_scenario(config, seed, profile, **kwargs)
    return scenario, Executive(profile, **kwargs).run_mission(scenario)


def __log_kwargs__(args: argparse.Namespace) -> dict:
    return {'verbose': args.verbose, 'warning': not args.no_warning}


def __output__(args: argparse.Namespace) -> Path:
    out = Path(args.out) if args.out else default_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args: argparse.Namespace) -> int:
    log = ILog(header="CLI", profile=None, **__log_kwargs__(args))
    try:
        config = load_scenario(args.scenario)
        if args.seed is not None:
            config = config.with_seed(args.seed)
        out = __output__(args)
        scenario, trace = execute(config, config.seed, **__log_kwargs__(args))
    except HydroMissionException as e:
        print(e, file=sys.stderr)
        return 1

    config.dump_json(out / 'config.json')
    trace.write_jsonl(out / 'trace.jsonl')
    write_csv(out / 'summary.csv', SUMMARY_COLUMNS, [trace.summary(0)])
    if any(e['kind'] == 'path_plan' for e in trace.events):
        write_csv(out / 'convergence.csv', CONVERGENCE_COLUMNS, convergence_rows(trace.events))
    write_csv(out / 'path3d.csv', PATH3D_COLUMNS, path3d_rows(trace.events))
    write_csv(out / 'current.csv', CURRENT_COLUMNS, current_rows(scenario))
    log.info(f"{trace.outcome}, artifacts written to {out}")
    return 0


def cmd_montecarlo(args: argparse.Namespace) -> int:
    log = ILog(header="CLI", profile=None, **__log_kwargs__(args))
    if args.runs < 1:
        print(HydroMissionException("--runs must be at least 1", "CLI"), file=sys.stderr)
        return 1
    try:
        config = load_scenario(args.scenario)
        base = config.seed if args.seed_base is None else args.seed_base
        config = config.with_seed(base)
        out = __output__(args)
    except HydroMissionException as e:
        print(e, file=sys.stderr)
        return 1

    def fly(run: int) -> MissionTrace:
        return execute(config, base + run, **__log_kwargs__(args))[1]

    # runs are independent, rows are gathered in run order
    summaries, legs = [], []
    with ThreadPoolExecutor(max_workers=max(args.jobs, 1)) as pool:
        futures = [pool.submit(fly, run) for run in range(args.runs)]
        for run, future in enumerate(futures):
            try:
                trace = future.result()
            except Exception as e:
                for pending in futures:
                    pending.cancel()
                print(HydroMissionException(f"run {run} (seed {base + run}) crashed: {e}", "CLI"), file=sys.stderr)
                return 1
            summaries.append(trace.summary(run))
            legs.extend(leg_rows(trace, run))
            log.debug(f"run {run} (seed {base + run}) : {trace.outcome}")

    config.dump_json(out / 'config.json')
    write_csv(out / 'summary.csv', SUMMARY_COLUMNS, summaries)
    write_csv(out / 'legs.csv', LEGS_COLUMNS, legs)
    write_csv(out / 'cputime.csv', CPUTIME_COLUMNS, cputime_rows(summaries))
    successes = sum(1 for row in summaries if row['outcome'] == 'success')
    log.info(f"{successes}/{args.runs} successful missions, tables written to {out}")
    return 0


def cmd_plotdata(args: argparse.Namespace) -> int:
    source = Path(args.trace)
    if not source.is_file():
        print(HydroMissionException(f"file not found: {source}", "CLI"), file=sys.stderr)
        return 1
    target = Path(args.out) if args.out else source.with_name(f"{args.kind}.csv")
    try:
        if args.kind == 'convergence':
            write_csv(target, CONVERGENCE_COLUMNS, convergence_rows(read_trace(source), args.call))
        elif args.kind == 'path3d':
            write_csv(target, PATH3D_COLUMNS, path3d_rows(read_trace(source)))
        elif args.kind == 'timebudget':
            write_csv(target, TIMEBUDGET_COLUMNS, timebudget_rows(read_csv(source)))
        else:
            write_csv(target, CPUTIME_COLUMNS, cputime_rows(read_csv(source)))
    except (HydroMissionException, KeyError, json.JSONDecodeError) as e:
        print(HydroMissionException(f"cannot export {args.kind} from {source}: {e}", "CLI"), file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    epilog = "scenario keys:\n  " + "\n  ".join(config_keys()) + "\n\nbundled scenarios: " + ", ".join(bundled_scenarios())
    parser = argparse.ArgumentParser(prog='hydromission', description="Hybrid BBO mission and path planning simulator",
                                     epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument('-v', '--verbose', action='store_true', help="debug output")
    parser.add_argument('--no-warning', action='store_true', help="hide warnings")
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help="fly one mission")
    run.add_argument('scenario', help="scenario file or bundled scenario name")
    run.add_argument('--seed', type=int, default=None, help="override the scenario seed")
    run.add_argument('--out', default=None, help=f"output directory (default : ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    run.set_defaults(handler=cmd_run)

    montecarlo = commands.add_parser('montecarlo', help="fly independent missions, one seed each")
    montecarlo.add_argument('scenario', help="scenario file or bundled scenario name")
    montecarlo.add_argument('--runs', type=int, default=100, help="number of missions")
    montecarlo.add_argument('--seed-base', type=int, default=None, help="seed of the first run, the scenario seed by default")
    montecarlo.add_argument('--jobs', type=int, default=1, help="missions flown in parallel")
    montecarlo.add_argument('--out', default=None, help=f"output directory (default : ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    montecarlo.set_defaults(handler=cmd_montecarlo)

    plotdata = commands.add_parser('plotdata', help="export plot ready CSV series")
    plotdata.add_argument('trace', help="trace.jsonl (convergence, path3d) or summary.csv (timebudget, cputime)")
    plotdata.add_argument('--kind', required=True, choices=PLOT_KINDS)
    plotdata.add_argument('--call', type=int, default=0, help="path planner call to export (convergence)")
    plotdata.add_argument('--out', default=None, help="output CSV (default : <kind>.csv next to the input)")
    plotdata.set_defaults(handler=cmd_plotdata)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)
