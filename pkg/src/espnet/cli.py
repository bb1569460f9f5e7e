"""Command line entry point: ``espnet run|validate|trace|plot``."""
import argparse
import json
import logging
import sys

from ._errors import EspnetError
from ._params import log_level_from_env
from .simnet import build_simnet, load_scenario, run_experiment

logger = logging.getLogger(__name__)

__all__ = ['main', 'build_parser']


def _positive(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, found {value}")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='espnet', description="Controller-managed ESP tunnel simulator.")
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Run a scenario and report.')
    run.add_argument('scenario', type=str, help='Scenario JSON file')
    run.add_argument('--runs', type=_positive, default=None, help='Number of runs (consecutive seeds)')
    run.add_argument('--seed', type=int, default=None, help='First seed, overrides the scenario')
    run.add_argument('--report', type=str, default=None, help='Write the JSON report here')
    run.add_argument('--jobs', type=_positive, default=1, help='Worker processes for independent runs')
    run.add_argument('--timings', action='store_true', help='Add wall-clock control timings to the report')

    validate = sub.add_parser('validate', help='Check a scenario file.')
    validate.add_argument('scenario', type=str, help='Scenario JSON file')

    trace = sub.add_parser('trace', help='Dump packet and control events as JSON lines.')
    trace.add_argument('scenario', type=str, help='Scenario JSON file')
    trace.add_argument('--out', type=str, default=None, help='Output file (stdout if omitted)')
    trace.add_argument('--seed', type=int, default=None, help='Seed, overrides the scenario')

    plot = sub.add_parser('plot', help='Draw the figures of a JSON report.')
    plot.add_argument('report', type=str, help='Report written by `run --report`')
    plot.add_argument('--out', type=str, required=True, help='Image file')
    plot.add_argument('--palette', type=str, default='office', help='Palette name')
    return parser


def _run(args) -> int:
    scenario = load_scenario(args.scenario)
    report = run_experiment(scenario, runs=args.runs, seed=args.seed, jobs=args.jobs, timings=args.timings)
    print(report.format_table())
    if args.report:
        with open(args.report, 'w') as f:
            f.write(report.to_json())
    if not all(r.payload_ok and r.conserved for r in report.runs):
        print("payload or conservation check failed", file=sys.stderr)
        return 1
    return 0


def _validate(args) -> int:
    s = load_scenario(args.scenario)
    topo = s.topology
    print(f"ok: {s.name} ({len(topo.switches) + len(topo.hosts)} nodes, {len(topo.links)} links, "
          f"{len(s.profiles)} profiles, {len(s.traffic)} flows)")
    return 0


def _trace(args) -> int:
    net = build_simnet(load_scenario(args.scenario), seed=args.seed, record_packets=True)
    net.run()
    lines = ''.join(json.dumps(e, sort_keys=True) + '\n' for e in net.trace_lines())
    if args.out:
        with open(args.out, 'w') as f:
            f.write(lines)
    else:
        sys.stdout.write(lines)
    return 0


def _plot(args) -> int:
    import matplotlib
    matplotlib.use('Agg')
    from .plotting import ReportArtist, plot_report

    with open(args.report, 'r') as f:
        report = json.load(f)
    plot_report(report, args.out, ReportArtist(palette=args.palette))
    return 0


_COMMANDS = {'run': _run, 'validate': _validate, 'trace': _trace, 'plot': _plot}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=log_level_from_env(), format='%(levelname)s %(name)s: %(message)s')
    try:
        return _COMMANDS[args.command](args)
    except (EspnetError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
