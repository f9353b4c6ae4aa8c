#!/usr/bin/env python3

import sys
import json
import argparse
from pathlib import Path

from gpi_bench import __version__
from gpi_bench.src.core.experiment_runner import gap_scaling_correlation, ordering_report, run_experiment
from gpi_bench.src.core.instances import InstanceParameterError, build_instance
from gpi_bench.src.core.mdp import MDPValidationError, optimal_value_and_policy
from gpi_bench.src.core.verification import verify_suite
from gpi_bench.src.utils.config import ConfigValidationError, load_config
from gpi_bench.src.utils.logging_setup import setup_logging
from gpi_bench.src.utils.mdp_io import save_mdp
from gpi_bench.src.utils.results_store import audit_phase_log, read_results
from gpi_bench.src.utils.svg_generators.figure_page import PlotError, emit_plot

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ABORTED = 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog='gpi', description='Good-policy identification experiments on tabular episodic MDPs')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--verbose', action='store_true', help='Enable debug logging')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Run an experiment described by a JSON config')
    run.add_argument('--config', type=str, required=True, help='Path to the experiment config (JSON)')
    run.add_argument('--jobs', type=int, default=1, help='Number of worker processes (default: 1)')
    run.add_argument('--paper-delta', action='store_true',
                     help='Use delta = 0.001 instead of the configured value')
    run.add_argument('--allow-abort', action='store_true',
                     help='Exit with status 0 even when some trials hit a phase or episode cap')
    run.add_argument('--output', type=str, help='Override the config output directory')

    plot = sub.add_parser('plot', help='Render results tables as an SVG figure')
    plot.add_argument('--input', type=str, nargs='+', required=True,
                      help='One results.csv per instance; each becomes a panel')
    plot.add_argument('--out', type=str, required=True, help='Output SVG path')
    plot.add_argument('--title', type=str, nargs='+', help='Panel titles (default: file names)')

    verify = sub.add_parser('verify', help='Run the brute-force verification suite')
    verify.add_argument('--filter', type=str, help='Only run checks whose name contains this string')

    instance = sub.add_parser('instance', help='Build an instance and optionally dump it as JSON')
    instance.add_argument('--family', type=str, required=True, help='Instance family name')
    instance.add_argument('--params', type=str, nargs='*', default=[],
                          help='Parameters as a JSON object or key=value pairs')
    instance.add_argument('--dump', type=str, help='Write the MDP to this JSON file')

    audit = sub.add_parser('audit', help='Check a phase log for budget compliance')
    audit.add_argument('--log', type=str, required=True, help='Path to phases.jsonl')
    return parser


def parse_params(items):
    """Accept either one JSON object or key=value pairs with JSON-decoded values."""
    if len(items) == 1 and items[0].lstrip().startswith('{'):
        params = json.loads(items[0])
        if not isinstance(params, dict):
            raise ValueError("--params JSON must be an object")
        return params
    params = {}
    for item in items:
        if '=' not in item:
            raise ValueError(f"Expected key=value, got '{item}'")
        key, raw = item.split('=', 1)
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def cmd_run(args):
    if args.jobs < 1:
        print("Error: --jobs must be at least 1")
        return EXIT_ERROR
    try:
        config = load_config(args.config, paper_delta=args.paper_delta)
    except ConfigValidationError as e:
        print(f"Error: {e}")
        return EXIT_ERROR

    try:
        result = run_experiment(config, jobs=args.jobs,
                                output_directory=Path(args.output) if args.output else None)
    except (PermissionError, RuntimeError, ConfigValidationError) as e:
        print(f"Error: {e}")
        return EXIT_ERROR

    print(f"V* = {result.optimal_value:.6f}, delta = {config.delta}")
    print(result.summary.to_string(index=False))
    if set(config.algorithms) >= {'bee-gpi', 'bpi-ucrl'}:
        print()
        print(ordering_report(result.summary).to_string(index=False))
    if 'bee-gpi' in config.algorithms and len(config.mu0_grid) > 1:
        print(f"Spearman(mu0, mean tau) for bee-gpi: {gap_scaling_correlation(result.summary):.3f}")
    print(f"Results written to {result.results_path}")

    if result.aborted and not args.allow_abort:
        print(f"Error: {result.aborted} trial(s) aborted (use --allow-abort to accept)")
        return EXIT_ABORTED
    return EXIT_OK


def cmd_plot(args):
    titles = args.title or [Path(p).stem for p in args.input]
    try:
        tables = [read_results(p) for p in args.input]
        out = emit_plot(tables, args.out, titles=titles)
    except (OSError, ValueError) as e:
        # PlotError is a ValueError
        print(f"Error: {e}")
        return EXIT_ERROR
    print(f"Figure written to {out}")
    return EXIT_OK


def cmd_verify(args):
    try:
        report = verify_suite(args.filter)
    except ValueError as e:
        print(f"Error: {e}")
        return EXIT_ERROR
    print(report.format())
    return EXIT_OK if report.passed else EXIT_ERROR


def cmd_instance(args):
    try:
        params = parse_params(args.params)
        mdp = build_instance(args.family, params)
    except (ValueError, InstanceParameterError, MDPValidationError) as e:
        print(f"Error: {e}")
        return EXIT_ERROR
    value, _ = optimal_value_and_policy(mdp)
    print(f"{args.family}: S={mdp.S} A={mdp.A} H={mdp.H} V*={value:.6f}")
    if args.dump:
        save_mdp(mdp, args.dump)
        print(f"MDP written to {args.dump}")
    return EXIT_OK


def cmd_audit(args):
    try:
        violations = audit_phase_log(args.log)
    except (OSError, ValueError) as e:
        print(f"Error: {e}")
        return EXIT_ERROR
    if violations:
        for line in violations:
            print(line)
        print(f"Error: {len(violations)} budget violation(s)")
        return EXIT_ERROR
    print("All logged phases respect their budgets")
    return EXIT_OK


COMMANDS = {
    'run': cmd_run,
    'plot': cmd_plot,
    'verify': cmd_verify,
    'instance': cmd_instance,
    'audit': cmd_audit,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
