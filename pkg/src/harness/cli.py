"""
Command-line surface of the experiment harness
"""

import sys
import json
import argparse
import logging
from pathlib import Path
from typing import List, Optional

from ..solver.she import SolverBlowUpError
from .scenario import ScenarioError, load_scenario, preset, PRESET_NAMES
from .estimators import BlowUpThresholdError
from .runner import ExperimentRunner

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_SCHEMA = 2
EXIT_BLOWUP = 3

SCENARIO_COMMANDS = {
    'simulate': 'Run one trajectory and export its snapshots',
    'expand': 'Compute the expansion coefficients of one replica',
    'remainder': 'Estimate a remainder moment at the scenario point',
    'rates': 'Fit convergence rates over the epsilon sweep',
    'divergence': 'Fit coefficient growth over the delta sweep',
    'survival': 'Estimate stopping-time survival over the epsilon sweep',
    'covariance-check': 'Test per-mode variances of the mollified noise (--replicas sets the sample count)',
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='heatwave',
        description="Heatwave - stochastic heat equation expansion harness"
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    for name, help_text in SCENARIO_COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument('scenario', help='Scenario JSON file (schema 1)')
        sub.add_argument('--seed', type=int, default=None,
                         help='Master seed (default: scenario seed)')
        sub.add_argument('--replicas', type=int, default=None,
                         help='Replica count M (default: scenario replicas)')
        sub.add_argument('--out', default=None,
                         help='Output directory (default: output.directory/<scenario name>)')
        sub.add_argument('--workers', type=int, default=None,
                         help='Worker processes (default: SHE_WORKERS or physical CPUs)')
        sub.add_argument('--check', action='store_true',
                         help='Exit with status 1 if the acceptance verdict fails')

    presets = subparsers.add_parser('presets', help='List presets or write one as a scenario file')
    presets.add_argument('name', nargs='?', choices=PRESET_NAMES, help='Preset to export')
    presets.add_argument('--dimension', type=int, default=1, choices=[1, 2, 3],
                         help='Spatial dimension (default: 1)')
    presets.add_argument('--out', default=None, help='Directory to write <name>.json into')
    return parser


def _presets(args) -> int:
    if args.name is None:
        for name in PRESET_NAMES:
            print(name)
        return EXIT_OK

    scenario = preset(args.name, dimension=args.dimension)
    text = json.dumps(scenario.echo(), indent=2)
    if args.out:
        target = Path(args.out)
        target.mkdir(parents=True, exist_ok=True)
        (target / f"{args.name}.json").write_text(text + "\n")
        logger.info(f"Wrote preset {args.name} to {target}")
    else:
        print(text)
    return EXIT_OK


def cli(argv: Optional[List[str]] = None) -> int:
    """Run one harness command

    Returns:
        0 on success, 1 for a failed --check, 2 for a schema violation,
        3 when the blow-up threshold is exceeded
    """
    args = build_parser().parse_args(argv)
    if args.command == 'presets':
        return _presets(args)

    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as e:
        for problem in e.problems:
            print(f"schema error: {problem}", file=sys.stderr)
        return EXIT_SCHEMA

    runner = ExperimentRunner(scenario, seed=args.seed, replicas=args.replicas,
                              workers=args.workers, out_dir=args.out)
    command = args.command.replace('-', '_')
    try:
        table, passed = getattr(runner, command)()
    except (BlowUpThresholdError, SolverBlowUpError) as e:
        logger.error(f"{args.command} aborted: {e}")
        return EXIT_BLOWUP
    except ValueError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_CHECK_FAILED

    print(table.to_string(index=False))
    if args.check and not passed:
        logger.error(f"{args.command}: acceptance check failed")
        return EXIT_CHECK_FAILED
    return EXIT_OK
