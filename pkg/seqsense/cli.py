"""Command-line interface."""

import argparse
import logging
import sys
from typing import List, Optional

from attrs import evolve

from seqsense._meta import __version__
from seqsense.calibration import pooled_constants
from seqsense.config import ConfigError, ExperimentConfig, load_config
from seqsense.fusion import Scheme
from seqsense.harness import FAMILIES, calibrate_points, family_points, manifest_path, sweep
from seqsense.manifest import Manifest
from seqsense.selftest import run_all

LOG = logging.getLogger(__name__)

EXIT_OK: int = 0
EXIT_FAILURE: int = 1
EXIT_CONFIG: int = 2


def _add_common(parser: argparse.ArgumentParser, out: bool = True):
    parser.add_argument("--config", required=True, help="JSON experiment configuration (path or URL).")
    if out:
        parser.add_argument(
            "--out", default=".", help="Output directory for tables and the manifest (default: .)."
        )
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Master seed; overrides the config file and SEQSENSE_SEED.",
    )


def _add_selection(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--family",
        default="error-grid",
        choices=[f.replace("_", "-") for f in FAMILIES],
        help="Experiment family (default: error-grid).",
    )
    parser.add_argument(
        "--scheme",
        action="append",
        choices=[s.value for s in Scheme],
        help="Only run this scheme; may be repeated.",
    )
    parser.add_argument(
        "--bits", type=int, action="append", help="Only run these bit budgets; may be repeated."
    )
    parser.add_argument("--trials", type=int, default=None, help="Trials per hypothesis and point.")
    parser.add_argument("--workers", type=int, default=1, help="Parallel workers (default: 1).")


def build_parser() -> argparse.ArgumentParser:
    """The argument parser with one sub-parser per command."""
    parser = argparse.ArgumentParser(
        prog="seqsense", description="Cooperative sequential spectrum sensing experiments."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="Increase log verbosity (-v, -vv)."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    constants = commands.add_parser("constants", help="Estimate KL numbers and the LLR bound.")
    _add_common(constants, out=False)

    calibrate = commands.add_parser("calibrate", help="Calibrate thresholds into the manifest.")
    _add_common(calibrate)
    _add_selection(calibrate)

    run = commands.add_parser("run", help="Run calibrated points and write the result table.")
    _add_common(run)
    _add_selection(run)

    sweep_ = commands.add_parser("sweep", help="Calibrate as needed, run and write the table.")
    _add_common(sweep_)
    _add_selection(sweep_)

    selftest = commands.add_parser("selftest", help="Check the simulator against exact references.")
    selftest.add_argument("--trials", type=int, default=100_000, help="Trials per check.")
    selftest.add_argument("--seed", type=int, default=0, help="Seed (default: 0).")
    selftest.add_argument("--workers", type=int, default=1, help="Parallel workers (default: 1).")

    return parser


def _select(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    """Apply ``--scheme``, ``--bits`` and ``--trials``."""
    schemes = [
        s
        for s in config.schemes
        if (not args.scheme or s.kind.value in args.scheme)
        and (not args.bits or s.bits is None or s.bits in args.bits)
    ]
    if not schemes:
        raise ConfigError("No configured scheme matches ``--scheme``/``--bits``.")
    changes = {"schemes": schemes}
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError(f"``--trials`` must be at least 1, got {args.trials}.")
        changes["n_trials"] = args.trials
    return evolve(config, **changes)


def _constants(args: argparse.Namespace) -> int:
    config = load_config(args.config, seed=args.seed)
    constants = pooled_constants(
        config.su_models(), config.constants.n_samples, config.constants.quantile, config.seed
    )
    sys.stdout.write(
        f"I0 {constants.kl_h0:.6g} +- {constants.se_h0:.2g}\n"
        f"I1 {constants.kl_h1:.6g} +- {constants.se_h1:.2g}\n"
        f"phi {constants.phi:.6g}\n"
    )
    return EXIT_OK


def _calibrate(args: argparse.Namespace) -> int:
    config = _select(load_config(args.config, seed=args.seed), args)
    manifest = Manifest(manifest_path(config, args.out), mode="w+")
    added = calibrate_points(family_points(args.family, config), config, manifest, args.workers)
    sys.stdout.write(f"{added} point(s) calibrated; manifest at {manifest.fpath}\n")
    return EXIT_OK


def _run(args: argparse.Namespace, calibrate: bool) -> int:
    config = _select(load_config(args.config, seed=args.seed), args)
    if not calibrate:
        path = manifest_path(config, args.out)
        if not Manifest(path, mode="r").exists:
            raise ConfigError(f"Calibration manifest {path} does not exist; run ``calibrate`` first.")
    fpath = sweep(args.family, config, args.out, workers=args.workers, calibrate=calibrate)
    sys.stdout.write(f"{fpath}\n")
    return EXIT_OK


def _selftest(args: argparse.Namespace) -> int:
    results = run_all(n_trials=args.trials, seed=args.seed, workers=args.workers)
    for result in results:
        sys.stdout.write(f"{'ok    ' if result.passed else 'FAILED'} {result.name}: {result.detail}\n")
    return EXIT_OK if all(result.passed for result in results) else EXIT_FAILURE


def main(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv`` and dispatch to the command.

    Returns
    -------
    int
        ``0`` on success, ``2`` on configuration errors and ``1`` on any other
        failure.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "constants":
            return _constants(args)
        if args.command == "calibrate":
            return _calibrate(args)
        if args.command == "run":
            return _run(args, calibrate=False)
        if args.command == "sweep":
            return _run(args, calibrate=True)
        return _selftest(args)
    except ConfigError as err:
        sys.stderr.write(f"seqsense: configuration error: {err}\n")
        return EXIT_CONFIG
    except Exception as err:
        LOG.debug("Command failed", exc_info=True)
        sys.stderr.write(f"seqsense: {type(err).__name__}: {err}\n")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
