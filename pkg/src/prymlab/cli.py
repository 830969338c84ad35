#!/usr/bin/env python3
import argparse
import logging
import os
import sys
import time
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .base import ExitCode, IdentityReport, NumericError, Sample, ValidationError
from .config import COMMANDS, IDENTITIES, RunConfig, config_hash, load_config
from .lab import Lab
from .prym.data import LiftChoice
from .report import RunReport, emit_report, write_text

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

#: Largest accepted lift score for g ≥ 2.
LIFT_TOLERANCE = 1e-6

PRYM_DATA_FILE = "prym_data.json"


def _lift_dict(lift: Optional[LiftChoice]) -> Optional[Dict[str, Any]]:
    if lift is None:
        return None
    return {
        "w_sign": lift.w_sign,
        "shift_u": [list(lift.shift_u[0]), list(lift.shift_u[1])],
        "shift_v": [list(lift.shift_v[0]), list(lift.shift_v[1])],
        "shift_w": [list(lift.shift_w[0]), list(lift.shift_w[1])],
        "score": lift.score.hex(),
        "candidates": lift.candidates,
    }


def _finish(lab: Lab, command: str, reports: List[IdentityReport], started: float, **notes: str) -> RunReport:
    data = lab.data
    report = RunReport(
        command=command,
        config_hash=config_hash(lab.config),
        reports=reports,
        constants=None if lab.constants is None else lab.constants.as_dict(),
        w_sign=lab.w_sign if lab.constants is not None else None,
        lift=_lift_dict(data.lift) if data is not None else None,
        wall_time=time.perf_counter() - started,
        notes=dict(notes),
    )
    if lab.pairing is not None:
        report.notes.setdefault("pairing", lab.pairing)
    log = logger.info if report.passed else logger.warning
    log(f"{command}: {'pass' if report.passed else 'FAIL'} in {report.wall_time:.1f} s")
    return report


def _prym_data_report(lab: Lab) -> IdentityReport:
    data = lab.build_data()
    assert data.lift is not None
    sample = Sample(n=0, m=0, nu=0, z=tuple(complex(x) for x in data.A), residual=data.lift.score)
    tolerance = LIFT_TOLERANCE if data.g >= 2 else float("inf")
    return IdentityReport.from_samples("lift", [sample], tolerance, {"g": str(data.g)})


def run(config: RunConfig, out_dir: Optional[str] = None) -> RunReport:
    """Executes the configured command.

    :param prymlab.config.RunConfig config: The configuration; ``command`` selects the stage.
    :param out_dir: When given, the report JSON and the residual CSV are written there.

    :return: The run report.
    :rtype: prymlab.report.RunReport

    :raises ValidationError: Invalid curve, points or configuration.
    :raises NumericError: A numerical stage failed.
    :raises OSError: The output could not be written.
    """
    if config.command == "negative-control":
        return negative_control(config, out_dir=out_dir)
    started = time.perf_counter()
    with Lab(config) as lab:
        command = config.command
        if command == "periods":
            report = _finish(lab, command, [lab.verify_periods()], started)
        elif command == "prym-data":
            report = _finish(lab, command, [_prym_data_report(lab)], started)
        elif command == "recover-constants":
            report = _finish(lab, command, [lab.recover_constants()], started)
        elif command == "verify":
            if config.identity is None:
                raise ValidationError("verify needs an identity")
            report = _finish(lab, f"verify {config.identity}", [lab.verify(config.identity)], started)
        elif command == "nv-check":
            report = _finish(lab, command, [lab.verify("nv")], started)
        else:
            report = _finish(lab, command, lab.suite(), started)
        if out_dir is not None:
            emit_report(report, out_dir)
            if command == "prym-data" and lab.data is not None:
                write_text(os.path.join(out_dir, PRYM_DATA_FILE), lab.data.to_json())
    return report


def negative_control(config: RunConfig, perturbation: Optional[float] = None, out_dir: Optional[str] = None) -> RunReport:
    """Runs the suite on a perturbed period matrix with the constants of the genuine data.

    :param prymlab.config.RunConfig config: The configuration.
    :param perturbation: Size of the symmetric perturbation of Π; ``config.perturbation`` by default.
    :param out_dir: When given, the report is written there.

    :return: The run report; it is expected to fail for a perturbation well above the tolerances.
    :rtype: prymlab.report.RunReport
    """
    started = time.perf_counter()
    with Lab(config) as lab:
        reports, notes = lab.negative_control(perturbation)
        report = _finish(lab, "negative-control", reports, started, **notes)
    if out_dir is not None:
        emit_report(report, out_dir)
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prymlab",
        description="Numerical verification of the Prym theta-function identities of the discrete Schrödinger lattice.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS, help="Stage to run")
    parser.add_argument("identity", nargs="?", choices=IDENTITIES, help="Identity for the verify command")
    parser.add_argument("--config", required=True, help="Path of the JSON run configuration")
    parser.add_argument("--out", default=None, help="Directory for report.json and residuals.csv")
    parser.add_argument("--threads", type=int, default=None, help="Override the configured thread count")
    parser.add_argument("--seed-override", type=int, default=None, help="Override the configured seed")
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help="Logging level (default: INFO)",
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Command line entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    try:
        config = load_config(args.config).with_overrides(
            command=args.command,
            identity=args.identity,
            threads=args.threads,
            seed=args.seed_override,
        )
    except (ValidationError, OSError) as e:
        logger.error(f"Invalid configuration: {e}")
        return ExitCode.CONFIG_ERROR
    try:
        report = run(config, args.out)
    except ValidationError as e:
        logger.error(f"Invalid input: {e}")
        return ExitCode.CONFIG_ERROR
    except (NumericError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return ExitCode.NUMERIC_ERROR
    return ExitCode.PASS if report.passed else ExitCode.FAIL


if __name__ == "__main__":
    sys.exit(main())
