#!/usr/bin/env python3
import csv
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .base import (
    IdentityReport,
    Sample,
    hex_complex,
    hex_float,
    unhex_complex,
    unhex_float,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

REPORT_FILE = "report.json"
RESIDUALS_FILE = "residuals.csv"


@dataclass
class RunReport:
    """
    RunReport API

    Outcome of one command: the identity reports, the recovered constants and
    the lift that was committed. ``passed`` is the conjunction of all reports.
    """

    command: str
    config_hash: str
    reports: List[IdentityReport] = field(default_factory=list)  # type: ignore
    constants: Optional[Dict[str, complex]] = None
    w_sign: Optional[int] = None
    lift: Optional[Dict[str, Any]] = None
    wall_time: float = 0.0
    notes: Dict[str, str] = field(default_factory=dict)  # type: ignore
    schema_version: int = SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return bool(self.reports) and all(r.passed for r in self.reports)

    def report(self, name: str) -> IdentityReport:
        for r in self.reports:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "command": self.command,
            "config_hash": self.config_hash,
            "pass": self.passed,
            "wall_time": hex_float(self.wall_time),
            "constants": None if self.constants is None else {k: hex_complex(v) for k, v in self.constants.items()},
            "w_sign": self.w_sign,
            "lift": self.lift,
            "notes": dict(self.notes),
            "reports": [_identity_to_dict(r) for r in self.reports],
        }

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "RunReport":
        constants = doc.get("constants")
        return cls(
            command=doc["command"],
            config_hash=doc["config_hash"],
            reports=[_identity_from_dict(r) for r in doc["reports"]],
            constants=None if constants is None else {k: unhex_complex(v) for k, v in constants.items()},
            w_sign=doc.get("w_sign"),
            lift=doc.get("lift"),
            wall_time=unhex_float(doc["wall_time"]),
            notes=dict(doc.get("notes", {})),
            schema_version=doc["schema_version"],
        )


def _identity_to_dict(report: IdentityReport) -> Dict[str, Any]:
    return {
        "name": report.name,
        "sample_count": report.sample_count,
        "max_rel_residual": hex_float(report.max_rel_residual),
        "mean_rel_residual": hex_float(report.mean_rel_residual),
        "tolerance": hex_float(report.tolerance),
        "pass": report.passed,
        "notes": dict(report.notes),
        "samples": [
            {
                "n": s.n,
                "m": s.m,
                "nu": s.nu,
                "z": [hex_complex(z) for z in s.z],
                "residual": hex_float(s.residual),
            }
            for s in report.samples
        ],
    }


def _identity_from_dict(doc: Dict[str, Any]) -> IdentityReport:
    return IdentityReport(
        name=doc["name"],
        sample_count=doc["sample_count"],
        max_rel_residual=unhex_float(doc["max_rel_residual"]),
        mean_rel_residual=unhex_float(doc["mean_rel_residual"]),
        tolerance=unhex_float(doc["tolerance"]),
        passed=doc["pass"],
        samples=[
            Sample(
                n=s["n"],
                m=s["m"],
                nu=s["nu"],
                z=tuple(unhex_complex(z) for z in s["z"]),
                residual=unhex_float(s["residual"]),
            )
            for s in doc["samples"]
        ],
        notes=dict(doc["notes"]),
    )


def report_json(report: RunReport) -> str:
    """The canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def residual_rows(report: RunReport) -> Tuple[List[str], List[List[str]]]:
    """Header and rows of the residual table, one row per sample."""
    width = max((len(s.z) for r in report.reports for s in r.samples), default=0)
    header = ["identity", "n", "m", "nu"]
    header += [f"Z_re{i + 1}" for i in range(width)]
    header += [f"Z_im{i + 1}" for i in range(width)]
    header.append("residual")
    rows: List[List[str]] = []
    for r in report.reports:
        for s in r.samples:
            pad = [""] * (width - len(s.z))
            row = [r.name, str(s.n), str(s.m), str(s.nu)]
            row += [repr(complex(z).real) for z in s.z] + pad
            row += [repr(complex(z).imag) for z in s.z] + pad
            row.append(repr(float(s.residual)))
            rows.append(row)
    return header, rows


def write_text(path: str, text: str) -> None:
    """Writes ``text``, replacing any existing file.

    :raises OSError: The file cannot be written; the message names the path.
    """
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise OSError(e.errno, f"Cannot write {path}: {e.strerror}", path) from e


def emit_report(report: RunReport, out_dir: str) -> Tuple[str, str]:
    """Writes the report JSON and the residual CSV into ``out_dir``, creating it if needed.

    :param prymlab.report.RunReport report: The report.
    :param str out_dir: Output directory.

    :return: (JSON path, CSV path).
    :rtype: Tuple[str, str]

    :raises OSError: The directory or a file cannot be written.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise OSError(e.errno, f"Cannot create {out_dir}: {e.strerror}", out_dir) from e
    json_path = os.path.join(out_dir, REPORT_FILE)
    csv_path = os.path.join(out_dir, RESIDUALS_FILE)
    write_text(json_path, report_json(report))

    header, rows = residual_rows(report)
    try:
        with open(csv_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise OSError(e.errno, f"Cannot write {csv_path}: {e.strerror}", csv_path) from e
    logger.info(f"Report written to {json_path} ({len(rows)} residual rows)")
    return json_path, csv_path


def load_report(path: str) -> RunReport:
    """Reads a report written by ``emit_report()``; floats reload bit-exactly.

    :raises OSError: The file cannot be read.
    :raises ValueError: The schema version differs from ``SCHEMA_VERSION``.
    """
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as e:
        raise OSError(e.errno, f"Cannot read {path}: {e.strerror}", path) from e
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"Report schema {doc.get('schema_version')} is not {SCHEMA_VERSION}")
    return RunReport.from_dict(doc)
