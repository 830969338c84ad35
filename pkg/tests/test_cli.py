#!/usr/bin/env python3
import csv
import json
import os
from dataclasses import replace
from typing import Any, Dict

import pytest

import prymlab
from prymlab.base import ConfigError, ExitCode, IdentityReport, Sample
from prymlab.cli import main, run
from prymlab.config import RunConfig, config_hash, load_config, parse_config
from prymlab.lab import SUITE
from prymlab.report import (
    RESIDUALS_FILE,
    SCHEMA_VERSION,
    RunReport,
    emit_report,
    load_report,
    report_json,
    residual_rows,
)

G1_CONFIG = os.path.join(os.path.dirname(prymlab.__file__), "configs", "g1_reference.json")


def _doc() -> Dict[str, Any]:
    with open(G1_CONFIG, encoding="utf-8") as f:
        return json.load(f)


def _write(tmp_path, doc: Any, name: str = "config.json") -> str:
    path = os.path.join(str(tmp_path), name)
    with open(path, "w", encoding="utf-8") as f:
        f.write(doc if isinstance(doc, str) else json.dumps(doc))
    return path


@pytest.mark.parametrize(
    "change, field_path",
    [
        ({"marked_x": None}, "marked_x"),
        ({"marked_x": [0.3, "x", [0.0, 1.1]]}, "marked_x[1]"),
        ({"marked_x": [0.3, [0.7, 0.2, 0.1], [0.0, 1.1]]}, "marked_x[1]"),
        ({"theta": {"max_radius": 0}}, "theta.max_radius"),
        ({"theta": {"radius": 3}}, "theta.radius"),
        ({"tolerances": {"E": 1e-6}}, "tolerances.E"),
        ({"curve": {"h_roots": [1, 2, 3, 4], "h_coeffs": [1, 0, 0, 0, 1]}}, "curve"),
        ({"window": {"n": [5, 0]}}, "window.n"),
        ({"command": "plot"}, "command"),
        ({"perturbation": -1.0}, "perturbation"),
        ({"colour": "blue"}, "colour"),
    ],
)
def test_config_errors(change: Dict[str, Any], field_path: str):
    doc = _doc()
    for key, value in change.items():
        if value is None:
            del doc[key]
        else:
            doc[key] = value
    with pytest.raises(ConfigError) as e:
        parse_config(doc)
    assert e.value.field_path == field_path


def test_invalid_json(tmp_path):
    with pytest.raises(ConfigError) as e:
        load_config(_write(tmp_path, "{ not json"))
    assert e.value.field_path == "<root>"


def test_config_defaults_and_overrides(g1_config: RunConfig):
    assert g1_config.marked_x[1] == 0.7 + 0.2j
    assert g1_config.tolerance("five-term") == 1e-6
    assert g1_config.tolerance("four_point") == 1e-8
    assert g1_config.operators.half_width == 4 * 8 + 6
    config = g1_config.with_overrides(command="verify", identity="A", threads=1, seed=5)
    assert (config.command, config.identity, config.threads, config.seed) == ("verify", "A", 1, 5)
    with pytest.raises(ConfigError) as e:
        g1_config.with_overrides(command="verify")
    assert e.value.field_path == "identity"

    minimal = parse_config({"curve": {"h_roots": [-2, -1, 1, 2]}, "marked_x": [0.3, 0.4, 0.5], "extra_x": 0.6})
    assert minimal.command == "all"
    assert minimal.threads == 1
    assert minimal.tolerance("A") == 1e-8


def test_config_hash(g1_config: RunConfig):
    assert config_hash(load_config(G1_CONFIG)) == config_hash(g1_config)
    assert len(config_hash(g1_config)) == 64
    assert config_hash(g1_config.with_overrides(seed=1)) != config_hash(g1_config)

    doc = _doc()
    doc["tolerances"] = {name.replace("-", "_"): tol for name, tol in doc["tolerances"].items()}
    assert config_hash(parse_config(doc)) == config_hash(g1_config)


def _run_report() -> RunReport:
    first = IdentityReport.from_samples(
        "A",
        [Sample(n=n, m=0, nu=n % 2, z=(0.1 + 0.2j, -0.3j), residual=1e-10 * (n + 1)) for n in range(3)],
        1e-8,
    )
    second = IdentityReport.from_samples("periods", [Sample(n=0, m=0, nu=0, z=(), residual=1 / 3)], 1e-8, {"g": "1"})
    return RunReport(
        command="all",
        config_hash="0" * 64,
        reports=[first, second],
        constants={"c1": 1.0 + 0.1j, "c2": 1 / 7},
        w_sign=-1,
        wall_time=0.1,
        notes={"pairing": "direct"},
    )


def test_report_emit_and_load(tmp_path):
    report = _run_report()
    assert not report.passed
    json_path, csv_path = emit_report(report, os.path.join(str(tmp_path), "out"))
    loaded = load_report(json_path)
    assert loaded.to_dict() == report.to_dict()
    assert loaded.report("periods").max_rel_residual == 1 / 3
    assert loaded.constants == report.constants
    assert loaded.schema_version == SCHEMA_VERSION

    with open(csv_path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    header, expected = residual_rows(report)
    assert rows[0] == header == ["identity", "n", "m", "nu", "Z_re1", "Z_re2", "Z_im1", "Z_im2", "residual"]
    assert len(rows) - 1 == sum(r.sample_count for r in report.reports) == len(expected)
    assert rows[-1][4:8] == ["", "", "", ""]
    assert float(rows[1][6]) == 0.2


def test_report_schema_mismatch(tmp_path):
    doc = _run_report().to_dict()
    doc["schema_version"] = SCHEMA_VERSION + 1
    with pytest.raises(ValueError):
        load_report(_write(tmp_path, doc, "report.json"))
    with pytest.raises(KeyError):
        _run_report().report("nv")


def test_main_rejects_bad_config(tmp_path):
    doc = _doc()
    del doc["extra_x"]
    assert main(["all", "--config", _write(tmp_path, doc)]) == ExitCode.CONFIG_ERROR
    assert main(["all", "--config", os.path.join(str(tmp_path), "missing.json")]) == ExitCode.CONFIG_ERROR
    assert main(["verify", "--config", G1_CONFIG]) == ExitCode.CONFIG_ERROR


def test_main_periods(tmp_path):
    out = os.path.join(str(tmp_path), "periods")
    assert main(["periods", "--config", G1_CONFIG, "--out", out, "--threads", "1"]) == ExitCode.PASS
    report = load_report(os.path.join(out, "report.json"))
    assert report.command == "periods"
    assert report.passed
    assert "agm_tau" in report.report("periods").notes
    assert os.path.exists(os.path.join(out, RESIDUALS_FILE))


def test_main_prym_data(tmp_path):
    out = str(tmp_path)
    assert main(["prym-data", "--config", G1_CONFIG, "--out", out, "--seed-override", "3"]) == ExitCode.PASS
    report = load_report(os.path.join(out, "report.json"))
    assert report.lift is not None
    assert report.config_hash == config_hash(load_config(G1_CONFIG).with_overrides(command="prym-data", seed=3))
    with open(os.path.join(out, "prym_data.json"), encoding="utf-8") as f:
        assert json.load(f)


def test_negative_control(g1_lab):
    reports, notes = g1_lab.negative_control(0.0)
    assert notes == {"negative_control": "unperturbed"}
    assert len(reports) == len(SUITE)
    assert all(r.passed for r in reports)

    reports, notes = g1_lab.negative_control()
    assert notes["negative_control"] == "every identity fails"
    assert not any(r.passed for r in reports)
    assert notes["perturbation"] == "1.000e-03"


def _canonical(report: RunReport, keep_hash: bool = True) -> str:
    return report_json(replace(report, wall_time=0.0, config_hash=report.config_hash if keep_hash else ""))


def test_run_is_deterministic(g1_config: RunConfig):
    config = g1_config.with_overrides(command="verify", identity="A")
    first = run(config)
    second = run(config)
    assert _canonical(first) == _canonical(second)

    single = run(config.with_overrides(threads=1))
    double = run(config.with_overrides(threads=2))
    assert single.config_hash != double.config_hash
    assert _canonical(single, keep_hash=False) == _canonical(double, keep_hash=False)
    assert _canonical(single, keep_hash=False) == _canonical(first, keep_hash=False)
