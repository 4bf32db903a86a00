"""Test the command-line interface."""

import csv
import json
from unittest.mock import patch

import pytest

from seqsense._meta import __version__
from seqsense.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, build_parser, main
from seqsense.harness import COLUMNS
from seqsense.selftest import CheckResult


def test_version(capsys):
    """Test printing the version."""
    with pytest.raises(SystemExit) as exc:
        main(["--version"])

    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_parser_families():
    """Test that families are spelled with dashes on the command line."""
    args = build_parser().parse_args(["sweep", "--config", "c.json", "--family", "period-scaling"])

    assert args.family == "period-scaling"
    assert args.out == "."
    with pytest.raises(SystemExit):
        build_parser().parse_args(["sweep", "--config", "c.json", "--family", "bit-grid"])


def test_constants(gaussian_config_file, capsys):
    """Test estimating the Gaussian constants."""
    assert main(["constants", "--config", str(gaussian_config_file)]) == EXIT_OK

    lines = dict(line.split(" ", 1) for line in capsys.readouterr().out.splitlines())
    assert float(lines["I1"].split()[0]) == pytest.approx(0.3069, abs=0.01)
    assert float(lines["I0"].split()[0]) == pytest.approx(0.1931, abs=0.01)
    assert float(lines["phi"]) > 0.3069


def test_missing_config(tmp_path, capsys):
    """Test the exit code of a missing configuration file."""
    assert main(["constants", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_run_without_manifest(gaussian_config_file, tmp_path, capsys):
    """Test that ``run`` needs a calibration manifest."""
    out = tmp_path / "out"
    code = main(["run", "--config", str(gaussian_config_file), "--out", str(out)])

    assert code == EXIT_CONFIG
    assert str(out / "manifest.json") in capsys.readouterr().err


def test_no_matching_scheme(gaussian_config_file, tmp_path):
    """Test rejecting a selection that matches no scheme."""
    code = main(
        ["calibrate", "--config", str(gaussian_config_file), "--out", str(tmp_path), "--bits", "4", "--scheme", "rlt"]
    )

    assert code == EXIT_CONFIG


def test_selftest_exit_code(capsys):
    """Test that a failing check gives a non-zero exit code."""
    results = [CheckResult("first", True, "fine"), CheckResult("second", False, "off")]
    with patch("seqsense.cli.run_all", return_value=results) as mocked:
        code = main(["selftest", "--trials", "10", "--seed", "3"])

    assert code == EXIT_FAILURE
    mocked.assert_called_once_with(n_trials=10, seed=3, workers=1)
    out = capsys.readouterr().out
    assert "FAILED second: off" in out


def test_unexpected_error(gaussian_config_file, capsys):
    """Test the exit code of an unexpected failure."""
    with patch("seqsense.cli.pooled_constants", side_effect=RuntimeError("boom")):
        code = main(["constants", "--config", str(gaussian_config_file)])

    assert code == EXIT_FAILURE
    assert "RuntimeError: boom" in capsys.readouterr().err


@pytest.mark.slow
def test_sweep(tmp_path, capsys):
    """Test a small centralized sweep end to end."""
    config = tmp_path / "config.json"
    config.write_text(
        json.dumps(
            {
                "models": [{"kind": "gaussian", "rho2": 1.0}],
                "schemes": [{"kind": "centralized"}, {"kind": "rlt"}],
                "targets": [[0.1, 0.1]],
                "seed": 4,
            }
        )
    )
    out = tmp_path / "out"
    argv = ["sweep", "--config", str(config), "--out", str(out), "--scheme", "centralized", "--trials", "50"]

    assert main(argv) == EXIT_OK
    fpath = capsys.readouterr().out.strip()
    with open(fpath) as buf:
        rows = list(csv.DictReader(buf))
    assert list(rows[0]) == list(COLUMNS)
    assert [row["scheme"] for row in rows] == ["centralized", "centralized"]
    assert all(row["seed"] == "4" for row in rows)

    assert main(["run", "--config", str(config), "--out", str(out), "--scheme", "centralized", "--trials", "50"]) == EXIT_OK
