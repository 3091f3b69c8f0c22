import json
import logging

import pytest
from pydantic import ValidationError

from nedlin.cli.config import ConfigError, RunConfig, load_perturbation, load_system, log_level, parse_params
from nedlin.cli.io import format_float, read_points, sample_points, write_csv, write_json
from nedlin.primitives.models import ContractionCertificate


def test_parse_params():
    assert parse_params(["omega=3", " a = 1.5"]) == {"omega": 3.0, "a": 1.5}
    assert parse_params(None) == {}
    for bad in (["omega"], ["=3"], ["omega=three"]):
        with pytest.raises(ConfigError):
            parse_params(bad)


def test_catalog_reference():
    cfg = RunConfig(command="certify", system="catalog:bv_scalar", params={"omega": 3.0, "a": 1.0})
    sys = load_system(cfg)
    assert sys.params == {"omega": 3.0, "a": 1.0}


def test_missing_perturbation_means_zero():
    cfg = RunConfig(command="verify", system="catalog:scalar_autonomous", params={"lambda0": -1.0})
    assert load_perturbation(cfg, 1).is_zero()


def test_perturbation_dimension_must_match(tmp_path):
    path = tmp_path / "f.json"
    path.write_text(json.dumps({"f": ["0", "0"], "L_f": 0.0, "class": "A2"}))
    cfg = RunConfig(command="verify", system="catalog:scalar_autonomous", perturbation=path)
    with pytest.raises(ConfigError):
        load_perturbation(cfg, 1)


def test_empty_scan_is_rejected():
    with pytest.raises(ValidationError):
        RunConfig(command="spectrum", system="x.json", lambda_min=0.0, lambda_max=0.0)
    RunConfig(command="certify", system="x.json", lambda_min=0.0, lambda_max=0.0)


def test_log_level():
    assert log_level(2, {}) == logging.DEBUG
    assert log_level(1, {"NEDLIN_LOG_LEVEL": "ERROR"}) == logging.INFO
    assert log_level(0, {"NEDLIN_LOG_LEVEL": "debug"}) == logging.DEBUG
    assert log_level(0, {"NEDLIN_LOG_LEVEL": "chatty"}) == logging.WARNING
    assert log_level(0, {}) == logging.WARNING


def test_format_float_round_trips():
    assert format_float(0.1) == "0.10000000000000001"
    assert float(format_float(1 / 3)) == 1 / 3


def test_write_csv_cells(tmp_path):
    path = write_csv(tmp_path / "a" / "rows.csv", ["x", "flag", "note"], [(0.5, True, None), (float("nan"), False, "e")])
    assert path.read_text() == "x,flag,note\n0.5,true,\nnan,false,e\n"


def test_write_json_is_sorted_and_uses_aliases(tmp_path):
    cert = ContractionCertificate(K=1.0, alpha=2.0, mu=0.0)
    path = write_json(tmp_path / "c.json", {"z": float("inf"), "cert": cert})
    payload = json.loads(path.read_text())
    assert list(payload) == ["cert", "z"]
    assert payload["z"] is None
    assert payload["cert"]["alpha"] == 2.0
    assert path.read_text().endswith("\n")


def test_read_points(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("tau,xi1,xi2\n0,1,2\n\n1.5,-1,0\n")
    points = read_points(path, 2)
    assert [(p.tau, p.xi) for p in points] == [(0.0, (1.0, 2.0)), (1.5, (-1.0, 0.0))]
    with pytest.raises(ConfigError, match="expected 2 columns"):
        read_points(path, 1)
    path.write_text("0,a\n")
    with pytest.raises(ConfigError, match="non-numeric"):
        read_points(path, 1)


def test_sample_points_are_seeded():
    first = sample_points(5, 2, 20.0, seed=7)
    assert first == sample_points(5, 2, 20.0, seed=7)
    assert first != sample_points(5, 2, 20.0, seed=8)
    assert all(0.0 <= p.tau <= 5.0 and len(p.xi) == 2 for p in first)
