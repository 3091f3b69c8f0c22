import json

import numpy as np
import pytest
from pydantic import ValidationError

from nedlin.flow import (
    CatalogError,
    LinearSystem,
    NonlinearPerturbation,
    SystemCatalog,
    catalog,
    check_perturbation,
    default_catalog,
    sampled_lipschitz,
)
from nedlin.flow.catalog import CatalogEntry


def make_system(rows, params=None) -> LinearSystem:
    return LinearSystem.from_rows(rows, params)


def test_system_json_file(tmp_path):
    path = tmp_path / "bv.json"
    path.write_text(json.dumps({"dim": 1, "A": [["-w + a*t*sin(t)"]], "params": {"w": 3, "a": 1}}))
    sys = LinearSystem.from_json_file(path)
    assert sys.matrix(np.pi / 2)[0, 0] == pytest.approx(-3.0 + np.pi / 2)
    assert json.loads(sys.model_dump_json())["A"] == [["-w + a * t * sin(t)"]]


def test_system_rejects_state_variables_and_bad_shape():
    with pytest.raises(ValidationError):
        make_system([["x1"]])
    with pytest.raises(ValidationError):
        LinearSystem(dim=2, A=[["1", "0"]])


def test_shifted_and_adjoint():
    sys = make_system([["1", "t"], ["0", "-2"]])
    assert np.allclose(sys.shifted(0.5).matrix(3.0), sys.matrix(3.0) - 0.5 * np.eye(2))
    assert np.allclose(sys.adjoint().matrix(3.0), -sys.matrix(3.0).T)


def test_is_diagonal():
    assert make_system([["-1", "0"], ["0", "t"]]).is_diagonal()
    assert not make_system([["-1", "sin(t)"], ["0", "t"]]).is_diagonal()


def test_perturbation_aliases_round_trip():
    raw = '{"f": ["0.1*exp(-2*b*t)*sin(x1)"], "L_f": 0.1, "beta": 1, "K0": 0, "class": "A2", "params": {"b": 1}}'
    f = NonlinearPerturbation.model_validate_json(raw)
    assert f.class_tag == "A2" and f.dim == 1
    again = NonlinearPerturbation.model_validate_json(f.to_json())
    assert again == f


def test_perturbation_rejects_unknown_names():
    with pytest.raises(ValidationError):
        NonlinearPerturbation(f=["x2"], L_f=1.0)


def test_at_origin():
    f = NonlinearPerturbation(f=["sin(x1) + exp(-t)"], L_f=1.0, K0=1.0)
    assert f.at_origin().evaluate(2.0, np.array([5.0]))[0] == pytest.approx(np.exp(-2.0))


def test_check_perturbation_accepts_honest_metadata(bounded_sine):
    report = check_perturbation(bounded_sine, t_max=10.0)
    assert report.status == "pass"
    ratio, _ = sampled_lipschitz(bounded_sine, 10.0)
    assert ratio <= 0.1 * (1 + 1e-9)


def test_check_perturbation_flags_false_class():
    f = NonlinearPerturbation(f=["0.5 + 0.1*sin(x1)"], L_f=0.1, K0=0.5, class_tag="A2")
    report = check_perturbation(f, t_max=5.0)
    assert report.status == "fail"
    assert not report.check("vanishes_at_origin").passed


def test_check_perturbation_flags_understated_lipschitz():
    f = NonlinearPerturbation(f=["2*x1"], L_f=1.0, class_tag="A2")
    assert not check_perturbation(f, t_max=5.0).check("lipschitz").passed


def test_catalog_examples():
    sys, flow = catalog("scalar_autonomous", {"lambda0": -1.0})
    assert sys.dim == 1 and flow(3.0, 1.0)[0, 0] == pytest.approx(np.exp(-2.0))
    sys, flow = catalog("diagonal_autonomous", {"lambda1": -1.0, "lambda2": -2.0})
    assert sys.dim == 2 and sys.is_diagonal()
    sys, flow = catalog("bv_scalar", {"omega": 3.0, "a": 1.0})
    assert flow(np.pi, 0.0)[0, 0] == pytest.approx(np.exp(-2 * np.pi))


def test_catalog_errors():
    with pytest.raises(CatalogError):
        catalog("nonexistent")
    with pytest.raises(CatalogError):
        catalog("bv_scalar", {"omega": 3.0})


def test_catalog_registry_is_extensible():
    registry = SystemCatalog()
    registry.register(CatalogEntry(name="zero", description="x' = 0"), lambda p: (make_system([["0"]]), None))
    assert "zero" in registry.list_entries()
    with pytest.raises(ValueError):
        registry.register(CatalogEntry(name="zero", description="again"), lambda p: (make_system([["0"]]), None))
    sys, flow = registry.build("zero", {})
    assert flow is None and sys.matrix(1.0)[0, 0] == 0.0
    registry.unregister("zero")
    with pytest.raises(CatalogError):
        registry.build("zero", {})
    assert set(default_catalog.list_entries()) == {
        "scalar_autonomous", "diagonal_autonomous", "bv_scalar", "bv_diagonal", "rotation_coupled"
    }
