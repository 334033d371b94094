import json
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from covctl.errors import DimensionError, ModelValidationError
from covctl.model import (PolyTerm, RandomMatrixSpec, evaluate_abar, load_model, make_model,
                          model_from_dict, model_to_dict, save_model)
from covctl.moments import psd_factor

from conftest import random_model

MODEL_FILE = "models/example3.json"


def ref_doc():
    with open(MODEL_FILE) as fh:
        return json.load(fh)


def test_load_ref_model(ref_model):
    with pytest.warns(UserWarning, match=r"\(2,2\) has non-zero mean 0.15"):
        model = load_model(MODEL_FILE)
    assert model.n == 3 and model.m == 1 and model.l == 2
    assert np.array_equal(model.b, [[1.0], [0.0], [0.0]])
    assert np.array_equal(model.w, np.eye(3))
    assert np.array_equal(model.law.sigma, [[0.21, 0.03], [0.03, 0.15]])
    assert model_to_dict(model) == model_to_dict(ref_model) | {"seed": 0}


def test_nonzero_mean_rejected_without_opt_in(tmp_path):
    doc = ref_doc()
    del doc["allow_nonzero_mean"]
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelValidationError, match=r"entry \(2,2\) has non-zero mean 0.15.*A0"):
        load_model(path)


def test_p1_squared_rejected():
    doc = ref_doc()
    del doc["allow_nonzero_mean"]
    doc["Abar"] = [{"i": 1, "j": 1, "terms": [{"coeff": 1.0, "exponents": [2, 0]}]}]
    # Gaussian moment oracle: E[p1^2] = Sigma_11
    with pytest.raises(ModelValidationError, match=r"\(1,1\) has non-zero mean 0.21"):
        model_from_dict(doc)


def test_w_must_be_positive_definite():
    doc = ref_doc()
    doc["W"] = np.zeros((3, 3)).tolist()
    with pytest.raises(ModelValidationError, match="W must be positive definite"):
        model_from_dict(doc)


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d.pop("Sigma"), "missing required field"),
    (lambda d: d.update(A0=[[1, 2]]), "field 'A0': expected shape"),
    (lambda d: d.update(B=[[1, 2, 3]]), "field 'B'"),
    (lambda d: d.update(Sigma=[[1, 0], [0, -1]]), "Sigma must be positive semidefinite"),
    (lambda d: d.update(Sigma=[[1, 0.5], [0, 1]]), "Sigma must be symmetric"),
    (lambda d: d["Abar"].append({"i": 4, "j": 1, "terms": []}), r"indices \(4,1\)"),
    (lambda d: d["Abar"].append({"i": 1, "j": 1, "terms": [{"coeff": 1, "exponents": [1]}]}),
     "must have length l=2"),
    (lambda d: d["Abar"].append({"i": 1, "j": 2, "terms": [{"coeff": 1, "exponents": [5, 0]}]}),
     "exceeds max_degree"),
    (lambda d: d.update(n=0), "positive integer"),
])
def test_invariant_violations(mutate, message):
    doc = ref_doc()
    mutate(doc)
    with pytest.raises(ModelValidationError, match=message):
        model_from_dict(doc)


def test_parse_error_reports_location(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "n": 3,\n  "m": 1,,\n}')
    with pytest.raises(ModelValidationError, match="line 3, column"):
        load_model(path)


def test_unknown_keys_warn():
    doc = ref_doc()
    doc["comment"] = "hello"
    with pytest.warns(UserWarning, match="ignoring unknown model field 'comment'"):
        model_from_dict(doc)


def test_evaluate_abar_ref_entries(ref_model):
    out = evaluate_abar(ref_model.abar, [1.0, 2.0])
    assert np.array_equal(out, [[1, 0, 1], [0, 4, 0], [0, 0, 2]])


def test_evaluate_abar_zero_and_constant_terms(ref_model):
    assert not np.any(evaluate_abar(ref_model.abar, [0.0, 0.0]))
    spec = RandomMatrixSpec(2, 1, {(0, 0): (PolyTerm(0.5, (0,)), PolyTerm(1.0, (1,)))})
    assert evaluate_abar(spec, [3.0])[0, 0] == pytest.approx(3.5)
    with pytest.raises(DimensionError):
        evaluate_abar(spec, [1.0, 2.0])


@given(st.floats(-5, 5), st.floats(-3, 3), st.floats(-3, 3))
def test_evaluate_linear_in_coeff(c, p1, p2):
    base = RandomMatrixSpec(2, 2, {(0, 1): (PolyTerm(1.0, (1, 2)),)})
    scaled = RandomMatrixSpec(2, 2, {(0, 1): (PolyTerm(c, (1, 2)),)})
    p = [p1, p2]
    assert evaluate_abar(scaled, p)[0, 1] == pytest.approx(c * evaluate_abar(base, p)[0, 1], abs=1e-9)


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    for k in range(10):
        model = random_model(rng)
        path = tmp_path / f"m{k}.json"
        save_model(model, path)
        back = load_model(path)
        assert model_to_dict(back) == model_to_dict(model)


def test_zero_mean_against_monte_carlo():
    rng = np.random.default_rng(1)
    model = random_model(rng, n=3, l=2)
    draws = 10**6
    p = rng.standard_normal((draws, 2)) @ psd_factor(model.law.sigma).T
    from covctl.model import evaluate_abar_batch
    vals = evaluate_abar_batch(model.abar, p)
    mean = vals.mean(axis=0)
    se = vals.std(axis=0) / np.sqrt(draws)
    assert np.all(np.abs(mean) <= 3 * se + 1e-15)


def test_make_model_dimension_checks():
    spec = RandomMatrixSpec(2, 1, {})
    with pytest.raises(ModelValidationError, match="Abar dimension"):
        make_model(np.eye(3), np.ones((3, 1)), np.eye(3), spec, [[1.0]])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        make_model(np.eye(2), np.ones((2, 1)), np.eye(2), spec, [[1.0]])
