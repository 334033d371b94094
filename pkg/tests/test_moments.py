import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from covctl.errors import ModelValidationError
from covctl.model import PolyTerm, RandomMatrixSpec, evaluate_abar_batch, make_model
from covctl.moments import (chunk_rng, compute_cp_analytic, estimate_cp_empirical,
                            gaussian_moment, psd_factor)

from conftest import random_model, random_psd

SIGMA = np.array([[0.21, 0.03], [0.03, 0.15]])


def pairing_sum(indices, sigma):
    """Brute-force Isserlis: sum over perfect pairings of the index list."""
    if not indices:
        return 1.0
    if len(indices) % 2:
        return 0.0
    first, rest = indices[0], indices[1:]
    return sum(sigma[first, rest[k]] * pairing_sum(rest[:k] + rest[k + 1:], sigma)
               for k in range(len(rest)))


def test_ref_sigma_moments():
    assert gaussian_moment((2, 0), SIGMA) == pytest.approx(0.21)
    assert gaussian_moment((1, 1), SIGMA) == pytest.approx(0.03)
    assert gaussian_moment((1, 2), SIGMA) == 0.0


def test_fourth_moment_against_monte_carlo():
    rng = np.random.default_rng(0)
    p2 = rng.standard_normal(10**7) * np.sqrt(0.15)
    sample = p2**4
    est, se = sample.mean(), sample.std() / np.sqrt(sample.size)
    value = gaussian_moment((0, 4), SIGMA)
    assert value == pytest.approx(3 * 0.15**2)
    assert abs(est - value) <= 3 * se


@given(st.lists(st.integers(0, 3), min_size=3, max_size=3).filter(lambda e: sum(e) <= 8),
       st.integers(0, 2**16))
def test_recursion_matches_pairing_enumeration(exps, seed):
    sigma = random_psd(np.random.default_rng(seed), 3)
    indices = [r for r, e in enumerate(exps) for _ in range(e)]
    assert gaussian_moment(exps, sigma) == pytest.approx(pairing_sum(indices, sigma), abs=1e-12)


def test_order_cap():
    with pytest.raises(ModelValidationError, match="exceeds the supported maximum 8"):
        gaussian_moment((5, 4), SIGMA)


def test_cp_ref_entries(ref_model, ref_cp):
    cp = ref_cp.value
    n = 3
    assert ref_cp.provenance == "analytic"
    assert cp[0, 0] == pytest.approx(0.21)
    assert cp[1 * n + 1, 1 * n + 1] == pytest.approx(0.0675)


def test_cp_against_direct_kron_monte_carlo(ref_model, ref_cp):
    # independent oracle: average kron(Abar, Abar) over plain numpy draws
    rng = np.random.default_rng(11)
    p = rng.multivariate_normal(np.zeros(2), SIGMA, size=10**6)
    ab = evaluate_abar_batch(ref_model.abar, p)
    kk = np.einsum("sij,skl->sikjl", ab, ab).reshape(-1, 9, 9)
    mean = kk.mean(axis=0)
    se = kk.std(axis=0) / np.sqrt(kk.shape[0])
    assert np.all(np.abs(mean - ref_cp.value) <= 5 * se + 1e-12)


def test_cp_zero_spec():
    m = make_model(np.eye(2) * 0.5, np.ones((2, 1)), np.eye(2), RandomMatrixSpec(2, 1, {}), [[1.0]])
    assert not np.any(compute_cp_analytic(m).value)
    emp = estimate_cp_empirical(m, 1000, seed=3)
    assert not np.any(emp.value)


def test_cp_swap_symmetry():
    rng = np.random.default_rng(2)
    for _ in range(10):
        model = random_model(rng)
        n = model.n
        cp = compute_cp_analytic(model).value.reshape(n, n, n, n)  # [i1, i2, j1, j2]
        assert np.array_equal(cp, cp.transpose(1, 0, 3, 2))


def test_rank_one_special_case():
    rng = np.random.default_rng(3)
    e = rng.standard_normal((3, 3))
    v = 0.37
    spec = RandomMatrixSpec(3, 1, {(i, j): (PolyTerm(float(e[i, j]), (1,)),)
                                   for i in range(3) for j in range(3)})
    m = make_model(np.zeros((3, 3)), np.ones((3, 1)), np.eye(3), spec, [[v]])
    assert np.max(np.abs(compute_cp_analytic(m).value - v * np.kron(e, e))) <= 1e-14


def test_empirical_close_to_analytic(ref_model, ref_cp):
    emp = estimate_cp_empirical(ref_model, 10**6, seed=7)
    assert emp.provenance == "empirical" and emp.samples == 10**6 and emp.seed == 7
    assert np.max(np.abs(emp.value - ref_cp.value)) <= 0.01


def test_empirical_single_sample_is_one_kron(ref_model):
    a = estimate_cp_empirical(ref_model, 1, seed=5)
    b = estimate_cp_empirical(ref_model, 1, seed=5)
    assert np.array_equal(a.value, b.value)
    p = chunk_rng(5, 0).standard_normal((1, 2)) @ psd_factor(SIGMA).T
    ab = evaluate_abar_batch(ref_model.abar, p)[0]
    assert np.allclose(a.value, np.kron(ab, ab), rtol=0, atol=1e-15)


def test_empirical_independent_of_threads(ref_model):
    a = estimate_cp_empirical(ref_model, 50_000, seed=9, threads=1)
    b = estimate_cp_empirical(ref_model, 50_000, seed=9, threads=4)
    assert np.array_equal(a.value, b.value)


def test_cp_maps_psd_to_psd():
    rng = np.random.default_rng(4)
    for _ in range(10):
        model = random_model(rng)
        n = model.n
        cp = estimate_cp_empirical(model, 2000, seed=1).value
        g = rng.standard_normal((n, n))
        out = (cp @ (g @ g.T).reshape(-1, order="F")).reshape(n, n, order="F")
        assert np.linalg.eigvalsh(0.5 * (out + out.T))[0] >= -1e-10


def test_psd_factor_rank_deficient():
    s = np.array([[1.0, 1.0], [1.0, 1.0]])
    f = psd_factor(s)
    assert np.allclose(f @ f.T, s)
    assert np.allclose(f, f.T)
