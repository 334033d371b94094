import warnings

import numpy as np
import pytest
from hypothesis import settings

from covctl.model import PolyTerm, RandomMatrixSpec, example_model, make_model
from covctl.moments import compute_cp_analytic

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

REF_K = np.array([[-0.4, -0.4, -0.5]])
REF_STEADY = np.array([[1.79, 0.0, 0.06], [0.0, 1.20, 0.26], [0.06, 0.26, 1.87]])


@pytest.fixture(scope="session")
def ref_model():
    return example_model()


@pytest.fixture(scope="session")
def ref_cp(ref_model):
    return compute_cp_analytic(ref_model)


def centered_ref_model():
    """Same plant as the example, decomposed so that E[Abar] = 0."""
    m = example_model()
    spec = RandomMatrixSpec(3, 2, {
        (0, 0): (PolyTerm(1.0, (1, 0)),),
        (0, 2): (PolyTerm(1.0, (1, 0)),),
        (1, 1): (PolyTerm(1.0, (0, 2)), PolyTerm(-0.15, (0, 0))),
        (2, 2): (PolyTerm(1.0, (0, 1)),),
    })
    a0 = m.a0.copy()
    a0[1, 1] += 0.15
    return make_model(a0, m.b, m.w, spec, m.law.sigma)


def random_psd(rng, k, floor=0.0):
    g = rng.standard_normal((k, k))
    return g @ g.T / k + floor * np.eye(k)


def random_spec(rng, n, l, density=0.5, scale=0.3, sigma=None):
    """Random zero-mean polynomial spec of degree <= 2.

    Degree-1 terms are zero-mean; degree-2 monomials p_r p_s are centred by
    subtracting Sigma[r, s].
    """
    entries = {}
    for i in range(n):
        for j in range(n):
            if rng.random() > density:
                continue
            terms = []
            for _ in range(rng.integers(1, 3)):
                exps = [0] * l
                if rng.random() < 0.5:
                    exps[rng.integers(l)] += 1
                    terms.append(PolyTerm(float(scale * rng.standard_normal()), tuple(exps)))
                else:
                    r, s = rng.integers(l), rng.integers(l)
                    exps[r] += 1
                    exps[s] += 1
                    c = float(scale * rng.standard_normal())
                    terms.append(PolyTerm(c, tuple(exps)))
                    if sigma is not None and sigma[r, s] != 0.0:
                        terms.append(PolyTerm(-c * float(sigma[r, s]), (0,) * l))
            entries[(i, j)] = tuple(terms)
    return RandomMatrixSpec(n, l, entries)


def random_model(rng, n=None, m=None, l=None, scale=0.3, a_scale=0.5):
    n = n or int(rng.integers(1, 6))
    m = m or int(rng.integers(1, n + 1))
    l = l or int(rng.integers(1, 4))
    sigma = random_psd(rng, l)
    spec = random_spec(rng, n, l, scale=scale, sigma=sigma)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        return make_model(a_scale * rng.standard_normal((n, n)), rng.standard_normal((n, m)),
                          random_psd(rng, n, floor=0.1), spec, sigma)


def scaled_model(model, factor):
    """Scale A0 and every Abar coefficient by ``factor`` (M(K) scales by factor**2)."""
    entries = {ij: tuple(PolyTerm(t.coeff * factor, t.exponents) for t in terms)
               for ij, terms in model.abar.entries.items()}
    spec = RandomMatrixSpec(model.abar.n, model.abar.l, entries)
    return make_model(model.a0 * factor, model.b, model.w, spec, model.law.sigma)


def lyapunov_fixed_point(a, w, tol=1e-14, maxiter=100_000):
    """Independent oracle: iterate S <- A S A^T + W to convergence."""
    s = np.zeros_like(w)
    for _ in range(maxiter):
        nxt = a @ s @ a.T + w
        if np.max(np.abs(nxt - s)) <= tol * max(1.0, np.max(np.abs(nxt))):
            return nxt
        s = nxt
    raise RuntimeError("fixed-point iteration did not converge")


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance(request):
    """Record a one-line verdict for an acceptance criterion and assert it."""

    def record(label, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
