"""Second-moment matrix ``C_p = E[Abar(p) kron Abar(p)]``.

Two routes are provided: a closed form for zero-mean Gaussian parameters
(Isserlis' theorem) and a seeded Monte Carlo estimate used to cross-check it.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ModelValidationError

MAX_MOMENT_ORDER = 8


@dataclass(frozen=True)
class CpMatrix:
    """``value[(i1*n + i2), (j1*n + j2)] == E[Abar[i1, j1] * Abar[i2, j2]]`` (0-based)."""

    value: np.ndarray
    provenance: str  # "analytic" | "empirical"
    samples: int | None = None
    seed: int | None = None
    stderr: np.ndarray | None = None

    @property
    def n(self) -> int:
        return int(round(np.sqrt(self.value.shape[0])))


def _sigma_key(sigma) -> tuple:
    sigma = np.asarray(sigma, dtype=float)
    return tuple(map(tuple, sigma))


@lru_cache(maxsize=64)
def _moment_table(sigma_key: tuple):
    sigma = np.array(sigma_key)

    @lru_cache(maxsize=None)
    def moment(exps: tuple) -> float:
        # Stein recursion E[p_r f(p)] = sum_s Sigma_rs E[d f / d p_s]; this
        # enumerates exactly the Isserlis pairings, memoized on the multi-index.
        total = sum(exps)
        if total == 0:
            return 1.0
        if total % 2:
            return 0.0
        r = next(i for i, k in enumerate(exps) if k)
        reduced = list(exps)
        reduced[r] -= 1
        acc = 0.0
        for s, ks in enumerate(reduced):
            if ks == 0 or sigma[r, s] == 0.0:
                continue
            nxt = list(reduced)
            nxt[s] -= 1
            acc += ks * sigma[r, s] * moment(tuple(nxt))
        return acc

    return moment


def gaussian_moment(exponents, sigma) -> float:
    """``E[prod_r p_r**exponents[r]]`` for ``p ~ N(0, sigma)``.

    >>> gaussian_moment((4,), [[0.5]])
    0.75
    """
    exps = tuple(int(e) for e in exponents)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1] or sigma.shape[0] != len(exps):
        raise ValueError(
            f"exponent vector of length {len(exps)} does not match sigma of shape {sigma.shape}"
        )
    if any(e < 0 for e in exps):
        raise ValueError(f"exponents must be non-negative, got {exps}")
    if sum(exps) > MAX_MOMENT_ORDER:
        raise ModelValidationError(
            f"moment order {sum(exps)} exceeds the supported maximum {MAX_MOMENT_ORDER} "
            f"(Abar entries are limited to degree {MAX_MOMENT_ORDER // 2})"
        )
    return _moment_table(_sigma_key(sigma))(exps)


def entry_mean(terms, sigma) -> float:
    """Gaussian mean of one polynomial entry of Abar."""
    return sum(t.coeff * gaussian_moment(t.exponents, sigma) for t in terms)


def compute_cp_analytic(model) -> CpMatrix:
    spec = model.abar
    n = spec.n
    sigma = model.law.sigma
    order = max((sum(t.exponents) for ts in spec.entries.values() for t in ts), default=0)
    if 2 * order > MAX_MOMENT_ORDER:
        raise ModelValidationError(f"Abar entries are limited to degree {MAX_MOMENT_ORDER // 2}")
    # one lookup per call: hashing a large Sigma per moment dominates otherwise
    moment = _moment_table(_sigma_key(sigma))
    cp = np.zeros((n * n, n * n))
    items = [(ij, terms) for ij, terms in sorted(spec.entries.items()) if terms]
    # each unordered pair once, mirrored: keeps the swap symmetry exact
    for a, ((i1, j1), terms1) in enumerate(items):
        for (i2, j2), terms2 in items[a:]:
            val = 0.0
            for t1 in terms1:
                for t2 in terms2:
                    exps = tuple(x + y for x, y in zip(t1.exponents, t2.exponents))
                    val += t1.coeff * t2.coeff * moment(exps)
            cp[i1 * n + i2, j1 * n + j2] = val
            cp[i2 * n + i1, j2 * n + j1] = val
    return CpMatrix(cp, "analytic")


def psd_factor(s: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix.

    Eigenvalues at round-off level relative to the largest are treated as
    exact zeros so degenerate directions stay degenerate.
    """
    lam, vecs = np.linalg.eigh(0.5 * (s + s.T))
    floor = lam.size * np.finfo(float).eps * float(np.max(np.abs(lam), initial=0.0))
    lam = np.where(lam > floor, lam, 0.0)
    return (vecs * np.sqrt(lam)) @ vecs.T


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    """Independent stream for a fixed-size chunk; depends only on (seed, chunk)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def _cp_chunk_size(n: int) -> int:
    return int(max(256, min(16384, 2**21 // n**4)))


def estimate_cp_empirical(model, samples: int, seed: int = 0, threads: int | None = None) -> CpMatrix:
    """Monte Carlo estimate of ``C_p``.

    Both Kronecker factors use the same parameter draw. Samples are split
    into chunks whose size depends only on ``n``; chunk ``c`` draws from the
    stream ``(seed, c)`` and partial sums are reduced in chunk order, so the
    result does not depend on ``threads``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    from .model import evaluate_abar_batch

    spec = model.abar
    n = spec.n
    factor = psd_factor(model.law.sigma)
    size = _cp_chunk_size(n)
    bounds = [(c, c * size, min(samples, (c + 1) * size)) for c in range(-(-samples // size))]

    def work(bound):
        c, lo, hi = bound
        rng = chunk_rng(seed, c)
        p = rng.standard_normal((hi - lo, spec.l)) @ factor.T
        ab = evaluate_abar_batch(spec, p)
        kk = np.einsum("sij,skl->sikjl", ab, ab).reshape(hi - lo, n * n, n * n)
        return kk.sum(axis=0), np.square(kk).sum(axis=0)

    if threads and threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    s1 = np.zeros((n * n, n * n))
    s2 = np.zeros((n * n, n * n))
    for a, b in parts:
        s1 += a
        s2 += b
    mean = s1 / samples
    if samples > 1:
        var = np.clip(s2 / samples - mean**2, 0.0, None) * samples / (samples - 1)
        stderr = np.sqrt(var / samples)
    else:
        stderr = np.full_like(mean, np.inf)
    return CpMatrix(mean, "empirical", samples=samples, seed=seed, stderr=stderr)
