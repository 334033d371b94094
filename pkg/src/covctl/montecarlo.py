"""Monte Carlo simulation of the closed loop and empirical error covariance.

Trials are grouped in fixed-size chunks; chunk ``c`` draws its parameters and
noise from the stream derived from ``(seed, c)`` alone, and chunk partial sums
are reduced in chunk order. Results are therefore bit-identical for any
number of worker threads.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .covariance import CovarianceTrajectory, as_gain
from .errors import DimensionError
from .matops import as_vector, check_symmetric
from .model import evaluate_abar_batch
from .moments import chunk_rng, psd_factor

CHUNK_TRIALS = 256


@dataclass(frozen=True)
class SimConfig:
    trials: int = 5000
    horizon: int = 50
    seed: int = 0
    x0: np.ndarray | None = None

    def __post_init__(self):
        if self.trials < 2:
            raise ValueError("trials must be >= 2")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


@dataclass(frozen=True)
class EmpiricalCovTrajectory:
    cov_seq: np.ndarray  # raw second moment sum(e e^T) / N, (T+1, n, n)
    mean_seq: np.ndarray  # (T+1, n)
    stderr_seq: np.ndarray  # standard error of each cov_seq entry, (T+1, n, n)
    trials: int

    @property
    def centered_seq(self) -> np.ndarray:
        """Mean-centred (biased) sample covariance, for diagnostics."""
        return self.cov_seq - np.einsum("ki,kj->kij", self.mean_seq, self.mean_seq)

    @property
    def mean_stderr_seq(self) -> np.ndarray:
        """Standard error of each entry of ``mean_seq``."""
        var = np.clip(np.diagonal(self.cov_seq, axis1=1, axis2=2) - self.mean_seq**2, 0.0, None)
        return np.sqrt(var * self.trials / (self.trials - 1) / self.trials)

    @property
    def horizon(self) -> int:
        return self.cov_seq.shape[0] - 1


def sample_noise(n: int, w, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw from ``N(0, W)`` through the symmetric square root of ``W``."""
    w = np.asarray(w, dtype=float)
    if w.shape != (n, n):
        raise DimensionError(f"W must be {n}x{n}, got {w.shape}")
    check_symmetric(w, "W")
    if np.linalg.eigvalsh(w)[0] < -1e-12 * max(1.0, float(np.max(np.abs(w)))):
        raise ValueError("W must be positive semidefinite")
    factor = psd_factor(w)
    shape = (n,) if size is None else (size, n)
    return rng.standard_normal(shape) @ factor.T


def resolve_threads(threads: int | None) -> int:
    env = os.environ.get("COVCTL_THREADS")
    if env:
        return max(1, int(env))
    return max(1, threads or os.cpu_count() or 1)


def simulate(model, gain, config: SimConfig, nominal=None,
             threads: int | None = None) -> EmpiricalCovTrajectory:
    """Simulate ``config.trials`` closed-loop trajectories.

    Each step draws ``p_k ~ N(0, Sigma)`` and ``w_k ~ N(0, W)``, applies
    ``u_k = K (x_k - z_k) + v_k`` with ``v_k = K z_k`` by default (or the
    supplied ``nominal`` sequence), and records ``e_k = x_k - z_k``.
    """
    n, T, N = model.n, config.horizon, config.trials
    k = as_gain(gain, model)
    x0 = config.x0 if config.x0 is not None else model.x0
    x0 = np.zeros(n) if x0 is None else as_vector(x0, "x0")
    if x0.size != n:
        raise DimensionError(f"x0 must have length {n}")
    if nominal is not None:
        v_seq = np.asarray(nominal, dtype=float).reshape(-1, model.m)
        if v_seq.shape[0] < T:
            raise ValueError(f"nominal input sequence has {v_seq.shape[0]} steps, horizon needs {T}")
    # deterministic nominal trajectory, shared by all trials
    z = np.zeros((T + 1, n))
    v = np.zeros((T, model.m))
    z[0] = x0
    for t in range(T):
        v[t] = k @ z[t] if nominal is None else v_seq[t]
        z[t + 1] = model.a0 @ z[t] + model.b @ v[t]

    p_factor = psd_factor(model.law.sigma)
    w_factor = psd_factor(model.w)
    spec = model.abar
    bounds = [(c, c * CHUNK_TRIALS, min(N, (c + 1) * CHUNK_TRIALS))
              for c in range(-(-N // CHUNK_TRIALS))]

    def work(bound):
        c, lo, hi = bound
        size = hi - lo
        rng = chunk_rng(config.seed, c)
        p = rng.standard_normal((T, size, spec.l)) @ p_factor.T
        w = rng.standard_normal((T, size, n)) @ w_factor.T
        x = np.tile(x0, (size, 1))
        s1 = np.zeros((T + 1, n))
        s2 = np.zeros((T + 1, n, n))
        s4 = np.zeros((T + 1, n, n))
        for t in range(T):
            e = x - z[t]
            u = e @ k.T + v[t]
            a = model.a0 + evaluate_abar_batch(spec, p[t])
            x = np.einsum("sij,sj->si", a, x) + u @ model.b.T + w[t]
            e = x - z[t + 1]
            outer = np.einsum("si,sj->sij", e, e)
            s1[t + 1] = e.sum(axis=0)
            s2[t + 1] = outer.sum(axis=0)
            s4[t + 1] = np.square(outer).sum(axis=0)
        return s1, s2, s4

    nthreads = min(resolve_threads(threads), len(bounds))
    if nthreads > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    s1 = np.zeros((T + 1, n))
    s2 = np.zeros((T + 1, n, n))
    s4 = np.zeros((T + 1, n, n))
    for a, b, c in parts:
        s1 += a
        s2 += b
        s4 += c
    mean = s1 / N
    cov = s2 / N
    cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
    var = np.clip(s4 / N - cov**2, 0.0, None) * N / (N - 1)
    return EmpiricalCovTrajectory(cov, mean, np.sqrt(var / N), N)


@dataclass(frozen=True)
class ComparisonReport:
    deviation: np.ndarray  # empirical - theoretical, (T+1, n, n)
    z_scores: np.ndarray  # (T+1, n, n)
    max_abs: float
    max_rel: float
    max_z: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.max_z <= self.threshold)

    def rows(self):
        """``(k, i, j, deviation, z)`` for each step and non-redundant entry (1-based i <= j)."""
        T1, n, _ = self.deviation.shape
        for t in range(T1):
            for i in range(n):
                for j in range(i, n):
                    yield t, i + 1, j + 1, float(self.deviation[t, i, j]), float(self.z_scores[t, i, j])


REL_FLOOR = 0.05


def compare(theoretical: CovarianceTrajectory, empirical: EmpiricalCovTrajectory,
            threshold: float = 5.0) -> ComparisonReport:
    """Per-entry, per-step deviations and z-scores of empirical vs. theoretical covariance.

    Relative error is reported only where ``|theoretical| > 0.05``. Entries
    with zero standard error must match to 1e-12.
    """
    th, em, se = theoretical.cov_seq, empirical.cov_seq, empirical.stderr_seq
    if th.shape != em.shape:
        raise DimensionError(f"trajectory shapes differ: theoretical {th.shape}, empirical {em.shape}")
    dev = em - th
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, np.abs(dev) / se, np.where(np.abs(dev) <= 1e-12, 0.0, np.inf))
        mask = np.abs(th) > REL_FLOOR
        rel = float(np.max(np.abs(dev[mask]) / np.abs(th[mask]))) if mask.any() else 0.0
    return ComparisonReport(dev, z, float(np.max(np.abs(dev))), rel, float(np.max(z)), threshold)
