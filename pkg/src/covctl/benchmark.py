"""Wall-clock timing of gain synthesis versus state dimension."""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InfeasibleError
from .matops import sigma_max
from .model import PolyTerm, RandomMatrixSpec, make_model
from .moments import compute_cp_analytic
from .synthesis import min_spectral_norm_gain, synthesize_gain

CSV_HEADER = ("n", "repetitions", "median_ms", "mean_ms", "p95_ms", "alpha_median")
DEFAULT_VARIANCE = 0.07
MAX_ATTEMPTS = 100


def random_abar(n: int, structure: str = "diagonal") -> RandomMatrixSpec:
    """One independent degree-1 parameter per random entry.

    ``"diagonal"`` randomizes the n diagonal entries, ``"full"`` all n*n
    entries. With unit-free variance ``v`` the full structure has
    ``sigma_max(C_p) = n * v``, the diagonal one ``v``.
    """
    if structure == "diagonal":
        cells = [(i, i) for i in range(n)]
    elif structure == "full":
        cells = [(i, j) for i in range(n) for j in range(n)]
    else:
        raise ValueError(f"unknown structure {structure!r}")
    l = len(cells)
    entries = {}
    for r, cell in enumerate(cells):
        exps = [0] * l
        exps[r] = 1
        entries[cell] = (PolyTerm(1.0, tuple(exps)),)
    return RandomMatrixSpec(n, l, entries)


def generate_random_model(n: int, seed: int, variance: float = DEFAULT_VARIANCE,
                          structure: str = "diagonal"):
    """Random test plant with ``B = I``, ``W = I`` for which the LMI is feasible.

    ``A0`` has i.i.d. entries uniform on [-1, 1]; draws are rejected until
    ``sigma_max(C_p) < 1`` and the minimal decay rate is below 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    spec = random_abar(n, structure)
    sigma = variance * np.eye(spec.l)
    model = make_model(rng.uniform(-1.0, 1.0, (n, n)), np.eye(n), np.eye(n), spec, sigma)
    # C_p does not depend on A0, so only A0 is resampled
    sc = sigma_max(compute_cp_analytic(model).value)
    if sc >= 1.0:
        raise InfeasibleError(
            f"sigma_max(C_p) = {sc:.4g} >= 1 for n={n}, variance={variance}, "
            f"structure={structure!r}; no A0 can make the condition feasible, try a smaller variance")
    for attempt in range(MAX_ATTEMPTS):
        if attempt:
            model = replace(model, a0=rng.uniform(-1.0, 1.0, (n, n)))
        _, t = min_spectral_norm_gain(model.a0, model.b)
        if sc + t * t < 1.0:
            return model
    raise InfeasibleError(
        f"no feasible random model after {MAX_ATTEMPTS} attempts (n={n}, variance={variance}, "
        f"structure={structure!r}); try a smaller variance")


@dataclass(frozen=True)
class BenchCase:
    n: int
    repetitions: int
    seed: int
    median_ms: float
    mean_ms: float
    p95_ms: float
    alpha_median: float
    alphas: tuple = field(default=(), repr=False)

    def csv_row(self) -> list[str]:
        return [str(self.n), str(self.repetitions), f"{self.median_ms:.16e}",
                f"{self.mean_ms:.16e}", f"{self.p95_ms:.16e}", f"{self.alpha_median:.16e}"]


def model_seed(seed: int, n: int, rep: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(n, rep)).generate_state(1)[0])


def run_benchmark(n_list, repetitions: int = 100, seed: int = 0, method: str = "sdp",
                  feasibility_only: bool = False, variance: float = DEFAULT_VARIANCE,
                  structure: str = "diagonal", progress=None) -> list[BenchCase]:
    """Time ``synthesize_gain`` for each dimension in ``n_list``.

    Model generation and ``C_p`` assembly happen outside the timed region.
    Solves run strictly one after another.
    """
    if repetitions < 10:
        raise ValueError("repetitions must be >= 10")
    # warm-up outside the timed region (solver import and first-call setup)
    warm = generate_random_model(2, seed, variance, structure)
    synthesize_gain(warm, compute_cp_analytic(warm), method=method, feasibility_only=feasibility_only)
    cases = []
    for n in n_list:
        times, alphas = [], []
        for rep in range(repetitions):
            model = generate_random_model(n, model_seed(seed, n, rep), variance, structure)
            cp = compute_cp_analytic(model)
            t0 = time.perf_counter()
            res = synthesize_gain(model, cp, method=method, feasibility_only=feasibility_only)
            times.append((time.perf_counter() - t0) * 1e3)
            alphas.append(res.alpha)
        times = np.array(times)
        case = BenchCase(n, repetitions, seed, float(np.median(times)), float(times.mean()),
                         float(np.percentile(times, 95)), float(np.median(alphas)), tuple(alphas))
        cases.append(case)
        if progress:
            progress(case)
    return cases


def write_csv(cases, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for case in cases:
            writer.writerow(case.csv_row())
