"""Dense linear-algebra kernel.

Matrices are plain 2-D ``numpy`` float arrays and vectors are 1-D arrays.
``vec`` stacks columns, so that ``vec(A @ X @ C) == kron(C.T, A) @ vec(X)``
holds with ``numpy.kron``'s block layout.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError, NumericalError

# n**2 above this switches spectral_radius to power iteration
DENSE_EIG_LIMIT = 400
POWER_TOL = 1e-9
POWER_MAXITER = 10_000
SYM_TOL = 1e-10
COND_LIMIT = 1e12


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D float array."""
    arr = np.array(a, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.array(v, dtype=float).reshape(-1)
    if arr.size == 0:
        raise DimensionError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _require_square(a: np.ndarray, name: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


def vec(a) -> np.ndarray:
    """Column-stacking vectorization: entry (i, j) lands at ``j * rows + i``."""
    return as_matrix(a).reshape(-1, order="F")


def unvec(v, rows: int, cols: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`. ``cols`` defaults to ``rows``."""
    cols = rows if cols is None else cols
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != rows * cols:
        raise DimensionError(
            f"unvec: expected vector of length {rows * cols} for a {rows}x{cols} "
            f"matrix, received length {v.size}"
        )
    return v.reshape(rows, cols, order="F")


def power_iteration_radius(a: np.ndarray, tol: float = POWER_TOL,
                           maxiter: int = POWER_MAXITER, block: int = 3,
                           seed: int = 0) -> float:
    """Spectral radius by block power (subspace) iteration.

    A block of a few vectors with a Rayleigh-Ritz step resolves dominant
    complex-conjugate or +-lambda pairs, which stall single-vector power
    iteration.
    """
    n = a.shape[0]
    block = min(block, n)
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, block)))
    prev = None
    for _ in range(maxiter):
        y = a @ q
        if not np.any(y):
            return 0.0
        q, _ = np.linalg.qr(y)
        est = float(np.max(np.abs(np.linalg.eigvals(q.T @ a @ q))))
        if prev is not None and abs(est - prev) <= tol * max(est, 1e-300):
            return est
        prev = est
    raise NumericalError(
        f"power iteration did not converge in {maxiter} iterations (last estimate {prev:.6g})"
    )


def spectral_radius(a, method: str = "auto") -> float:
    """Largest eigenvalue modulus.

    ``method`` is ``"dense"`` (general eigen-solve), ``"power"`` or ``"auto"``,
    which picks dense up to ``DENSE_EIG_LIMIT`` rows.
    """
    a = as_matrix(a, "a")
    _require_square(a, "a")
    if method == "auto":
        method = "dense" if a.shape[0] <= DENSE_EIG_LIMIT else "power"
    if method == "dense":
        return float(np.max(np.abs(np.linalg.eigvals(a))))
    if method == "power":
        return power_iteration_radius(a)
    raise ValueError(f"unknown method {method!r}")


def sigma_max(a) -> float:
    return float(np.linalg.norm(as_matrix(a, "a"), 2))


def check_symmetric(a: np.ndarray, name: str = "matrix", tol: float = SYM_TOL) -> None:
    scale = max(1.0, float(np.max(np.abs(a))))
    asym = float(np.max(np.abs(a - a.T)))
    if asym > tol * scale:
        raise ValueError(f"{name} is not symmetric (max |A - A^T| = {asym:.3e})")


def min_eig_sym(a, name: str = "matrix") -> float:
    """Smallest eigenvalue of a (numerically) symmetric matrix.

    Inputs further than 1e-10 from symmetric are rejected rather than
    silently symmetrized.
    """
    a = as_matrix(a, name)
    _require_square(a, name)
    check_symmetric(a, name)
    return float(np.linalg.eigvalsh(0.5 * (a + a.T))[0])


def solve_linear(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    _require_square(a, "a")
    b = as_vector(b, "b")
    if b.size != a.shape[0]:
        raise DimensionError(f"solve_linear: a is {a.shape}, b has length {b.size}")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NumericalError(f"matrix is singular or ill-conditioned (condition estimate {cond:.3e})")
    x = np.linalg.solve(a, b)
    bnorm = np.linalg.norm(b)
    if bnorm > 0 and np.linalg.norm(a @ x - b) > 1e-9 * bnorm:
        raise NumericalError("solve_linear residual exceeds 1e-9 relative tolerance")
    return x
