"""Pre-stabilizing gain synthesis from the 2n x 2n decay-rate LMI

    [[(alpha - sigma_max(C_p)) I, A_K^T], [A_K, I]] > 0,   A_K = A0 + B K,

which holds iff ``sigma_max(A_K)**2 < alpha - sigma_max(C_p)`` and then
guarantees ``rho(M(K)) < alpha``. Minimizing ``alpha`` therefore amounts to
minimizing ``sigma_max(A0 + B K)`` over ``K``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import as_gain, build_m, closed_loop, cp_value
from .errors import ConvergenceError, InfeasibleError, NumericalError
from .matops import min_eig_sym, sigma_max, spectral_radius

DEFAULT_TOL = 1e-4


def lmi_matrix(model, gain, alpha: float, cp) -> np.ndarray:
    n = model.n
    ak = closed_loop(model, gain)
    beta = alpha - sigma_max(cp_value(cp))
    return np.block([[beta * np.eye(n), ak.T], [ak, np.eye(n)]])


def verify_lmi(model, gain, alpha: float, cp) -> float:
    """Smallest eigenvalue of the LMI block matrix; positive iff the condition holds strictly."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return min_eig_sym(lmi_matrix(model, gain, alpha, cp), "LMI matrix")


def _range_projector(b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-inverse of ``b`` and the orthogonal projector onto its range."""
    b_pinv = np.linalg.pinv(b)
    return b_pinv, b @ b_pinv


def _exact(a0, b):
    # For any K, (I - P) (A0 + B K) = (I - P) A0 with P the projector onto
    # range(B), and sigma_max never increases under an orthogonal projection,
    # so sigma_max((I - P) A0) is a lower bound attained by K = -pinv(B) A0.
    b_pinv, _ = _range_projector(b)
    k = -b_pinv @ a0
    return k, sigma_max(a0 + b @ k)


def _lower_bound(a0, b) -> float:
    """Dual certificate: ``sigma_max((I - P) A0) <= sigma_max(A0 + B K)`` for all K."""
    _, proj = _range_projector(b)
    return sigma_max(a0 - proj @ a0)


def _solve_lmi_sdp(a0, b, beta=None):
    """Pose the LMI as a semidefinite program (interior-point, via cvxpy).

    With ``beta=None`` the upper-left scale ``s`` is minimized; otherwise it
    is fixed to ``beta`` and only feasibility is sought. Returns ``K`` or
    ``None`` if the solver reports infeasibility.
    """
    import cvxpy as cvx

    n, m = b.shape
    k = cvx.Variable((m, n))
    s = cvx.Variable() if beta is None else beta
    ak = a0 + b @ k
    block = cvx.bmat([[s * np.eye(n), ak.T], [ak, np.eye(n)]])
    objective = cvx.Minimize(s if beta is None else 0)
    prob = cvx.Problem(objective, [0.5 * (block + block.T) >> 0])
    try:
        prob.solve(solver=cvx.CLARABEL)
    except cvx.SolverError as exc:
        raise NumericalError(f"SDP solver failed: {exc}") from None
    if prob.status in (cvx.INFEASIBLE, cvx.INFEASIBLE_INACCURATE):
        return None
    if k.value is None:
        raise NumericalError(f"SDP solver returned status {prob.status!r}")
    return np.asarray(k.value, dtype=float).reshape(m, n)


def _sdp(a0, b, tol):
    k = _solve_lmi_sdp(a0, b)
    if k is None:
        raise NumericalError("SDP reported infeasibility for an always-feasible problem")
    upper = sigma_max(a0 + b @ k)
    lower = _lower_bound(a0, b)
    if upper - lower > tol:
        raise ConvergenceError(
            f"SDP solution not within tol={tol:g} of the certified optimum "
            f"(bracket [{lower:.9g}, {upper:.9g}])", incumbent=k, bracket=(lower, upper))
    return k, upper


def min_spectral_norm_gain(a0, b, tol: float = DEFAULT_TOL, method: str = "exact"):
    """Gain minimizing ``sigma_max(A0 + B K)``; returns ``(K, t_star)``.

    ``method="exact"`` uses the range-projection solution (minimum-norm K,
    zero duality gap). ``method="sdp"`` solves the LMI with an interior-point
    solver and checks the result against the dual lower bound to ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a0 = np.asarray(a0, dtype=float)
    b = np.asarray(b, dtype=float)
    if method == "exact":
        return _exact(a0, b)
    if method == "sdp":
        return _sdp(a0, b, tol)
    raise ValueError(f"unknown method {method!r}")


def feasible_gain(a0, b, t_bound: float, method: str = "exact", tol: float = DEFAULT_TOL):
    """Any gain with ``sigma_max(A0 + B K) < t_bound`` (no minimization)."""
    a0 = np.asarray(a0, dtype=float)
    b = np.asarray(b, dtype=float)
    if method == "exact":
        k, t = _exact(a0, b)
    elif method == "sdp":
        beta = t_bound**2 - tol
        k = _solve_lmi_sdp(a0, b, beta) if beta > 0 else None
        if k is None:
            raise InfeasibleError(
                f"no gain achieves sigma_max(A0 + B K) < {t_bound:.6g} "
                f"(certified lower bound {_lower_bound(a0, b):.6g})")
        t = sigma_max(a0 + b @ k)
    else:
        raise ValueError(f"unknown method {method!r}")
    if t >= t_bound:
        raise InfeasibleError(
            f"no gain achieves sigma_max(A0 + B K) < {t_bound:.6g} (minimum is {t:.6g})")
    return k, t


@dataclass(frozen=True)
class SynthesisResult:
    gain: np.ndarray
    alpha: float
    beta: float
    lmi_margin: float
    rho: float
    t_star: float
    sigma_cp: float
    feasible: bool = True
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "K": self.gain.tolist(),
            "alpha": self.alpha,
            "beta": self.beta,
            "lmi_margin": self.lmi_margin,
            "rho": self.rho,
            "t_star": self.t_star,
            "sigma_max_cp": self.sigma_cp,
            "feasible": self.feasible,
            "message": self.message,
        }


def synthesize_gain(model, cp, tol: float = DEFAULT_TOL, method: str = "exact",
                    feasibility_only: bool = False) -> SynthesisResult:
    """Gain and decay rate certified by the LMI.

    The reported ``alpha`` is ``sigma_max(C_p) + t_star**2 + 10 * tol`` so the
    strict inequality holds with margin. With ``feasibility_only`` the decay
    rate is fixed at 1 and any certifying gain is returned. A model whose
    minimal ``alpha`` is not below 1 yields ``feasible=False``; this only
    means the (conservative) condition cannot certify it.
    """
    c = cp_value(cp)
    sigma_cp = sigma_max(c)
    if sigma_cp >= 1.0:
        raise InfeasibleError(
            f"sigma_max(C_p) = {sigma_cp:.6g} >= 1: the upper-left block "
            f"(alpha - sigma_max(C_p)) I cannot be positive for any alpha in (0, 1)")

    if feasibility_only:
        k, t_star = feasible_gain(model.a0, model.b, np.sqrt(1.0 - sigma_cp), method, tol)
        alpha = 1.0
    else:
        k, t_star = min_spectral_norm_gain(model.a0, model.b, tol, method)
        alpha = sigma_cp + t_star**2 + 10.0 * tol
    k = as_gain(k, model)
    beta = alpha - sigma_cp
    if alpha > 1.0:
        return SynthesisResult(
            k, alpha, beta, float("nan"), spectral_radius(build_m(model, k, c)), t_star,
            sigma_cp, feasible=False,
            message=f"minimal decay rate {alpha:.6g} >= 1: the sufficient condition cannot "
                    f"certify covariance stability (this does not imply instability)")

    margin = verify_lmi(model, k, alpha, c)
    rho = spectral_radius(build_m(model, k, c))
    if margin <= 0.0:
        raise NumericalError(
            f"synthesized gain fails the LMI: margin={margin:.3e}, alpha={alpha:.9g}, "
            f"t*={t_star:.9g}, sigma_max(C_p)={sigma_cp:.9g}, K={k.tolist()}")
    if rho >= alpha:
        raise NumericalError(
            f"certified gain violates rho(M(K)) < alpha: rho={rho:.9g}, alpha={alpha:.9g}, "
            f"K={k.tolist()}")
    return SynthesisResult(k, alpha, beta, margin, rho, t_star, sigma_cp)
