"""Exact error-covariance dynamics under parametric and additive noise.

With ``A_K = A0 + B K`` and ``C_p = E[Abar kron Abar]`` the error covariance
``S_k = cov(e_k)`` obeys

    S_{k+1} = A_K S_k A_K^T + W + unvec(C_p vec(S_k + z_k z_k^T))

or, vectorized, ``eps_{k+1} = M(K) eps_k + C_p zeta_k + vec(W)`` with
``M(K) = A_K kron A_K + C_p``. Since ``z_k`` is deterministic, ``cov(x_k)``
equals ``cov(e_k)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericalError, UnstableError
from .matops import as_vector, sigma_max, solve_linear, spectral_radius, unvec, vec

ASYM_TOL = 1e-9


def cp_value(cp) -> np.ndarray:
    """Accept a :class:`~covctl.moments.CpMatrix` or a bare array."""
    return np.asarray(getattr(cp, "value", cp), dtype=float)


def as_gain(gain, model) -> np.ndarray:
    k = np.array(gain, dtype=float)
    if k.ndim == 1:
        k = k.reshape(1, -1) if model.m == 1 else k.reshape(-1, 1)
    if k.shape != (model.m, model.n):
        raise DimensionError(f"gain must be {model.m}x{model.n}, got shape {k.shape}")
    if not np.all(np.isfinite(k)):
        raise ValueError("gain contains non-finite entries")
    return k


def closed_loop(model, gain) -> np.ndarray:
    return model.a0 + model.b @ as_gain(gain, model)


def _check_cp(cp: np.ndarray, n: int) -> None:
    if cp.shape != (n * n, n * n):
        raise DimensionError(f"C_p must be {n * n}x{n * n}, got shape {cp.shape}")


def build_m(model, gain, cp) -> np.ndarray:
    """Transition matrix ``M(K) = A_K kron A_K + C_p`` of the vectorized covariance."""
    ak = closed_loop(model, gain)
    c = cp_value(cp)
    _check_cp(c, model.n)
    return np.kron(ak, ak) + c


def _symmetrize(s: np.ndarray) -> np.ndarray:
    asym = float(np.max(np.abs(s - s.T)))
    if asym > ASYM_TOL * max(1.0, float(np.max(np.abs(s)))):
        raise NumericalError(f"covariance update lost symmetry (max |S - S^T| = {asym:.3e})")
    return 0.5 * (s + s.T)


def step_matrix_form(model, gain, cp, cov_e, z) -> np.ndarray:
    n = model.n
    ak = closed_loop(model, gain)
    c = cp_value(cp)
    _check_cp(c, n)
    s = np.asarray(cov_e, dtype=float)
    z = as_vector(z, "z")
    if s.shape != (n, n) or z.size != n:
        raise DimensionError(f"cov_e must be {n}x{n} and z of length {n}")
    nxt = ak @ s @ ak.T + model.w + unvec(c @ vec(s + np.outer(z, z)), n, n)
    return _symmetrize(nxt)


def step_vec_form(model, gain, cp, eps, zeta) -> np.ndarray:
    n2 = model.n**2
    eps = np.asarray(eps, dtype=float).reshape(-1)
    zeta = np.asarray(zeta, dtype=float).reshape(-1)
    if eps.size != n2 or zeta.size != n2:
        raise DimensionError(f"eps and zeta must have length {n2}")
    c = cp_value(cp)
    return build_m(model, gain, c) @ eps + c @ zeta + vec(model.w)


@dataclass(frozen=True)
class CovarianceTrajectory:
    cov_seq: np.ndarray  # (T+1, n, n)
    z_seq: np.ndarray  # (T+1, n)
    eps_seq: np.ndarray | None = None  # (T+1, n*n)

    @property
    def horizon(self) -> int:
        return self.cov_seq.shape[0] - 1


def propagate(model, gain, cp, z0=None, horizon: int = 50, nominal=None,
              with_vec: bool = False) -> CovarianceTrajectory:
    """Propagate ``cov(e_k)`` from ``cov(e_0) = 0`` for ``horizon`` steps.

    ``nominal`` is ``None`` for the feedback policy ``v_k = K z_k`` or a
    sequence ``v_0 .. v_{T-1}`` (shape ``(T, m)``). With ``with_vec`` the
    vectorized form is run alongside and cross-checked to 1e-9.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    n = model.n
    k = as_gain(gain, model)
    ak = model.a0 + model.b @ k
    c = cp_value(cp)
    _check_cp(c, n)
    z = np.zeros(n) if z0 is None else as_vector(z0, "z0")
    if z.size != n:
        raise DimensionError(f"z0 must have length {n}")
    if nominal is not None:
        v_seq = np.asarray(nominal, dtype=float).reshape(-1, model.m)
        if v_seq.shape[0] < horizon:
            raise ValueError(f"nominal input sequence has {v_seq.shape[0]} steps, "
                             f"horizon needs {horizon}")

    covs = np.zeros((horizon + 1, n, n))
    zs = np.zeros((horizon + 1, n))
    zs[0] = z
    eps = np.zeros((horizon + 1, n * n)) if with_vec else None
    m_mat = np.kron(ak, ak) + c if with_vec else None
    omega = vec(model.w)
    for t in range(horizon):
        s, zt = covs[t], zs[t]
        covs[t + 1] = _symmetrize(ak @ s @ ak.T + model.w + unvec(c @ vec(s + np.outer(zt, zt)), n, n))
        if with_vec:
            eps[t + 1] = m_mat @ eps[t] + c @ vec(np.outer(zt, zt)) + omega
            gap = float(np.max(np.abs(eps[t + 1] - vec(covs[t + 1]))))
            if gap > 1e-9 * max(1.0, float(np.max(np.abs(eps[t + 1])))):
                raise NumericalError(f"matrix and vectorized forms disagree at step {t + 1} "
                                     f"(max deviation {gap:.3e})")
        if nominal is None:
            zs[t + 1] = ak @ zt
        else:
            zs[t + 1] = model.a0 @ zt + model.b @ v_seq[t]
    return CovarianceTrajectory(covs, zs, eps)


def steady_state(model, gain, cp) -> np.ndarray:
    """Limit ``unvec((I - M(K))^-1 vec(W))``; requires ``rho(M(K)) < 1``.

    The limit also presumes the nominal state decays to zero, which holds for
    ``v_k = K z_k`` but is the caller's obligation for custom input sequences.
    """
    n = model.n
    m_mat = build_m(model, gain, cp)
    rho = spectral_radius(m_mat)
    if rho >= 1.0:
        raise UnstableError(f"covariance dynamics not asymptotically stable; rho = {rho:.6g}", rho)
    s = unvec(solve_linear(np.eye(n * n) - m_mat, vec(model.w)), n, n)
    return _symmetrize(s)


@dataclass(frozen=True)
class StabilityReport:
    rho: float  # rho(M(K))
    sigma_kron: float  # sigma_max(A_K kron A_K)
    sigma_cp: float  # sigma_max(C_p)
    rho_closed_loop: float  # rho(A_K)

    @property
    def bound(self) -> float:
        """Upper bound ``sigma_max(A_K kron A_K) + sigma_max(C_p)`` on ``rho``."""
        return self.sigma_kron + self.sigma_cp

    @property
    def stable(self) -> bool:
        return self.rho < 1.0


def stability_report(model, gain, cp) -> StabilityReport:
    ak = closed_loop(model, gain)
    c = cp_value(cp)
    m_mat = build_m(model, gain, c)
    return StabilityReport(
        rho=spectral_radius(m_mat),
        sigma_kron=sigma_max(np.kron(ak, ak)),
        sigma_cp=sigma_max(c),
        rho_closed_loop=spectral_radius(ak),
    )
