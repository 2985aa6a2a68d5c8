"""Regression setup and the least-squares family of estimators.

Coefficient vectors are ordered from lag ``-m_nc`` to lag ``m_c``, i.e.
``rho[j]`` multiplies ``h u((k - (j - m_nc)) h)`` in row ``k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
import scipy.linalg

from .errors import NotIdentifiableError, SolveFailedError
from .simulate import Dataset

__all__ = [
    "RegressionProblem",
    "EstimationResult",
    "build_regressor",
    "regressor_from_samples",
    "ls_estimate",
    "reg_ls_estimate",
    "oracle_estimate",
    "freq_response_estimate",
]

_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class RegressionProblem:
    phi: np.ndarray
    y: np.ndarray
    h: float
    m_nc: int
    m_c: int

    @property
    def n_params(self) -> int:
        return self.m_nc + self.m_c + 1


@dataclass
class EstimationResult:
    method: str
    rho: np.ndarray
    h: float
    m_nc: int
    m_c: int
    hyperparams: dict = field(default_factory=dict)
    sigma2: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "rho": np.asarray(self.rho, dtype=float).tolist(),
            "h": self.h,
            "m_nc": self.m_nc,
            "m_c": self.m_c,
            "hyperparams": self.hyperparams,
            "sigma2": self.sigma2,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EstimationResult":
        return cls(d["method"], np.asarray(d["rho"], dtype=float), float(d["h"]), int(d["m_nc"]),
                   int(d["m_c"]), dict(d.get("hyperparams") or {}), d.get("sigma2"))


def regressor_from_samples(u, h: float, m_nc: int, m_c: int) -> np.ndarray:
    """``phi[k-1, j] = h u((k - j + m_nc) h)`` with ``u`` zero outside ``1..N``."""
    if m_nc + m_c < 0:
        raise ValueError("m_nc + m_c must be >= 0")
    u = np.asarray(u, dtype=float)
    n = u.size
    padded = np.concatenate([np.zeros(max(m_c, 0)), u, np.zeros(max(m_nc, 0))])
    k = np.arange(1, n + 1)[:, None]
    j = np.arange(m_nc + m_c + 1)[None, :]
    sample = k - j + m_nc  # 1-based sample index
    return h * padded[sample - 1 + max(m_c, 0)]


def build_regressor(dataset: Dataset, m_nc: int, m_c: int) -> RegressionProblem:
    phi = regressor_from_samples(dataset.u, dataset.h, m_nc, m_c)
    return RegressionProblem(phi, dataset.y.copy(), dataset.h, m_nc, m_c)


def ls_estimate(prob: RegressionProblem) -> np.ndarray:
    """Least-squares coefficients through a thin QR of ``phi``."""
    n, m = prob.phi.shape
    if n < m:
        raise NotIdentifiableError(f"{n} samples cannot determine {m} parameters", math.inf)
    Q, R = scipy.linalg.qr(prob.phi, mode="economic")
    d = np.abs(np.diag(R))
    cond = np.inf if d.size == 0 or d.min() == 0 else float(np.linalg.cond(R))
    if not cond < 1e-3 / _EPS:
        raise NotIdentifiableError(f"regressor is rank deficient (condition {cond:.3g})", cond)
    return scipy.linalg.solve_triangular(R, Q.T @ prob.y)


def reg_ls_estimate(prob: RegressionProblem, p_r, gamma: float) -> np.ndarray:
    """``(P phi'phi + gamma I)^-1 P phi' y`` solved as a linear system."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    P = np.asarray(p_r, dtype=float)
    m = prob.n_params
    lhs = P @ (prob.phi.T @ prob.phi) + gamma * np.eye(m)
    rhs = P @ (prob.phi.T @ prob.y)
    try:
        return np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolveFailedError(str(exc)) from exc


def oracle_estimate(prob: RegressionProblem, rho_star, sigma2: float) -> np.ndarray:
    """MSE-optimal regularized estimate with ``P = rho* rho*'`` and ``gamma = sigma2``."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    rho_star = np.asarray(rho_star, dtype=float)
    return reg_ls_estimate(prob, np.outer(rho_star, rho_star), sigma2)


def freq_response_estimate(rho, h: float, m_nc: int, m_c: int, omega):
    """Non-parametric ``G(i w) = rho' Gamma(e^{iw})``."""
    rho = np.asarray(rho, dtype=float)
    w = np.asarray(omega, dtype=float)
    if np.any(np.abs(w) > np.pi / h * (1 + 1e-12)):
        warnings.warn("frequency beyond the Nyquist band", RuntimeWarning, stacklevel=2)
    lags = np.arange(-m_nc, m_c + 1)
    out = h * (np.exp(-1j * h * np.multiply.outer(w, lags)) @ rho)
    return out[()] if np.ndim(out) == 0 else out
