"""Empirical-Bayes tuning of TC/SS hyperparameters through a thin QR factorization.

With ``P(beta)/sigma2 = L L'`` and the thin QR

    [phi L  y]   =  Q [R1  R2]
    [  I    0]        [ 0   r]

the concentrated negative log marginal likelihood is
``N log r + log det R1`` and the noise variance estimate is ``r**2 / N``.
The kernel scale searched over is therefore the *concentrated* scale
``alpha / sigma2``; :class:`TuningResult` reports ``beta_hat`` in prior units.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import TuningFailedError
from .kernels import KernelSpec, factor_kernel, factor_kernel_info, kernel_matrix

__all__ = [
    "QrFactors",
    "OptimizerConfig",
    "TuningResult",
    "thin_qr_stack",
    "compress",
    "concentrated_nll",
    "marginal_nll",
    "optimize_hyperparameters",
    "reg_estimate_via_qr",
    "residual_noise_variance",
]

_DEGENERATE = -1e300
_THETA_CLIP = 30.0


@dataclass(frozen=True, eq=False)
class QrFactors:
    r1: np.ndarray
    r2: np.ndarray
    r: float

    @property
    def degenerate(self) -> bool:
        return self.r == 0.0


@dataclass(frozen=True)
class OptimizerConfig:
    starts: int = 8
    max_iter: int = 400
    xatol: float = 1e-9
    fatol: float = 1e-9

    @classmethod
    def from_dict(cls, d: dict | None) -> "OptimizerConfig":
        d = d or {}
        return cls(**{k: d[k] for k in ("starts", "max_iter", "xatol", "fatol") if k in d})


@dataclass
class TuningResult:
    beta_hat: KernelSpec
    sigma2_hat: float
    nll: float
    trace: list = field(default_factory=list)

    @property
    def concentrated(self) -> KernelSpec:
        """Kernel with scale ``alpha / sigma2``, the parametrization of ``L``."""
        return self.beta_hat.scaled(1.0 / self.sigma2_hat)

    def hyperparams(self) -> dict:
        d = self.beta_hat.to_dict()
        d["sigma2"] = self.sigma2_hat
        d["nll"] = self.nll
        return d


def thin_qr_stack(phi, L, y) -> QrFactors:
    """Thin QR of ``[[phi L, y], [I, 0]]`` with ``R1`` having positive diagonal."""
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    m = L.shape[1]
    top = np.hstack([phi @ L, y[:, None]])
    bottom = np.hstack([np.eye(m), np.zeros((m, 1))])
    R = scipy.linalg.qr(np.vstack([top, bottom]), mode="r", check_finite=False)[0][: m + 1]
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    R = R * signs[:, None]
    return QrFactors(R[:m, :m], R[:m, m].copy(), abs(float(R[m, m])))


def compress(phi, y):
    """``(R_phi, z)`` such that ``[phi y]`` and ``[[R_phi, z]]`` share their R factor.

    Replacing ``(phi, y)`` by the compressed pair leaves every quantity built
    from :func:`thin_qr_stack` unchanged while shrinking ``N`` rows to at most
    ``m + 1``.
    """
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    R = scipy.linalg.qr(np.hstack([phi, y[:, None]]), mode="r", check_finite=False)[0]
    R = R[: min(R.shape)]
    return R[:, :-1], R[:, -1]


def _cost(L, phi, y, n):
    f = thin_qr_stack(phi, L, y)
    if f.degenerate:
        return _DEGENERATE, f
    return n * math.log(f.r) + float(np.sum(np.log(np.diag(f.r1)))), f


def _fast_cost(spec, phi, y, n, m_nc, m_c):
    """Optimizer inner loop: same value as :func:`concentrated_nll` without validation overhead."""
    P = kernel_matrix(spec, m_nc, m_c)
    active = np.diag(P) > 0.0
    if not active.all():
        return _cost(factor_kernel(P), phi, y, n)[0]
    try:
        L = np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        L = factor_kernel(P)
    m = L.shape[1]
    stack = np.zeros((phi.shape[0] + m, m + 1))
    stack[: phi.shape[0], :m] = phi @ L
    stack[: phi.shape[0], m] = y
    stack[phi.shape[0]:, :m] = np.eye(m)
    R = np.linalg.qr(stack, mode="r")
    r = abs(R[m, m])
    if r == 0.0:
        return _DEGENERATE
    return n * math.log(r) + float(np.sum(np.log(np.abs(np.diag(R)[:m]))))


def concentrated_nll(spec: KernelSpec, phi, y, m_nc: int, m_c: int, n: int | None = None) -> float:
    """``N log r(beta) + log det R1(beta)``; ``spec.alpha`` is the concentrated scale.

    ``n`` overrides the sample count when ``(phi, y)`` come from :func:`compress`.
    Returns a large negative sentinel when ``r = 0`` (exact fit).
    """
    n = len(y) if n is None else n
    L = factor_kernel(kernel_matrix(spec, m_nc, m_c))
    return _cost(L, phi, y, n)[0]


def marginal_nll(spec: KernelSpec, sigma2: float, phi, y, m_nc: int, m_c: int, n: int | None = None) -> float:
    """``y' Z^-1 y + log det Z`` with ``Z = phi P phi' + sigma2 I`` evaluated via the QR route."""
    L = factor_kernel(kernel_matrix(spec, m_nc, m_c) / sigma2)
    f = thin_qr_stack(phi, L, y)
    n = len(y) if n is None else n
    return f.r**2 / sigma2 + n * math.log(sigma2) + 2.0 * float(np.sum(np.log(np.diag(f.r1))))


def _sigmoid(t):
    return 1.0 / (1.0 + math.exp(-t))


def _logit(p):
    return math.log(p / (1.0 - p))


def _decode(theta, kind, causal_only):
    theta = np.clip(theta, -_THETA_CLIP, _THETA_CLIP)
    if causal_only:
        return KernelSpec(kind, 0.0, _sigmoid(theta[0]), math.exp(theta[1]))
    return KernelSpec(kind, _sigmoid(theta[0]), _sigmoid(theta[1]), math.exp(theta[2]))


def _starts(count, alpha_ref, causal_only):
    lam = (0.6, 0.9)
    scales = (1.0, 100.0)
    grid = []
    for s in scales:
        for lc in lam:
            if causal_only:
                grid.append((_logit(lc), math.log(alpha_ref * s)))
            else:
                for lnc in lam:
                    grid.append((_logit(lnc), _logit(lc), math.log(alpha_ref * s)))
    # deduplicate (causal grid is smaller) then extend by deterministic jitter
    out = list(dict.fromkeys(grid))
    i = 0
    while len(out) < count:
        base = np.array(out[i % len(out)])
        shift = 0.5 * np.cos(np.arange(base.size) + i)
        out.append(tuple(base + shift))
        i += 1
    return [np.array(s) for s in out[:count]]


def optimize_hyperparameters(kind: str, phi, y, m_nc: int, m_c: int,
                             opt: OptimizerConfig = OptimizerConfig(),
                             sigma2: float | None = None) -> TuningResult:
    """Maximize the marginal likelihood over ``(lambda_nc, lambda_c, alpha)``.

    Nelder-Mead runs from ``opt.starts`` deterministic points in
    ``(logit lambda_nc, logit lambda_c, log alpha)``; with ``m_nc == 0`` the
    non-causal decay has no effect and is fixed to zero.  When ``sigma2`` is
    given (e.g. from :func:`residual_noise_variance`) it is held fixed instead
    of being concentrated out.
    """
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    causal_only = m_nc == 0
    cphi, cy = compress(phi, y)
    alpha_ref = phi.shape[1] * n / max(float(np.sum(phi**2)), 1e-300)
    if sigma2 is not None:
        alpha_ref *= sigma2

    def objective(theta):
        spec = _decode(theta, kind, causal_only)
        try:
            if sigma2 is None:
                value = _fast_cost(spec, cphi, cy, n, m_nc, m_c)
                return math.inf if value == _DEGENERATE else value
            return 0.5 * marginal_nll(spec, sigma2, cphi, cy, m_nc, m_c, n)
        except Exception:
            return math.inf

    trace = []
    best = None
    for x0 in _starts(opt.starts, alpha_ref, causal_only):
        res = scipy.optimize.minimize(
            objective, x0, method="Nelder-Mead",
            options={"maxiter": opt.max_iter, "xatol": opt.xatol, "fatol": opt.fatol},
        )
        entry = {"start": x0.tolist(), "theta": res.x.tolist(), "nll": float(res.fun),
                 "nit": int(res.nit), "nfev": int(res.nfev)}
        trace.append(entry)
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise TuningFailedError("every start ended degenerate", trace)
    spec = _decode(best.x, kind, causal_only)
    if sigma2 is None:
        f = thin_qr_stack(cphi, factor_kernel(kernel_matrix(spec, m_nc, m_c)), cy)
        sigma2_hat = f.r**2 / n
        return TuningResult(spec.scaled(sigma2_hat), sigma2_hat, float(best.fun), trace)
    return TuningResult(spec, float(sigma2), float(best.fun), trace)


def reg_estimate_via_qr(tr: TuningResult, phi, y, m_nc: int, m_c: int) -> np.ndarray:
    """``rho = L R1^-1 R2`` with ``L L' = P(beta_hat)/sigma2_hat``."""
    L, _ = factor_kernel_info(kernel_matrix(tr.concentrated, m_nc, m_c))
    f = thin_qr_stack(phi, L, y)
    return L @ scipy.linalg.solve_triangular(f.r1, f.r2)


def residual_noise_variance(phi, y) -> float:
    """Sample variance of least-squares residuals, ``RSS / (N - m)``."""
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = phi.shape
    if n <= m:
        raise ValueError("need more samples than parameters")
    rho, *_ = np.linalg.lstsq(phi, y, rcond=None)
    res = y - phi @ rho
    return float(res @ res) / (n - m)
