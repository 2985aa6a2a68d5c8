"""Non-causal TC and SS regularization kernels.

Matrix index ``j = 1..m_nc+m_c+1`` corresponds to lag ``j - m_nc - 1``, so
lag 0 sits at index ``m_nc + 1``.  The decay sequence is
``b_k = lambda_nc**(2|k|)`` for ``k < 0`` and ``lambda_c**(2k)`` for ``k >= 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import KernelIndefiniteError

__all__ = [
    "KernelSpec",
    "JitterPolicy",
    "b_sequence",
    "kernel_matrix",
    "factor_kernel",
    "factor_kernel_info",
]

KINDS = ("TC", "SS")


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    lambda_nc: float
    lambda_c: float
    alpha: float

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in KINDS:
            raise ValueError(f"kernel kind must be one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not (0.0 <= self.lambda_nc < 1.0 and 0.0 <= self.lambda_c < 1.0):
            raise ValueError("lambda_nc and lambda_c must lie in [0, 1)")
        if not self.alpha > 0.0:
            raise ValueError("alpha must be positive")

    def scaled(self, factor: float) -> "KernelSpec":
        return replace(self, alpha=self.alpha * factor)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lambda_nc": self.lambda_nc, "lambda_c": self.lambda_c, "alpha": self.alpha}


@dataclass(frozen=True)
class JitterPolicy:
    start: float = 1e-12
    stop: float = 1e-8
    factor: float = 10.0


def b_sequence(k, lambda_nc: float, lambda_c: float):
    """Decay profile ``b_k``; ``b_0 = 1`` and ``lambda_nc = 0`` gives exact zeros for ``k < 0``."""
    k = np.asarray(k)
    neg = np.where(k < 0, np.float64(lambda_nc) ** (2 * np.abs(k)), 0.0)
    pos = np.where(k >= 0, np.float64(lambda_c) ** (2 * np.maximum(k, 0)), 0.0)
    out = np.where(k < 0, neg, pos)
    return out[()] if out.ndim == 0 else out


def kernel_matrix(spec: KernelSpec, m_nc: int, m_c: int) -> np.ndarray:
    lags = np.arange(-m_nc, m_c + 1)
    b = b_sequence(lags, spec.lambda_nc, spec.lambda_c)
    lo = np.minimum.outer(b, b)
    if spec.kind == "TC":
        return spec.alpha * lo
    hi = np.maximum.outer(b, b)
    return spec.alpha / 6.0 * lo**2 * (3.0 * hi - lo)


def factor_kernel_info(p_r, policy: JitterPolicy = JitterPolicy()):
    """Lower-triangular ``L`` with ``L L' = p_r`` (plus jitter) and the jitter used.

    Identically zero rows/columns are factored exactly as zeros; the rest is
    Cholesky-factored, retrying with diagonal jitter proportional to the trace.
    """
    P = np.asarray(p_r, dtype=float)
    if not np.allclose(P, P.T, rtol=0, atol=1e-14 * max(1.0, float(np.max(np.abs(P))))):
        raise ValueError("matrix must be symmetric")
    n = P.shape[0]
    active = np.flatnonzero(np.any(P != 0.0, axis=1))
    L = np.zeros((n, n))
    if active.size == 0:
        return L, 0.0
    sub = P[np.ix_(active, active)]
    trace = float(np.trace(sub))
    jitter = 0.0
    level = policy.start
    while True:
        try:
            Ls = scipy.linalg.cholesky(sub + jitter * np.eye(active.size), lower=True)
            break
        except np.linalg.LinAlgError:
            if level > policy.stop * (1 + 1e-9):
                raise KernelIndefiniteError(f"not positive definite after jitter {jitter:.3g}") from None
            jitter = level * trace
            level *= policy.factor
    L[np.ix_(active, active)] = Ls
    return L, jitter


def factor_kernel(p_r, policy: JitterPolicy = JitterPolicy()) -> np.ndarray:
    return factor_kernel_info(p_r, policy)[0]
