"""Continuous-time SISO LTI systems given as rational functions of ``p = d/dt``.

Systems are stored as real polynomial coefficients in descending powers of
``p``.  Systems built from poles and zeros additionally keep that
factorisation, which is used for evaluation and realisation because the
expanded polynomials of high-order systems are badly conditioned.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg

from .errors import BandwidthUndefinedError, GenerationFailedError, MalformedSystemError

__all__ = [
    "ContinuousSystem",
    "StateSpaceRealization",
    "freq_response",
    "to_state_space",
    "realize",
    "impulse_response",
    "modal_impulse",
    "random_stable_system",
    "bandwidth",
    "G1",
    "G2",
    "named_system",
]

SLOW_RATIO = math.log(0.95)


def _trim(c):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return np.zeros(1)
    return c[nz[0]:]


@dataclass(frozen=True, eq=False)
class ContinuousSystem:
    """Strictly proper, asymptotically stable transfer function ``num(p)/den(p)``.

    ``num`` and ``den`` hold coefficients in descending powers of ``p``
    (constant term last).  ``zeros``, ``poles`` and ``gain`` are optional and
    only populated by :meth:`from_zpk`.
    """

    num: np.ndarray
    den: np.ndarray
    zeros: np.ndarray | None = field(default=None, repr=False)
    poles: np.ndarray | None = field(default=None, repr=False)
    gain: float | None = field(default=None, repr=False)

    def __post_init__(self):
        den = np.atleast_1d(np.asarray(self.den, dtype=float))
        if den.size == 0 or den[0] == 0.0:
            raise MalformedSystemError("leading denominator coefficient must be nonzero")
        num = _trim(self.num)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        if not np.all(np.isfinite(num)) or not np.all(np.isfinite(den)):
            raise MalformedSystemError("coefficients must be finite")
        if self.is_zero:
            pass
        elif num.size >= den.size:
            raise MalformedSystemError(
                f"system is not strictly proper (deg num={num.size - 1}, deg den={den.size - 1})"
            )
        if den.size < 2:
            raise MalformedSystemError("denominator must have degree >= 1")
        if self.poles is not None:
            object.__setattr__(self, "poles", np.asarray(self.poles, dtype=complex))
            object.__setattr__(self, "zeros", np.asarray(self.zeros, dtype=complex))
            object.__setattr__(self, "gain", float(self.gain))
        if np.any(self.pole_values().real >= 0.0):
            raise MalformedSystemError("system is not asymptotically stable")

    @classmethod
    def from_zpk(cls, zeros, poles, gain):
        zeros = np.asarray(zeros, dtype=complex).ravel()
        poles = np.asarray(poles, dtype=complex).ravel()
        num = gain * np.real(np.poly(zeros)) if zeros.size else np.array([float(gain)])
        den = np.real(np.poly(poles))
        return cls(num, den, zeros=zeros, poles=poles, gain=gain)

    @property
    def order(self) -> int:
        return self.den.size - 1

    @property
    def is_zero(self) -> bool:
        return self.num.size == 1 and self.num[0] == 0.0

    def pole_values(self) -> np.ndarray:
        if self.poles is not None:
            return self.poles
        return np.roots(self.den).astype(complex)

    def zero_values(self) -> np.ndarray:
        if self.zeros is not None:
            return self.zeros
        if self.is_zero or self.num.size == 1:
            return np.zeros(0, dtype=complex)
        return np.roots(self.num).astype(complex)

    def dc_gain(self) -> float:
        return float(np.real(freq_response(self, 0.0)))

    def to_dict(self) -> dict:
        d = {"num": self.num.tolist(), "den": self.den.tolist()}
        if self.poles is not None:
            d["zeros"] = [[z.real, z.imag] for z in self.zeros]
            d["poles"] = [[p.real, p.imag] for p in self.poles]
            d["gain"] = self.gain
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ContinuousSystem":
        if "poles" in d:
            z = np.array([complex(*pair) for pair in d.get("zeros", [])], dtype=complex)
            p = np.array([complex(*pair) for pair in d["poles"]], dtype=complex)
            return cls.from_zpk(z, p, d["gain"])
        try:
            return cls(d["num"], d["den"])
        except KeyError as exc:
            raise MalformedSystemError(f"system description lacks {exc}") from None


@dataclass(frozen=True, eq=False)
class StateSpaceRealization:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def freq_response(self, omega):
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        n = self.order
        out = np.empty(omega.shape, dtype=complex)
        for i, w in enumerate(omega):
            out[i] = (self.C @ np.linalg.solve(1j * w * np.eye(n) - self.A, self.B))[0, 0]
        return out


def G1() -> ContinuousSystem:
    """Well-damped second-order example, DC gain 1.25."""
    return ContinuousSystem([1.25], [0.25, 0.7, 1.0])


def G2() -> ContinuousSystem:
    """Lightly damped example with impulse response ``-exp(-0.2 t) sin(pi t / 1.1)``."""
    w = math.pi / 1.1
    return ContinuousSystem([-w], [1.0, 0.4, 0.04 + w * w])


_NAMED = {"G1": G1, "G2": G2}


def named_system(name: str) -> ContinuousSystem:
    key = name.upper().replace("*", "").replace("_", "")
    if key not in _NAMED:
        raise MalformedSystemError(f"unknown named system {name!r} (known: {sorted(_NAMED)})")
    return _NAMED[key]()


def freq_response(sys: ContinuousSystem, omega):
    """Evaluate ``G(i omega)``; scalar in, scalar out, array in, array out."""
    w = np.asarray(omega, dtype=float)
    s = 1j * w
    if sys.poles is not None:
        out = np.full(s.shape, sys.gain, dtype=complex)
        for z in sys.zeros:
            out = out * (s - z)
        for p in sys.poles:
            out = out / (s - p)
    else:
        out = np.polyval(sys.num, s) / np.polyval(sys.den, s)
    return out[()] if out.ndim == 0 else out


def _canonical(num, den):
    den = np.asarray(den, dtype=float)
    a = den / den[0]
    n = a.size - 1
    b = np.zeros(n + 1)
    b[n + 1 - num.size:] = num / den[0]
    d = b[0]
    # strictly proper remainder: b(p) - d a(p)
    c = (b - d * a)[1:]
    A = np.zeros((n, n))
    A[0, :] = -a[1:]
    if n > 1:
        A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    return A, B, c.reshape(1, n), d


def to_state_space(sys: ContinuousSystem) -> StateSpaceRealization:
    """Controllable canonical realization ``(A, B, C)`` with ``D = 0``."""
    if sys.den[0] == 0.0:
        raise MalformedSystemError("leading denominator coefficient is zero")
    A, B, C, _ = _canonical(sys.num, sys.den)
    return StateSpaceRealization(A, B, C)


def _conj_groups(roots):
    # split into conjugate pairs (upper-half representatives) and real roots
    roots = np.asarray(roots, dtype=complex)
    tol = 1e-9 * max(1.0, float(np.max(np.abs(roots)))) if roots.size else 0.0
    real = np.sort(roots[np.abs(roots.imag) <= tol].real)
    upper = roots[roots.imag > tol]
    return list(upper), list(real)


def _sections(sys: ContinuousSystem):
    """Group poles/zeros into real sections of order <= 2."""
    pc, pr = _conj_groups(sys.poles)
    zc, zr = _conj_groups(sys.zeros)
    dens = [np.real(np.poly([p, np.conj(p)])) for p in pc]
    while len(pr) >= 2:
        dens.append(np.real(np.poly([pr.pop(0), pr.pop(0)])))
    if pr:
        dens.append(np.real(np.poly([pr.pop()])))
    nums = []
    for den in dens:
        cap = den.size - 1
        zs = []
        if cap == 2 and zc:
            z = zc.pop(0)
            zs = [z, np.conj(z)]
        else:
            while len(zs) < cap and zr:
                zs.append(zr.pop(0))
        nums.append(np.real(np.poly(zs)) if zs else np.ones(1))
    if zc or zr:
        raise MalformedSystemError("could not distribute zeros into proper sections")
    return nums, dens


def _series(first, second):
    A1, B1, C1, D1 = first
    A2, B2, C2, D2 = second
    n1, n2 = A1.shape[0], A2.shape[0]
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = A1
    A[n1:, :n1] = B2 @ C1
    A[n1:, n1:] = A2
    B = np.vstack([B1, B2 * D1])
    C = np.hstack([D2 * C1, C2])
    return A, B, C, D2 * D1


def realize(sys: ContinuousSystem) -> StateSpaceRealization:
    """Best-conditioned available realization.

    Low-order systems and systems without a stored factorisation use the
    controllable canonical form; pole/zero systems of order > 2 become a
    cascade of first/second-order sections with unit DC gain each.
    """
    if sys.poles is None or sys.order <= 2 or sys.is_zero:
        return to_state_space(sys)
    nums, dens = _sections(sys)
    # put sections without zeros (strictly proper ones) first
    order = sorted(range(len(dens)), key=lambda i: nums[i].size >= dens[i].size)
    total_gain = sys.gain
    parts = []
    for i in order:
        num, den = nums[i], dens[i]
        scale = den[-1] / num[-1] if num[-1] != 0.0 else 1.0
        total_gain /= scale
        parts.append(_canonical(num * scale, den))
    A, B, C, D = parts[0]
    for part in parts[1:]:
        A, B, C, D = _series((A, B, C, D), part)
    if abs(D) > 1e-12:
        raise MalformedSystemError("cascade realization has a direct term")
    return StateSpaceRealization(A, B, C * total_gain)


def impulse_response(sys: ContinuousSystem, t):
    """``g(t) = C expm(A t) B`` for ``t >= 0`` and ``0`` for ``t < 0``."""
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros(tt.shape)
    if not sys.is_zero:
        ss = realize(sys)
        for i, ti in enumerate(tt):
            if ti >= 0.0:
                out[i] = (ss.C @ scipy.linalg.expm(ss.A * ti) @ ss.B)[0, 0]
    return out[0] if np.ndim(t) == 0 else out


def modal_impulse(sys: ContinuousSystem):
    """Residues ``c`` and poles ``lam`` such that ``g(t) = Re sum c_i exp(lam_i t)``.

    Requires a diagonalizable realization (distinct poles).
    """
    ss = realize(sys)
    lam, V = np.linalg.eig(ss.A)
    if np.linalg.cond(V) > 1e10:
        raise MalformedSystemError("realization is not safely diagonalizable")
    left = ss.C @ V
    right = np.linalg.solve(V, ss.B)
    c = (left.ravel() * right.ravel()).astype(complex)
    return c, lam.astype(complex)


def _rss_poles(order, rng):
    # log-normal decay rates and oscillation frequencies, about half the poles in conjugate pairs
    n_pairs = int(np.sum(rng.random(order) < 0.5)) // 2
    poles = []
    for _ in range(n_pairs):
        re, im = -math.exp(rng.standard_normal()), 3.0 * math.exp(rng.standard_normal())
        poles += [complex(re, im), complex(re, -im)]
    poles += [complex(-math.exp(rng.standard_normal()), 0.0) for _ in range(order - 2 * n_pairs)]
    return np.array(poles)


def _modal_realization(poles, rng):
    """Real block-diagonal ``A`` with the given poles and Gaussian ``B``, ``C``."""
    n = poles.size
    A = np.zeros((n, n))
    i = 0
    for p in poles[poles.imag >= 0]:
        if p.imag > 0:
            A[i:i + 2, i:i + 2] = [[p.real, p.imag], [-p.imag, p.real]]
            i += 2
        else:
            A[i, i] = p.real
            i += 1
    return A, rng.standard_normal((n, 1)), rng.standard_normal((1, n))


def _symmetrize(roots, scale):
    # enforce exact conjugate symmetry on numerically computed roots
    tol = 1e-8 * scale
    upper = roots[roots.imag > tol]
    real = roots[np.abs(roots.imag) <= tol].real
    return np.concatenate([upper, upper.conj(), real.astype(complex)])


def _transmission_zeros(A, B, C):
    n = A.shape[0]
    M = np.block([[A, B], [C, np.zeros((1, 1))]])
    E = np.zeros((n + 1, n + 1))
    E[:n, :n] = np.eye(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = scipy.linalg.eigvals(M, E)
    return z[np.isfinite(z)]


def random_stable_system(order: int, cls: str, h: float, rng, max_tries: int = 1000) -> ContinuousSystem:
    """Random strictly proper stable system of a given order with unit DC gain.

    Poles follow the recipe of MATLAB's ``rss`` on the time scale ``h``:
    decay rates ``exp(N(0,1))/h``, and about half the poles come in conjugate
    pairs with imaginary parts ``3 exp(N(0,1))/h``.  Input and output vectors
    are Gaussian in modal coordinates, which fixes the zeros; the gain is then
    set so that ``G(0) = 1``.

    ``cls="fast"`` rejects draws until every pole has real part
    ``<= log(0.95)/h``.  ``cls="slow"`` requires a pole with real part in
    ``(log(0.95)/h, 0)``; when a draw has none, the real part of its slowest
    pole (or pair) is redrawn uniformly inside that interval.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if cls not in ("fast", "slow"):
        raise ValueError(f"class must be 'fast' or 'slow', got {cls!r}")
    thr = SLOW_RATIO / h
    for _ in range(max_tries):
        poles = _rss_poles(order, rng) / h
        if cls == "fast" and np.max(poles.real) > thr:
            continue
        if cls == "slow" and not np.any(poles.real > thr):
            slowest = np.isclose(poles.real, np.max(poles.real), rtol=0, atol=0)
            poles[slowest] = thr * rng.uniform(0.05, 0.95) + 1j * poles[slowest].imag
        A, B, C = _modal_realization(poles, rng)
        size = float(np.linalg.norm(B) * np.linalg.norm(C))
        lead = (C @ B).item()
        dc = -(C @ np.linalg.solve(A, B)).item()
        if abs(lead) < 1e-6 * size or abs(dc) < 1e-6 * size / float(np.max(np.abs(poles))):
            continue
        zeros = _symmetrize(_transmission_zeros(A, B, C), float(np.max(np.abs(poles))))
        if zeros.size != order - 1:
            continue
        try:
            sys = ContinuousSystem.from_zpk(zeros, poles, lead)
            return ContinuousSystem.from_zpk(zeros, poles, lead / sys.dc_gain())
        except MalformedSystemError:
            continue
    raise GenerationFailedError(f"no {cls} system of order {order} after {max_tries} draws")


def bandwidth(sys: ContinuousSystem, points_per_decade: int = 200) -> float:
    """First frequency where ``|G(i w)|`` drops to ``|G(0)|/sqrt(2)``."""
    g0 = abs(freq_response(sys, 0.0))
    if g0 == 0.0:
        raise BandwidthUndefinedError("system has zero DC gain")
    target = g0 / math.sqrt(2.0)
    scales = np.abs(np.concatenate([sys.pole_values(), sys.zero_values()]))
    scales = scales[scales > 0]
    w_lo = 1e-4 * scales.min()
    w_hi = 1e4 * scales.max()
    grid = np.logspace(np.log10(w_lo), np.log10(w_hi), int(points_per_decade * np.log10(w_hi / w_lo)) + 1)
    mag = np.abs(freq_response(sys, grid))
    below = np.flatnonzero(mag <= target)
    if below.size == 0:
        raise BandwidthUndefinedError(f"no -3 dB crossing below {w_hi:g} rad/s")
    i = below[0]
    if i == 0:
        raise BandwidthUndefinedError("response already below -3 dB at the lowest bracket frequency")
    a, b = math.log(grid[i - 1]), math.log(grid[i])
    for _ in range(200):
        m = 0.5 * (a + b)
        if abs(freq_response(sys, math.exp(m))) <= target:
            b = m
        else:
            a = m
        if b - a < 1e-14:
            break
    return math.exp(0.5 * (a + b))
