"""Band-limited excitation, first-order-hold simulation and dataset assembly.

The input is white noise ``e(kh), k = 1..N`` sinc-interpolated onto a grid
``oversample`` times finer than ``h``.  The system is propagated exactly for
piecewise-linear input on that grid from zero state at ``transient_start``
(default ``-N h``) and the output is read at ``kh, k = 1..N``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import csv
import json
import math
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.signal

from .bandlimited import sinc
from .errors import ConfigError, DegenerateSignalError, SimulationDivergedError
from .lti import ContinuousSystem, realize

__all__ = [
    "SimConfig",
    "Dataset",
    "generate_input",
    "render_input_grid",
    "simulate_output",
    "add_noise",
    "make_dataset",
    "save_dataset",
    "load_dataset",
]

_DIRECT_LIMIT = 4_000_000


@dataclass(frozen=True)
class SimConfig:
    """Simulation protocol.

    Exactly one of ``snr_amplitude`` (ratio ``std(x)/std(v)``) and
    ``noise_var`` must be set.  ``transient_start=None`` means ``-N h``.
    """

    oversample: int = 100
    transient_start: float | None = None
    snr_amplitude: float | None = 5.0
    noise_var: float | None = None
    input_variance: float = 1.0

    def __post_init__(self):
        if int(self.oversample) != self.oversample or self.oversample < 1:
            raise ConfigError("oversample must be an integer >= 1")
        if (self.snr_amplitude is None) == (self.noise_var is None):
            raise ConfigError("specify exactly one of snr_amplitude and noise_var")
        if self.snr_amplitude is not None and not self.snr_amplitude > 0:
            raise ConfigError("snr_amplitude must be positive")
        if self.noise_var is not None and self.noise_var < 0:
            raise ConfigError("noise_var must be non-negative")
        if not self.input_variance > 0:
            raise ConfigError("input_variance must be positive")

    def to_dict(self) -> dict:
        return {
            "oversample": self.oversample,
            "transient_start": self.transient_start,
            "snr_amplitude": self.snr_amplitude,
            "noise_var": self.noise_var,
            "input_variance": self.input_variance,
        }


@dataclass(frozen=True, eq=False)
class Dataset:
    """Sampled record.  ``u[k-1] = u(kh)`` for ``k = 1..N``; ``u(kh) = 0`` elsewhere."""

    h: float
    u: np.ndarray
    y: np.ndarray
    y_clean: np.ndarray
    noise_var: float
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("u", "y", "y_clean"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.u.shape == self.y.shape == self.y_clean.shape) or self.u.ndim != 1:
            raise ValueError("u, y and y_clean must be 1-D arrays of equal length")
        if self.noise_var < 0:
            raise ValueError("noise_var must be non-negative")

    @property
    def n(self) -> int:
        return self.y.size

    def u_at(self, k) -> np.ndarray:
        """Input samples at integer indices ``k``, zero outside ``1..N``."""
        k = np.asarray(k)
        inside = (k >= 1) & (k <= self.n)
        return np.where(inside, self.u[np.clip(k - 1, 0, self.n - 1)], 0.0)


def generate_input(n: int, lambda2: float, h: float, rng) -> np.ndarray:
    """``n`` i.i.d. zero-mean Gaussian samples of variance ``lambda2``.

    ``h`` is accepted for symmetry with the other constructors; white
    samples do not depend on it.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not lambda2 > 0:
        raise ValueError("lambda2 must be positive")
    return rng.normal(0.0, math.sqrt(lambda2), size=n)


def _grid_start(n, h, cfg):
    start = -n * h if cfg.transient_start is None else cfg.transient_start
    # snap to a sample instant so that every segment spans exactly one period
    return int(math.floor(start / h + 1e-9)) * cfg.oversample


def render_input_grid(e, h: float, cfg: SimConfig):
    """Sinc interpolation of ``e`` on the fine grid ``[transient_start, N h]``.

    Returns ``(t, u)``.  Values at sample instants are exactly ``e(kh)`` for
    ``1 <= k <= N`` and exactly zero for other instants.
    """
    e = np.asarray(e, dtype=float)
    n, L = e.size, int(cfg.oversample)
    i0 = _grid_start(n, h, cfg)
    i1 = n * L
    idx = np.arange(i0, i1 + 1)
    if idx.size * n <= _DIRECT_LIMIT:
        u = sinc(idx[:, None] / L - np.arange(1, n + 1)[None, :]) @ e
    else:
        # polyphase: phase p of the fine grid is e convolved with sinc(j + p/L)
        u = np.empty(idx.size)
        m0 = i0 // L
        for p in range(L):
            m = np.arange(m0, (i1 - p) // L + 1)
            kern = sinc(np.arange(m0 - n, m[-1]) + p / L)
            full = scipy.signal.fftconvolve(e, kern)
            u[p::L] = full[n - 1:n - 1 + m.size]
    # sample instants are known exactly
    at = np.arange(0, idx.size, L) if i0 % L == 0 else np.flatnonzero(idx % L == 0)
    k = idx[at] // L
    u[at] = np.where((k >= 1) & (k <= n), e[np.clip(k - 1, 0, n - 1)], 0.0)
    return idx * (h / L), u


def _foh_matrices(A, B, dt):
    n = A.shape[0]
    M = np.zeros((n + 2, n + 2))
    M[:n, :n] = A
    M[:n, n:n + 1] = B
    M[n, n + 1] = 1.0
    E = scipy.linalg.expm(M * dt)
    Ad = E[:n, :n]
    gamma0 = E[:n, n]
    gamma1 = E[:n, n + 1] / dt
    return Ad, gamma0 - gamma1, gamma1


def simulate_output(sys: ContinuousSystem, fine_input, h: float, cfg: SimConfig) -> np.ndarray:
    """Exact first-order-hold response sampled at ``kh``, ``k = 1..N``.

    ``fine_input`` is the ``(t, u)`` pair from :func:`render_input_grid`.  The
    state starts at zero at the first grid point; only ``k >= 1`` is returned.
    """
    t, u = fine_input
    L = int(cfg.oversample)
    dt = h / L
    i0 = int(round(t[0] / dt))
    if i0 % L or (u.size - 1) % L:
        raise ValueError("fine grid must start and end on sample instants")
    n_seg = (u.size - 1) // L
    n = int(round(t[-1] / h))
    if sys.is_zero:
        return np.zeros(n)
    ss = realize(sys)
    Ad, b0, b1 = _foh_matrices(ss.A, ss.B, dt)
    order = Ad.shape[0]
    # G[:, j] multiplies u at offset j within a segment
    G = np.zeros((order, L + 1))
    v0, v1 = b0.copy(), b1.copy()
    for p in range(L):
        G[:, L - 1 - p] += v0
        G[:, L - p] += v1
        v0, v1 = Ad @ v0, Ad @ v1
    Phi = np.linalg.matrix_power(Ad, L)
    segments = np.lib.stride_tricks.sliding_window_view(u, L + 1)[::L]
    drive = segments @ G.T
    x = np.zeros(order)
    states = np.empty((n_seg + 1, order))
    states[0] = x
    for s in range(n_seg):
        x = Phi @ x + drive[s]
        states[s + 1] = x
    if not np.all(np.isfinite(states)):
        raise SimulationDivergedError("non-finite state during propagation")
    first = 1 - i0 // L  # segment index of t = h
    out = states[first:first + n] @ ss.C.ravel()
    return out


def add_noise(x, cfg: SimConfig, rng):
    """Return ``(x + v, sigma2)`` with i.i.d. Gaussian ``v`` of variance ``sigma2``."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("x must be non-empty")
    if cfg.noise_var is not None:
        sigma2 = float(cfg.noise_var)
    else:
        if math.isinf(cfg.snr_amplitude):
            sigma2 = 0.0
        else:
            sx = float(np.std(x))
            if sx == 0.0:
                raise DegenerateSignalError("cannot set an SNR on an all-constant signal")
            sigma2 = (sx / cfg.snr_amplitude) ** 2
    if sigma2 == 0.0:
        return x.copy(), 0.0
    return x + rng.normal(0.0, math.sqrt(sigma2), size=x.size), sigma2


def make_dataset(sys: ContinuousSystem, n: int, h: float, cfg: SimConfig, seed) -> Dataset:
    """Simulate one identification record; ``seed`` fully determines the result."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    input_rng, noise_rng = (np.random.default_rng(s) for s in ss.spawn(2))
    e = generate_input(n, cfg.input_variance, h, input_rng)
    fine = render_input_grid(e, h, cfg)
    x = simulate_output(sys, fine, h, cfg)
    y, sigma2 = add_noise(x, cfg, noise_rng)
    seed_value = seed if isinstance(seed, (int, np.integer)) else None
    return Dataset(h, e, y, x, sigma2, None if seed_value is None else int(seed_value),
                   meta={"sim": cfg.to_dict()})


def save_dataset(ds: Dataset, path) -> Path:
    """Write ``path`` (CSV: k, u, y, y_clean) and a JSON sidecar next to it.

    Floats are written with ``repr``, which round-trips doubles exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "u", "y", "y_clean"])
        for k in range(ds.n):
            w.writerow([k + 1, repr(float(ds.u[k])), repr(float(ds.y[k])), repr(float(ds.y_clean[k]))])
    side = {"h": ds.h, "n": ds.n, "noise_var": ds.noise_var, "seed": ds.seed, "meta": ds.meta}
    path.with_suffix(".json").write_text(json.dumps(side, indent=2))
    return path


def load_dataset(path) -> Dataset:
    path = Path(path)
    side = json.loads(path.with_suffix(".json").read_text())
    cols = {"u": [], "y": [], "y_clean": []}
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            for name in cols:
                cols[name].append(float(row[name]))
    return Dataset(float(side["h"]), np.array(cols["u"]), np.array(cols["y"]), np.array(cols["y_clean"]),
                   float(side["noise_var"]), side.get("seed"), side.get("meta", {}))
