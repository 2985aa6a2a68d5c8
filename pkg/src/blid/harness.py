"""Monte Carlo comparison of causal and non-causal impulse-response estimators.

Every replication simulates one estimation record and one validation record
(fresh input and fresh noise, same SNR and length) and scores each estimator by
the fit of its one-step prediction on the validation record.  All randomness
flows from ``SeedSequence([base_seed, rep])`` so that a run is reproducible from
its seed ledger alone.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import csv
import json
import math
from pathlib import Path

import numpy as np

from .bandlimited import bl_window
from .errors import BandwidthUndefinedError, BlidError, ConfigError, GenerationFailedError, UndefinedFitError
from .estimators import (build_regressor, ls_estimate, oracle_estimate, regressor_from_samples)
from .lti import SLOW_RATIO, ContinuousSystem, bandwidth, named_system, random_stable_system
from .simulate import SimConfig, make_dataset
from .tuning import OptimizerConfig, optimize_hyperparameters, reg_estimate_via_qr, residual_noise_variance

__all__ = [
    "ESTIMATORS",
    "BankSpec",
    "ExperimentConfig",
    "FitRecord",
    "fit_metric",
    "system_class",
    "random_bank",
    "replication_seed",
    "run_replication",
    "run_replication_all",
    "run_experiment",
    "summarize",
    "boxplot_rows",
    "write_outputs",
    "load_ledger",
    "rerun_from_ledger",
]

ESTIMATORS = ("C-LS", "NC-LS", "C-TC", "NC-TC", "C-SS", "NC-SS", "Oracle")
WHISKER_RULE = "1.5*IQR, clipped to the most extreme observation inside the fence"


@dataclass(frozen=True)
class BankSpec:
    """Random system bank: ``count`` systems of ``order`` in class ``fast`` or ``slow``."""

    count: int
    order: int = 30
    cls: str = "fast"
    seed: int = 0
    max_tries: int = 1000

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("bank count must be >= 1")
        if self.order < 1:
            raise ConfigError("bank order must be >= 1")
        if self.cls not in ("fast", "slow"):
            raise ConfigError(f"bank class must be 'fast' or 'slow', got {self.cls!r}")

    def to_dict(self) -> dict:
        return {"count": self.count, "order": self.order, "cls": self.cls, "seed": self.seed,
                "max_tries": self.max_tries}


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo study.

    Exactly one of ``system`` (a name such as ``"G2"`` or a system dict) and
    ``bank`` is used.  With a bank, replication ``r`` runs on system ``r`` at
    its own sampling period and ``h`` is ignored.
    """

    system: str | dict | None = "G2"
    bank: BankSpec | None = None
    n: int = 100
    h: float | None = 1.0
    snr: float = 5.0
    m_nc: int = 15
    m_c: int = 24
    estimators: tuple = ESTIMATORS
    replications: int = 300
    base_seed: int = 0
    oversample: int = 100
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    sigma2_source: str = "concentrated"

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if (self.system is None) == (self.bank is None):
            raise ConfigError("specify exactly one of 'system' and 'bank'")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.m_nc < 0 or self.m_c < 0:
            raise ConfigError("m_nc and m_c must be non-negative")
        if self.bank is None and not (self.h is not None and self.h > 0):
            raise ConfigError("h must be positive")
        if not self.snr > 0:
            raise ConfigError("snr must be positive")
        unknown = [e for e in self.estimators if e not in ESTIMATORS]
        if unknown or not self.estimators:
            raise ConfigError(f"unknown estimators {unknown}; choose from {ESTIMATORS}")
        if self.bank is not None and self.replications > self.bank.count:
            raise ConfigError("replications cannot exceed the bank size")
        if self.sigma2_source not in ("concentrated", "residual"):
            raise ConfigError("sigma2_source must be 'concentrated' or 'residual'")

    @property
    def sim(self) -> SimConfig:
        return SimConfig(oversample=self.oversample, snr_amplitude=self.snr)

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "bank": None if self.bank is None else self.bank.to_dict(),
            "n": self.n,
            "h": self.h,
            "snr": self.snr,
            "m_nc": self.m_nc,
            "m_c": self.m_c,
            "estimators": list(self.estimators),
            "replications": self.replications,
            "base_seed": self.base_seed,
            "oversample": self.oversample,
            "optimizer": {"starts": self.optimizer.starts, "max_iter": self.optimizer.max_iter,
                          "xatol": self.optimizer.xatol, "fatol": self.optimizer.fatol},
            "sigma2_source": self.sigma2_source,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"system", "bank", "n", "h", "snr", "m_nc", "m_c", "estimators", "replications",
                 "base_seed", "oversample", "optimizer", "sigma2_source"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        kw = dict(d)
        try:
            if kw.get("bank") is not None:
                kw["bank"] = BankSpec(**kw["bank"])
                kw.setdefault("system", None)
                kw.setdefault("h", None)
            if "optimizer" in kw:
                kw["optimizer"] = OptimizerConfig.from_dict(kw["optimizer"])
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class FitRecord:
    estimator: str
    rep: int
    fit: float
    seed: int
    reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.reason is None


def fit_metric(y_val, y_pred) -> float:
    """``100 (1 - ||y_val - y_pred|| / ||y_val - mean(y_val)||)`` in percent."""
    y_val = np.asarray(y_val, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_val.shape != y_pred.shape:
        raise ValueError("y_val and y_pred must have equal shapes")
    spread = float(np.linalg.norm(y_val - np.mean(y_val)))
    if spread == 0.0:
        raise UndefinedFitError("fit is undefined for a constant validation output")
    return 100.0 * (1.0 - float(np.linalg.norm(y_val - y_pred)) / spread)


def system_class(sys: ContinuousSystem, h: float) -> str:
    """``"fast"`` if every pole has real part ``<= log(0.95)/h``, else ``"slow"``."""
    return "fast" if float(np.max(sys.pole_values().real)) <= SLOW_RATIO / h else "slow"


def random_bank(count: int, order: int, cls: str, rng, max_tries: int = 1000):
    """List of ``(system, h)`` with ``h = 2 pi / (3 bandwidth)``.

    Candidates are drawn for the target class and kept only if the class
    still holds under the sampling period assigned from their bandwidth.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    bank = []
    for _ in range(count):
        for _ in range(max_tries):
            sys = random_stable_system(order, cls, 1.0, rng)
            try:
                h = 2.0 * math.pi / (3.0 * bandwidth(sys))
            except BandwidthUndefinedError:
                continue
            if system_class(sys, h) == cls:
                bank.append((sys, h))
                break
        else:
            raise GenerationFailedError(f"could not draw a {cls} system within {max_tries} attempts")
    return bank


def replication_seed(base_seed: int, rep: int) -> int:
    """64-bit integer seed for replication ``rep``; disjoint streams per rep."""
    state = np.random.SeedSequence([int(base_seed), int(rep)]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


def _split(estimator):
    if estimator == "Oracle":
        return "NC", "ORACLE"
    side, kind = estimator.split("-")
    return side, kind


def _orders(cfg, side):
    return (cfg.m_nc, cfg.m_c) if side == "NC" else (0, cfg.m_nc + cfg.m_c)


class _Context:
    """Lazily built per-replication data shared across estimators."""

    def __init__(self, cfg, sys, h, seed):
        self.cfg, self.sys, self.h, self.seed = cfg, sys, h, seed
        est_seed, val_seed = np.random.SeedSequence(seed).spawn(2)
        self.train = make_dataset(sys, cfg.n, h, cfg.sim, est_seed)
        self.valid = make_dataset(sys, cfg.n, h, cfg.sim, val_seed)
        self._rho_star = None

    def rho_star(self):
        if self._rho_star is None:
            self._rho_star = bl_window(self.sys, self.h, self.cfg.m_nc, self.cfg.m_c).coeffs
        return self._rho_star


def _estimate(ctx, estimator):
    side, kind = _split(estimator)
    m_nc, m_c = _orders(ctx.cfg, side)
    prob = build_regressor(ctx.train, m_nc, m_c)
    if kind == "LS":
        rho = ls_estimate(prob)
    elif kind == "ORACLE":
        rho = oracle_estimate(prob, ctx.rho_star(), ctx.train.noise_var)
    else:
        sigma2 = residual_noise_variance(prob.phi, prob.y) if ctx.cfg.sigma2_source == "residual" else None
        tr = optimize_hyperparameters(kind, prob.phi, prob.y, m_nc, m_c, ctx.cfg.optimizer, sigma2=sigma2)
        rho = reg_estimate_via_qr(tr, prob.phi, prob.y, m_nc, m_c)
    return rho, m_nc, m_c


def _score(ctx, estimator) -> FitRecord:
    try:
        rho, m_nc, m_c = _estimate(ctx, estimator)
        phi_val = regressor_from_samples(ctx.valid.u, ctx.h, m_nc, m_c)
        fit = fit_metric(ctx.valid.y, phi_val @ rho)
        if not math.isfinite(fit):
            raise BlidError("non-finite fit")
        return FitRecord(estimator, 0, fit, ctx.seed)
    except (BlidError, ValueError, np.linalg.LinAlgError) as exc:
        return FitRecord(estimator, 0, math.nan, ctx.seed, f"{type(exc).__name__}: {exc}")


def _system_for(cfg, rep, bank):
    if bank is not None:
        return bank[rep]
    sys = named_system(cfg.system) if isinstance(cfg.system, str) else ContinuousSystem.from_dict(cfg.system)
    return sys, cfg.h


def _bank_for(cfg):
    if cfg.bank is None:
        return None
    b = cfg.bank
    return random_bank(b.count, b.order, b.cls, np.random.default_rng(b.seed), b.max_tries)


def run_replication_all(cfg: ExperimentConfig, rep: int, seed: int | None = None, bank=None) -> list:
    """Fit records of every configured estimator on replication ``rep``."""
    if bank is None and cfg.bank is not None:
        bank = _bank_for(cfg)
    seed = replication_seed(cfg.base_seed, rep) if seed is None else seed
    sys, h = _system_for(cfg, rep, bank)
    ctx = _Context(cfg, sys, h, seed)
    return [replace(_score(ctx, e), rep=rep) for e in cfg.estimators]


def run_replication(cfg: ExperimentConfig, estimator: str, seed: int, rep: int = 0, bank=None) -> FitRecord:
    """Single estimator on the replication defined by ``seed``.

    Failures are returned as records with ``fit = nan`` and a ``reason``.
    """
    if estimator not in ESTIMATORS:
        raise ConfigError(f"unknown estimator {estimator!r}")
    return run_replication_all(replace(cfg, estimators=(estimator,)), rep, seed, bank)[0]


def summarize(records) -> dict:
    """Median, quartiles and failure count per estimator."""
    out = {}
    for name in dict.fromkeys(r.estimator for r in records):
        fits = np.array([r.fit for r in records if r.estimator == name and r.ok])
        failures = [{"rep": r.rep, "reason": r.reason} for r in records if r.estimator == name and not r.ok]
        if fits.size:
            q1, med, q3 = (float(v) for v in np.percentile(fits, [25, 50, 75]))
        else:
            q1 = med = q3 = math.nan
        out[name] = {"n": int(fits.size), "median": med, "q1": q1, "q3": q3, "iqr": q3 - q1,
                     "mean": float(fits.mean()) if fits.size else math.nan, "failures": failures}
    return out


def boxplot_rows(records) -> list:
    """``(estimator, q1, median, q3, whisker_lo, whisker_hi)`` per estimator."""
    rows = []
    for name, s in summarize(records).items():
        fits = np.array([r.fit for r in records if r.estimator == name and r.ok])
        if fits.size == 0:
            rows.append((name, math.nan, math.nan, math.nan, math.nan, math.nan))
            continue
        lo_fence = s["q1"] - 1.5 * s["iqr"]
        hi_fence = s["q3"] + 1.5 * s["iqr"]
        inside = fits[(fits >= lo_fence) & (fits <= hi_fence)]
        rows.append((name, s["q1"], s["median"], s["q3"], float(inside.min()), float(inside.max())))
    return rows


def run_experiment(cfg: ExperimentConfig, progress=None) -> list:
    """All replications times all estimators, sorted by ``(rep, estimator order)``."""
    bank = _bank_for(cfg)
    records = []
    for rep in range(cfg.replications):
        records.extend(run_replication_all(cfg, rep, bank=bank))
        if progress is not None:
            progress(rep + 1, cfg.replications)
    return records


def _fmt(x: float) -> str:
    return repr(float(x))


def write_outputs(cfg: ExperimentConfig, records, out_dir) -> dict:
    """Write ``fits.csv``, ``summary.json``, ``boxplot.csv`` and ``seeds.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "fits.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["estimator", "rep", "fit", "seed"])
        for r in records:
            w.writerow([r.estimator, r.rep, _fmt(r.fit), r.seed])
    with (out / "boxplot.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["estimator", "q1", "median", "q3", "whisker_lo", "whisker_hi"])
        for row in boxplot_rows(records):
            w.writerow([row[0], *(_fmt(v) for v in row[1:])])
    summary = {"whiskers": WHISKER_RULE, "estimators": summarize(records)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    seeds = {r.rep: r.seed for r in records}
    ledger = {"config": cfg.to_dict(), "seeds": [{"rep": k, "seed": v} for k, v in sorted(seeds.items())]}
    (out / "seeds.json").write_text(json.dumps(ledger, indent=2))
    return {"fits": out / "fits.csv", "summary": out / "summary.json",
            "boxplot": out / "boxplot.csv", "seeds": out / "seeds.json"}


def load_ledger(path):
    """``(config, {rep: seed})`` from a ``seeds.json`` ledger."""
    d = json.loads(Path(path).read_text())
    return ExperimentConfig.from_dict(d["config"]), {int(e["rep"]): int(e["seed"]) for e in d["seeds"]}


def rerun_from_ledger(path) -> tuple:
    """Recompute every replication with the seeds recorded in the ledger."""
    cfg, seeds = load_ledger(path)
    bank = _bank_for(cfg)
    records = []
    for rep in sorted(seeds):
        records.extend(run_replication_all(cfg, rep, seeds[rep], bank))
    return cfg, records
