"""Command-line entry point ``blid``.

Exit status is 0 on success, 2 for unusable input (bad config, missing or
malformed files) and 3 when a numerical routine fails.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bandlimited import QuadratureConfig, bl_window
from .errors import BlidError, ConfigError, MalformedSystemError
from .estimators import EstimationResult, build_regressor, ls_estimate, oracle_estimate
from .harness import ESTIMATORS, BankSpec, ExperimentConfig, rerun_from_ledger, run_experiment, write_outputs
from .lti import ContinuousSystem, named_system
from .simulate import SimConfig, load_dataset, make_dataset, save_dataset
from .tuning import OptimizerConfig, optimize_hyperparameters, reg_estimate_via_qr, residual_noise_variance

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

METHODS = ("c-ls", "nc-ls", "c-tc", "nc-tc", "c-ss", "nc-ss", "oracle")


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _load_system(spec) -> ContinuousSystem:
    """A system from a name (``G1``/``G2``), a JSON file path or a dict."""
    if isinstance(spec, dict):
        return ContinuousSystem.from_dict(spec)
    if spec.upper().rstrip("*") in ("G1", "G2"):
        return named_system(spec)
    return ContinuousSystem.from_dict(_read_json(spec))


def _sim_config(d: dict) -> SimConfig:
    snr = d.get("snr", None if "noise_var" in d else 5.0)
    return SimConfig(oversample=int(d.get("oversample", 100)), transient_start=d.get("transient_start"),
                     snr_amplitude=None if snr is None else float(snr),
                     noise_var=None if d.get("noise_var") is None else float(d["noise_var"]),
                     input_variance=float(d.get("input_variance", 1.0)))


def cmd_simulate(args) -> int:
    cfg = _read_json(args.config)
    known = {"system", "n", "h", "snr", "noise_var", "oversample", "transient_start", "input_variance",
             "seed", "count"}
    if set(cfg) - known:
        raise ConfigError(f"unknown config keys: {sorted(set(cfg) - known)}")
    if "system" not in cfg or "h" not in cfg or "n" not in cfg:
        raise ConfigError("simulate config needs 'system', 'n' and 'h'")
    sys_ = _load_system(cfg["system"])
    sim = _sim_config(cfg)
    n, h = int(cfg["n"]), float(cfg["h"])
    if n < 1 or not h > 0:
        raise ConfigError("n must be >= 1 and h positive")
    seed = int(cfg.get("seed", 0))
    count = int(cfg.get("count", 1))
    out = Path(args.out)
    for i in range(count):
        ds = make_dataset(sys_, n, h, sim, seed + i)
        ds.meta["system"] = sys_.to_dict()
        path = save_dataset(ds, out / f"dataset_{i:03d}.csv")
        print(path)
    return EXIT_OK


def cmd_estimate(args) -> int:
    ds = load_dataset(args.data) if Path(args.data).exists() else None
    if ds is None:
        raise ConfigError(f"no such file: {args.data}")
    method = args.method.lower()
    if args.mnc < 0 or args.mc < 0:
        raise ConfigError("--mnc and --mc must be non-negative")
    m_nc, m_c = (args.mnc, args.mc) if method.startswith("nc-") or method == "oracle" else (0, args.mnc + args.mc)
    prob = build_regressor(ds, m_nc, m_c)
    hyper, sigma2 = {}, None
    if method.endswith("-ls"):
        rho = ls_estimate(prob)
    elif method == "oracle":
        if args.system is None:
            raise ConfigError("the oracle needs --system")
        if not ds.noise_var > 0:
            raise ConfigError("the oracle needs a dataset with positive noise variance")
        rho_star = bl_window(_load_system(args.system), ds.h, m_nc, m_c).coeffs
        rho = oracle_estimate(prob, rho_star, ds.noise_var)
        sigma2 = ds.noise_var
    else:
        opt = OptimizerConfig.from_dict(_read_json(args.optimizer)) if args.optimizer else OptimizerConfig()
        fixed = residual_noise_variance(prob.phi, prob.y) if args.sigma2 == "residual" else None
        tr = optimize_hyperparameters(method[-2:].upper(), prob.phi, prob.y, m_nc, m_c, opt, sigma2=fixed)
        rho = reg_estimate_via_qr(tr, prob.phi, prob.y, m_nc, m_c)
        hyper, sigma2 = tr.hyperparams(), tr.sigma2_hat
    res = EstimationResult(method.upper(), rho, ds.h, m_nc, m_c, hyper, sigma2)
    text = json.dumps(res.to_dict(), indent=2)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        print(text)
    return EXIT_OK


def _progress(label):
    def report(done, total):
        print(f"{label}: {done}/{total}", file=sys.stderr, flush=True)
    return report


def _run_and_write(cfg, out, label) -> dict:
    records = run_experiment(cfg, progress=_progress(label))
    paths = write_outputs(cfg, records, out)
    failed = sum(not r.ok for r in records)
    print(f"{label}: {len(records)} fits ({failed} failed) -> {paths['fits']}")
    return paths


def cmd_bench(args) -> int:
    if (args.config is None) == (args.ledger is None):
        raise ConfigError("give exactly one of --config and --ledger")
    if args.ledger:
        cfg, records = rerun_from_ledger(args.ledger)
        paths = write_outputs(cfg, records, args.out)
        print(f"rerun: {len(records)} fits -> {paths['fits']}")
        return EXIT_OK
    cfg = ExperimentConfig.from_dict(_read_json(args.config))
    _run_and_write(cfg, args.out, "bench")
    return EXIT_OK


def cmd_blwindow(args) -> int:
    if args.mnc + args.mc < 0:
        raise ConfigError("--mnc + --mc must be >= 0")
    if not args.h > 0:
        raise ConfigError("--h must be positive")
    win = bl_window(_load_system(args.system), args.h, args.mnc, args.mc, route=args.route,
                    quad=QuadratureConfig())
    d = win.to_dict()
    d["lags"] = win.lags.tolist()
    text = json.dumps(d, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return EXIT_OK


def figure_configs(figure: str, replications: int | None = None, seed: int = 0) -> dict:
    """Canned experiment configurations keyed by output sub-directory."""
    if figure == "fig3":
        reps = replications or 300
        return {
            "G1": ExperimentConfig(system="G1", h=0.3, n=100, snr=5.0, replications=reps, base_seed=seed),
            "G2": ExperimentConfig(system="G2", h=1.0, n=100, snr=5.0, replications=reps, base_seed=seed),
        }
    if figure == "fig4":
        count = replications or 300
        return {
            cls: ExperimentConfig(system=None, h=None, bank=BankSpec(count, 30, cls, seed), n=500, snr=20.0,
                                  estimators=ESTIMATORS[:6], replications=count, base_seed=seed)
            for cls in ("fast", "slow")
        }
    raise ConfigError(f"unknown figure {figure!r}")


def cmd_reproduce(args) -> int:
    out = Path(args.out)
    for label, cfg in figure_configs(args.figure, args.replications, args.seed).items():
        _run_and_write(cfg, out / args.figure / label, f"{args.figure}/{label}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blid", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate datasets from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate a (non-)causal FIR model from a dataset CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--method", required=True, type=str.lower, choices=METHODS)
    p.add_argument("--mnc", type=int, default=15)
    p.add_argument("--mc", type=int, default=24)
    p.add_argument("--system", help="system for the oracle (G1, G2 or a JSON file)")
    p.add_argument("--optimizer", help="JSON file with starts, max_iter, xatol, fatol")
    p.add_argument("--sigma2", choices=("concentrated", "residual"), default="concentrated")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bench", help="run a Monte Carlo experiment")
    p.add_argument("--config")
    p.add_argument("--ledger", help="seeds.json from an earlier run; reruns it exactly")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("blwindow", help="band-limited equivalent impulse response window")
    p.add_argument("--system", required=True, help="G1, G2 or a JSON file")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--mnc", type=int, required=True)
    p.add_argument("--mc", type=int, required=True)
    p.add_argument("--route", choices=("freq", "time"), default="freq")
    p.add_argument("--out")
    p.set_defaults(func=cmd_blwindow)

    p = sub.add_parser("reproduce", help="run the canned two-system or random-bank study")
    p.add_argument("--figure", required=True, choices=("fig3", "fig4"))
    p.add_argument("--out", default="results")
    p.add_argument("--replications", type=int, help="override replications (fig3) or bank size (fig4)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MalformedSystemError) as exc:
        print(f"blid: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlidError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"blid: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (KeyError, TypeError, ValueError, OSError) as exc:
        print(f"blid: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
