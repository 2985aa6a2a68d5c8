"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest
import scipy.stats

from blid.bandlimited import bl_energy, bl_equivalent_freq, bl_equivalent_time, bl_window
from blid.cli import figure_configs
from blid.estimators import RegressionProblem, build_regressor, ls_estimate, reg_ls_estimate
from blid.harness import ExperimentConfig, run_experiment, summarize
from blid.kernels import KernelSpec, factor_kernel, kernel_matrix
from blid.lti import G1, G2
from blid.simulate import SimConfig, make_dataset
from blid.tuning import (OptimizerConfig, TuningResult, concentrated_nll, optimize_hyperparameters,
                         reg_estimate_via_qr, thin_qr_stack)


def medians(cfg):
    return {k: v["median"] for k, v in summarize(run_experiment(cfg)).items()}


def fmt(med):
    return ", ".join(f"{k} {v:.2f}" for k, v in med.items())


def random_problem(rng, n=60, m_nc=4, m_c=6):
    m = m_nc + m_c + 1
    phi = rng.standard_normal((n, m))
    decay = 0.8 ** np.abs(np.arange(-m_nc, m_c + 1))
    return phi, phi @ (decay * rng.standard_normal(m)) + 0.3 * rng.standard_normal(n)


def random_spec(rng):
    return KernelSpec("TC" if rng.random() < 0.5 else "SS", rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95),
                      10 ** rng.uniform(-1, 1.5))


def relerr(a, b):
    return float(np.linalg.norm(np.atleast_1d(a - b)) / np.linalg.norm(np.atleast_1d(b)))


def test_criterion_01_route_agreement(report):
    t0 = time.time()
    k = np.arange(-20, 31)
    worst = max(float(np.max(np.abs(bl_equivalent_time(s, h, k) - bl_equivalent_freq(s, h, k))))
                for s, h in ((G1(), 0.3), (G2(), 1.0)))
    dt = time.time() - t0
    report(1, worst < 1e-6 and dt < 30, f"max route difference {worst:.2e} (< 1e-6), {dt:.1f} s")


def test_criterion_02_dc_identity(report):
    t0 = time.time()
    h, K = 0.3, 40000
    win = bl_window(G1(), h, K, K, route="time")
    tail = math.sqrt(max(bl_energy(G1(), h) - float(win.coeffs @ win.coeffs), 0.0))
    err = abs(h * float(np.sum(win.coeffs)) - 1.25)
    dt = time.time() - t0
    report(2, err < 1e-3 and tail < 1e-4 and dt < 5,
           f"|h sum - 1.25| = {err:.2e} (< 1e-3) over +-{K} lags, tail 2-norm {tail:.2e} (< 1e-4), {dt:.1f} s")


def test_criterion_03_consistency(report):
    star = bl_window(G2(), 1.0, 15, 24).coeffs
    errs = {}
    for n in (500, 8000):
        errs[n] = float(np.median([np.linalg.norm(ls_estimate(build_regressor(
            make_dataset(G2(), n, 1.0, SimConfig(), seed), 15, 24)) - star) for seed in range(20)]))
    ratio = errs[8000] / errs[500]
    report(3, ratio < 0.5, f"median error N=500 {errs[500]:.4f}, N=8000 {errs[8000]:.4f}, ratio {ratio:.3f} (< 0.5)")


@pytest.mark.slow
def test_criterion_04_asymptotic_normality(report):
    n = 8000
    star = bl_window(G2(), 1.0, 15, 24).coeffs
    scaled = np.array([math.sqrt(n) * (ls_estimate(build_regressor(make_dataset(G2(), n, 1.0, SimConfig(), 1000 + s),
                                                                   15, 24)) - star) for s in range(200)])
    z = (scaled - scaled.mean(axis=0)) / scaled.std(axis=0, ddof=1)
    pvals = np.array([scipy.stats.shapiro(z[:, j]).pvalue for j in range(z.shape[1])])
    frac = float(np.mean(pvals > 0.01))
    report(4, frac >= 0.9, f"{np.sum(pvals > 0.01)}/{pvals.size} coefficients pass Shapiro-Wilk at 1% ({frac:.0%}, >= 90%)")


def test_criterion_05_qr_identities(report):
    rng = np.random.default_rng(0)
    worst_id, worst_route = 0.0, 0.0
    for i in range(100):
        phi, y = random_problem(rng)
        m = phi.shape[1]
        L = factor_kernel(kernel_matrix(random_spec(rng), 4, 6))
        f = thin_qr_stack(phi, L, y)
        worst_id = max(worst_id,
                       relerr(f.r1.T @ f.r1, L.T @ phi.T @ phi @ L + np.eye(m)),
                       relerr(f.r1.T @ f.r2, L.T @ phi.T @ y),
                       abs(f.r2 @ f.r2 + f.r**2 - y @ y) / (y @ y))
        if i < 10:
            tr = optimize_hyperparameters("TC" if i % 2 else "SS", phi, y, 4, 6, OptimizerConfig(starts=2))
        else:
            tr = TuningResult(random_spec(rng), 10 ** rng.uniform(-2, 0), 0.0)
        direct = reg_ls_estimate(RegressionProblem(phi, y, 1.0, 4, 6), kernel_matrix(tr.beta_hat, 4, 6), tr.sigma2_hat)
        worst_route = max(worst_route, relerr(reg_estimate_via_qr(tr, phi, y, 4, 6), direct))
    report(5, worst_id < 1e-10 and worst_route < 1e-8,
           f"worst identity residual {worst_id:.1e} (< 1e-10), worst route mismatch {worst_route:.1e} (< 1e-8)")


def test_criterion_06_kernel_reduction(report):
    exact = True
    for kind in ("TC", "SS"):
        for lc in (0.3, 0.8, 0.97):
            spec = KernelSpec(kind, 0.0, lc, 2.0)
            P = kernel_matrix(spec, 15, 24)
            exact &= np.array_equal(P[15:, 15:], kernel_matrix(spec, 0, 24))
            exact &= not P[:15].any() and not P[:, :15].any()
    rng = np.random.default_rng(1)
    worst = 0.0
    for i in range(1000):
        spec = KernelSpec("TC" if i % 2 else "SS", rng.uniform(0, 0.999), rng.uniform(0, 0.999),
                          10 ** rng.uniform(-3, 3))
        P = kernel_matrix(spec, int(rng.integers(0, 16)), int(rng.integers(0, 25)))
        worst = min(worst, float(np.linalg.eigvalsh(P).min() / np.linalg.norm(P, 2)))
    report(6, bool(exact) and worst >= -1e-12,
           f"causal reduction exact: {bool(exact)}, smallest relative eigenvalue {worst:.1e} (>= -1e-12)")


@pytest.mark.slow
def test_criterion_07_g2_ordering(report):
    med = medians(ExperimentConfig(system="G2", h=1.0, n=100, snr=5.0, replications=50, base_seed=0))
    gaps = {k: med[f"NC-{k}"] - med[f"C-{k}"] for k in ("TC", "SS", "LS")}
    ok = med["Oracle"] >= med["NC-TC"] and all(g > 5 for g in gaps.values())
    report(7, ok, f"medians {fmt(med)}; gaps " + ", ".join(f"{k} {g:.2f}" for k, g in gaps.items()) + " (> 5)")


@pytest.mark.slow
def test_criterion_08_g1_ordering(report):
    med = medians(ExperimentConfig(system="G1", h=0.3, n=100, snr=5.0, replications=50, base_seed=0))
    nc_vs_c = {k: med[f"NC-{k}"] - med[f"C-{k}"] for k in ("TC", "SS", "LS")}
    reg_gain = {f"{s}-{k}": med[f"{s}-{k}"] - med[f"{s}-LS"] for s in ("C", "NC") for k in ("TC", "SS")}
    ok = all(g >= 0 for g in nc_vs_c.values()) and all(g > 3 for g in reg_gain.values())
    report(8, ok, f"medians {fmt(med)}; NC-C " + ", ".join(f"{k} {g:+.2f}" for k, g in nc_vs_c.items())
           + " (>= 0); reg-LS " + ", ".join(f"{k} {g:.2f}" for k, g in reg_gain.items()) + " (> 3)")


@pytest.mark.slow
def test_criterion_09_bank_trend(report):
    gaps = {}
    for cls, cfg in figure_configs("fig4", replications=30, seed=0).items():
        med = medians(cfg)
        gaps[cls] = {k: med[f"NC-{k}"] - med[f"C-{k}"] for k in ("TC", "SS")}
    ok = all(g > 0 for d in gaps.values() for g in d.values())
    ok &= all(gaps["fast"][k] >= gaps["slow"][k] for k in ("TC", "SS"))
    detail = "; ".join(f"{cls} NC-C TC {d['TC']:.2f} SS {d['SS']:.2f}" for cls, d in gaps.items())
    report(9, bool(ok), detail + " (all > 0, fast >= slow)")


def test_criterion_10_concentration(report):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(20):
        phi, y = random_problem(rng, n=40)
        spec = random_spec(rng)
        n = len(y)
        S = phi @ kernel_matrix(spec, 4, 6) @ phi.T + np.eye(n)
        # dense likelihood with P = sigma2 K minimized over sigma2, constants dropped
        dense = 0.5 * (n * math.log(float(y @ np.linalg.solve(S, y))) + np.linalg.slogdet(S)[1])
        worst = max(worst, abs(concentrated_nll(spec, phi, y, 4, 6) - dense) / abs(dense))
    report(10, worst < 1e-8, f"worst relative mismatch {worst:.1e} (< 1e-8)")


def test_criterion_11_determinism(report, tmp_path):
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({"system": "G2", "n": 100, "replications": 3, "base_seed": 5}))
    cli = [sys.executable, "-m", "blid"]
    first = subprocess.run(cli + ["bench", "--config", str(cfg), "--out", str(tmp_path / "a")], capture_output=True)
    again = subprocess.run(cli + ["bench", "--ledger", str(tmp_path / "a" / "seeds.json"), "--out", str(tmp_path / "b")],
                           capture_output=True)
    same = (first.returncode == again.returncode == 0
            and (tmp_path / "a" / "fits.csv").read_bytes() == (tmp_path / "b" / "fits.csv").read_bytes())
    rows = len((tmp_path / "a" / "fits.csv").read_text().splitlines()) - 1 if first.returncode == 0 else 0
    report(11, same, f"ledger rerun fits.csv byte-identical: {same} ({rows} rows)")
