"""Reproduction suites A1..A10: run, compare with the expected value, report."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ..covariance import gram_S
from ..estimate import (
    exponent_fit_linear,
    exponent_fit_loglog,
    grid_persistence,
    orthant_qmc,
    persistence_from_passage,
)
from ..kernels import parse_kernel
from ..simulate import circulant_embed, first_passage_times, sample_stationary
from ..special import PHParams, c_ph, c_ph_bounds, f_ph, selberg_f11

__all__ = ["Criterion", "SUITES", "reproduce", "run_suite", "format_line"]

N_LADDER = [2**k for k in range(4, 13)]
BASE_SEED = 20240601


@dataclass
class Criterion:
    suite: str
    passed: bool
    measured: str
    expected: str
    seconds: float = 0.0
    detail: dict | None = None


def format_line(c):
    status = "PASS" if c.passed else "FAIL"
    return f"{c.suite} {status} {c.measured} (expected {c.expected}) [{c.seconds:.1f} s]"


def _slope_ladder(kernel, weights, R, seed, threads):
    tau = first_passage_times(kernel, weights, N_LADDER[-1], R, seed, 0.0,
                              num_threads=threads)
    return list(zip(N_LADDER, persistence_from_passage(tau, N_LADDER)))


def a1(R=10**6, seed=BASE_SEED + 1, threads=1, **_):
    pts = _slope_ladder("delta", "const", R, seed, threads)
    fit = exponent_fit_loglog(pts, regressor="log-n")
    ok = abs(fit.exponent + 0.5) <= 0.05
    return Criterion("A1", ok, f"slope vs log n = {fit.exponent:.4f}", "-0.50 +- 0.05",
                     detail={"fit": fit, "points": pts})


def a2(R=10**6, seed=BASE_SEED + 2, threads=1, **_):
    pts = _slope_ladder("polysum:beta=2", "poly:p=1", R, seed, threads)
    fs = exponent_fit_loglog(pts, "poly:p=1", regressor="log-s")
    fn = exponent_fit_loglog(pts, regressor="log-n")
    ok = abs(fs.exponent + 1.0) <= 0.15 and abs(fn.exponent + 1.5) <= 0.2
    return Criterion("A2", ok,
                     f"slope vs log s = {fs.exponent:.4f}, vs log n = {fn.exponent:.4f}",
                     "-1.0 +- 0.15 and -1.5 +- 0.2",
                     detail={"fit_s": fs, "fit_n": fn, "points": pts})


def a3(R=10**6, seed=BASE_SEED + 3, threads=1, **_):
    pts = _slope_ladder("fgn:H=0.75", "const", R, seed, threads)
    fit = exponent_fit_loglog(pts, regressor="log-n")
    ok = abs(fit.exponent + 0.25) <= 0.05
    return Criterion("A3", ok, f"slope vs log n = {fit.exponent:.4f}", "-0.25 +- 0.05",
                     detail={"fit": fit, "points": pts})


A4_P = (-0.6, -0.25, 0.0, 0.5, 1.0, 2.0, 5.0)
A4_H = tuple(np.linspace(0.55, 0.95, 7))


def a4(**_):
    worst = 0.0
    where = None
    count = 0
    for p in A4_P:
        for H in A4_H:
            if p + H <= 0:
                continue
            pr = PHParams(p, float(H))
            exact = selberg_f11(pr)
            rel = abs(f_ph(pr, 1.0, 1.0).value - exact) / exact
            count += 1
            if rel > worst:
                worst, where = rel, (p, float(H))
    ok = worst <= 1e-6
    return Criterion("A4", ok, f"max rel err = {worst:.2e} over {count} (p,H) at {where}",
                     "<= 1e-6", detail={"worst": worst, "count": count})


A5_PAIRS = ((0.0, 0.75), (0.5, 0.55), (1.0, 0.9))
A5_TAU = tuple(round(0.1 * k, 10) for k in range(1, 51))
SLACK = 1e-8


def a5(**_):
    worst = math.inf
    fails = []
    for p, H in A5_PAIRS:
        pr = PHParams(p, H)
        for tau in A5_TAU:
            v = c_ph(pr, tau)
            lo, hi = c_ph_bounds(pr, tau, min(2.0, math.exp(tau)))
            triv = math.exp(-(p + H) * tau)
            m = min(v - lo, hi - v, v - triv)
            worst = min(worst, m)
            if m < -SLACK:
                fails.append((p, H, tau, lo, v, hi))
    ok = not fails
    return Criterion("A5", ok, f"min margin = {worst:.3e}, violations = {len(fails)}",
                     f">= -{SLACK:g}", detail={"violations": fails})


A6_T = (5.0, 10.0, 15.0, 20.0, 25.0)
A6_DELTA = 0.05


def a6(seed=BASE_SEED + 6, budget=1 << 15, threads=1, **_):
    fits = {}
    for H in (0.55, 0.6):
        pts = [(T, grid_persistence(f"cph:p=0.5,H={H}", A6_DELTA, T, budget=budget,
                                    seed=seed + k, num_threads=threads))
               for k, T in enumerate(A6_T)]
        fits[H] = exponent_fit_linear(pts)
    t55, t60 = fits[0.55].exponent, fits[0.6].exponent
    within = all(abs(f.exponent - 1.0) <= 0.2 for f in fits.values())
    toward = abs(t55 - 1.0) < abs(t60 - 1.0)
    return Criterion("A6", within and toward,
                     f"theta(0.5,0.55) = {t55:.4f}, theta(0.5,0.6) = {t60:.4f}",
                     "both in [0.8, 1.2], H=0.55 closer to 1.0", detail={"fits": fits})


def a7(R=10**6, seed=BASE_SEED + 7, threads=1, **_):
    exact = 3.0 / 8.0
    tau = first_passage_times("delta", "const", 2, R, seed, 0.0, num_threads=threads)
    mc = persistence_from_passage(tau, [2])[0]
    q = orthant_qmc(gram_S("delta", "const", 2), 0.0, seed=seed)
    z = abs(mc.p - exact) / mc.stderr
    dq = abs(q.p - exact)
    ok = z <= 4.0 and dq <= 1e-4
    return Criterion("A7", ok, f"mc = {mc.p:.6f} ({z:.2f} stderr), qmc = {q.p:.8f} "
                     f"(|err| = {dq:.1e})", "3/8 within 4 stderr and 1e-4",
                     detail={"mc": mc, "qmc": q})


def lag_correlations(values, max_lag):
    """Per-lag mean of x_i x_{i+l} and its standard error across independent rows."""
    R, n = values.shape
    est, se = [], []
    for lag in range(max_lag + 1):
        per_row = np.mean(values[:, : n - lag] * values[:, lag:], axis=1)
        est.append(float(np.mean(per_row)))
        se.append(float(np.std(per_row, ddof=1) / math.sqrt(R)))
    return np.array(est), np.array(se)


def a8(R=200_000, seed=BASE_SEED + 8, threads=1, **_):
    n = 64
    worst = 0.0
    out = {}
    for kid in ("fgn:H=0.75", "exp:lambda=1"):
        k = parse_kernel(kid)
        batch = sample_stationary(circulant_embed(k, n), R, n, seed, num_threads=threads)
        est, se = lag_correlations(batch.values, 10)
        z = np.abs(est - k.rho(np.arange(11))) / se
        out[kid] = float(np.max(z))
        worst = max(worst, out[kid])
    ok = worst <= 5.0
    return Criterion("A8", ok, "max |rho_hat - rho| / stderr = " + ", ".join(
        f"{k}: {v:.2f}" for k, v in out.items()), "<= 5", detail=out)


A9_T = (5.0, 10.0, 20.0, 30.0)


def a9(seed=BASE_SEED + 9, budget=1 << 16, threads=1, **_):
    pts = [(T, grid_persistence("ou:alpha=1", 0.01, T, budget=budget, seed=seed + k,
                                num_threads=threads))
           for k, T in enumerate(A9_T)]
    fit = exponent_fit_linear(pts)
    ok = abs(fit.exponent - 1.0) <= 0.1
    return Criterion("A9", ok, f"theta_hat = {fit.exponent:.4f}", "1.00 +- 0.10",
                     detail={"fit": fit})


A10_DELTA = 0.05


def a10(seed=BASE_SEED + 10, budget=1 << 15, threads=1, **_):
    def fek(corr, Ts):
        return {T: -grid_persistence(corr, A10_DELTA, T, budget=budget, seed=seed + k,
                                     num_threads=threads).log_p / T
                for k, T in enumerate(Ts)}

    heavy = fek("powerlaw:beta=0.5", (5.0, 10.0, 20.0, 40.0))
    light = fek("ou:alpha=1", (20.0, 40.0))
    drop = 1.0 - heavy[40.0] / heavy[5.0]
    drift = abs(light[40.0] / light[20.0] - 1.0)
    ok = drop >= 0.3 and drift <= 0.1
    return Criterion("A10", ok, f"power-law a(T)/T drop 5->40 = {drop:.1%}, "
                     f"OU change 20->40 = {drift:.1%}", "drop >= 30%, change <= 10%",
                     detail={"powerlaw": heavy, "ou": light})


SUITES = {"A1": a1, "A2": a2, "A3": a3, "A4": a4, "A5": a5, "A6": a6, "A7": a7,
          "A8": a8, "A9": a9, "A10": a10}


def run_suite(suite_id, **kw):
    """Run one criterion; ``kw`` may override R, seed, budget or threads."""
    key = suite_id.upper()
    if key not in SUITES:
        raise KeyError(f"unknown suite {suite_id!r}; choose from {', '.join(SUITES)}")
    t0 = time.perf_counter()
    res = SUITES[key](**{k: v for k, v in kw.items() if v is not None})
    res.seconds = time.perf_counter() - t0
    return res


def reproduce(targets=None, echo=print, **kw):
    """Run the given criteria (all by default) and print one line per criterion."""
    ids = list(SUITES) if not targets or targets == "all" else [t.upper() for t in targets]
    out = []
    for sid in ids:
        res = run_suite(sid, **kw)
        if echo is not None:
            echo(format_line(res))
        out.append(res)
    return out
