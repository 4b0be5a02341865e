"""Persistence probabilities, exponent fits and finite-dimensional checks."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import log_ndtr, logsumexp, ndtr, ndtri
from scipy.stats import qmc

from . import _accel
from .covariance import PSDError, gram_stationary
from .kernels import parse_correlation, parse_weights

log = logging.getLogger(__name__)

__all__ = [
    "ProbabilityEstimate",
    "ExponentFit",
    "DichotomyReport",
    "SlepianReport",
    "persistence_mc",
    "persistence_from_passage",
    "orthant_qmc",
    "grid_persistence",
    "exponent_fit_loglog",
    "exponent_fit_linear",
    "theta_dichotomy",
    "slepian_block_check",
    "ORTHANT_MAX_DIM",
]

ORTHANT_MAX_DIM = 4096
TARGET_RELERR = 1e-3
PSD_RTOL_ORTHANT = 1e-8
# Cholesky entries below this (in correlation units) count as structural zeros
_BAND_DROP = 1e-13
# doubles of Sobol coordinates per chunk handed to the Genz kernel
_CHUNK = 1 << 22
_PILOT = 512


@dataclass(frozen=True)
class ProbabilityEstimate:
    """Estimate of a probability on the log scale.

    Attributes
    ----------
    log_p : float
        Natural log of the point estimate. For zero hits this is the log of the
        one-sided 95% upper bound 3/R.
    stderr_log : float
        Standard error of ``log_p`` (delta method for Monte Carlo).
    method : str
        ``mc``, ``orthant-qmc`` or ``closed-form``.
    n_effective : int
        Replications (MC) or total quasi-random points (QMC).
    hits : int or None
        Number of surviving rows, Monte Carlo only.
    flags : tuple of str
        ``zero-hits`` marks an upper bound unusable for regression;
        ``budget-exhausted`` marks a QMC estimate short of its error target.
    """

    log_p: float
    stderr_log: float
    method: str
    n_effective: int
    hits: int | None = None
    flags: tuple = ()

    @property
    def p(self):
        return math.exp(self.log_p)

    @property
    def stderr(self):
        """Standard error on the probability scale."""
        return self.p * self.stderr_log

    @property
    def usable(self):
        return "zero-hits" not in self.flags and math.isfinite(self.stderr_log)


@dataclass(frozen=True)
class ExponentFit:
    exponent: float
    ci95: tuple
    regressor: str
    points_used: int
    r_squared: float
    extra: dict = field(default_factory=dict, compare=False)


def _binomial(hits, R, method="mc"):
    hits = int(hits)
    R = int(R)
    if R < 1:
        raise ValueError("need at least one replication")
    if hits == 0:
        return ProbabilityEstimate(math.log(3.0 / R), math.inf, method, R, 0, ("zero-hits",))
    p = hits / R
    se = math.sqrt(p * (1.0 - p) / R)
    return ProbabilityEstimate(math.log(p), se / p, method, R, hits)


def persistence_mc(paths, r=0.0):
    """Fraction of rows of ``paths`` whose running maximum stays strictly below r.

    ``paths`` holds the partial sums (a :class:`~persistlab.simulate.PathBatch`
    of kind ``S`` or a plain R x n array).
    """
    values = getattr(paths, "values", paths)
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[0] < 1:
        raise ValueError("paths must be a nonempty R x n array")
    hits = int(np.count_nonzero(np.max(values, axis=1) < r))
    return _binomial(hits, values.shape[0])


def persistence_from_passage(tau, ladder):
    """Estimates of P(tau > n) for each n of ``ladder`` from first-passage indices.

    Every ladder point uses the same rows, so the estimates are nonincreasing
    in n by construction.
    """
    tau = np.asarray(tau)
    R = tau.size
    srt = np.sort(tau)
    out = []
    for n in ladder:
        hits = R - int(np.searchsorted(srt, n, side="right"))
        out.append(_binomial(hits, R))
    return out


def _correlation_and_levels(gram, r):
    a = np.asarray(getattr(gram, "entries", gram), dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("gram must be a square matrix")
    d = np.sqrt(np.diag(a))
    if np.any(d <= 0):
        raise PSDError("gram has a nonpositive diagonal entry")
    C = a / np.outer(d, d)
    b = np.broadcast_to(np.asarray(r, dtype=float), d.shape) / d
    return C, b


def _pivoted_cholesky(C):
    """Cholesky of P C P^T choosing the smallest conditional variance first.

    Returns (L, perm). Ties go to the lowest index, so a correlation that is
    Markov in its natural order keeps that order and a banded factor.
    """
    n = C.shape[0]
    L = np.zeros((n, n))
    perm = np.arange(n)
    var = np.diag(C).copy()
    tol = 1e-12
    for k in range(n):
        rest = perm[k:]
        j = k + int(np.argmin(var[rest]))
        perm[[k, j]] = perm[[j, k]]
        L[[k, j], :k] = L[[j, k], :k]
        piv = perm[k]
        v = var[piv]
        if v < -PSD_RTOL_ORTHANT:
            raise PSDError(f"conditional variance {v:.3e} < 0 at step {k}")
        if v <= tol:
            # degenerate direction; keep a tiny positive pivot so the
            # conditional level is still well defined
            v = tol
        lkk = math.sqrt(v)
        L[k, k] = lkk
        if k + 1 < n:
            rows = perm[k + 1:]
            col = C[rows, piv] - L[k + 1:, :k] @ L[k, :k]
            col /= lkk
            L[k + 1:, k] = col
            var[rows] -= col * col
    return L, perm


def _conditional_form(L):
    """Regression coefficients of each coordinate on its predecessors.

    With x = L y, x_k = sum_{j<k} A[k, j] x_j + L[k, k] y_k where
    A = I - diag(L) L^{-1}. A is banded for Markov sequences even though L
    is dense. Returns (A, d, rowstart) with entries below ``_BAND_DROP``
    treated as zero.
    """
    n = L.shape[0]
    d = np.diag(L).copy()
    M = solve_triangular(L, np.eye(n), lower=True)
    A = -d[:, None] * M
    A[np.triu_indices(n)] = 0.0
    A[np.abs(A) < _BAND_DROP] = 0.0
    start = np.arange(n, dtype=np.int64)
    rows, cols = np.nonzero(A)
    if rows.size:
        first = np.full(n, n, dtype=np.int64)
        np.minimum.at(first, rows, cols)
        start = np.minimum(start, first)
    return np.ascontiguousarray(A), d, start


def _systematic(w, rng):
    """Systematic resampling indices, one row of normalized weights per group."""
    G, N = w.shape
    cdf = np.cumsum(w, axis=1)
    cdf[:, -1] = 1.0
    u = (rng.random((G, 1)) + np.arange(N)) / N
    # one searchsorted over all groups, each shifted into its own unit interval
    shift = np.arange(G)[:, None]
    idx = np.searchsorted((cdf + shift).ravel(), (u + shift).ravel(), side="right")
    idx = np.minimum(idx.reshape(G, N) - shift * N, N - 1)
    return idx


def _smc_logp(A, d, start, b, K, N, rng, ess_frac=0.5):
    """Logs of K independent unbiased estimates of the orthant probability.

    Sequential conditioning as in the plain integrand, run on K groups of N
    particles; a group is resampled whenever the effective sample size of its
    accumulated weights drops below ``ess_frac * N``. Only the columns still
    referenced by later rows of A are kept.
    """
    n = A.shape[0]
    keep_from = np.minimum.accumulate(start[::-1])[::-1]
    width = int(np.max(np.arange(n) - keep_from)) + 1
    cap = min(n, max(2 * width, 64))
    B = np.empty((K, N, cap))
    off = 0
    logZ = np.zeros(K)
    lw = np.zeros((K, N))
    for k in range(n):
        s0 = int(start[k])
        if s0 < k:
            acc = B[:, :, s0 - off:k - off] @ A[k, s0:k]
        else:
            acc = np.zeros((K, N))
        z = (b[k] - acc) / d[k]
        e = ndtr(z)
        with np.errstate(divide="ignore"):
            le = np.log(e)
        far = z < -20.0
        if np.any(far):
            le[far] = log_ndtr(z[far])
        lw += le
        top = np.max(lw, axis=1)
        if not np.all(np.isfinite(top)):
            dead = ~np.isfinite(top)
            logZ[dead] = -np.inf
            top[dead] = 0.0
        if k == n - 1:
            break
        w = np.exp(lw - top[:, None])
        sw = np.sum(w, axis=1)
        low = sw * sw < ess_frac * N * np.einsum("ij,ij->i", w, w)
        if np.any(low):
            g = np.flatnonzero(low)
            logZ[g] += top[g] + np.log(sw[g] / N)
            idx = _systematic(w[g] / sw[g, None], rng)
            lo = int(keep_from[k + 1]) - off
            B[g, :, lo:k - off] = B[g[:, None], idx, lo:k - off]
            e[g] = e[g[:, None], idx]
            acc[g] = acc[g[:, None], idx]
            lw[g] = 0.0
        if k - off == cap:
            lo = int(keep_from[k + 1])
            B[:, :, :k - lo] = B[:, :, lo - off:k - off]
            off = lo
        u = rng.random((K, N)) * e
        B[:, :, k - off] = acc + d[k] * ndtri(np.maximum(u, 5e-324))
    return logZ + logsumexp(lw, axis=1) - math.log(N)


def _finish(est_k, used, flags, method, budget):
    K = est_k.size
    log_p = float(logsumexp(est_k) - math.log(K))
    if not math.isfinite(log_p):
        return ProbabilityEstimate(-math.inf, math.inf, method, used, None,
                                   flags + ("zero-hits",))
    rel = np.exp(est_k - log_p)
    stderr_log = float(np.std(rel, ddof=1) / math.sqrt(K))
    if flags:
        log.info("orthant_qmc: budget %d exhausted at relative error %.2e", budget, stderr_log)
    return ProbabilityEstimate(min(log_p, 0.0), stderr_log, method, used, None, flags)


def _relerr(est_k):
    top = np.max(est_k)
    if not np.isfinite(top):
        return math.inf
    rel = np.exp(est_k - top)
    return float(np.std(rel, ddof=1) / math.sqrt(rel.size) / np.mean(rel))


def orthant_qmc(gram, r=0.0, budget=1 << 18, seed=0, randomizations=16,
                target=TARGET_RELERR, num_threads=1, resample=None):
    """P(X_i < r_i for all i) for X ~ N(0, gram) by sequential conditioning.

    The orthant probability is rewritten as an integral over the unit cube of
    dimension n - 1 (Genz's separation of variables), with variables ordered
    by smallest conditional variance. Points come from ``randomizations``
    independently scrambled Sobol sequences; the spread across them gives the
    error estimate. Points are doubled until the relative error falls below
    ``target`` or ``budget`` total points have been used.

    On long, strongly dependent sequences the integrand weights degenerate
    (their log-variance grows linearly in n). When a pilot round finds an
    effective sample size below 5% of its points, or when ``resample=True``,
    the points are instead run as interacting particles that are resampled
    as the weights degenerate, driven by pseudo-random uniforms.

    Parameters
    ----------
    gram : GramMatrix or ndarray
        Covariance, at most ``ORTHANT_MAX_DIM`` square.
    r : float or ndarray
        Level(s).
    budget : int
        Maximum number of integrand evaluations (particle paths when
        resampling).
    seed : int
        Seeds the scrambling and the particle draws.
    resample : bool or None
        Force (True) or forbid (False) particle resampling; None decides
        from the pilot round.

    Returns
    -------
    ProbabilityEstimate
        ``method`` is ``orthant-qmc``; ``flags`` contains ``resampled`` when
        particles were used and ``budget-exhausted`` when the target was not met.
    """
    C, b = _correlation_and_levels(gram, r)
    n = C.shape[0]
    if n > ORTHANT_MAX_DIM:
        raise ValueError(f"orthant_qmc supports n <= {ORTHANT_MAX_DIM}, got {n}")
    lam_min = float(np.linalg.eigvalsh(C)[0]) if n <= 512 else None
    if lam_min is not None and lam_min < -PSD_RTOL_ORTHANT:
        raise PSDError(f"smallest eigenvalue {lam_min:.3e} below tolerance")
    if n == 1:
        p = float(ndtr(b[0]))
        return ProbabilityEstimate(math.log(p) if p > 0 else -math.inf, 0.0,
                                   "closed-form", 0)
    L, perm = _pivoted_cholesky(C)
    bb = np.ascontiguousarray(b[perm])
    A, d, start = _conditional_form(L)
    K = int(randomizations)
    if K < 2:
        raise ValueError("need at least two randomizations")
    rng = np.random.default_rng(seed)
    streams = rng.spawn(K)
    core = _accel.core
    if resample is None:
        # pseudo-random pilot: is plain sequential conditioning viable here?
        W = rng.random((_PILOT, n - 1))
        lw = np.empty(_PILOT)
        core.genz_logweights(A, start, bb, d, W, lw, num_threads)
        tot = logsumexp(lw)
        ess = math.exp(2 * tot - logsumexp(2 * lw)) if np.isfinite(tot) else 0.0
        resample = ess < 0.05 * _PILOT
        if resample:
            log.info("orthant_qmc: pilot effective sample size %.1f of %d; "
                     "switching to particle resampling", ess, _PILOT)
    if resample:
        return _orthant_particles(A, d, start, bb, K, rng, budget, target)
    engines = [qmc.Sobol(d=n - 1, scramble=True, seed=s) for s in streams]
    logsum = np.full(K, -np.inf)
    count = 0
    used = 0
    m = 7
    flags = ()
    while True:
        N = 1 << m
        if count and used + K * (N - count) > budget:
            flags = ("budget-exhausted",)
            break
        add = N - count
        step = max(1, min(add, _CHUNK // max(n - 1, 1)))
        for k, eng in enumerate(engines):
            done = 0
            while done < add:
                c = min(step, add - done)
                W = np.ascontiguousarray(eng.random(c))
                lw = np.empty(c)
                core.genz_logweights(A, start, bb, d, W, lw, num_threads)
                logsum[k] = np.logaddexp(logsum[k], logsumexp(lw))
                done += c
        used += K * add
        count = N
        est_k = logsum - math.log(count)
        if _relerr(est_k) <= target:
            break
        m += 1
    return _finish(logsum - math.log(count), used, flags, "orthant-qmc", budget)


def _orthant_particles(A, d, start, b, K, rng, budget, target):
    n = A.shape[0]
    # keep one particle batch under about 256 MB of history
    width = int(np.max(np.arange(n) - np.minimum.accumulate(start[::-1])[::-1])) + 1
    cap = max(64, (1 << 25) // (K * min(n, max(2 * width, 64))))
    N = 64
    # per-group estimates of all rounds pooled with weights N
    logacc = np.full(K, -np.inf)
    total = 0
    used = 0
    flags = ("resampled",)
    while True:
        if total and (used + K * N > budget or N > cap):
            flags = flags + ("budget-exhausted",)
            break
        est = _smc_logp(A, d, start, b, K, N, rng)
        logacc = np.logaddexp(logacc, est + math.log(N))
        total += N
        used += K * N
        if _relerr(logacc - math.log(total)) <= target:
            break
        N *= 2
    return _finish(logacc - math.log(total), used, flags, "orthant-qmc", budget)


def grid_persistence(corr, delta, T, r=0.0, budget=1 << 16, seed=0, num_threads=1):
    """P(max over the grid {0, delta, ..., T} of Z < r) by :func:`orthant_qmc`."""
    m = int(round(T / delta)) + 1
    if abs((m - 1) * delta - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T = {T} is not a multiple of delta = {delta}")
    gram = gram_stationary(corr, delta, m, check=m <= 512)
    return orthant_qmc(gram, r, budget=budget, seed=seed, num_threads=num_threads)


def _wls(x, y, se):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = 1.0 / np.asarray(se, dtype=float) ** 2
    X = np.column_stack([np.ones_like(x), x])
    XtW = X.T * w
    A = XtW @ X
    coef = np.linalg.solve(A, XtW @ y)
    resid = y - X @ coef
    cov = np.linalg.inv(A)
    dof = x.size - 2
    chi2 = float(np.sum(w * resid**2))
    # inflate by the reduced chi-square when the points scatter more than
    # their error bars allow (curvature, underestimated errors)
    scale = max(1.0, chi2 / dof) if dof > 0 else 1.0
    se_slope = math.sqrt(cov[1, 1] * scale)
    ybar = np.sum(w * y) / np.sum(w)
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - chi2 / ss_tot if ss_tot > 0 else 1.0
    return coef, se_slope, r2, chi2


def _usable(points):
    keep = [(a, e) for a, e in points if e.usable and math.isfinite(e.log_p)]
    if len(keep) < 3:
        raise ValueError(f"need at least 3 usable points, got {len(keep)}")
    return keep


def _se_floor(se, y):
    se = np.asarray(se, dtype=float)
    # exact inputs (closed forms, synthetic data) get equal tiny errors
    floor = 1e-12 * max(1.0, float(np.max(np.abs(y))))
    return np.maximum(se, floor)


def exponent_fit_loglog(points, weights=None, regressor="log-n"):
    """Weighted least-squares slope of log q_n against log s(n) or log n.

    Parameters
    ----------
    points : sequence of (n, ProbabilityEstimate)
    weights : WeightSequence or id string
        Needed for ``regressor="log-s"``.
    regressor : {"log-n", "log-s"}

    Returns
    -------
    ExponentFit
        ``exponent`` is the fitted slope (negative for decaying q_n).
    """
    keep = _usable(points)
    ns = np.array([a for a, _ in keep], dtype=float)
    if regressor == "log-n":
        x = np.log(ns)
    elif regressor == "log-s":
        if weights is None:
            raise ValueError("log-s regression needs the weight sequence")
        w = parse_weights(weights)
        x = np.log(np.asarray(w.s(ns), dtype=float))
    else:
        raise ValueError(f"unknown regressor {regressor!r}")
    y = np.array([e.log_p for _, e in keep])
    se = _se_floor([e.stderr_log for _, e in keep], y)
    coef, se_slope, r2, chi2 = _wls(x, y, se)
    slope = float(coef[1])
    half = 1.96 * se_slope
    return ExponentFit(slope, (slope - half, slope + half), regressor, len(keep), r2,
                       {"intercept": float(coef[0]), "chi2": chi2})


def exponent_fit_linear(points):
    """Affine weighted fit of -log q(T) on T; the slope estimates the exponent.

    ``extra["fekete"]`` maps T to a(T)/T = -log q(T)/T and
    ``extra["fekete_stderr"]`` to its standard error.
    """
    keep = _usable(points)
    T = np.array([a for a, _ in keep], dtype=float)
    y = np.array([-e.log_p for _, e in keep])
    se = _se_floor([e.stderr_log for _, e in keep], y)
    coef, se_slope, r2, chi2 = _wls(T, y, se)
    slope = float(coef[1])
    half = 1.96 * se_slope
    fek = {float(t): float(v / t) for t, v in zip(T, y)}
    fek_se = {float(t): float(s / t) for t, s in zip(T, se)}
    return ExponentFit(slope, (slope - half, slope + half), "linear-T", len(keep), r2,
                       {"intercept": float(coef[0]), "chi2": chi2, "fekete": fek,
                        "fekete_stderr": fek_se})


@dataclass(frozen=True)
class DichotomyReport:
    verdict: str
    integrable: bool
    basis: str
    fekete: dict = field(default_factory=dict)
    fekete_stderr: dict = field(default_factory=dict)

    def __str__(self):
        return self.verdict


def _fitted_integrability(corr):
    """Integrability of an undeclared correlation from its decay on [10, 1e4]."""
    t = np.geomspace(10.0, 1e4, 40)
    a = np.asarray(corr(t), dtype=float)
    pos = a > 0
    if np.count_nonzero(pos) < 10:
        return True, "fitted: vanishes"
    slope = np.polyfit(np.log(t[pos]), np.log(a[pos]), 1)[0]
    if slope < -1.1:
        return True, f"fitted: power slope {slope:.3f}"
    if slope > -0.9:
        return False, f"fitted: power slope {slope:.3f}"
    raise ValueError(f"cannot classify decay: fitted power slope {slope:.3f} too close to -1")


def theta_dichotomy(corr, tail_class=None, fekete_T=(5.0, 10.0, 20.0, 40.0), delta=0.05,
                    r=0.0, budget=1 << 15, seed=0, num_threads=1):
    """Whether the persistence exponent of a stationary correlation is positive.

    The verdict follows the integrability of the correlation: the declared
    family, an explicit ``tail_class`` (a :class:`~persistlab.kernels.TailClass`
    or a bool meaning integrable), or a fitted power-law tail. When
    ``fekete_T`` is given the finite-horizon sequence a(T)/T is computed on
    the grid of spacing ``delta`` as corroboration; it should settle above
    zero for a positive exponent and drift down for a zero one.
    """
    corr = parse_correlation(corr)
    if tail_class is not None:
        integ = bool(getattr(tail_class, "summable", tail_class))
        basis = "declared tail class"
    else:
        integ = corr.integrable()
        basis = "declared family"
        if integ is None:
            integ, basis = _fitted_integrability(corr)
    verdict = "positive" if integ else "zero"
    fek, fek_se = {}, {}
    for T in fekete_T or ():
        est = grid_persistence(corr, delta, T, r, budget=budget, seed=seed,
                               num_threads=num_threads)
        fek[float(T)] = -est.log_p / T
        fek_se[float(T)] = est.stderr_log / T
    return DichotomyReport(verdict, integ, basis, fek, fek_se)


@dataclass(frozen=True)
class SlepianReport:
    p_full: ProbabilityEstimate
    p_head: ProbabilityEstimate
    p_tail: ProbabilityEstimate
    margin: float
    margin_stderr: float

    @property
    def holds(self):
        """Inequality holds up to three standard errors of the margin."""
        return self.margin >= -3.0 * self.margin_stderr - 1e-12


def slepian_block_check(gram, r=0.0, split=None, budget=1 << 18, seed=0, num_threads=1):
    """Compare P(max_{1..n} < r) with the product over blocks 1..split and split+1..n.

    For nonnegative correlations the full probability is at least the product.
    ``margin`` is their difference on the probability scale.
    """
    a = np.asarray(getattr(gram, "entries", gram), dtype=float)
    n = a.shape[0]
    if split is None:
        split = n // 2
    if not 1 <= split < n:
        raise ValueError(f"split must satisfy 1 <= split < n = {n}")
    if np.any(a < 0):
        raise ValueError("block check needs nonnegative covariances")
    kw = dict(budget=budget, num_threads=num_threads)
    full = orthant_qmc(a, r, seed=seed, **kw)
    head = orthant_qmc(a[:split, :split], r, seed=seed + 1, **kw)
    tail = orthant_qmc(a[split:, split:], r, seed=seed + 2, **kw)
    prod = head.p * tail.p
    margin = full.p - prod
    se = math.sqrt(full.stderr**2 + (prod * head.stderr_log) ** 2
                   + (prod * tail.stderr_log) ** 2)
    return SlepianReport(full, head, tail, margin, se)
