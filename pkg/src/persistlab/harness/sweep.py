"""Exponent curves over one model parameter, for trend checks."""
from __future__ import annotations

from ..estimate import (
    exponent_fit_linear,
    exponent_fit_loglog,
    grid_persistence,
    persistence_from_passage,
)
from ..simulate import first_passage_times
from ..special import PHParams
from .runner import ResultRow, write_rows

__all__ = ["sweep", "SWEEP_PARAMETERS"]

SWEEP_PARAMETERS = ("p", "H", "alpha")
DEFAULT_N = [2**k for k in range(4, 11)]
DEFAULT_T = [5.0, 10.0, 15.0, 20.0]


def _theta_weighted_sums(p, H, ladder, R, seed, threads):
    kernel = f"fgn:H={H!r}"
    tau = first_passage_times(kernel, f"poly:p={p!r}", ladder[-1], R, seed,
                              num_threads=threads)
    fit = exponent_fit_loglog(list(zip(ladder, persistence_from_passage(tau, ladder))),
                              regressor="log-n")
    return -fit.exponent, fit


def _theta_grid(corr, delta, ladder, budget, seed, threads):
    pts = [(T, grid_persistence(corr, delta, T, budget=budget, seed=seed + k,
                                num_threads=threads))
           for k, T in enumerate(ladder)]
    fit = exponent_fit_linear(pts)
    return fit.exponent, fit


def sweep(parameter, values, p=0.0, H=0.75, method="mc", ladder=None, R=100_000,
          delta=0.05, budget=1 << 14, seed=0, threads=1, out=None):
    """One fitted exponent per value of ``parameter``.

    Parameters
    ----------
    parameter : {"p", "H", "alpha"}
        ``p`` and ``H`` vary the weighted-sum model (fgn kernel with Hurst
        index H, weights i**p); ``alpha`` varies the rate of an OU grid.
    values : sequence of float
    p, H : float
        Values held fixed for the other parameter.
    method : {"mc", "grid"}
        ``mc`` fits -slope of log q_n against log n from simulated partial
        sums; ``grid`` fits the linear-in-T decay of the limiting stationary
        process on a grid of spacing ``delta`` by orthant integration.
    ladder : list, optional
        n-ladder (mc) or T-ladder (grid).

    Returns
    -------
    list of ResultRow
        abscissa = parameter value, value = fitted exponent,
        stderr = half-width of the 95% interval / 1.96.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"parameter must be one of {SWEEP_PARAMETERS}")
    if method not in ("mc", "grid"):
        raise ValueError("method must be 'mc' or 'grid'")
    values = [float(v) for v in values]
    if parameter == "alpha":
        if any(v <= 0 for v in values):
            raise ValueError("alpha must be positive")
        method = "grid"
    else:
        for v in values:
            pp, hh = (v, H) if parameter == "p" else (p, v)
            PHParams(pp, hh)
    rows = []
    for i, v in enumerate(values):
        s = seed + 1000 * i
        if parameter == "alpha":
            lad = ladder or DEFAULT_T
            theta, fit = _theta_grid(f"ou:alpha={v!r}", delta, lad, budget, s, threads)
        else:
            pp, hh = (v, H) if parameter == "p" else (p, v)
            if method == "mc":
                lad = [int(n) for n in (ladder or DEFAULT_N)]
                theta, fit = _theta_weighted_sums(pp, hh, lad, R, s, threads)
            else:
                lad = ladder or DEFAULT_T
                theta, fit = _theta_grid(f"cph:p={pp!r},H={hh!r}", delta, lad, budget, s,
                                         threads)
        half = (fit.ci95[1] - fit.ci95[0]) / 2
        rows.append(ResultRow(f"sweep-{parameter}", v, float(theta), float(half / 1.96),
                              "mc" if method == "mc" else "orthant-qmc", int(s), 0.0))
    rows.sort(key=lambda r: r.abscissa)
    if out is not None:
        write_rows(rows, out)
    return rows
