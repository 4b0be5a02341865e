"""Correlation kernels, weight sequences and the scale functions s and w.

Families are addressable by short identifier strings, e.g.::

    fgn:H=0.75          exp:lambda=1         polysum:beta=2      delta
    poly:p=1.0          log                  stretched:gamma=0.5,p=0.5
    exp-weight:alpha=0.2                     const
    ou:alpha=1          powerlaw:beta=0.5    cph:p=0.5,H=0.55

The first group are discrete correlation kernels, the second weight
sequences and the third continuous-time stationary correlations used on
uniform grids.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "CorrelationKernel",
    "WeightSequence",
    "StationaryCorrelation",
    "TailClass",
    "parse_kernel",
    "parse_weights",
    "parse_correlation",
    "rho_eval",
    "sigma_eval",
    "s_of",
    "w_of",
    "classify_summability",
    "log_concavity_constant",
]

# largest prefix table for s(t); 2**24 doubles = 128 MiB
_MAX_PREFIX = 2**24


@dataclass(frozen=True)
class TailClass:
    """Summable, or nonsummable with rho(i) ~ kappa * i**(2H-2)."""

    kind: str
    H: float | None = None
    kappa: float | None = None
    slope: float | None = None
    near_threshold: bool = False

    @property
    def summable(self):
        return self.kind == "summable"

    def __str__(self):
        if self.summable:
            return "summable"
        return f"nonsummable(H={self.H:.6g}, kappa={self.kappa:.6g})"


def _parse_id(ident):
    ident = ident.strip()
    family, _, rest = ident.partition(":")
    params = {}
    if rest and not rest.startswith("@"):
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"malformed parameter {item!r} in {ident!r}")
            params[key.strip()] = float(value)
    elif rest:
        params["@"] = rest[1:]
    return family.strip().lower(), params


def _load_table(path):
    text = Path(path).read_text()
    values = [float(v) for v in text.replace(",", " ").split()]
    return np.asarray(values, dtype=float)


def _format_params(params):
    return ",".join(f"{k}={v:g}" for k, v in params.items())


# ---------------------------------------------------------------------------
# discrete correlation kernels

_KERNEL_ALIASES = {
    "delta": "kronecker-delta",
    "kronecker": "kronecker-delta",
    "kronecker-delta": "kronecker-delta",
    "iid": "kronecker-delta",
    "exp": "exponential",
    "exponential": "exponential",
    "polysum": "polynomial-summable",
    "poly-summable": "polynomial-summable",
    "polynomial-summable": "polynomial-summable",
    "fgn": "fgn",
    "table": "user-table",
    "user-table": "user-table",
}


@dataclass(frozen=True)
class CorrelationKernel:
    """Nonnegative correlation function of a stationary Gaussian sequence.

    Parameters
    ----------
    family : str
        One of ``kronecker-delta``, ``exponential``, ``polynomial-summable``,
        ``fgn`` or ``user-table``.
    params : dict
        ``lambda`` for exponential, ``beta`` for polynomial-summable, ``H``
        for fgn.
    table : ndarray, optional
        Values rho(0), rho(1), ... for ``user-table``.
    """

    family: str
    params: dict = field(default_factory=dict)
    table: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        fam = _KERNEL_ALIASES.get(self.family)
        if fam is None:
            raise ValueError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", fam)
        p = self.params
        if fam == "exponential" and not p.get("lambda", 0) > 0:
            raise ValueError("exponential kernel needs lambda > 0")
        if fam == "polynomial-summable" and not p.get("beta", 0) > 1:
            raise ValueError("polynomial-summable kernel needs beta > 1")
        if fam == "fgn" and not 0.5 <= p.get("H", -1) < 1:
            raise ValueError("fgn kernel needs H in [1/2, 1) (nonnegative correlations)")
        if fam == "user-table":
            if self.table is None:
                raise ValueError("user-table kernel needs a table")
            t = np.asarray(self.table, dtype=float)
            if t.ndim != 1 or t.size == 0 or t[0] != 1.0:
                raise ValueError("user table must be 1-d with rho(0) = 1")
            if np.any(t < 0) or np.any(t > 1):
                raise ValueError("user table values must lie in [0, 1]")
            object.__setattr__(self, "table", t)

    @classmethod
    def parse(cls, ident):
        family, params = _parse_id(ident)
        if family in ("table", "user-table"):
            if "@" not in params:
                raise ValueError("table kernel id must be 'table:@<path>'")
            return cls("user-table", {}, _load_table(params["@"]))
        return cls(family, params)

    @classmethod
    def from_table(cls, values):
        return cls("user-table", {}, np.asarray(values, dtype=float))

    @property
    def ident(self):
        short = {
            "kronecker-delta": "delta",
            "exponential": "exp",
            "polynomial-summable": "polysum",
            "fgn": "fgn",
            "user-table": "table",
        }[self.family]
        return f"{short}:{_format_params(self.params)}" if self.params else short

    def rho(self, lag):
        """Vectorized rho(|lag|)."""
        lag = np.abs(np.asarray(lag, dtype=float))
        fam = self.family
        if fam == "kronecker-delta":
            out = (lag == 0).astype(float)
        elif fam == "exponential":
            out = np.exp(-self.params["lambda"] * lag)
        elif fam == "polynomial-summable":
            out = (1.0 + lag) ** (-self.params["beta"])
        elif fam == "fgn":
            h2 = 2.0 * self.params["H"]
            out = 0.5 * ((lag + 1) ** h2 + np.abs(lag - 1) ** h2 - 2.0 * lag**h2)
            # cancellation noise at large lags
            out = np.clip(out, 0.0, 1.0)
        else:
            idx = lag.astype(np.int64)
            if np.any(idx >= self.table.size):
                raise ValueError(
                    f"lag {int(idx.max())} beyond user table of length {self.table.size}"
                )
            out = self.table[idx]
        return out

    def tail_class(self):
        return classify_summability(self)


def parse_kernel(ident):
    if isinstance(ident, CorrelationKernel):
        return ident
    return CorrelationKernel.parse(ident)


def rho_eval(kernel, lag):
    """rho(lag) for an integer lag >= 0."""
    if lag < 0:
        raise ValueError("lag must be nonnegative")
    if int(lag) != lag:
        raise ValueError("lag must be an integer")
    return float(parse_kernel(kernel).rho(lag))


def classify_summability(kernel):
    """Tail class of a kernel: declared for built-ins, fitted for tables.

    For tables the fit is a least-squares line of log rho(i) against log i
    over the largest decade of lags; the class boundary sits at slope -1.
    """
    kernel = parse_kernel(kernel)
    fam = kernel.family
    if fam in ("kronecker-delta", "exponential", "polynomial-summable"):
        return TailClass("summable")
    if fam == "fgn":
        H = kernel.params["H"]
        if H == 0.5:
            return TailClass("summable")
        return TailClass("nonsummable", H=H, kappa=H * (2 * H - 1))
    t = kernel.table
    L = t.size - 1
    if L < 16:
        raise ValueError("user table too short to classify (need >= 16 lags)")
    lags = np.arange(max(1, L // 10), L + 1)
    vals = t[lags]
    if np.any(vals <= 0):
        # finite support in the tail decade
        return TailClass("summable", slope=-math.inf)
    x = np.log(lags)
    y = np.log(vals)
    slope, intercept = np.polyfit(x, y, 1)
    near = abs(slope + 1.0) <= 0.05
    if near:
        warnings.warn(f"fitted tail slope {slope:.3f} is within 0.05 of -1", stacklevel=2)
    if slope < -1.0:
        return TailClass("summable", slope=float(slope), near_threshold=near)
    if slope >= 0.0:
        raise ValueError(f"user table does not decay (fitted slope {slope:.3f})")
    H = 1.0 + slope / 2.0
    return TailClass(
        "nonsummable", H=float(H), kappa=float(math.exp(intercept)),
        slope=float(slope), near_threshold=near,
    )


# ---------------------------------------------------------------------------
# weight sequences

_WEIGHT_ALIASES = {
    "poly": "polynomial",
    "polynomial": "polynomial",
    "const": "polynomial",
    "one": "polynomial",
    "log": "log-scale",
    "log-scale": "log-scale",
    "stretched": "stretched-exponential",
    "stretched-exponential": "stretched-exponential",
    "exp-weight": "exponential",
    "exponential": "exponential",
    "table": "user-table",
    "user-table": "user-table",
}


class WeightSequence:
    """Positive weights sigma(i), i >= 1, with cumulative scale s and inverse w.

    ``s`` uses the piecewise-constant extension sigma(x) = sigma(ceil(x)), so
    s(t)**2 is piecewise linear in t and ``w`` inverts it exactly cell by
    cell.
    """

    def __init__(self, family, params=None, table=None):
        fam = _WEIGHT_ALIASES.get(family)
        if fam is None:
            raise ValueError(f"unknown weight family {family!r}")
        params = dict(params or {})
        if family in ("const", "one"):
            params = {"p": 0.0}
        if fam == "polynomial":
            params.setdefault("p", 0.0)
        elif fam == "stretched-exponential":
            if not params.get("gamma", 0) > 0 or not 0 < params.get("p", -1) < 1:
                raise ValueError("stretched-exponential weights need gamma > 0, p in (0,1)")
        elif fam == "exponential":
            if not params.get("alpha", 0) > 0:
                raise ValueError("exponential weights need alpha > 0")
        elif fam == "user-table":
            if table is None:
                raise ValueError("user-table weights need a table")
            table = np.asarray(table, dtype=float)
            if table.ndim != 1 or table.size == 0 or np.any(table <= 0):
                raise ValueError("weight table must be 1-d and strictly positive")
        self.family = fam
        self.params = params
        self.table = table
        self._s2 = np.zeros(1)

    @classmethod
    def parse(cls, ident):
        family, params = _parse_id(ident)
        if family in ("table", "user-table"):
            if "@" not in params:
                raise ValueError("table weights id must be 'table:@<path>'")
            return cls("user-table", table=_load_table(params["@"]))
        return cls(family, params)

    @property
    def ident(self):
        if self.family == "polynomial":
            return f"poly:p={self.params['p']:g}"
        if self.family == "log-scale":
            return "log"
        if self.family == "stretched-exponential":
            return f"stretched:{_format_params(self.params)}"
        if self.family == "exponential":
            return f"exp-weight:alpha={self.params['alpha']:g}"
        return "table"

    def __repr__(self):
        return f"WeightSequence({self.ident!r})"

    def __eq__(self, other):
        return (
            isinstance(other, WeightSequence)
            and self.family == other.family
            and self.params == other.params
            and (self.table is None) == (other.table is None)
            and (self.table is None or np.array_equal(self.table, other.table))
        )

    __hash__ = None

    def sigma(self, i):
        """Vectorized sigma(i) for integer i >= 1."""
        i = np.asarray(i, dtype=float)
        if np.any(i < 1):
            raise ValueError("weights are indexed from 1")
        fam = self.family
        if fam == "polynomial":
            return i ** self.params["p"]
        if fam == "log-scale":
            return i**-0.5
        if fam == "stretched-exponential":
            return np.exp(self.params["gamma"] * i ** self.params["p"])
        if fam == "exponential":
            return np.exp(self.params["alpha"] * i)
        idx = i.astype(np.int64) - 1
        if np.any(idx >= self.table.size):
            raise ValueError(f"index beyond weight table of length {self.table.size}")
        return self.table[idx]

    def sigmas(self, n):
        """sigma(1), ..., sigma(n) as an array."""
        return self.sigma(np.arange(1, n + 1))

    @property
    def p(self):
        """Polynomial order, if the family has one."""
        if self.family == "polynomial":
            return self.params["p"]
        if self.family == "log-scale":
            return -0.5
        return None

    def sup_s(self):
        """lim s(t) as t -> infinity (math.inf when unbounded)."""
        if self.family == "polynomial" and self.params["p"] < -0.5:
            from scipy.special import zeta

            return math.sqrt(zeta(-2.0 * self.params["p"]))
        if self.family == "user-table":
            return math.sqrt(float(np.sum(self.table**2)))
        return math.inf

    def _prefix(self, n):
        """Cumulative sums s(0)^2, ..., s(n)^2 (cached, grown by doubling)."""
        if n < self._s2.size:
            return self._s2
        if n > _MAX_PREFIX:
            raise ValueError(f"s(t) requested beyond tabulated range t <= {_MAX_PREFIX}")
        if self.family == "user-table" and n > self.table.size:
            raise ValueError(f"index beyond weight table of length {self.table.size}")
        size = min(_MAX_PREFIX, max(n, 2 * (self._s2.size - 1), 1024))
        if self.family == "user-table":
            size = min(size, self.table.size)
        with np.errstate(over="ignore"):
            sq = self.sigmas(size) ** 2
            csum = np.cumsum(sq)
        if not np.isfinite(csum[-1]):
            # keep the finite part; requests beyond it raise below
            size = int(np.argmax(~np.isfinite(csum)))
            csum = csum[:size]
        self._s2 = np.concatenate(([0.0], csum))
        if n >= self._s2.size:
            raise ValueError(f"s(t)^2 overflows double precision before t = {n}")
        return self._s2

    def s2(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("s(t) needs t >= 0")
        tmax = float(np.max(t)) if t.size else 0.0
        table = self._prefix(int(math.ceil(tmax)))
        fl = np.floor(t).astype(np.int64)
        frac = t - fl
        ce = np.where(frac > 0, fl + 1, np.maximum(fl, 1))
        sig_next = self.sigma(ce)
        return table[fl] + frac * sig_next**2

    def s(self, t):
        return np.sqrt(self.s2(t))

    def w(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u < 0):
            raise ValueError("w(u) needs u >= 0")
        umax = float(np.max(u)) if u.size else 0.0
        if umax >= self.sup_s():
            raise ValueError(
                f"u = {umax:g} is not below sup s = {self.sup_s():g} "
                "(square-summable weights)"
            )
        target = u**2
        table = self._s2
        while table[-1] < umax**2:
            if table.size - 1 >= _MAX_PREFIX or (
                self.family == "user-table" and table.size - 1 >= self.table.size
            ):
                raise ValueError(f"w({umax:g}) lies beyond the tabulated range of s")
            table = self._prefix(2 * (table.size - 1) + 1)
        # bracket: table[n] <= u^2 < table[n+1]; solve the linear piece exactly
        n = np.searchsorted(table, target, side="right") - 1
        n = np.clip(n, 0, table.size - 2)
        sig2 = self.sigma(n + 1) ** 2
        return n + (target - table[n]) / sig2


def parse_weights(ident):
    if isinstance(ident, WeightSequence):
        return ident
    return WeightSequence.parse(ident)


def sigma_eval(weights, i):
    if i < 1:
        raise ValueError("i must be >= 1")
    return float(parse_weights(weights).sigma(i))


def s_of(weights, t):
    """Cumulative scale s(t) = sqrt(integral_0^t sigma(ceil x)^2 dx)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return float(parse_weights(weights).s(t))


def w_of(weights, u):
    """Inverse of s: the t with s(t) = u."""
    if u < 0:
        raise ValueError("u must be >= 0")
    return float(parse_weights(weights).w(u))


def log_concavity_constant(weights, n_max, n_min=1, points=200):
    """Empirical constant C with sigma(m)/s(m) <= C sigma(n)/s(n) for m >= n.

    Evaluated on a geometric grid of indices in [n_min, n_max].
    """
    ws = parse_weights(weights)
    grid = np.unique(np.geomspace(n_min, n_max, points).astype(np.int64))
    ratio = ws.sigma(grid) / ws.s(grid.astype(float))
    # running max from the right: sup_{m >= n} ratio(m) / ratio(n)
    tail_max = np.maximum.accumulate(ratio[::-1])[::-1]
    return float(np.max(tail_max / ratio))


# ---------------------------------------------------------------------------
# continuous-time stationary correlations on [0, inf)

_CORR_ALIASES = {
    "ou": "ou",
    "exp": "ou",
    "powerlaw": "powerlaw",
    "cph": "cph",
    "d-alpha": "d-alpha",
}


class StationaryCorrelation:
    """Correlation A(tau) of a stationary process in continuous time.

    ``ou:alpha=a`` is exp(-a tau), ``powerlaw:beta=b`` is (1 + tau)**-b and
    ``cph:p=..,H=..`` is the Lamperti-type correlation built from f_{p,H}.
    Arbitrary callables can be wrapped with :meth:`from_callable`.
    """

    def __init__(self, family, params=None, func=None, integrable=None):
        self.family = family
        self.params = dict(params or {})
        self._func = func
        self._integrable = integrable
        if family == "ou" and not self.params.get("alpha", 0) > 0:
            raise ValueError("ou correlation needs alpha > 0")
        if family == "powerlaw" and not self.params.get("beta", 0) > 0:
            raise ValueError("powerlaw correlation needs beta > 0")
        if family == "cph":
            from .special import PHParams

            PHParams(self.params["p"], self.params["H"])

    @classmethod
    def parse(cls, ident):
        family, params = _parse_id(ident)
        fam = _CORR_ALIASES.get(family)
        if fam is None or fam == "d-alpha":
            raise ValueError(f"unknown stationary correlation {ident!r}")
        return cls(fam, params)

    @classmethod
    def from_callable(cls, func, integrable=None, name="callable"):
        return cls(name, {}, func=func, integrable=integrable)

    @property
    def ident(self):
        if self._func is not None:
            return self.family
        return f"{self.family}:{_format_params(self.params)}"

    def __repr__(self):
        return f"StationaryCorrelation({self.ident!r})"

    def __call__(self, tau):
        tau = np.abs(np.asarray(tau, dtype=float))
        if self._func is not None:
            return np.asarray(self._func(tau), dtype=float)
        if self.family == "ou":
            return np.exp(-self.params["alpha"] * tau)
        if self.family == "powerlaw":
            return (1.0 + tau) ** (-self.params["beta"])
        if self.family == "cph":
            from .special import PHParams, c_ph_array

            return c_ph_array(PHParams(self.params["p"], self.params["H"]), tau)
        raise ValueError(f"cannot evaluate correlation family {self.family!r}")

    def integrable(self):
        """Whether int_0^inf A(t) dt < inf; None if undeclared."""
        if self._integrable is not None:
            return bool(self._integrable)
        if self.family == "ou":
            return True
        if self.family == "powerlaw":
            return self.params["beta"] > 1
        if self.family == "cph":
            # envelope max(tau e^{-tau(p+H)}, e^{-tau(1-H)}) is integrable
            return True
        return None


def parse_correlation(ident):
    if isinstance(ident, StationaryCorrelation):
        return ident
    if callable(ident):
        return StationaryCorrelation.from_callable(ident)
    return StationaryCorrelation.parse(ident)
