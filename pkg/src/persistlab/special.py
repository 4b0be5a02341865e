"""Special functions behind the non-summable limit process.

``f_ph`` is the double integral of x^p y^p |x - y|^(2H-2) over a rectangle
anchored at the origin; ``c_ph`` the stationary correlation it induces after
an exponential time change; ``d_alpha_rho`` the correlation arising from
exponentially growing weights.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import betainc, betaln, gammaln

from .kernels import classify_summability, parse_kernel

__all__ = [
    "PHParams",
    "QuadratureResult",
    "QuadratureError",
    "psi",
    "selberg_f11",
    "f_ph",
    "c_ph",
    "c_ph_array",
    "c_ph_bounds",
    "c_ph_envelope",
    "c_ph_envelope_constant",
    "d_alpha_rho",
]

# relative accuracy requested from every quadrature call
_EPSREL = 1e-10
_LIMIT = 400


class QuadratureError(RuntimeError):
    """Adaptive quadrature hit its subdivision cap without converging."""


@dataclass(frozen=True)
class PHParams:
    p: float
    H: float

    def __post_init__(self):
        if not 0.5 < self.H < 1.0:
            raise ValueError(f"H = {self.H} outside (1/2, 1)")
        if not self.p + self.H > 0:
            raise ValueError(f"p + H = {self.p + self.H} must be positive")


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    subdivisions: int

    def __float__(self):
        return self.value


def _as_params(params):
    if isinstance(params, PHParams):
        return params
    p, H = params
    return PHParams(float(p), float(H))


def psi(alpha, x):
    """integral_1^x y^alpha dy."""
    if x < 1:
        raise ValueError("psi needs x >= 1")
    eps = alpha + 1.0
    L = math.log(x)
    if abs(eps) < 1e-8:
        # removable singularity at alpha = -1
        z = eps * L
        return L * (1.0 + z / 2.0 + z * z / 6.0)
    return math.expm1(eps * L) / eps


def selberg_f11(params):
    """f_{p,H}(1,1) = Gamma(p+1) Gamma(2H-1) / ((p+H) Gamma(p+2H))."""
    pr = _as_params(params)
    p, H = pr.p, pr.H
    return math.exp(gammaln(p + 1) + gammaln(2 * H - 1) - gammaln(p + 2 * H)) / (p + H)


def _quad(func, a, b, **kw):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        val, err, info = integrate.quad(
            func, a, b, epsabs=0.0, epsrel=_EPSREL, limit=_LIMIT, full_output=1, **kw
        )[:3]
    bad = [w for w in caught if issubclass(w.category, integrate.IntegrationWarning)]
    if bad and not (abs(err) <= 1e-7 * abs(val)):
        raise QuadratureError(
            f"quadrature on [{a}, {b}] did not converge: value {val:.6g}, "
            f"error estimate {err:.3g} ({bad[0].message})"
        )
    return val, abs(err), int(info.get("last", 0))


def _inner_below(x, p, H):
    """integral_0^x y^p (x - y)^(2H-2) dy with algebraic-weight quadrature."""
    v, e, _ = _quad(lambda y: 1.0, 0.0, x, weight="alg", wvar=(p, 2 * H - 2))
    return v, e


@lru_cache(maxsize=256)
def _unit_square(p, H):
    """f_{p,H}(1,1) by nested adaptive quadrature (no closed form used).

    By symmetry the square is twice the triangle y < x; the inner integral has
    both endpoint singularities absorbed by the algebraic weight.
    """
    errs = []

    def outer(x):
        v, e = _inner_below(x, p, H)
        errs.append(e * x**p)
        return x**p * v

    val, err, last = _quad(outer, 0.0, 1.0)
    return 2 * val, 2 * (err + max(errs, default=0.0)), last


def _off_square_integrand(s, p, H, a, b, logbeta):
    # y = e^s; inner x-integral in closed form through the incomplete beta ratio
    return math.exp((2 * p + 2 * H) * s + logbeta) * betainc(a, b, math.exp(-s))


@lru_cache(maxsize=65536)
def _off_square(p, H, logc, shift=0.0):
    """e^-shift * integral_0^1 integral_1^c x^p y^p (y - x)^(2H-2) dy dx, c = e^logc.

    The shift keeps the integrand finite when c is astronomically large.
    """
    if logc <= 0.0:
        return 0.0, 0.0, 0
    a, b = p + 1.0, 2 * H - 1.0
    logbeta = betaln(a, b) - shift
    # split at s = 1 so the y = 1 corner singularity sits at an endpoint
    pieces = [(0.0, min(1.0, logc))]
    if logc > 1.0:
        pieces.append((1.0, logc))
    val = err = 0.0
    last = 0
    for lo, hi in pieces:
        v, e, n = _quad(_off_square_integrand, lo, hi, args=(p, H, a, b, logbeta))
        val += v
        err += e
        last += n
    return val, err, last


def f_ph(params, a, b, unit_square="quadrature"):
    """f_{p,H}(a,b) = integral_0^a integral_0^b x^p y^p |x-y|^(2H-2) dx dy.

    Uses f(a,b) = a^(2p+2H) f(1, b/a) for b >= a. The unit square part comes
    from nested quadrature (``unit_square="quadrature"``) or the closed form
    (``"selberg"``); the strip [0,1] x [1, b/a] integrates the inner variable
    exactly and the outer one adaptively in log scale.
    """
    pr = _as_params(params)
    if not (a > 0 and b > 0):
        raise ValueError("f_ph needs a, b > 0")
    lo, hi = (a, b) if a <= b else (b, a)
    scale = lo ** (2 * pr.p + 2 * pr.H)
    logc = math.log(hi) - math.log(lo)
    if unit_square == "quadrature":
        d, de, dn = _unit_square(pr.p, pr.H)
    elif unit_square == "selberg":
        d, de, dn = selberg_f11(pr), 0.0, 0
    else:
        raise ValueError(f"unknown unit_square mode {unit_square!r}")
    o, oe, on = _off_square(pr.p, pr.H, logc)
    return QuadratureResult(scale * (d + o), scale * (de + oe), dn + on)


def c_ph(params, tau):
    """Stationary correlation e^{-tau(p+H)} f(1,e^tau) / f(1,1)."""
    pr = _as_params(params)
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau == 0:
        return 1.0
    f11 = selberg_f11(pr)
    damp = tau * (pr.p + pr.H)
    o, _, _ = _off_square(pr.p, pr.H, float(tau), damp)
    return (math.exp(-damp) * f11 + o) / f11


def c_ph_array(params, taus):
    """Vectorized :func:`c_ph` over |taus|."""
    pr = _as_params(params)
    taus = np.abs(np.asarray(taus, dtype=float))
    flat = taus.ravel()
    out = np.empty_like(flat)
    for k, t in enumerate(flat):
        out[k] = c_ph(pr, float(t))
    return out.reshape(taus.shape)


def c_ph_bounds(params, tau, N):
    """Bracket for c_ph(tau) from the elementary bounds on f(1, e^tau).

    Lower: f(1,b) >= f(1,1) + psi_{p+2H-2}(b)/(p+1).
    Upper: f(1,b) <= f(1,N) + (1 - 1/N)^(2H-2) psi_{p+2H-2}(b)/(p+1).
    Both require b = e^tau >= N >= 1.
    """
    pr = _as_params(params)
    p, H = pr.p, pr.H
    if N < 1:
        raise ValueError("N must be >= 1")
    b = math.exp(tau)
    if N > b * (1 + 1e-15):
        raise ValueError(f"N = {N} exceeds e^tau = {b}")
    f11 = selberg_f11(pr)
    ps = psi(p + 2 * H - 2, b) / (p + 1)
    lower_f = f11 + ps
    if ps == 0.0:
        upper_f = f11
    elif N == 1:
        upper_f = math.inf
    else:
        fN = f11 + _off_square(p, H, math.log(N))[0]
        upper_f = fN + (1 - 1 / N) ** (2 * H - 2) * ps
    damp = math.exp(-tau * (p + H))
    return damp * lower_f / f11, damp * upper_f / f11


def c_ph_envelope(params, tau):
    """max(tau e^{-tau(p+H)}, e^{-tau(1-H)})."""
    pr = _as_params(params)
    tau = np.asarray(tau, dtype=float)
    return np.maximum(tau * np.exp(-tau * (pr.p + pr.H)), np.exp(-tau * (1 - pr.H)))


def c_ph_envelope_constant(params):
    """A constant M with c_ph(tau) <= M * c_ph_envelope(tau) for all tau >= 0.

    Built from the upper bound with N = 2 for tau >= ln 2 and from c_ph <= 1
    below that. Valid, not sharp.
    """
    pr = _as_params(params)
    p, H = pr.p, pr.H
    f11 = selberg_f11(pr)
    f12 = f11 + _off_square(p, H, math.log(2.0))[0]
    K = 2.0 ** (2 - 2 * H) / (p + 1)
    g = p + 2 * H - 1
    if g > 1e-12:
        M = (f12 + K / g) / f11
    elif g < -1e-12:
        M = (f12 + K / abs(g)) / f11 * math.exp(1 - H)
    else:
        M = (f12 + K) / f11
    return max(M, 2.0 ** (1 - H))


def _d_truncation(alpha):
    # tail of the double series outside [0, M)^2 is at most
    # 2 e^{-M alpha} / (1 - e^{-alpha})^2, against a denominator >= 1
    return int(math.ceil((math.log(2e10) - 2 * math.log(-math.expm1(-alpha))) / alpha))


def d_alpha_rho(alpha, kernel, tau, return_tail=False):
    """Correlation of the stationary limit under weights e^{alpha i}.

    Ratio of sum_{i,j>=0} e^{-(i+j) alpha} rho(i-j-tau) to the same sum at
    tau = 0, both truncated to i, j < M with an explicit tail certificate.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if tau < 0 or int(tau) != tau:
        raise ValueError("tau must be a nonnegative integer")
    kernel = parse_kernel(kernel)
    if not classify_summability(kernel).summable:
        raise ValueError("d_alpha_rho needs a summable kernel")
    M = _d_truncation(alpha)
    k = np.arange(-(M - 1), M)
    ak = np.abs(k)
    # sum over j with 0 <= j, j + |k| < M of e^{-(2j + |k|) alpha}
    weight = np.exp(-ak * alpha) * -np.expm1(-2 * alpha * (M - ak)) / -np.expm1(-2 * alpha)
    num = float(np.dot(weight, kernel.rho(k - int(tau))))
    den = float(np.dot(weight, kernel.rho(k)))
    value = num / den
    if return_tail:
        tail = 2 * math.exp(-M * alpha) / math.expm1(-alpha) ** 2 / den
        return value, tail
    return value
