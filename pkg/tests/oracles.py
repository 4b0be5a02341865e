"""Reference values computed independently of the package.

Nothing here calls persistlab; the quadrature below uses fixed tensor
Gauss rules in coordinates chosen so that the algebraic singularity of the
integrand becomes a Jacobi weight, not adaptive QUADPACK.
"""
import math

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


def _legendre(n, a, b):
    x, w = roots_legendre(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _jacobi_r(n, gamma):
    """Nodes/weights for int_0^1 r^gamma g(r) dr."""
    x, w = roots_jacobi(n, 0.0, gamma)
    r = 0.5 * (x + 1.0)
    return r, w * 0.5 ** (gamma + 1.0)


def f_ph_strip(p, H, c, n=160):
    """int_0^1 int_1^c x^p y^p (y-x)^(2H-2) dy dx for p >= 0.

    With s = 1 - x and v = y - x the region is 0 <= s <= 1,
    s <= v <= c - 1 + s, and the only singular point is s = v = 0. The
    triangle s <= v <= eps (eps = min(1/2, c - 1)) is mapped by
    (v, s) = (r, r t), turning the singularity into the weight r^(2H-1). The
    factor x^p = (1 - s)^p is a Jacobi weight on the outer range s > eps.
    """
    if c <= 1.0:
        return 0.0
    al = 2 * H - 2
    eps = min(0.5, c - 1.0)
    r, wr = _jacobi_r(n, al + 1.0)
    t, wt = _legendre(n, 0.0, 1.0)
    R, Tt = np.meshgrid(eps * r, t, indexing="ij")
    x = 1.0 - R * Tt
    y = R + x
    near = eps ** (al + 2.0) * float(np.einsum("i,j,ij->", wr, wt, x**p * y**p))
    far = 0.0
    sa, wa = _legendre(n, 0.0, eps)
    # int_eps^1 (1-s)^p g(s) ds: Jacobi weight (1-x)^p on [-1, 1]
    xj, wj = roots_jacobi(n, p, 0.0)
    half = 0.5 * (1.0 - eps)
    sb = eps + half * (xj + 1.0)
    wb = wj * half ** (p + 1.0) / (1.0 - sb) ** p
    for sn, ws in ((sa, wa), (sb, wb)):
        for si, wsi in zip(sn, ws):
            lo_v, hi_v = max(si, eps), c - 1.0 + si
            if hi_v <= lo_v:
                continue
            u, wu = _legendre(n, math.log(lo_v), math.log(hi_v))
            v = np.exp(u)
            xx = 1.0 - si
            far += wsi * float(np.sum(wu * v * xx**p * (v + xx) ** p * v**al))
    return near + far


def f_ph_unit(p, H):
    """int_0^1 int_0^1 x^p y^p |x-y|^(2H-2) by (x, y) = (r, r t) on each triangle."""
    al = 2 * H - 2
    # 2 int_0^1 r^(2p+al+1) dr int_0^1 t^p (1-t)^al dt, both by Gauss rules
    n = 120
    x, w = roots_jacobi(n, al, p)  # weight (1-x)^al (1+x)^p on [-1, 1]
    inner = float(np.sum(w)) * 0.5 ** (al + p + 1.0)
    return 2.0 * inner / (2 * p + al + 2.0)


def f_ph_oracle(p, H, a, b):
    lo, hi = min(a, b), max(a, b)
    return lo ** (2 * p + 2 * H) * (f_ph_unit(p, H) + f_ph_strip(p, H, hi / lo))


def f_0H_closed(H, c):
    """f_{0,H}(1,c) = (1 + c^2H - (c-1)^2H) / (2H(2H-1))."""
    h2 = 2 * H
    if c > 1e3:
        diff = -(c**h2) * math.expm1(h2 * math.log1p(-1.0 / c))
    else:
        diff = c**h2 - (c - 1.0) ** h2
    return (1.0 + diff) / (h2 * (h2 - 1.0))


def c_0H_closed(H, tau):
    """C_{0,H}(tau) = e^{-H tau} (1 + e^{2H tau} - (e^tau - 1)^{2H}) / 2."""
    return math.exp(-H * tau) * (1 + math.exp(2 * H * tau) - math.expm1(tau) ** (2 * H)) / 2


def c_ph_oracle(p, H, tau):
    f11 = f_ph_unit(p, H)
    return math.exp(-tau * (p + H)) * (f11 + f_ph_strip(p, H, math.exp(tau))) / f11


def bivariate_orthant(rho):
    """P(X < 0, Y < 0) for standard normals with correlation rho."""
    return 0.25 + math.asin(rho) / (2 * math.pi)


def sparre_andersen(n):
    """P(S_1 < 0, ..., S_n < 0) for a symmetric continuous iid walk: C(2n,n)/4^n."""
    return math.exp(math.lgamma(2 * n + 1) - 2 * math.lgamma(n + 1) - n * math.log(4))


def fgn_rho(H, k):
    k = abs(k)
    return 0.5 * ((k + 1) ** (2 * H) + abs(k - 1) ** (2 * H) - 2 * k ** (2 * H))


def d_alpha_bruteforce(alpha, rho, tau, M=200):
    i = np.arange(M)
    W = np.exp(-(i[:, None] + i[None, :]) * alpha)
    lag = i[:, None] - i[None, :]
    return float(np.sum(W * rho(lag - tau)) / np.sum(W * rho(lag)))


def ou_grid_exponent(delta, alpha=1.0, lo=-7.0, per_sd=40, iters=3000):
    """Decay rate per unit time of P(max over a delta-grid of an OU process < 0).

    Largest eigenvalue of the AR(1) transition kernel restricted to (-inf, 0),
    discretized with cell-integrated transition probabilities.
    """
    from scipy.stats import norm

    phi = math.exp(-alpha * delta)
    sd = math.sqrt(1 - phi * phi)
    h = sd / per_sd
    x = np.arange(lo, 0.0, h) + h / 2
    edges = np.concatenate([x - h / 2, [0.0]])
    K = norm.cdf((edges[None, 1:] - phi * x[:, None]) / sd) - norm.cdf(
        (edges[None, :-1] - phi * x[:, None]) / sd)
    v = np.ones(x.size)
    lam = 1.0
    for _ in range(iters):
        w = K @ v
        lam = float(w.max())
        v = w / lam
    return -math.log(lam) / delta
