"""Pure numpy versions of the compiled kernels in ``_core.pyx``.

Everything except ``genz_logweights`` reproduces the compiled output bit for
bit; the Genz weights agree to rounding only, since the inner products go
through BLAS.
"""
import math

import numpy as np
from scipy.special import ndtr, ndtri

GAMMA = np.uint64(0x9E3779B97F4A7C15)
ROWSALT = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
TWO_M53 = 2.0**-53

# columns per chunk when drawing iid variates lazily
_IID_CHUNK = 64


def mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def row_keys(key, rows):
    rows = np.asarray(rows, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(np.uint64(key) ^ mix64(rows * ROWSALT + GAMMA))


_A = (3.3871328727963666080e+0, 1.3314166789178437745e+2, 1.9715909503065514427e+3,
      1.3731693765509461125e+4, 4.5921953931549871457e+4, 6.7265770927008700853e+4,
      3.3430575583588128105e+4, 2.5090809287301226727e+3)
_B = (1.0, 4.2313330701600911252e+1, 6.8718700749205790830e+2, 5.3941960214247511077e+3,
      2.1213794301586595867e+4, 3.9307895800092710610e+4, 2.8729085735721942674e+4,
      5.2264952788528545610e+3)
_C = (1.42343711074968357734e+0, 4.63033784615654529590e+0, 5.76949722146069140550e+0,
      3.64784832476320460504e+0, 1.27045825245236838258e+0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e+0, 1.67638483018380384940e+0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e+0, 5.46378491116411436990e+0, 1.78482653991729133580e+0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)

# libm log, as called by the compiled core (np.log may take a SIMD path)
_libm_log = np.frompyfunc(math.log, 1, 1)


def _horner(coef, r):
    acc = coef[7] * r + coef[6]
    for c in coef[5::-1]:
        acc = acc * r + c
    return acc


def inverse_normal(p, out=None):
    """Wichura's AS241 inverse normal CDF, evaluated exactly as in the core."""
    p = np.asarray(p, dtype=float)
    q = p - 0.5
    x = np.empty_like(p)
    central = np.abs(q) <= 0.425
    qc = q[central]
    r = 0.180625 - qc * qc
    x[central] = qc * _horner(_A, r) / _horner(_B, r)
    tail = ~central
    if np.any(tail):
        pt = p[tail]
        rt = np.where(q[tail] < 0.0, pt, 1.0 - pt)
        rt = np.sqrt(-_libm_log(rt).astype(float))
        near = rt <= 5.0
        xt = np.empty_like(rt)
        rn = rt[near] - 1.6
        xt[near] = _horner(_C, rn) / _horner(_D, rn)
        rf = rt[~near] - 5.0
        xt[~near] = _horner(_E, rf) / _horner(_F, rf)
        x[tail] = np.where(q[tail] < 0.0, -xt, xt)
    if out is not None:
        out[...] = x
        return out
    return x


def _normals(rkeys, positions):
    with np.errstate(over="ignore"):
        z = mix64(rkeys[:, None] + (positions[None, :] + np.uint64(1)) * GAMMA)
    u = ((z >> np.uint64(11)).astype(np.float64) + 0.5) * TWO_M53
    return inverse_normal(u)


def fill_normals(out, key, row0, pos0, num_threads=1):
    nr, nc = out.shape
    rk = row_keys(key, np.arange(nr, dtype=np.uint64) + np.uint64(row0))
    pos = np.arange(nc, dtype=np.uint64) + np.uint64(pos0)
    out[...] = _normals(rk, pos)


def fill_complex_scaled(out, scale, key, row0, num_threads=1):
    nr = out.shape[0]
    size = scale.shape[0]
    rk = row_keys(key, np.arange(nr, dtype=np.uint64) + np.uint64(row0))
    z = _normals(rk, np.arange(2 * size, dtype=np.uint64))
    out[:, 0::2] = scale[None, :] * z[:, :size]
    out[:, 1::2] = scale[None, :] * z[:, size:]


def _scan(partial, r, offset):
    hit = partial >= r
    has = hit.any(axis=1)
    first = hit.argmax(axis=1)
    return has, first + 1 + offset


def first_passage(xi, sigma, r, out, num_threads=1):
    n = xi.shape[1]
    s = np.cumsum(xi * sigma[None, :], axis=1)
    has, idx = _scan(s, r, 0)
    out[...] = np.where(has, idx, n + 1)


def first_passage_iid(key, row0, sigma, r, out, num_threads=1):
    nr = out.shape[0]
    n = sigma.shape[0]
    out[...] = n + 1
    rk = row_keys(key, np.arange(nr, dtype=np.uint64) + np.uint64(row0))
    alive = np.arange(nr)
    level = np.zeros(nr)
    for c0 in range(0, n, _IID_CHUNK):
        if alive.size == 0:
            break
        c1 = min(n, c0 + _IID_CHUNK)
        xi = _normals(rk[alive], np.arange(c0, c1, dtype=np.uint64))
        # sequential accumulation, seeded with the running level
        incr = xi * sigma[None, c0:c1]
        incr[:, 0] += level[alive]
        s = np.cumsum(incr, axis=1)
        has, idx = _scan(s, r, c0)
        out[alive[has]] = idx[has]
        level[alive] = s[:, -1]
        alive = alive[~has]


def genz_logweights(A, rowstart, b, d, W, out, num_threads=1):
    n = A.shape[0]
    npts = W.shape[0]
    x = np.zeros((npts, n))
    lw = np.zeros(npts)
    dead = np.zeros(npts, dtype=bool)
    for k in range(n):
        j0 = int(rowstart[k])
        acc = x[:, j0:k] @ A[k, j0:k] if k > j0 else np.zeros(npts)
        e = ndtr((b[k] - acc) / d[k])
        dead |= e <= 0.0
        with np.errstate(divide="ignore"):
            lw += np.log(e)
        if k < n - 1:
            u = W[:, k] * e
            u[u <= 0.0] = 5e-324
            x[:, k] = acc + d[k] * ndtri(u)
    lw[dead] = -1.0e308
    out[...] = lw
