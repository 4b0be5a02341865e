"""Exact finite-dimensional covariances of the weighted sums and of
stationary processes sampled on a uniform grid."""
from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .kernels import (
    StationaryCorrelation,
    classify_summability,
    parse_correlation,
    parse_kernel,
    parse_weights,
)
from .special import PHParams, f_ph

log = logging.getLogger(__name__)

__all__ = [
    "GramMatrix",
    "PSDError",
    "F_rho_sigma",
    "gram_S",
    "gram_S_naive",
    "gram_stationary",
    "limit_ratio_nonsummable",
    "limit_ratio_summable",
    "read_gram_csv",
]

PSD_RTOL = 1e-8

# above this many cell pairs the lag sums go through an FFT
_DIRECT_MAX = 4_000_000


class PSDError(ValueError):
    """Matrix has an eigenvalue below -PSD_RTOL * max diagonal."""


@dataclass
class GramMatrix:
    entries: np.ndarray
    kind: str
    metadata: dict = field(default_factory=dict)
    min_eigenvalue: float | None = None

    @property
    def n(self):
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def check_psd(self):
        """Verify the PSD tolerance; returns the smallest eigenvalue."""
        a = self.entries
        if not np.allclose(a, a.T, rtol=0, atol=1e-12 * np.max(np.abs(a))):
            raise PSDError("matrix is not symmetric")
        lam = float(np.linalg.eigvalsh(a)[0])
        tol = PSD_RTOL * float(np.max(np.diag(a)))
        self.min_eigenvalue = lam
        if lam < -tol:
            raise PSDError(
                f"smallest eigenvalue {lam:.3e} below tolerance -{tol:.3e} "
                f"({self.kind}, n={self.n})"
            )
        return lam

    def sqrt_factor(self):
        """Lower factor L with L L^T equal to the matrix after eigenvalue clipping."""
        a = self.entries
        try:
            return np.linalg.cholesky(a)
        except np.linalg.LinAlgError:
            pass
        lam, vec = np.linalg.eigh(a)
        tol = PSD_RTOL * float(np.max(np.diag(a)))
        if lam[0] < -tol:
            raise PSDError(f"smallest eigenvalue {lam[0]:.3e} below tolerance -{tol:.3e}")
        if lam[0] < 0:
            log.warning("clipping %d negative eigenvalues (min %.3e) to zero",
                        int(np.sum(lam < 0)), lam[0])
        lam = np.clip(lam, 0.0, None)
        return vec * np.sqrt(lam)[None, :]

    def correlation(self):
        d = np.sqrt(np.diag(self.entries))
        return self.entries / np.outer(d, d)

    def submatrix(self, idx):
        idx = np.asarray(idx)
        meta = dict(self.metadata, parent_n=self.n)
        return GramMatrix(self.entries[np.ix_(idx, idx)], self.kind, meta)

    def to_csv(self, path=None):
        """Row-major CSV with '#'-prefixed metadata header lines."""
        buf = io.StringIO()
        buf.write(f"# kind={self.kind}\n# n={self.n}\n")
        for key in sorted(self.metadata):
            buf.write(f"# {key}={self.metadata[key]}\n")
        np.savetxt(buf, self.entries, delimiter=",", fmt="%.17g")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def read_gram_csv(path):
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
            elif line.strip():
                rows.append([float(v) for v in line.split(",")])
    kind = meta.pop("kind", "unknown")
    meta.pop("n", None)
    return GramMatrix(np.asarray(rows), kind, meta)


def _effective_support(kernel):
    """Lag beyond which rho is negligible (below 1e-18), or None."""
    if kernel.family == "kronecker-delta":
        return 1
    if kernel.family == "exponential":
        return int(math.ceil(41.5 / kernel.params["lambda"])) + 1
    if kernel.family == "user-table":
        nz = np.nonzero(kernel.table)[0]
        return int(nz[-1]) + 1
    return None


def _cell_weights(weights, length):
    """sigma(i) times the fraction of cell (i-1, i] inside [0, length]."""
    n = int(math.ceil(length))
    v = weights.sigmas(n).astype(float)
    frac = length - (n - 1)
    if frac < 1.0:
        v[-1] *= frac
    return v


def _lag_sum(kernel, v1, v2):
    """sum_{i,j} v1_i v2_j rho(i - j) grouped by lag."""
    n1, n2 = v1.size, v2.size
    support = _effective_support(kernel)
    if support is not None and support < max(n1, n2):
        total = 0.0
        for k in range(-(support - 1), support):
            # pairs with i - j = k
            i0 = max(0, k)
            i1 = min(n1, n2 + k)
            if i1 <= i0:
                continue
            r = float(kernel.rho(k))
            if r != 0.0:
                total += r * float(np.dot(v1[i0:i1], v2[i0 - k:i1 - k]))
        return total
    # c[k + n2 - 1] = sum_i v1_i v2_{i-k}
    if n1 * n2 <= _DIRECT_MAX:
        c = np.correlate(v1, v2, mode="full")
    else:
        c = fftconvolve(v1, v2[::-1], mode="full")
    lags = np.arange(-(n2 - 1), n1)
    return float(np.dot(c, kernel.rho(lags)))


def F_rho_sigma(kernel, weights, l1, l2):
    """Covariance of the interpolated weighted sums at (l1, l2).

    For integers this is sum_{i<=l1} sum_{j<=l2} sigma(i) sigma(j) rho(i-j);
    fractional arguments weight the boundary cells by their covered fraction,
    which is exact because the integrand is constant on unit squares.
    """
    if not (l1 > 0 and l2 > 0):
        raise ValueError("F_rho_sigma needs positive arguments")
    kernel = parse_kernel(kernel)
    weights = parse_weights(weights)
    v1 = _cell_weights(weights, l1)
    v2 = _cell_weights(weights, l2)
    return _lag_sum(kernel, v1, v2)


def gram_S(kernel, weights, n, check=True):
    """Covariance matrix of (S_1, ..., S_n).

    Built from M[i,j] = sigma(i) sigma(j) rho(i-j) by prefix sums along both
    axes, i.e. F(k,l) = F(k-1,l) + sigma(k) sum_{j<=l} sigma(j) rho(k-j).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    kernel = parse_kernel(kernel)
    weights = parse_weights(weights)
    sig = weights.sigmas(n)
    idx = np.arange(n)
    M = np.outer(sig, sig) * kernel.rho(idx[:, None] - idx[None, :])
    G = np.cumsum(np.cumsum(M, axis=0), axis=1)
    # the two prefix orders differ in the last bits; symmetrize
    G = np.triu(G) + np.triu(G, 1).T
    gm = GramMatrix(G, "weighted-sum", {"kernel": kernel.ident, "weights": weights.ident})
    if check:
        gm.check_psd()
    return gm


def gram_S_naive(kernel, weights, n):
    """Reference assembly summing the cell matrix directly for every entry.

    Accumulates column sums first, in the same order as :func:`gram_S`, so
    both agree exactly.
    """
    kernel = parse_kernel(kernel)
    weights = parse_weights(weights)
    sig = weights.sigmas(n)
    idx = np.arange(n)
    rho = kernel.rho(idx[:, None] - idx[None, :])
    # colsum[k][j] = sum_{i<=k} sigma(i) sigma(j) rho(i-j), from scratch per k
    colsum = [[0.0] * n for _ in range(n)]
    for k in range(n):
        for j in range(n):
            c = 0.0
            for i in range(k + 1):
                c += sig[i] * sig[j] * rho[i, j]
            colsum[k][j] = c
    G = np.zeros((n, n))
    for k in range(n):
        for l in range(k, n):
            acc = 0.0
            for j in range(l + 1):
                acc += colsum[k][j]
            G[k, l] = G[l, k] = acc
    return GramMatrix(G, "weighted-sum", {"kernel": kernel.ident, "weights": weights.ident})


def gram_stationary(corr, delta, m, check=True):
    """Toeplitz matrix T[i,j] = A(|i-j| delta) of a grid-sampled process."""
    if not delta > 0:
        raise ValueError("grid spacing delta must be positive")
    if m < 1:
        raise ValueError("m must be >= 1")
    corr = parse_correlation(corr)
    col = np.asarray(corr(np.arange(m) * delta), dtype=float)
    if abs(col[0] - 1.0) > 1e-12:
        raise ValueError(f"A(0) = {col[0]} must equal 1")
    idx = np.arange(m)
    T = col[np.abs(idx[:, None] - idx[None, :])]
    gm = GramMatrix(T, "stationary-toeplitz", {"correlation": corr.ident, "delta": delta})
    if check:
        gm.check_psd()
    return gm


def limit_ratio_nonsummable(kernel, weights, u, b):
    """F(u, b u) / (u^(2p+2H) f_{p,H}(1, b)); tends to kappa."""
    kernel = parse_kernel(kernel)
    weights = parse_weights(weights)
    tail = classify_summability(kernel)
    if tail.summable:
        raise ValueError("limit_ratio_nonsummable needs a nonsummable kernel")
    if weights.family != "polynomial":
        raise ValueError("limit_ratio_nonsummable needs polynomial weights")
    if b < 1:
        raise ValueError("b must be >= 1")
    params = PHParams(weights.params["p"], tail.H)
    f1b = f_ph(params, 1.0, b).value
    F = F_rho_sigma(kernel, weights, u, b * u)
    return F / (u ** (2 * params.p + 2 * params.H) * f1b)


def limit_ratio_summable(kernel, weights, u, b):
    """F(w(u), w(b u)) / u^2; tends to 1 + 2 sum_{l>=1} rho(l)."""
    kernel = parse_kernel(kernel)
    weights = parse_weights(weights)
    if not classify_summability(kernel).summable:
        raise ValueError("limit_ratio_summable needs a summable kernel")
    if b < 1:
        raise ValueError("b must be >= 1")
    t1 = float(weights.w(u))
    t2 = float(weights.w(b * u))
    return F_rho_sigma(kernel, weights, t1, t2) / u**2


def stationary_correlation(corr):
    """Normalize anything accepted by :func:`gram_stationary`."""
    if isinstance(corr, StationaryCorrelation):
        return corr
    return parse_correlation(corr)
