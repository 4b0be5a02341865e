"""Exact sampling of stationary Gaussian sequences and weighted partial sums."""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from . import _accel
from .covariance import GramMatrix, gram_stationary
from .kernels import parse_kernel, parse_weights
from .rng import SCHEME_VERSION, normals, stream_key

log = logging.getLogger(__name__)

__all__ = [
    "SpectralEmbedding",
    "PathBatch",
    "EmbeddingError",
    "circulant_embed",
    "sample_stationary",
    "cholesky_sample",
    "weighted_partial_sums",
    "stationary_blocks",
    "first_passage_times",
    "first_passage_gram",
    "sample_grid",
    "CLIP_TOLERANCE",
]

CLIP_TOLERANCE = 1e-6
MAGIC = b"PLPATH01"

SCHEME_IID = "iid"
SCHEME_CIRCULANT = "circulant"
SCHEME_CHOLESKY = "cholesky"


class EmbeddingError(ValueError):
    """Circulant spectrum has too much negative mass; use Cholesky instead."""


@dataclass(frozen=True)
class SpectralEmbedding:
    """Spectrum of the circulant extension of (rho(0), ..., rho(m))."""

    m: int
    eigenvalues: np.ndarray = field(repr=False)
    clipped_mass: float
    kernel: str
    identity: bool = False

    @property
    def size(self):
        return 2 * self.m


@dataclass(frozen=True)
class PathBatch:
    """R independent paths of length n, with the stream that produced them."""

    values: np.ndarray = field(repr=False)
    seed: int
    stream_scheme: str
    kind: str = "xi"

    @property
    def R(self):
        return self.values.shape[0]

    @property
    def n(self):
        return self.values.shape[1]

    def dump(self, path):
        """Little-endian binary: 32-byte header (magic, R, n, seed) + float64 rows."""
        with open(path, "wb") as fh:
            fh.write(MAGIC + struct.pack("<QQQ", self.R, self.n, self.seed))
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path, stream_scheme="unknown", kind="xi"):
        with open(path, "rb") as fh:
            head = fh.read(32)
            if head[:8] != MAGIC:
                raise ValueError(f"{path}: not a path dump")
            R, n, seed = struct.unpack("<QQQ", head[8:])
            data = np.frombuffer(fh.read(), dtype="<f8")
        if data.size != R * n:
            raise ValueError(f"{path}: truncated ({data.size} of {R * n} values)")
        return cls(data.reshape(R, n).astype(float), int(seed), stream_scheme, kind)


def _pow2_at_least(x):
    m = 1
    while m < x:
        m *= 2
    return m


def circulant_embed(kernel, n):
    """Circulant extension of size 2m (m the smallest power of two >= n)."""
    kernel = parse_kernel(kernel)
    if n < 1:
        raise ValueError("n must be >= 1")
    m = _pow2_at_least(n)
    if kernel.family == "kronecker-delta":
        return SpectralEmbedding(m, np.ones(2 * m), 0.0, kernel.ident, identity=True)
    r = kernel.rho(np.arange(m + 1))
    row = np.concatenate([r, r[-2:0:-1]])
    lam = np.fft.fft(row).real
    neg = lam < 0
    total = float(np.sum(np.abs(lam)))
    clipped = float(np.sum(-lam[neg])) / total + 0.0
    if clipped > CLIP_TOLERANCE:
        raise EmbeddingError(
            f"{kernel.ident}: negative spectral mass {clipped:.3e} exceeds "
            f"{CLIP_TOLERANCE:g} at 2m={2 * m}"
        )
    if clipped > 0:
        log.info("%s: clipping negative spectral mass %.3e", kernel.ident, clipped)
    lam = np.where(neg, 0.0, lam)
    return SpectralEmbedding(m, lam, clipped, kernel.ident)


def stationary_blocks(embedding, R, n, seed, block=None, num_threads=1):
    """Yield (row0, xi) blocks covering rows 0..R-1 of :func:`sample_stationary`.

    Rows come in pairs sharing one complex FFT: row 2k is the real part and
    row 2k+1 the imaginary part of the transform driven by stream row k.
    """
    if n > embedding.m:
        raise ValueError(f"embedding of size 2m={embedding.size} cannot produce n={n}")
    if embedding.identity:
        if block is None:
            block = max(1, min(R, 2**22 // max(n, 1)))
        for r0 in range(0, R, block):
            r1 = min(R, r0 + block)
            yield r0, normals(seed, SCHEME_IID, r0, r1 - r0, n, num_threads=num_threads)
        return
    size = embedding.size
    scale = np.sqrt(embedding.eigenvalues / size)
    if block is None:
        block = max(2, min(R + (R % 2), 2 * (2**21 // size)))
    block += block % 2
    key = stream_key(seed, SCHEME_CIRCULANT)
    for r0 in range(0, R, block):
        r1 = min(R, r0 + block)
        p0, p1 = r0 // 2, (r1 + 1) // 2
        buf = np.empty((p1 - p0, 2 * size))
        _accel.core.fill_complex_scaled(buf, scale, key, p0, num_threads)
        w = sfft.fft(buf.view(np.complex128), axis=1, overwrite_x=True,
                     workers=num_threads)[:, :n]
        xi = np.empty((2 * (p1 - p0), n))
        xi[0::2] = w.real
        xi[1::2] = w.imag
        yield r0, xi[: r1 - r0]


def sample_stationary(embedding, R, n, seed, num_threads=1):
    """R exact paths of the stationary sequence (xi_1, ..., xi_n)."""
    if R < 1:
        raise ValueError("R must be >= 1")
    out = np.empty((R, n))
    for r0, xi in stationary_blocks(embedding, R, n, seed, num_threads=num_threads):
        out[r0:r0 + xi.shape[0]] = xi
    scheme = SCHEME_IID if embedding.identity else SCHEME_CIRCULANT
    return PathBatch(out, int(seed), f"{SCHEME_VERSION}:{scheme}", "xi")


def cholesky_sample(gram, R, seed, num_threads=1):
    """R exact samples with covariance ``gram`` (negative eigenvalues clipped)."""
    if not isinstance(gram, GramMatrix):
        gram = GramMatrix(np.asarray(gram, dtype=float), "user")
    L = gram.sqrt_factor()
    n = gram.n
    z = normals(seed, SCHEME_CHOLESKY, 0, R, n, num_threads=num_threads)
    return PathBatch(z @ L.T, int(seed), f"{SCHEME_VERSION}:{SCHEME_CHOLESKY}", "gram")


def weighted_partial_sums(xi, weights):
    """Row-wise S_l = sum_{i<=l} sigma(i) xi_i."""
    weights = parse_weights(weights)
    sig = weights.sigmas(xi.n)
    s = np.cumsum(xi.values * sig[None, :], axis=1)
    return PathBatch(s, xi.seed, xi.stream_scheme, "S")


def sample_grid(corr, delta, m, R, seed, num_threads=1):
    """Paths of a stationary continuous-time process on the grid k*delta.

    Uses Cholesky of the Toeplitz matrix; intended for moderate m.
    """
    gram = gram_stationary(corr, delta, m)
    return cholesky_sample(gram, R, seed, num_threads)


def first_passage_times(kernel, weights, n, R, seed, r=0.0, num_threads=1, block=None):
    """First index l with S_l >= r for each of R rows (n + 1 if none).

    Rows are exactly those of ``weighted_partial_sums(sample_stationary(...))``
    but never materialized at once; the iid kernel draws variates lazily and
    stops each row at its first passage.
    """
    kernel = parse_kernel(kernel)
    weights = parse_weights(weights)
    sig = np.ascontiguousarray(weights.sigmas(n), dtype=float)
    tau = np.empty(R, dtype=np.int64)
    core = _accel.core
    if kernel.family == "kronecker-delta":
        if block is None:
            block = 1 << 16
        key = stream_key(seed, SCHEME_IID)
        for r0 in range(0, R, block):
            r1 = min(R, r0 + block)
            core.first_passage_iid(key, r0, sig, float(r), tau[r0:r1], num_threads)
        return tau
    try:
        emb = circulant_embed(kernel, n)
    except EmbeddingError as exc:
        log.warning("%s; falling back to Cholesky sampling", exc)
        from .covariance import gram_S

        return first_passage_gram(gram_S(kernel, weights, n), R, seed, r, num_threads, block)
    for r0, xi in stationary_blocks(emb, R, n, seed, block=block, num_threads=num_threads):
        core.first_passage(np.ascontiguousarray(xi), sig, float(r),
                           tau[r0:r0 + xi.shape[0]], num_threads)
    return tau


def first_passage_gram(gram, R, seed, r=0.0, num_threads=1, block=None):
    """First index l with X_l >= r for R exact draws X ~ N(0, gram) (n + 1 if none).

    Rows are those of :func:`cholesky_sample`, generated block by block.
    """
    if not isinstance(gram, GramMatrix):
        gram = GramMatrix(np.asarray(gram, dtype=float), "user")
    L = gram.sqrt_factor()
    n = gram.n
    if block is None:
        block = max(1, min(R, 2**21 // max(n, 1)))
    tau = np.empty(R, dtype=np.int64)
    for r0 in range(0, R, block):
        r1 = min(R, r0 + block)
        x = normals(seed, SCHEME_CHOLESKY, r0, r1 - r0, n, num_threads=num_threads) @ L.T
        hit = x >= r
        first = np.argmax(hit, axis=1)
        tau[r0:r1] = np.where(hit[np.arange(r1 - r0), first], first + 1, n + 1)
    return tau
