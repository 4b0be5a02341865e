"""Counter-based Gaussian streams.

Variate (row, pos) of a stream is a pure function of (seed, scheme, row,
pos): a SplitMix64 finalizer over a per-row Weyl sequence yields a 53-bit
uniform in (0, 1), mapped through the inverse normal CDF. Any block of any
row can be produced in any order, which is what makes parallel and chunked
generation reproducible.
"""
import zlib

import numpy as np

from . import _accel
from ._fallback import mix64

SCHEME_VERSION = "splitmix64-ctr/v1"


def stream_key(seed, scheme):
    """64-bit key for (seed, scheme); distinct schemes never share variates."""
    if not 0 <= int(seed) < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    salt = zlib.crc32(f"{SCHEME_VERSION}:{scheme}".encode())
    with np.errstate(over="ignore"):
        k = mix64(np.uint64(int(seed)) ^ mix64(np.uint64(salt)))
    return int(k)


def normals(seed, scheme, row0, nrows, ncols, pos0=0, num_threads=1):
    """Block of standard normals for rows row0.. and positions pos0.."""
    out = np.empty((nrows, ncols))
    _accel.core.fill_normals(out, stream_key(seed, scheme), row0, pos0, num_threads)
    return out
