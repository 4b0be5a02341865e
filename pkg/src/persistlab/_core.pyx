# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.

Every routine here has a numpy twin in :mod:`persistlab._fallback` that
produces bit-identical output; :mod:`persistlab._accel` picks one at import.
"""
from cython.parallel cimport prange
from libc.math cimport log, sqrt
from libc.stdint cimport uint64_t, int64_t
from scipy.special.cython_special cimport ndtri, ndtr

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef uint64_t ROWSALT = 0xD1B54A32D192ED03ULL
cdef double TWO_M53 = 1.1102230246251565e-16


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t row_key(uint64_t key, uint64_t row) noexcept nogil:
    return mix64(key ^ mix64(row * ROWSALT + GAMMA))


cdef inline double inv_normal(double p) noexcept nogil:
    # Wichura's AS241 (PPND16), relative accuracy about 1e-16
    cdef double q = p - 0.5, r, x
    if q <= 0.425 and q >= -0.425:
        r = 0.180625 - q * q
        return q * (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r
                    + 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r
                    + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r
                    + 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) / (
                    ((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r
                    + 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r
                    + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r
                    + 4.2313330701600911252e+1) * r + 1.0)
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = sqrt(-log(r))
    if r <= 5.0:
        r = r - 1.6
        x = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
              + 2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r
              + 3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r
              + 4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) / (
              ((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
              + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
              + 6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r
              + 2.05319162663775882187e+0) * r + 1.0)
    else:
        r = r - 5.0
        x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
              + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
              + 2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r
              + 5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) / (
              ((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
              + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
              + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
              + 5.99832206555887937690e-1) * r + 1.0)
    if q < 0.0:
        return -x
    return x


cdef inline double normal_at(uint64_t rkey, uint64_t pos) noexcept nogil:
    cdef uint64_t z = mix64(rkey + (pos + 1) * GAMMA)
    return inv_normal((<double><int64_t>(z >> 11) + 0.5) * TWO_M53)


def inverse_normal(const double[::1] p, double[::1] out):
    cdef Py_ssize_t i
    for i in range(p.shape[0]):
        out[i] = inv_normal(p[i])


def fill_normals(double[:, ::1] out, uint64_t key, uint64_t row0,
                 uint64_t pos0, int num_threads=1):
    cdef Py_ssize_t i, j
    cdef Py_ssize_t nr = out.shape[0], nc = out.shape[1]
    cdef uint64_t rk
    for i in prange(nr, nogil=True, num_threads=num_threads, schedule="static"):
        rk = row_key(key, row0 + i)
        for j in range(nc):
            out[i, j] = normal_at(rk, pos0 + j)


def fill_complex_scaled(double[:, ::1] out, const double[::1] scale,
                        uint64_t key, uint64_t row0, int num_threads=1):
    """Interleaved complex rows: out[i, 2j] + 1j out[i, 2j+1] =
    scale[j] * (z[i, j] + 1j z[i, size + j]) for stream rows row0 + i."""
    cdef Py_ssize_t i, j
    cdef Py_ssize_t nr = out.shape[0], size = scale.shape[0]
    cdef uint64_t rk
    for i in prange(nr, nogil=True, num_threads=num_threads, schedule="static"):
        rk = row_key(key, row0 + i)
        for j in range(size):
            out[i, 2 * j] = scale[j] * normal_at(rk, j)
            out[i, 2 * j + 1] = scale[j] * normal_at(rk, size + j)


def first_passage(const double[:, ::1] xi, const double[::1] sigma, double r,
                  int64_t[::1] out, int num_threads=1):
    """First index l (1-based) with sum_{i<=l} sigma_i xi_i >= r; n+1 if none."""
    cdef Py_ssize_t i, j
    cdef Py_ssize_t nr = xi.shape[0], n = xi.shape[1]
    cdef double s
    cdef int64_t tau
    for i in prange(nr, nogil=True, num_threads=num_threads, schedule="static"):
        s = 0.0
        tau = n + 1
        for j in range(n):
            s = s + sigma[j] * xi[i, j]
            if s >= r:
                tau = j + 1
                break
        out[i] = tau


def first_passage_iid(uint64_t key, uint64_t row0, const double[::1] sigma,
                      double r, int64_t[::1] out, int num_threads=1):
    """Same as first_passage, drawing xi lazily from the counter stream."""
    cdef Py_ssize_t i, j
    cdef Py_ssize_t nr = out.shape[0], n = sigma.shape[0]
    cdef double s
    cdef int64_t tau
    cdef uint64_t rk
    for i in prange(nr, nogil=True, num_threads=num_threads, schedule="static"):
        rk = row_key(key, row0 + i)
        s = 0.0
        tau = n + 1
        for j in range(n):
            s = s + sigma[j] * normal_at(rk, j)
            if s >= r:
                tau = j + 1
                break
        out[i] = tau


def genz_logweights(const double[:, ::1] A, const int64_t[::1] rowstart,
                    const double[::1] b, const double[::1] d, const double[:, ::1] W,
                    double[::1] out, int num_threads=1):
    """Log of the sequential-conditioning weight for each point of W.

    Coordinate k has conditional mean sum_j A[k, j] x_j over the columns
    rowstart[k]..k-1 and conditional standard deviation d[k]. W has shape
    (npoints, n - 1).
    """
    cdef Py_ssize_t k, j, q
    cdef Py_ssize_t n = A.shape[0], npts = W.shape[0]
    cdef double acc, e, lw, u
    cdef double[:, ::1] x = _zeros2(num_threads if num_threads > 0 else 1, n)
    cdef Py_ssize_t slot
    for q in prange(npts, nogil=True, num_threads=num_threads, schedule="static"):
        slot = _thread_slot(num_threads)
        lw = 0.0
        for k in range(n):
            acc = 0.0
            for j in range(rowstart[k], k):
                acc = acc + A[k, j] * x[slot, j]
            e = ndtr((b[k] - acc) / d[k])
            if e <= 0.0:
                lw = -1.0e308
                break
            lw = lw + log(e)
            if k < n - 1:
                u = W[q, k] * e
                if u <= 0.0:
                    u = 5e-324
                x[slot, k] = acc + d[k] * ndtri(u)
        out[q] = lw


cdef double[:, ::1] _zeros2(Py_ssize_t a, Py_ssize_t b):
    import numpy as np
    return np.zeros((a, b))


cdef inline Py_ssize_t _thread_slot(int num_threads) noexcept nogil:
    if num_threads <= 1:
        return 0
    return _omp_thread_num()


cdef extern from *:
    """
    #ifdef _OPENMP
    #include <omp.h>
    static int _omp_thread_num(void) { return omp_get_thread_num(); }
    #else
    static int _omp_thread_num(void) { return 0; }
    #endif
    """
    int _omp_thread_num() noexcept nogil
