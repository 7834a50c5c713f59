# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``_pure``: same algorithms, same RNG consumption order.

Uniform variates are pulled straight from the generator's ``next_double``
slot (header-only, nothing to link), and every derived draw (exponential via
inverse CDF, normal via Box-Muller) repeats the pure-Python arithmetic
exactly, so the two backends are bit-for-bit interchangeable.
"""

import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport cos, erfc, exp, fabs, log, log1p, sqrt
from libc.stdint cimport uint32_t, uint64_t

cdef extern from "numpy/random/bitgen.h":
    struct bitgen:
        void *state
        uint64_t (*next_uint64)(void *st) nogil
        uint32_t (*next_uint32)(void *st) nogil
        double (*next_double)(void *st) nogil
        uint64_t (*next_raw)(void *st) nogil
    ctypedef bitgen bitgen_t

cdef double _PI = 3.14159265358979323846264338327950288
cdef double _TRUNC = 0.64


cdef inline bitgen_t* _bitgen_of(object rng) except NULL:
    capsule = rng.bit_generator.capsule
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _runif(bitgen_t* bg) noexcept nogil:
    return bg.next_double(bg.state)


cdef inline double _rexp(bitgen_t* bg) noexcept nogil:
    return -log1p(-bg.next_double(bg.state))


cdef inline double _rnorm(bitgen_t* bg) noexcept nogil:
    cdef double u1 = bg.next_double(bg.state)
    cdef double u2 = bg.next_double(bg.state)
    return sqrt(-2.0 * log1p(-u1)) * cos(2.0 * _PI * u2)


cdef inline double _sigmoid(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef inline double _log_norm_cdf(double x) noexcept nogil:
    if x < -37.0:
        return -0.5 * x * x - 0.5 * log(2.0 * _PI) - log(-x)
    return log(0.5 * erfc(-x / sqrt(2.0)))


cdef inline double _pg_a_coef(int n, double x) noexcept nogil:
    cdef double k = (n + 0.5) * _PI
    if x > _TRUNC:
        return k * exp(-0.5 * k * k * x)
    return exp(
        -1.5 * (log(0.5 * _PI) + log(x)) + log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x
    )


cdef inline double _pg_mass_texpon(double z) noexcept nogil:
    cdef double t = _TRUNC
    cdef double fz = 0.125 * _PI * _PI + 0.5 * z * z
    cdef double b = sqrt(1.0 / t) * (t * z - 1.0)
    cdef double a = -sqrt(1.0 / t) * (t * z + 1.0)
    cdef double x0 = log(fz) + fz * t
    cdef double xb = x0 - z + _log_norm_cdf(b)
    cdef double xa = x0 + z + _log_norm_cdf(a)
    cdef double qdivp = 4.0 / _PI * (exp(xb) + exp(xa))
    return 1.0 / (1.0 + qdivp)


cdef double _pg_trunc_inv_gauss(double z, bitgen_t* bg) noexcept nogil:
    cdef double t = _TRUNC
    cdef double x = t
    cdef double alpha, e1, e2, mu, y, mu_y
    if z < 1.0 / t:
        alpha = 0.0
        while _runif(bg) > alpha:
            while True:
                e1 = _rexp(bg)
                e2 = _rexp(bg)
                if e1 * e1 <= 2.0 * e2 / t:
                    break
            x = t / ((1.0 + t * e1) * (1.0 + t * e1))
            alpha = exp(-0.5 * z * z * x)
    else:
        mu = 1.0 / z
        x = t + 1.0
        while x > t:
            y = _rnorm(bg)
            y = y * y
            mu_y = mu * y
            x = mu + 0.5 * mu * mu_y - 0.5 * mu * sqrt(4.0 * mu_y + mu_y * mu_y)
            if _runif(bg) > mu / (mu + x):
                x = mu * mu / x
    return x


cdef double _pg_draw(double c, bitgen_t* bg) noexcept nogil:
    cdef double z = 0.5 * fabs(c)
    cdef double fz = 0.125 * _PI * _PI + 0.5 * z * z
    cdef double ratio = _pg_mass_texpon(z)
    cdef double x, s, y
    cdef int n
    while True:
        if _runif(bg) < ratio:
            x = _TRUNC + _rexp(bg) / fz
        else:
            x = _pg_trunc_inv_gauss(z, bg)
        s = _pg_a_coef(0, x)
        y = _runif(bg) * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _pg_a_coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _pg_a_coef(n, x)
                if y > s:
                    break


def pg_draw(double c, rng):
    """One exact draw from PG(1, c) (alternating-series rejection sampler)."""
    cdef bitgen_t* bg = _bitgen_of(rng)
    with rng.bit_generator.lock:
        return _pg_draw(c, bg)


def pg_draws(c, rng):
    """Vector of PG(1, c_i) draws, one per entry of c, in index order."""
    cdef double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    out = np.empty(cv.shape[0])
    cdef double[::1] ov = out
    cdef bitgen_t* bg = _bitgen_of(rng)
    cdef Py_ssize_t i
    with rng.bit_generator.lock:
        for i in range(cv.shape[0]):
            ov[i] = _pg_draw(cv[i], bg)
    return out


def z_scan(double[:, ::1] gram, double[::1] b, double[::1] beta,
           unsigned char[::1] z, double[::1] s,
           double c0, double a_quad, double inv_sig2,
           long[::1] order, rng):
    """One sequential scan of z_j | beta, z_{-j} over the given site order.

    Same contract as the pure version: s tracks gram @ (beta * z) and is
    updated in place together with z; returns the number of flips.
    """
    cdef bitgen_t* bg = _bitgen_of(rng)
    cdef Py_ssize_t p = beta.shape[0]
    cdef Py_ssize_t idx, i, j
    cdef int flips = 0, new
    cdef double bj, gjj, cross, logit
    with rng.bit_generator.lock:
        for idx in range(order.shape[0]):
            j = order[idx]
            bj = beta[j]
            gjj = gram[j, j]
            cross = s[j]
            if z[j] == 1:
                cross -= gjj * bj
            logit = c0 + a_quad * bj * bj + inv_sig2 * (bj * b[j] - bj * cross - 0.5 * bj * bj * gjj)
            new = 1 if _runif(bg) < _sigmoid(logit) else 0
            if new != z[j]:
                flips += 1
                if new == 1:
                    for i in range(p):
                        s[i] += gram[j, i] * bj
                else:
                    for i in range(p):
                        s[i] -= gram[j, i] * bj
                z[j] = new
    return flips
