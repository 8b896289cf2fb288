# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Mirrors ``_kernels_py`` exactly in API and semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()

ctypedef fused real_t:
    float
    double


def xcorr_lags(const double[::1] x, const double[::1] y, Py_ssize_t max_lag):
    """Biased direct-sum cross-correlation ``sum_n x[n] * y[n + lag] / N``.

    Returns an array of length ``2 * max_lag + 1``; entry ``i`` holds lag
    ``i - max_lag``. Samples outside ``[0, N)`` count as zero.
    """
    cdef Py_ssize_t n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError("x and y must have equal length")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(2 * max_lag + 1)
    cdef double[::1] r = out
    cdef Py_ssize_t lag, k, lo, hi
    cdef double acc
    with nogil:
        for lag in range(-max_lag, max_lag + 1):
            lo = -lag if lag < 0 else 0
            hi = n - lag if lag > 0 else n
            acc = 0.0
            for k in range(lo, hi):
                acc = acc + x[k] * y[k + lag]
            r[lag + max_lag] = acc / n
    return out


def silu_forward(real_t[:, ::1] z):
    """Return ``(z * sigmoid(z), sigmoid(z))`` with an overflow-safe sigmoid."""
    cdef Py_ssize_t rows = z.shape[0], cols = z.shape[1], i, j
    dtype = np.float32 if real_t is float else np.float64
    out_arr = np.empty((rows, cols), dtype=dtype)
    sig_arr = np.empty((rows, cols), dtype=dtype)
    cdef real_t[:, ::1] out = out_arr
    cdef real_t[:, ::1] sig = sig_arr
    cdef double v, e, s
    with nogil:
        for i in range(rows):
            for j in range(cols):
                v = z[i, j]
                if v >= 0:
                    s = 1.0 / (1.0 + exp(-v))
                else:
                    e = exp(v)
                    s = e / (1.0 + e)
                sig[i, j] = <real_t>s
                out[i, j] = <real_t>(v * s)
    return out_arr, sig_arr


def silu_backward(real_t[:, ::1] z, real_t[:, ::1] sig, real_t[:, ::1] grad):
    """Chain rule through SiLU: ``grad * s * (1 + z * (1 - s))``."""
    cdef Py_ssize_t rows = z.shape[0], cols = z.shape[1], i, j
    dtype = np.float32 if real_t is float else np.float64
    dz_arr = np.empty((rows, cols), dtype=dtype)
    cdef real_t[:, ::1] dz = dz_arr
    cdef real_t s
    with nogil:
        for i in range(rows):
            for j in range(cols):
                s = sig[i, j]
                dz[i, j] = grad[i, j] * s * (1 + z[i, j] * (1 - s))
    return dz_arr


def adam_update(real_t[::1] params, const real_t[::1] grads, real_t[::1] m, real_t[::1] v,
                double lr, double beta1, double beta2, double eps, long t):
    """Fused in-place Adam step (moments and parameters) for step number ``t``."""
    cdef Py_ssize_t n = params.shape[0], i
    if grads.shape[0] != n or m.shape[0] != n or v.shape[0] != n:
        raise ValueError("params, grads and moments must share a length")
    cdef real_t b1 = <real_t>beta1, b2 = <real_t>beta2
    cdef real_t c1 = <real_t>(1 - beta1), c2 = <real_t>(1 - beta2)
    cdef real_t bc1 = <real_t>(1 - beta1 ** t), bc2 = <real_t>(1 - beta2 ** t)
    cdef real_t a = <real_t>lr, e = <real_t>eps, g, m_hat, v_hat
    with nogil:
        for i in range(n):
            g = grads[i]
            m[i] = b1 * m[i] + c1 * g
            v[i] = b2 * v[i] + c2 * g * g
            m_hat = m[i] / bc1
            v_hat = v[i] / bc2
            params[i] = params[i] - a * m_hat / (<real_t>sqrt(v_hat) + e)
