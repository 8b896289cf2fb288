"""Pure-numpy twins of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def xcorr_lags(x, y, max_lag):
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError("x and y must have equal length")
    out = np.zeros(2 * max_lag + 1)
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            acc = np.dot(x[: n - lag], y[lag:]) if lag < n else 0.0
        else:
            acc = np.dot(x[-lag:], y[: n + lag]) if -lag < n else 0.0
        out[lag + max_lag] = acc / n
    return out


def silu_forward(z):
    e = np.exp(-np.abs(z))
    sig = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(z.dtype, copy=False)
    return z * sig, sig


def silu_backward(z, sig, grad):
    return grad * sig * (1 + z * (1 - sig))


def adam_update(params, grads, m, v, lr, beta1, beta2, eps, t):
    dt = params.dtype.type
    b1, b2 = dt(beta1), dt(beta2)
    m *= b1
    m += dt(1 - beta1) * grads
    v *= b2
    v += dt(1 - beta2) * grads * grads
    m_hat = m / dt(1 - beta1 ** t)
    v_hat = v / dt(1 - beta2 ** t)
    params -= dt(lr) * m_hat / (np.sqrt(v_hat) + dt(eps))
