"""Backprop verification against central finite differences."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import mse, mse_grad
from .network import ArchSpec, Network

# guards slices whose gradient is exactly zero (e.g. at a zero-loss point)
_DENOM_FLOOR = 1e-12


@dataclass
class GradCheckReport:
    arch: ArchSpec
    max_rel_error: float
    per_slice: dict = field(default_factory=dict)

    def passed(self, tol=1e-5):
        return self.max_rel_error < tol


def loss_and_grads(net, x, t):
    pred = net.forward(x, train=True, update_stats=False)
    net.backward(mse_grad(pred, t))
    return mse(pred, t), net.grads.copy()


def numeric_grads(net, x, t, eps):
    out = np.zeros_like(net.params)
    for i in range(net.params.size):
        old = net.params[i]
        net.params[i] = old + eps
        lp = mse(net.forward(x, train=True, update_stats=False), t)
        net.params[i] = old - eps
        lm = mse(net.forward(x, train=True, update_stats=False), t)
        net.params[i] = old
        out[i] = (lp - lm) / (2 * eps)
    return out


def grad_check(arch, eps=1e-6, seed=0, batch=4, targets=None):
    """Largest per-slice relative error ``|a - n| / (|a| + |n|)`` (2-norms)."""
    rng = np.random.default_rng(seed)
    net = Network(arch, dtype=np.float64)
    net.init_params(rng)
    # perturb batch-norm affine terms away from the trivial gamma=1, beta=0
    for name in net.slices:
        if name.endswith(".gamma") or name.endswith(".beta"):
            v = net.param(name)
            v += rng.uniform(-0.5, 0.5, v.shape)
    x = rng.uniform(0.0, 1.0, (batch, arch.input_width))
    t = rng.uniform(0.0, 1.0, (batch, 1)) if targets is None else np.asarray(targets).reshape(batch, 1)
    _, analytic = loss_and_grads(net, x, t)
    numeric = numeric_grads(net, x, t, eps)
    per_slice = {}
    for name, (off, shape) in net.slices.items():
        size = int(np.prod(shape))
        a, n = analytic[off:off + size], numeric[off:off + size]
        denom = max(np.linalg.norm(a) + np.linalg.norm(n), _DENOM_FLOOR)
        per_slice[name] = float(np.linalg.norm(a - n) / denom)
    return GradCheckReport(arch, max(per_slice.values()), per_slice)


def default_check_archs():
    """Small stand-ins for both production architectures."""
    return [
        ArchSpec(kind="residual", input_width=16, hidden_width=8, n_blocks=2),
        ArchSpec(kind="autoencoder", input_width=16, ae_widths=(8, 4, 8)),
    ]
