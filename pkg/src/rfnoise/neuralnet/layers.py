"""Dense, batch-norm and SiLU layers with hand-written backward passes.

Layers never own their parameter storage. :class:`~.network.Network`
allocates one flat parameter vector (plus one flat gradient vector and one
flat buffer vector for running statistics) and hands each layer reshaped
views into it, so the optimiser can update everything in one shot.
"""

import numpy as np

from ..errors import PipelineError
from ..kernels import silu_backward, silu_forward

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def silu(x):
    """``x * sigmoid(x)`` elementwise."""
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    out, _ = silu_forward(np.ascontiguousarray(arr.reshape(1, -1)))
    out = out.reshape(arr.shape)
    return float(out) if scalar else out


def mse(pred, target):
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if pred.shape != target.shape:
        raise ValueError(f"mse length mismatch: {pred.size} vs {target.size}")
    if pred.size == 0:
        raise ValueError("mse of empty vectors")
    return float(np.mean((pred - target) ** 2))


def mse_grad(pred, target):
    """d mse / d pred = 2 (pred - target) / N, shaped like ``pred``."""
    return 2.0 * (pred - target.reshape(pred.shape)) / pred.size


class Layer:
    """Base class. Subclasses list parameter/buffer shapes and get views bound."""

    def __init__(self, name):
        self.name = name
        self.p = {}
        self.g = {}
        self.buf = {}

    def param_shapes(self):
        return []

    def buffer_shapes(self):
        return []

    def init_params(self, rng):
        pass

    def children(self):
        return []


class Dense(Layer):
    """``x @ W + b``. Layers feeding batch norm drop ``b``; its gradient is identically zero."""

    def __init__(self, n_in, n_out, name, bias=True):
        super().__init__(name)
        self.n_in, self.n_out, self.bias = n_in, n_out, bias

    def param_shapes(self):
        shapes = [("W", (self.n_in, self.n_out))]
        if self.bias:
            shapes.append(("b", (self.n_out,)))
        return shapes

    def init_params(self, rng):
        # fan-in scaled uniform for weights and biases
        bound = 1.0 / np.sqrt(self.n_in)
        self.p["W"][...] = rng.uniform(-bound, bound, self.p["W"].shape)
        if self.bias:
            self.p["b"][...] = rng.uniform(-bound, bound, self.p["b"].shape)

    def forward(self, x, train=False, update_stats=True):
        self._x = x
        y = x @ self.p["W"]
        if self.bias:
            y += self.p["b"]
        return y

    def backward(self, dy, need_dx=True):
        np.matmul(self._x.T, dy, out=self.g["W"])
        if self.bias:
            np.sum(dy, axis=0, out=self.g["b"])
        return dy @ self.p["W"].T if need_dx else None


class BatchNorm(Layer):
    """Per-feature batch normalisation.

    Train mode normalises with the biased batch variance and folds the
    batch mean and unbiased variance into the running estimates with
    momentum 0.1. Eval mode uses the running estimates only.
    """

    def __init__(self, n, name, eps=BN_EPS, momentum=BN_MOMENTUM):
        super().__init__(name)
        self.n, self.eps, self.momentum = n, eps, momentum

    def param_shapes(self):
        return [("gamma", (self.n,)), ("beta", (self.n,))]

    def buffer_shapes(self):
        return [("running_mean", (self.n,)), ("running_var", (self.n,))]

    def init_params(self, rng):
        self.p["gamma"][...] = 1.0
        self.p["beta"][...] = 0.0
        self.buf["running_mean"][...] = 0.0
        self.buf["running_var"][...] = 1.0

    def forward(self, x, train=False, update_stats=True):
        self._train = train
        if train:
            m = x.shape[0]
            if m < 2:
                raise PipelineError("batch norm in train mode needs a batch of at least 2")
            mu = x.mean(axis=0)
            xc = x - mu
            var = np.mean(xc * xc, axis=0)
            inv_std = 1.0 / np.sqrt(var + self.eps)
            if update_stats:
                mom = self.momentum
                self.buf["running_mean"][...] = (1 - mom) * self.buf["running_mean"] + mom * mu
                self.buf["running_var"][...] = (1 - mom) * self.buf["running_var"] + mom * var * (m / (m - 1))
        else:
            xc = x - self.buf["running_mean"]
            inv_std = 1.0 / np.sqrt(self.buf["running_var"] + self.eps)
        xhat = xc * inv_std
        self._xhat, self._inv_std = xhat, inv_std
        return self.p["gamma"] * xhat + self.p["beta"]

    def backward(self, dy, need_dx=True):
        xhat, inv_std = self._xhat, self._inv_std
        np.sum(dy * xhat, axis=0, out=self.g["gamma"])
        np.sum(dy, axis=0, out=self.g["beta"])
        if not need_dx:
            return None
        dxhat = dy * self.p["gamma"]
        if not self._train:
            return dxhat * inv_std
        m = dy.shape[0]
        return inv_std / m * (m * dxhat - dxhat.sum(axis=0) - xhat * np.sum(dxhat * xhat, axis=0))


class SiLU(Layer):
    def forward(self, x, train=False, update_stats=True):
        x = np.ascontiguousarray(x)
        out, sig = silu_forward(x)
        self._x, self._sig = x, sig
        return out

    def backward(self, dy, need_dx=True):
        return silu_backward(self._x, self._sig, np.ascontiguousarray(dy, dtype=self._x.dtype))


class Sequential(Layer):
    def __init__(self, layers, name=""):
        super().__init__(name)
        self.layers = list(layers)

    def children(self):
        return self.layers

    def forward(self, x, train=False, update_stats=True):
        for layer in self.layers:
            x = layer.forward(x, train, update_stats)
        return x

    def backward(self, dy, need_dx=True):
        for i, layer in enumerate(reversed(self.layers)):
            last = i == len(self.layers) - 1
            dy = layer.backward(dy, need_dx=need_dx or not last)
        return dy


class ResidualBlock(Layer):
    """``silu(bn(dense(silu(bn(dense(x))))) + x)``."""

    def __init__(self, width, name):
        super().__init__(name)
        self.body = Sequential([
            Dense(width, width, f"{name}.dense1", bias=False),
            BatchNorm(width, f"{name}.bn1"),
            SiLU(f"{name}.act1"),
            Dense(width, width, f"{name}.dense2", bias=False),
            BatchNorm(width, f"{name}.bn2"),
        ], name)
        self.out_act = SiLU(f"{name}.act2")

    def children(self):
        return [self.body, self.out_act]

    def forward(self, x, train=False, update_stats=True):
        return self.out_act.forward(self.body.forward(x, train, update_stats) + x, train, update_stats)

    def backward(self, dy, need_dx=True):
        ds = self.out_act.backward(dy)
        return self.body.backward(ds) + ds
