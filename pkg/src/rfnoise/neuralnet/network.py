"""Architectures and the flat-parameter network container."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError
from .layers import BatchNorm, Dense, ResidualBlock, Sequential, SiLU

ARCH_KINDS = ("residual", "autoencoder")


@dataclass(frozen=True)
class ArchSpec:
    """Network shape.

    ``residual``: dense ``input -> W``, ``n_blocks`` residual blocks of
    width ``W``, dense ``W -> 1``.

    ``autoencoder``: dense layers through ``ae_widths`` (encoder down to a
    bottleneck, decoder back up), each followed by batch norm and SiLU,
    then a dense regression head to one output.
    """

    kind: str = "residual"
    input_width: int = 1024
    hidden_width: int = 128
    n_blocks: int = 4
    ae_widths: tuple = (256, 64, 16, 64)
    output_width: int = 1

    def __post_init__(self):
        object.__setattr__(self, "ae_widths", tuple(int(w) for w in self.ae_widths))
        if self.kind not in ARCH_KINDS:
            raise ConfigError(f"arch.kind must be one of {ARCH_KINDS}, got {self.kind!r}")
        if self.output_width != 1:
            raise ConfigError("arch.output_width must be 1")
        if self.input_width < 1 or self.hidden_width < 1 or self.n_blocks < 0:
            raise ConfigError("arch widths must be positive and n_blocks non-negative")
        if self.kind == "autoencoder" and not self.ae_widths:
            raise ConfigError("autoencoder needs at least one hidden width")

    def to_dict(self):
        d = asdict(self)
        d["ae_widths"] = list(self.ae_widths)
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown arch field(s): {', '.join(sorted(unknown))}")
        return cls(**d)


def build_layers(arch):
    if arch.kind == "residual":
        w = arch.hidden_width
        layers = [Dense(arch.input_width, w, "stem")]
        layers += [ResidualBlock(w, f"block{i}") for i in range(arch.n_blocks)]
        layers.append(Dense(w, arch.output_width, "head"))
    else:
        layers = []
        prev = arch.input_width
        for i, w in enumerate(arch.ae_widths):
            layers += [Dense(prev, w, f"ae{i}.dense", bias=False), BatchNorm(w, f"ae{i}.bn"), SiLU(f"ae{i}.act")]
            prev = w
        layers.append(Dense(prev, arch.output_width, "head"))
    return Sequential(layers, "net")


def _leaves(layer):
    kids = layer.children()
    if not kids:
        yield layer
    for k in kids:
        yield from _leaves(k)


class Network:
    """A built architecture whose parameters live in one flat vector.

    ``params``/``grads`` hold the trainable values (dense W and b, batch-norm
    gamma and beta); ``buffers`` holds the batch-norm running mean and
    variance. ``slices`` / ``buffer_slices`` map ``"layer.name"`` to
    ``(offset, shape)``.
    """

    def __init__(self, arch, dtype=np.float64, seed=None):
        self.arch = arch
        self.dtype = np.dtype(dtype)
        self.root = build_layers(arch)
        self.layers = list(_leaves(self.root))
        self.slices, n_p = self._layout("param_shapes")
        self.buffer_slices, n_b = self._layout("buffer_shapes")
        self.params = np.zeros(n_p, dtype=self.dtype)
        self.grads = np.zeros(n_p, dtype=self.dtype)
        self.buffers = np.zeros(n_b, dtype=self.dtype)
        self._bind()
        if seed is not None:
            self.init_params(np.random.default_rng(seed))

    def _layout(self, which):
        table, off = {}, 0
        for layer in self.layers:
            for name, shape in getattr(layer, which)():
                size = int(np.prod(shape))
                table[f"{layer.name}.{name}"] = (off, tuple(shape))
                off += size
        return table, off

    def _bind(self):
        for layer in self.layers:
            for name, _ in layer.param_shapes():
                off, shape = self.slices[f"{layer.name}.{name}"]
                size = int(np.prod(shape))
                layer.p[name] = self.params[off:off + size].reshape(shape)
                layer.g[name] = self.grads[off:off + size].reshape(shape)
            for name, _ in layer.buffer_shapes():
                off, shape = self.buffer_slices[f"{layer.name}.{name}"]
                size = int(np.prod(shape))
                layer.buf[name] = self.buffers[off:off + size].reshape(shape)

    def init_params(self, rng):
        for layer in self.layers:
            layer.init_params(rng)

    @property
    def n_params(self):
        return self.params.size

    def param(self, name):
        off, shape = self.slices[name]
        return self.params[off:off + int(np.prod(shape))].reshape(shape)

    def grad(self, name):
        off, shape = self.slices[name]
        return self.grads[off:off + int(np.prod(shape))].reshape(shape)

    def buffer(self, name):
        off, shape = self.buffer_slices[name]
        return self.buffers[off:off + int(np.prod(shape))].reshape(shape)

    def forward(self, x, train=False, update_stats=True):
        """``(batch, input_width)`` -> ``(batch, 1)``."""
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.arch.input_width:
            raise ValueError(f"expected input width {self.arch.input_width}, got {x.shape[1]}")
        return self.root.forward(x, train, update_stats)

    def backward(self, dout, need_dx=False):
        """Fill ``self.grads`` from the loss gradient w.r.t. the output."""
        return self.root.backward(np.asarray(dout, dtype=self.dtype), need_dx=need_dx)

    def predict(self, x, chunk=2048):
        """Eval-mode outputs as a flat vector."""
        x = np.asarray(x)
        out = np.empty(x.shape[0], dtype=np.float64)
        for i in range(0, x.shape[0], chunk):
            out[i:i + chunk] = self.forward(x[i:i + chunk], train=False)[:, 0]
        return out

    def astype(self, dtype):
        other = Network(self.arch, dtype=dtype)
        other.params[...] = self.params
        other.buffers[...] = self.buffers
        return other

    def copy(self):
        return self.astype(self.dtype)

    def state(self):
        return self.params.copy(), self.buffers.copy()

    def load_state(self, state):
        params, buffers = state
        self.params[...] = params
        self.buffers[...] = buffers
