"""Trained-model container and its on-disk format.

A model file is a zip archive (readable with ``np.load``) holding

* ``params.npy`` and ``buffers.npy``: the flat parameter and running-stat vectors
* ``meta.json``: format tag and version, architecture, slice tables,
  normalisation statistics, per-epoch history, the selected epoch and the
  delay (in samples) that was removed from the training captures.

Zip entries carry a fixed timestamp so identical models give identical bytes.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import RFNoiseError
from ..pipeline import NormStats
from .network import ArchSpec, Network

FORMAT_TAG = "rfnoise-model"
FORMAT_VERSION = 1
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


@dataclass(eq=False)
class ModelArtifact:
    arch: ArchSpec
    network: Network
    norm_stats: NormStats | None = None
    history: list = field(default_factory=list)
    best_epoch: int | None = None
    delay_lag: int | None = None

    @property
    def parameters(self):
        return self.network.params

    def history_csv(self):
        lines = ["epoch,train_mse,val_mse"]
        for h in self.history:
            lines.append("%d,%.17g,%.17g" % (h["epoch"], h["train_mse"], h["val_mse"]))
        return "\n".join(lines) + "\n"

    def save(self, path):
        meta = dict(
            format=FORMAT_TAG,
            version=FORMAT_VERSION,
            dtype=self.network.dtype.name,
            arch=self.arch.to_dict(),
            slices={k: [o, list(s)] for k, (o, s) in self.network.slices.items()},
            buffer_slices={k: [o, list(s)] for k, (o, s) in self.network.buffer_slices.items()},
            norm_stats=None if self.norm_stats is None else self.norm_stats.to_dict(),
            history=self.history,
            best_epoch=self.best_epoch,
            delay_lag=self.delay_lag,
        )
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            for name, arr in (("params.npy", self.network.params), ("buffers.npy", self.network.buffers)):
                buf = io.BytesIO()
                np.save(buf, arr, allow_pickle=False)
                zf.writestr(zipfile.ZipInfo(name, _ZIP_DATE), buf.getvalue(), zipfile.ZIP_DEFLATED)
            zf.writestr(zipfile.ZipInfo("meta.json", _ZIP_DATE),
                        json.dumps(meta, sort_keys=True, indent=1), zipfile.ZIP_DEFLATED)

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            with zipfile.ZipFile(path) as zf:
                meta = json.loads(zf.read("meta.json"))
                params = np.load(io.BytesIO(zf.read("params.npy")), allow_pickle=False)
                buffers = np.load(io.BytesIO(zf.read("buffers.npy")), allow_pickle=False)
        except (zipfile.BadZipFile, KeyError) as exc:
            raise RFNoiseError(f"{path}: not a model file ({exc})") from None
        if meta.get("format") != FORMAT_TAG or meta.get("version") != FORMAT_VERSION:
            raise RFNoiseError(f"{path}: unsupported model format {meta.get('format')!r} v{meta.get('version')}")
        arch = ArchSpec.from_dict(meta["arch"])
        net = Network(arch, dtype=np.dtype(meta["dtype"]))
        if net.params.size != params.size or net.buffers.size != buffers.size:
            raise RFNoiseError(f"{path}: parameter count does not match the architecture")
        net.load_state((params, buffers))
        ns = meta.get("norm_stats")
        return cls(arch, net, NormStats(**ns) if ns else None, meta.get("history", []),
                   meta.get("best_epoch"), meta.get("delay_lag"))
