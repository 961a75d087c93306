"""Named parameter store and the on-disk checkpoint container.

Checkpoint layout: one JSON header line ``{"format": "pdck1", "config":
{...}, "tensors": [{"name", "shape", "dtype"}, ...]}`` followed by the
tensors' f32le payloads concatenated in header order. The embedded config
block makes checkpoints self-describing for inference.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Iterator

import numpy as np

from ..errors import DataError
from .autodiff import Tensor

CHECKPOINT_FORMAT = "pdck1"


class ParameterStore:
    """Ordered map of unique names to trainable tensors with grad buffers."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._trainable: dict[str, bool] = {}

    def add(self, name: str, value: np.ndarray, trainable: bool = True) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(np.asarray(value), requires_grad=trainable)
        t.zero_grad()
        self._params[name] = t
        self._trainable[name] = trainable
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._params.items())

    def is_trainable(self, name: str) -> bool:
        return self._trainable[name]

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.zero_grad()

    def set_requires_grad(self, flag: bool) -> None:
        """Toggle graph building, e.g. off for pure inference."""
        for name, t in self._params.items():
            t.requires_grad = flag and self._trainable[name]

    def copy(self) -> "ParameterStore":
        out = ParameterStore()
        for name, t in self._params.items():
            out.add(name, t.data.copy(), trainable=self._trainable[name])
        return out

    def load_values(self, arrays: dict[str, np.ndarray]) -> None:
        for name, arr in arrays.items():
            if name not in self._params:
                raise DataError(f"unknown parameter in checkpoint: {name}")
            t = self._params[name]
            if t.data.shape != arr.shape:
                raise DataError(f"parameter {name}: checkpoint shape {arr.shape} != model shape {t.data.shape}")
            t.data = arr.astype(t.data.dtype)


def save_checkpoint(store: ParameterStore, path: str | os.PathLike, config: dict) -> None:
    entries = []
    payloads = []
    for name, t in store.items():
        arr = np.ascontiguousarray(t.data, dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "dtype": "f32le"})
        payloads.append(arr.tobytes())
    header = {"format": CHECKPOINT_FORMAT, "config": config, "tensors": entries}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":"), sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for p in payloads:
            fh.write(p)


def load_checkpoint(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing checkpoint: {path}")
    with open(path, "rb") as fh:
        raw = fh.readline()
        try:
            header = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}: bad checkpoint header: {exc}") from exc
        if header.get("format") != CHECKPOINT_FORMAT:
            raise DataError(f"{path}: unsupported checkpoint format {header.get('format')!r}")
        arrays: dict[str, np.ndarray] = {}
        for entry in header["tensors"]:
            shape = tuple(int(s) for s in entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 4)
            if len(buf) != count * 4:
                raise DataError(f"{path}: truncated payload for tensor {entry['name']!r}")
            arrays[entry["name"]] = np.frombuffer(buf, dtype="<f4").reshape(shape).astype(np.float32)
        if fh.read(1):
            raise DataError(f"{path}: trailing bytes after declared tensors")
    return arrays, header.get("config", {})
