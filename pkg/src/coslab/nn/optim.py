"""Named parameter store with AdamW updates and a binary checkpoint format."""

from __future__ import annotations

import hashlib
import json
import struct
from typing import Dict

import numpy as np

from .tensor import Tensor

__all__ = [
    "ParamStore",
    "adamw_step",
    "CheckpointError",
    "save_checkpoint",
    "load_checkpoint",
    "config_hash",
]

_MAGIC = b"CSLB0001"


class ParamStore:
    """Named trainable tensors plus AdamW first/second moments and a step counter."""

    def __init__(self):
        self.params: Dict[str, Tensor] = {}
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        self.step = 0

    def create(self, name: str, values: np.ndarray) -> Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)
        self.params[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def grads(self) -> Dict[str, np.ndarray]:
        """Current gradients; parameters untouched by the last backward get zeros."""
        return {
            name: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for name, t in self.params.items()
        }

    def copy_values_from(self, other: "ParamStore") -> None:
        if set(self.params) != set(other.params):
            raise ValueError("parameter name sets differ")
        for name, t in self.params.items():
            np.copyto(t.data, other.params[name].data)

    def state_arrays(self):
        """Deterministic (name, data, m, v) iteration for checkpointing."""
        for name in sorted(self.params):
            yield name, self.params[name].data, self.m[name], self.v[name]


def adamw_step(
    store: ParamStore,
    grads: Dict[str, np.ndarray] | None = None,
    *,
    lr: float = 5e-4,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    """One AdamW update with bias correction and decoupled weight decay."""
    if grads is None:
        grads = store.grads()
    store.step += 1
    t = store.step
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, p in store.params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + eps)
        if weight_decay:
            p.data -= lr * weight_decay * p.data
        p.data -= lr * update


# -- checkpoints ---------------------------------------------------------------


class CheckpointError(RuntimeError):
    """Raised for missing, truncated, or mismatched checkpoint files."""


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def save_checkpoint(path, stores: Dict[str, ParamStore], meta: dict) -> None:
    """Write a versioned binary container; round-trips float64 values bit-exactly."""
    header = {"version": 1, "meta": meta, "stores": {}}
    buffers: list[np.ndarray] = []
    for sname in sorted(stores):
        store = stores[sname]
        entries = []
        for pname, data, m, v in store.state_arrays():
            entries.append({"name": pname, "shape": list(data.shape)})
            buffers.extend([data, m, v])
        header["stores"][sname] = {"step": store.step, "params": entries}
    hdr = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(hdr)))
        fh.write(hdr)
        for arr in buffers:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path, stores: Dict[str, ParamStore]) -> dict:
    """Load values into existing stores (shapes must match); returns the meta dict."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if blob[: len(_MAGIC)] != _MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    try:
        (hlen,) = struct.unpack_from("<I", blob, len(_MAGIC))
        off = len(_MAGIC) + 4
        header = json.loads(blob[off : off + hlen].decode())
        off += hlen
    except Exception as exc:
        raise CheckpointError(f"{path}: corrupt header") from exc
    if header.get("version") != 1:
        raise CheckpointError(f"{path}: unsupported version {header.get('version')}")
    if set(header["stores"]) != set(stores):
        raise CheckpointError(
            f"{path}: store names {sorted(header['stores'])} != expected {sorted(stores)}"
        )
    # Validate the payload size before touching any store state.
    expected = sum(3 * 8 * int(np.prod(e["shape"]) if e["shape"] else 1)
                   for rec in header["stores"].values() for e in rec["params"])
    if len(blob) - off != expected:
        raise CheckpointError(f"{path}: payload is {len(blob) - off} bytes, "
                              f"expected {expected}")
    for sname in sorted(stores):
        store = stores[sname]
        rec = header["stores"][sname]
        names = [e["name"] for e in rec["params"]]
        if names != sorted(store.params):
            raise CheckpointError(f"{path}: parameter names mismatch in store {sname}")
        store.step = int(rec["step"])
        for entry in rec["params"]:
            shape = tuple(entry["shape"])
            target = store.params[entry["name"]]
            if target.data.shape != shape:
                raise CheckpointError(
                    f"{path}: shape {shape} != {target.data.shape} for {sname}.{entry['name']}"
                )
            n = int(np.prod(shape)) if shape else 1
            for dest in (target.data, store.m[entry["name"]], store.v[entry["name"]]):
                arr = np.frombuffer(blob, dtype="<f8", count=n, offset=off).reshape(shape)
                off += 8 * n
                np.copyto(dest, arr)
    if off != len(blob):
        raise CheckpointError(f"{path}: trailing or missing payload bytes")
    return header["meta"]
