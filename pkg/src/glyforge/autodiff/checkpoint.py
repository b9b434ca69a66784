"""Binary checkpoint container.

Layout: 8-byte magic ``GLYAA\\0\\0\\1``, little-endian uint64 header length,
UTF-8 JSON header, then raw little-endian tensor payloads.  The header's
``manifest`` lists ``{name, dtype, shape, offset, nbytes, trainable}`` with
offsets relative to the start of the payload region; Adam moments, when
saved, are entries named ``adam.m/<param>`` and ``adam.v/<param>``.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .optim import AdamState
from .params import Parameters

MAGIC = b"GLYAA\x00\x00\x01"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params: Parameters, header: dict | None = None,
                    adam: AdamState | None = None) -> None:
    entries: list[tuple[str, np.ndarray, bool]] = [
        (name, t.data, params.is_trainable(name)) for name, t in params.items()
    ]
    if adam is not None:
        for name in sorted(adam.m):
            entries.append((f"adam.m/{name}", adam.m[name], False))
            entries.append((f"adam.v/{name}", adam.v[name], False))
    manifest, chunks, offset = [], [], 0
    for name, arr, trainable in entries:
        arr = np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<"))
        raw = arr.tobytes()
        manifest.append({
            "name": name,
            "dtype": arr.dtype.str,
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(raw),
            "trainable": trainable,
        })
        chunks.append(raw)
        offset += len(raw)
    doc = dict(header or {})
    doc["manifest"] = manifest
    if adam is not None:
        doc["adam"] = {
            "lr": adam.lr, "weight_decay": adam.weight_decay, "beta1": adam.beta1,
            "beta2": adam.beta2, "eps": adam.eps, "t": adam.t, "lr_scale": adam.lr_scale,
        }
    blob = json.dumps(doc, sort_keys=True).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for raw in chunks:
            fh.write(raw)
    tmp.replace(path)


def load_checkpoint(path) -> tuple[dict, Parameters, AdamState | None]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    (hlen,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16:16 + hlen].decode("utf-8"))
    base = 16 + hlen
    params = Parameters()
    moments: dict[str, dict[str, np.ndarray]] = {"m": {}, "v": {}}
    for entry in header["manifest"]:
        start = base + entry["offset"]
        raw = data[start:start + entry["nbytes"]]
        if len(raw) != entry["nbytes"]:
            raise CheckpointError(f"{path}: truncated payload for {entry['name']}")
        arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"])
        arr = arr.astype(arr.dtype.newbyteorder("="))
        name = entry["name"]
        if name.startswith("adam."):
            kind, pname = name[5:].split("/", 1)
            moments[kind][pname] = arr.copy()
        else:
            params.add(name, arr, trainable=entry["trainable"])
    adam = None
    if "adam" in header:
        a = header["adam"]
        adam = AdamState(lr=a["lr"], weight_decay=a["weight_decay"], beta1=a["beta1"],
                         beta2=a["beta2"], eps=a["eps"], t=a["t"], m=moments["m"],
                         v=moments["v"], lr_scale=dict(a["lr_scale"]))
    return header, params, adam
