"""Versioned binary checkpoints: JSON header plus raw little-endian tensors.

Layout::

    bytes 0..7    magic b"RDSALCK1"
    bytes 8..11   uint32 little-endian header length
    next          UTF-8 JSON header
    rest          tensor payload, concatenated in header order

The header records the format version, the full architecture config, the
training config and free-form metadata, and one entry per tensor with name,
dtype, shape, payload offset, and byte count. Tensors are stored in explicit
little-endian order regardless of host, so files round-trip across machines.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np
import torch

from .config import VariantConfig, variant_from_dict, variant_to_dict
from .errors import DataError

MAGIC = b"RDSALCK1"
FORMAT_VERSION = 1

# numpy little-endian codes per supported torch dtype
_DTYPES = {
    torch.float32: "<f4",
    torch.float64: "<f8",
    torch.int64: "<i8",
    torch.int32: "<i4",
    torch.uint8: "|u1",
}
_TORCH_BY_NAME = {np.dtype(c).name: t for t, c in _DTYPES.items()}


def save_checkpoint(path, state_dict, variant: VariantConfig, train=None, meta=None):
    """Serialize a named-tensor map with its configs; atomic via rename."""
    entries = []
    blobs = []
    offset = 0
    for name, tensor in state_dict.items():
        t = tensor.detach().cpu().contiguous()
        if t.dtype not in _DTYPES:
            raise DataError(f"unsupported tensor dtype {t.dtype} for {name!r}")
        blob = np.ascontiguousarray(t.numpy()).astype(_DTYPES[t.dtype]).tobytes()
        entries.append(
            {
                "name": name,
                "dtype": np.dtype(_DTYPES[t.dtype]).name,
                "shape": list(t.shape),
                "offset": offset,
                "nbytes": len(blob),
            }
        )
        blobs.append(blob)
        offset += len(blob)

    header = {
        "format_version": FORMAT_VERSION,
        "variant": variant_to_dict(variant),
        "train": dict(train) if train else None,
        "meta": dict(meta) if meta else {},
        "tensors": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)
    os.replace(tmp, path)


def load_checkpoint(path):
    """Read back (variant config, state dict, header dict). Bit-exact tensors."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc

    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise DataError(f"not a checkpoint file (bad magic): {path}")
    (header_len,) = struct.unpack("<I", raw[len(MAGIC) : len(MAGIC) + 4])
    header_start = len(MAGIC) + 4
    payload_start = header_start + header_len
    if payload_start > len(raw):
        raise DataError(f"truncated checkpoint header: {path}")
    try:
        header = json.loads(raw[header_start:payload_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"corrupt checkpoint header in {path}: {exc}") from exc

    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint format version {version!r}: {path}")

    payload = raw[payload_start:]
    state = {}
    for entry in header.get("tensors", []):
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(payload):
            raise DataError(
                f"truncated checkpoint payload at tensor {entry['name']!r}: {path}"
            )
        dtype = np.dtype(entry["dtype"]).newbyteorder("<")
        arr = np.frombuffer(payload[start : start + nbytes], dtype=dtype)
        expected = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
        if arr.size != expected:
            raise DataError(
                f"tensor {entry['name']!r} size mismatch in {path}: "
                f"header says {entry['shape']}, payload has {arr.size} elements"
            )
        arr = arr.reshape(entry["shape"]).astype(np.dtype(entry["dtype"]))
        torch_dtype = _TORCH_BY_NAME[np.dtype(entry["dtype"]).name]
        state[entry["name"]] = torch.from_numpy(arr.copy()).to(torch_dtype)

    variant = variant_from_dict(header["variant"])
    return variant, state, header
