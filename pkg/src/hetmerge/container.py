"""HMM1 binary container: a small safetensors-style format for weights,
feature caches, and datasets.

Layout: 8 magic bytes, a little-endian uint64 header length, a UTF-8 JSON
header ({"layers", "heads", "tensors", "metadata"}), then float32 payloads at
64-byte-aligned offsets relative to the payload start.  Writes are
byte-deterministic: the same content always produces identical files.
"""

from __future__ import annotations

import io
import json
import struct

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"HMM1\x00\x00\x00\x01"
ALIGN = 64


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_container(path, tensors, layers=None, heads=None, metadata=None) -> None:
    """Write named float arrays plus structural metadata to `path`.

    `tensors` maps name -> array; iteration order fixes payload order.
    """
    specs = []
    payload = io.BytesIO()
    for name, arr in tensors.items():
        a = np.ascontiguousarray(arr, dtype="<f4")
        pad = (-payload.tell()) % ALIGN
        payload.write(b"\x00" * pad)
        specs.append(
            {
                "name": name,
                "shape": list(a.shape),
                "dtype": "f32",
                "offset": payload.tell(),
            }
        )
        payload.write(a.tobytes())

    header = {
        "layers": layers if layers is not None else [],
        "heads": heads if heads is not None else [],
        "tensors": specs,
        "metadata": metadata if metadata is not None else {},
    }
    hjson = _canonical_json(header)
    hjson += b" " * ((-(len(MAGIC) + 8 + len(hjson))) % ALIGN)

    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(hjson)))
        f.write(hjson)
        f.write(payload.getvalue())


def read_header(path) -> dict:
    """Parse and return just the JSON header of a container."""
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if len(magic) < len(MAGIC) or magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        raw_len = f.read(8)
        if len(raw_len) < 8:
            raise OSError(f"{path}: truncated before header length")
        (hlen,) = struct.unpack("<Q", raw_len)
        hjson = f.read(hlen)
        if len(hjson) < hlen:
            raise OSError(f"{path}: truncated header ({len(hjson)} of {hlen} bytes)")
    try:
        header = json.loads(hjson.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: header is not valid JSON: {e}") from e
    for key in ("layers", "heads", "tensors", "metadata"):
        if key not in header:
            raise ValidationError(f"{path}: header missing required key {key!r}")
    return header


def read_container(path):
    """Read a container; returns (header dict, {name: float64 array}).

    Payloads are validated against the declared shapes/offsets; a tensor
    extending past the end of the payload is a validation error naming it.
    """
    header = read_header(path)
    with open(path, "rb") as f:
        data = f.read()
    (hlen,) = struct.unpack("<Q", data[len(MAGIC) : len(MAGIC) + 8])
    payload = data[len(MAGIC) + 8 + hlen :]

    tensors = {}
    for spec in header["tensors"]:
        name, shape, offset = spec["name"], spec["shape"], spec["offset"]
        if spec.get("dtype") != "f32":
            raise ValidationError(f"{path}: tensor {name!r} has unsupported dtype")
        if offset % ALIGN != 0:
            raise ValidationError(f"{path}: tensor {name!r} offset {offset} not {ALIGN}-byte aligned")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        end = offset + 4 * count
        if end > len(payload):
            raise ValidationError(
                f"{path}: tensor {name!r} declares {count} values but payload holds "
                f"{max(0, (len(payload) - offset)) // 4} past its offset"
            )
        flat = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        tensors[name] = flat.reshape(shape).astype(np.float64)
    return header, tensors
