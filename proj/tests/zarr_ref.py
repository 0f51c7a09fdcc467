#!/usr/bin/env python3
"""Self-contained zarr v2 reference for uncompressed little-endian float32 arrays.

Implements the published zarr v2 on-disk layout (a `.zarray` JSON document
plus raw C-order chunk files named by '.'-joined grid coordinates, trailing
chunks stored full-size padded with the fill value) using only numpy and
json. Shares no code with the C++ store; used to cross-check it in both
directions.

Usage:
  zarr_ref.py write  ROOT SHAPE CHUNKS   create a store filled with pattern()
  zarr_ref.py verify ROOT SHAPE CHUNKS   check a store against pattern()

SHAPE and CHUNKS are comma-separated extents. Values follow a deterministic
pattern over the flattened index so both sides can regenerate them exactly.
"""

import json
import os
import sys

import numpy as np


def pattern(count):
    """Deterministic float32 test values; mirrored bit-for-bit in C++."""
    i = np.arange(count, dtype=np.int64)
    return ((i * 1103515245 + 12345) % 1000003).astype(np.float32) * np.float32(1e-6)


def chunk_grid(shape, chunks):
    return [-(-s // c) if s else 1 for s, c in zip(shape, chunks)]


def read_array(root):
    with open(os.path.join(root, ".zarray")) as f:
        meta = json.load(f)
    if meta["zarr_format"] != 2:
        raise SystemExit("zarr_format != 2")
    if meta["dtype"] != "<f4":
        raise SystemExit("dtype != <f4")
    if meta["order"] != "C":
        raise SystemExit("order != C")
    if meta["compressor"] is not None:
        raise SystemExit("compressor set")
    if meta.get("filters") is not None:
        raise SystemExit("filters set")
    if meta.get("dimension_separator", ".") != ".":
        raise SystemExit("dimension_separator != .")

    shape = meta["shape"]
    chunks = meta["chunks"]
    fill = np.float32(meta["fill_value"] if meta["fill_value"] is not None else 0.0)
    out = np.full(shape, fill, dtype="<f4")
    expected = int(np.prod(chunks))
    for idx in np.ndindex(*chunk_grid(shape, chunks)):
        key = ".".join(str(i) for i in idx)
        path = os.path.join(root, key)
        if not os.path.exists(path):
            continue
        raw = np.fromfile(path, dtype="<f4")
        if raw.size != expected:
            raise SystemExit(f"chunk {key}: {raw.size} elements, expected {expected}")
        block = raw.reshape(chunks)
        sel = tuple(
            slice(i * c, min((i + 1) * c, s)) for i, c, s in zip(idx, chunks, shape)
        )
        sub = tuple(slice(0, sl.stop - sl.start) for sl in sel)
        out[sel] = block[sub]
    return out


def write_array(root, shape, chunks, values):
    os.makedirs(root, exist_ok=True)
    meta = {
        "zarr_format": 2,
        "shape": list(shape),
        "chunks": list(chunks),
        "dtype": "<f4",
        "order": "C",
        "fill_value": 0.0,
        "compressor": None,
        "filters": None,
    }
    with open(os.path.join(root, ".zarray"), "w") as f:
        json.dump(meta, f)
    arr = np.asarray(values, dtype="<f4").reshape(shape)
    for idx in np.ndindex(*chunk_grid(shape, chunks)):
        block = np.zeros(chunks, dtype="<f4")
        sel = tuple(
            slice(i * c, min((i + 1) * c, s)) for i, c, s in zip(idx, chunks, shape)
        )
        sub = tuple(slice(0, sl.stop - sl.start) for sl in sel)
        block[sub] = arr[sel]
        block.tofile(os.path.join(root, ".".join(str(i) for i in idx)))


def main():
    if len(sys.argv) != 5:
        raise SystemExit(__doc__)
    command, root = sys.argv[1], sys.argv[2]
    shape = [int(x) for x in sys.argv[3].split(",")]
    chunks = [int(x) for x in sys.argv[4].split(",")]
    count = int(np.prod(shape))

    if command == "write":
        write_array(root, shape, chunks, pattern(count))
        print(f"wrote {count} values to {root}")
    elif command == "verify":
        got = read_array(root)
        if list(got.shape) != shape:
            raise SystemExit(f"shape mismatch: {list(got.shape)} != {shape}")
        want = pattern(count).reshape(shape)
        if got.tobytes() != want.tobytes():
            bad = int(np.sum(got != want))
            raise SystemExit(f"value mismatch on {bad} of {count} elements")
        print(f"verified {count} values at {root}")
    else:
        raise SystemExit(__doc__)


if __name__ == "__main__":
    main()
