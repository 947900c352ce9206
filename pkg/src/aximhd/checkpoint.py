"""Binary checkpoints and delimited diagnostic output.

Checkpoint layout (all integers and floats little-endian)::

    4s   magic "AXMH"
    u32  format version
    u32  Nr, u32 Nz
    f64  R, f64 Lz, f64 t
    u64  step, u64 seed
    32s  SHA-256 config digest (raw bytes)
    u32  length of the JSON block, followed by the block (UTF-8): stepper
         accumulators and monitor state
    f64  Nr*Nz values of the vorticity ratio, then of the field ratio, in
         C order (z index fastest)
"""

from __future__ import annotations

import csv
import json
import math
import os
import struct

import numpy as np

from .grid import build_grid
from .solver import State

MAGIC = b"AXMH"
VERSION = 1
INTEGER_COLUMNS = ("step",)
_HEAD = struct.Struct("<4sIIIdddQQ32sI")


class CheckpointError(ValueError):
    pass


def write_checkpoint(state, path, seed=0, digest="0" * 64, extra=None):
    """Write ``state`` atomically (temporary file plus rename)."""
    g = state.grid
    block = json.dumps({"accum": state.accum, "extra": extra or {}}, sort_keys=True).encode()
    head = _HEAD.pack(MAGIC, VERSION, g.Nr, g.Nz, g.R, g.Lz, state.t, state.step, seed,
                      bytes.fromhex(digest), len(block))
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(head)
        fh.write(block)
        for arr in (state.vort_ratio, state.field_ratio):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    os.replace(tmp, path)


def read_checkpoint(path, digest=None):
    """Read a checkpoint; returns ``(state, seed, digest, extra)``.

    Raises
    ------
    CheckpointError
        On a wrong magic or version, a truncated file, or a digest that does
        not match the expected ``digest``.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEAD.size:
        raise CheckpointError("truncated checkpoint header")
    magic, version, Nr, Nz, R, Lz, t, step, seed, dig, nblock = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    found = dig.hex()
    if digest is not None and found != digest:
        raise CheckpointError("configuration digest mismatch: checkpoint was written by a "
                              "different configuration")
    off = _HEAD.size
    n = Nr * Nz * 8
    if len(data) != off + nblock + 2 * n:
        raise CheckpointError(f"checkpoint size {len(data)} does not match its header")
    try:
        block = json.loads(data[off:off + nblock].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt metadata block: {exc}") from None
    off += nblock
    w = np.frombuffer(data, dtype="<f8", count=Nr * Nz, offset=off).reshape(Nr, Nz)
    m = np.frombuffer(data, dtype="<f8", count=Nr * Nz, offset=off + n).reshape(Nr, Nz)
    grid = build_grid(Nr, Nz, R, Lz)
    state = State(grid, t, w.astype(float), m.astype(float), step, dict(block["accum"]))
    return state, seed, found, block["extra"]


def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def emit_records(records, path, columns):
    """Write records as comma-separated text: one header row, then one row each."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for rec in records:
            w.writerow([_fmt(v) for v in rec.row(columns)])


def read_records(path):
    """Parse a file written by :func:`emit_records` into ``(columns, rows)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        rows = [{c: int(x) if c in INTEGER_COLUMNS else float(x) for c, x in zip(columns, row)}
                for row in reader]
    return columns, rows


__all__ = ["write_checkpoint", "read_checkpoint", "emit_records", "read_records",
           "CheckpointError", "MAGIC", "VERSION"]
