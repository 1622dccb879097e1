"""Binary tensor file format for latent sequences and mask stacks.

Layout: magic "LTS1", then five little-endian u32 (F, C, H, W, flags), then
F*C*H*W float32 little-endian values in frame-major, channel, row, column
order.  Flag bit 0 marks a mask payload: C must be 1 and every value must be
exactly 0.0 or 1.0.

All writers go through an atomic temp-file + rename so a crashed process
never leaves a half-written file behind.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

from .core import LatentSequence
from .errors import FormatError, ParameterError

MAGIC = b"LTS1"
FLAG_MASK = 1
_HEADER = struct.Struct("<4s5I")


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write payload to path via a temp file in the same directory + rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2) + "\n")


def write_lts(path, data: np.ndarray, flags: int = 0) -> None:
    """Serialize a (F, C, H, W) float array; payload is stored as float32."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 4 or min(data.shape) < 1:
        raise ParameterError(f"LTS payload must be (F, C, H, W), got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ParameterError("LTS payload contains non-finite values")
    f, c, h, w = data.shape
    if flags & FLAG_MASK:
        if c != 1:
            raise ParameterError(f"mask payload requires C=1, got C={c}")
        if not np.all((data == 0.0) | (data == 1.0)):
            raise ParameterError("mask payload values must be exactly 0.0 or 1.0")
    header = _HEADER.pack(MAGIC, f, c, h, w, flags)
    payload = np.ascontiguousarray(data, dtype="<f4").tobytes()
    atomic_write_bytes(path, header + payload)


def read_lts(path) -> tuple[np.ndarray, int]:
    """Read an LTS file; returns (float64 (F, C, H, W) array, flags)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, f, c, h, w, flags = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if min(f, c, h, w) < 1:
        raise FormatError(f"{path}: degenerate dimensions ({f}, {c}, {h}, {w})")
    expected = _HEADER.size + 4 * f * c * h * w
    if len(raw) != expected:
        raise FormatError(f"{path}: payload size {len(raw) - _HEADER.size} does not match header")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).astype(np.float64)
    data = data.reshape(f, c, h, w)
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: payload contains non-finite values")
    if flags & FLAG_MASK:
        if c != 1:
            raise FormatError(f"{path}: mask flag set but C={c}")
        if not np.all((data == 0.0) | (data == 1.0)):
            raise FormatError(f"{path}: mask payload has values other than 0.0/1.0")
    return data, flags


def save_sequence(path, seq: LatentSequence) -> None:
    write_lts(path, seq.data, flags=0)


def load_sequence(path) -> LatentSequence:
    data, flags = read_lts(path)
    if flags & FLAG_MASK:
        raise FormatError(f"{path}: expected latent payload, found mask payload")
    return LatentSequence(data)


def save_masks(path, masks: np.ndarray) -> None:
    """Store a (F, H, W) boolean stack as a mask-flagged LTS file."""
    masks = np.asarray(masks)
    if masks.ndim != 3:
        raise ParameterError(f"mask stack must be (F, H, W), got shape {masks.shape}")
    write_lts(path, masks.astype(np.float64)[:, None], flags=FLAG_MASK)


def load_masks(path) -> np.ndarray:
    data, flags = read_lts(path)
    if not flags & FLAG_MASK:
        raise FormatError(f"{path}: expected mask payload (flag bit 0)")
    return data[:, 0].astype(bool)


def sidecar_path(mask_path) -> str:
    """JSON sidecar path for a mask file: masks.lts -> masks.json."""
    base, _ = os.path.splitext(os.fspath(mask_path))
    return base + ".json"
