"""Flat binary checkpoint container.

Layout (all integers little-endian):

    magic    8 bytes  b"SEEDCKPT"
    version  u32
    count    u32      number of parameters
    manifest, repeated count times:
        name_len u32
        name     UTF-8 bytes
        rank     u32
        extents  rank x u64
        frozen   u8   (0 or 1)
    payloads: for each manifest entry in order, the raw float64
        little-endian bytes of the array, row-major.

The container stores tensors only. Experiment configuration and
normalization statistics ride along as pseudo-parameters (a UTF-8 blob
widened to float64 for the config), so a checkpoint is self-contained:
evaluation and forecasting need nothing but this one file plus data.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .optim import Parameter

MAGIC = b"SEEDCKPT"
VERSION = 1


def save_checkpoint(path: str | Path, params: list[Parameter]) -> None:
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        raise DataError("duplicate parameter names in checkpoint manifest")
    head = [MAGIC, struct.pack("<II", VERSION, len(params))]
    for p in params:
        nb = p.name.encode("utf-8")
        head.append(struct.pack("<I", len(nb)))
        head.append(nb)
        head.append(struct.pack("<I", p.data.ndim))
        head.append(struct.pack(f"<{p.data.ndim}Q", *p.data.shape))
        head.append(struct.pack("<B", 1 if p.frozen else 0))
    body = [np.ascontiguousarray(p.data, dtype="<f8").tobytes() for p in params]
    Path(path).write_bytes(b"".join(head) + b"".join(body))


def load_checkpoint(path: str | Path) -> list[Parameter]:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(blob) < 16 or blob[:8] != MAGIC:
        raise DataError(f"{path}: not a checkpoint (bad magic)")
    version, count = struct.unpack_from("<II", blob, 8)
    if version != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    off = 16
    manifest: list[tuple[str, tuple[int, ...], bool]] = []
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", blob, off)
            off += 4
            name = blob[off:off + name_len].decode("utf-8")
            off += name_len
            (rank,) = struct.unpack_from("<I", blob, off)
            off += 4
            shape = struct.unpack_from(f"<{rank}Q", blob, off)
            off += 8 * rank
            (frozen,) = struct.unpack_from("<B", blob, off)
            off += 1
            manifest.append((name, tuple(int(n) for n in shape), bool(frozen)))
    except struct.error as exc:
        raise DataError(f"{path}: truncated checkpoint manifest") from exc

    params: list[Parameter] = []
    for name, shape, frozen in manifest:
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = 8 * n
        if off + nbytes > len(blob):
            raise DataError(f"{path}: truncated payload for {name!r}")
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=off).reshape(shape)
        off += nbytes
        params.append(Parameter(name, arr, frozen=frozen))
    if off != len(blob):
        raise DataError(f"{path}: {len(blob) - off} trailing bytes after payloads")
    return params


def digest(params: list[Parameter]) -> str:
    """SHA-256 over (name, shape, raw bytes) of the given parameters.

    Bitwise-stable: any single-bit change in any array changes the hex
    digest. Used to prove the frozen decoder never moved during training.
    """
    h = hashlib.sha256()
    for p in sorted(params, key=lambda p: p.name):
        h.update(p.name.encode("utf-8"))
        h.update(struct.pack(f"<I{p.data.ndim}Q", p.data.ndim, *p.data.shape))
        h.update(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    return h.hexdigest()


def pack_text(name: str, text: str, frozen: bool = True) -> Parameter:
    """Stow a UTF-8 string as a float64 pseudo-parameter."""
    raw = np.frombuffer(text.encode("utf-8"), dtype=np.uint8).astype(np.float64)
    return Parameter(name, raw, frozen=frozen)


def unpack_text(param: Parameter) -> str:
    return param.data.astype(np.uint8).tobytes().decode("utf-8")
