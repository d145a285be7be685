"""Versioned binary container shared by checkpoints and retrieval indexes.

Layout::

    magic      8 bytes  (b"EXDLG\\x00\\x00\\x01")
    kind       8 bytes  ascii, space padded ("ckpt    " / "index   ")
    hdr_len    uint64 little-endian
    header     hdr_len bytes of UTF-8 JSON (sorted keys); header["arrays"]
               lists name, dtype and shape of each payload array in order
    payload    arrays back to back, little-endian, C order

Writes go to a temporary file that is renamed into place.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"EXDLG\x00\x00\x01"
_DTYPES = {"f8": "<f8", "i8": "<i8", "u1": "|u1"}


def _kind_bytes(kind: str) -> bytes:
    raw = kind.encode("ascii")
    if len(raw) > 8:
        raise ValueError(f"container kind too long: {kind!r}")
    return raw.ljust(8, b" ")


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dumps(kind: str, header: dict, arrays: "OrderedDict[str, np.ndarray]") -> bytes:
    specs, chunks = [], []
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        code = {"f": "f8", "i": "i8", "u": "u1", "b": "u1"}[arr.dtype.kind]
        arr = np.ascontiguousarray(arr.astype(_DTYPES[code]))
        specs.append({"name": name, "dtype": code, "shape": list(arr.shape)})
        chunks.append(arr.tobytes(order="C"))
    header = dict(header, arrays=specs)
    blob = json.dumps(header, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    return b"".join([MAGIC, _kind_bytes(kind), struct.pack("<Q", len(blob)), blob, *chunks])


def save(path: str | Path, kind: str, header: dict, arrays) -> None:
    atomic_write_bytes(path, dumps(kind, header, arrays))


def load(path: str | Path, kind: str) -> tuple[dict, "OrderedDict[str, np.ndarray]"]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(data) < 24 or data[:8] != MAGIC:
        raise DataError(f"{path}: not an exemplar-dialog container (bad magic)")
    if data[8:16] != _kind_bytes(kind):
        raise DataError(f"{path}: expected a {kind!r} container, found {data[8:16].decode('ascii', 'replace').strip()!r}")
    (hdr_len,) = struct.unpack("<Q", data[16:24])
    try:
        header = json.loads(data[24:24 + hdr_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: corrupt header: {exc}") from exc
    arrays: OrderedDict[str, np.ndarray] = OrderedDict()
    offset = 24 + hdr_len
    for spec in header.get("arrays", []):
        dtype = np.dtype(_DTYPES[spec["dtype"]])
        count = int(np.prod(spec["shape"], dtype=np.int64))
        end = offset + count * dtype.itemsize
        if end > len(data):
            raise DataError(f"{path}: truncated payload at array {spec['name']!r}")
        arrays[spec["name"]] = np.frombuffer(data, dtype=dtype, count=count, offset=offset).reshape(spec["shape"]).copy()
        offset = end
    if offset != len(data):
        raise DataError(f"{path}: {len(data) - offset} trailing bytes after payload")
    return header, arrays
