"""File formats: embedding binaries/CSV, PNG rasters and landmark JSON.

Embedding binary layout (all little-endian)::

    magic  4 bytes  b"MIIE"
    d      u32
    n      u64
    data   n * d float32, row-major
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ContractError

MAGIC = b"MIIE"
_HEADER = struct.Struct("<4sIQ")


def write_embeddings(path, X) -> None:
    X = np.ascontiguousarray(X, dtype="<f4")
    if X.ndim != 2:
        raise ContractError(f"expected a 2-D batch, got shape {X.shape}")
    n, d = X.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, d, n))
        fh.write(X.tobytes(order="C"))


def read_embeddings(path, renormalize: bool = True) -> np.ndarray:
    """Load an embedding binary as float64, renormalizing rows by default.

    float32 storage loses ~1e-7 of norm; renormalizing in float64 restores
    the unit-norm invariant to machine precision.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ContractError(f"{path}: truncated header")
    magic, d, n = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ContractError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 4 * d * n
    if len(raw) != expected:
        raise ContractError(f"{path}: expected {expected} bytes, found {len(raw)}")
    X = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(n, d).astype(np.float64)
    if renormalize:
        X /= np.linalg.norm(X, axis=1, keepdims=True)
    return X


def write_embeddings_csv(path, X) -> None:
    X = np.asarray(X, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(X.shape[1])])
        for row in X:
            w.writerow([repr(float(v)) for v in row])


def read_embeddings_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)


def read_png(path) -> np.ndarray:
    """RGB image as float64 array (h, w, 3) in [0, 1]."""
    from PIL import Image

    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def write_png(path, img) -> None:
    from PIL import Image

    img = np.asarray(img, dtype=np.float64)
    data = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path, format="PNG")


def read_landmarks(path, width: int | None = None, height: int | None = None,
                   expected: int = 68) -> np.ndarray:
    pts = np.asarray(json.loads(Path(path).read_text()), dtype=np.float64)
    if pts.shape != (expected, 2):
        raise ContractError(f"{path}: expected {expected} [x, y] pairs, got shape {pts.shape}")
    if width is not None and height is not None:
        if (pts[:, 0].min() < 0 or pts[:, 1].min() < 0
                or pts[:, 0].max() > width - 1 or pts[:, 1].max() > height - 1):
            raise ContractError(f"{path}: landmarks outside the {width}x{height} image")
    return pts


def write_landmarks(path, pts) -> None:
    pts = np.asarray(pts, dtype=np.float64)
    Path(path).write_text(json.dumps([[float(x), float(y)] for x, y in pts]))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _plain(v):
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_table(path, header, rows, fmt: str = "csv") -> None:
    """Write rows as CSV or as a JSON list of records. Floats keep full precision."""
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in map(_plain, r)])
    elif fmt == "json":
        recs = [dict(zip(header, map(_plain, r))) for r in rows]
        Path(path).write_text(json.dumps(recs, indent=1) + "\n")
    else:
        raise ContractError(f"unknown format {fmt!r}")


def read_table(path) -> list[dict]:
    path = Path(path)
    if path.suffix == ".json":
        return json.loads(path.read_text())
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
