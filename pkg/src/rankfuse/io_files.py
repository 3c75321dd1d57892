"""Matrix and manifest file handling.

Two matrix formats are supported:

* ``array`` -- the standard binary array container, version 1.0 only
  (magic ``\\x93NUMPY``), restricted to little-endian float32/float64,
  row-major, 2-D. The parser is deliberately hand-rolled so malformed files
  are rejected with byte offsets and the writer round-trips float64 payloads
  bit-exactly.
* ``csv`` -- comma-separated decimal floats, one row per line, written with
  shortest round-trip formatting.

Manifests are JSON documents carrying the query/gallery sizes, per-query
relevant indices, and optionally named model matrix files.
"""

from __future__ import annotations

import ast
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ValidationError
from .metrics import GroundTruth

__all__ = [
    "ModelEntry",
    "load_matrix",
    "write_matrix",
    "load_ground_truth",
    "load_manifest",
    "write_manifest",
]

_MAGIC = b"\x93NUMPY"
_SUPPORTED_DESCR = {"<f4": np.float32, "<f8": np.float64}


@dataclass(frozen=True)
class ModelEntry:
    """A named score-matrix file referenced by a manifest."""

    name: str
    path: str
    format: str = "array"


def _check_finite(arr: np.ndarray, path) -> np.ndarray:
    bad = np.argwhere(~np.isfinite(arr))
    if bad.size:
        i, j = bad[0]
        raise ValidationError(f"{path}: non-finite value at ({i}, {j})")
    return arr


def _load_array(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 6 or data[:6] != _MAGIC:
        raise FormatError(f"{path}: bad magic at offset 0 (not an array file)")
    if len(data) < 10:
        raise FormatError(f"{path}: truncated before header length at offset {len(data)}")
    major, minor = data[6], data[7]
    if (major, minor) != (1, 0):
        raise FormatError(f"{path}: unsupported format version {major}.{minor} at offset 6")
    header_len = int.from_bytes(data[8:10], "little")
    header_end = 10 + header_len
    if len(data) < header_end:
        raise FormatError(f"{path}: truncated header at offset 10 (declared {header_len} bytes)")
    try:
        header = ast.literal_eval(data[10:header_end].decode("latin-1").strip())
    except (ValueError, SyntaxError) as exc:
        raise FormatError(f"{path}: unparseable header at offset 10: {exc}") from exc
    if not isinstance(header, dict):
        raise FormatError(f"{path}: header at offset 10 is not a dict")

    descr = header.get("descr")
    if descr not in _SUPPORTED_DESCR:
        raise FormatError(
            f"{path}: unsupported dtype {descr!r} (need little-endian float32/float64)"
        )
    if header.get("fortran_order") is not False:
        raise FormatError(f"{path}: fortran_order must be false (row-major only)")
    shape = header.get("shape")
    if (
        not isinstance(shape, tuple)
        or len(shape) != 2
        or not all(isinstance(d, int) and d >= 1 for d in shape)
    ):
        raise FormatError(f"{path}: shape {shape!r} is not 2-D with positive extents")

    dtype = np.dtype(_SUPPORTED_DESCR[descr])
    expected = shape[0] * shape[1] * dtype.itemsize
    payload = data[header_end:]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload at offset {header_end} is {len(payload)} bytes, "
            f"header shape {shape} implies {expected}"
        )
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape)
    return _check_finite(arr.astype(np.float64), path)


def _write_array(arr: np.ndarray, path) -> None:
    header = "{'descr': '<f8', 'fortran_order': False, 'shape': (%d, %d), }" % arr.shape
    # Pad so the payload starts on a 64-byte boundary, newline-terminated.
    pad = (-(10 + len(header) + 1)) % 64
    header = header + " " * pad + "\n"
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(bytes((1, 0)))
        fh.write(len(header).to_bytes(2, "little"))
        fh.write(header.encode("latin-1"))
        fh.write(np.ascontiguousarray(arr, dtype=np.float64).tobytes())


def _load_csv(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise FormatError(
                    f"{path}: line {lineno} has {len(cells)} columns, expected {width}"
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return _check_finite(np.asarray(rows, dtype=np.float64), path)


def _write_csv(arr: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def load_matrix(path, format: str = "array") -> np.ndarray:
    """Load a 2-D float64 matrix; entries are validated finite.

    float32 array files are widened to float64. Callers wrap the result in
    EmbeddingMatrix or ScoreMatrix depending on how it will be used.
    """
    fmt = format.lower()
    if fmt == "array":
        return _load_array(path)
    if fmt == "csv":
        return _load_csv(path)
    raise FormatError(f"unknown matrix format {format!r} (use 'array' or 'csv')")


def write_matrix(m, path, format: str = "array") -> None:
    """Write a matrix (ndarray or a wrapper with a ``.data`` array).

    float64 array files round-trip bit-exactly through :func:`load_matrix`.
    """
    arr = np.asarray(getattr(m, "data", m), dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"{path}: can only write 2-D matrices, got shape {arr.shape}")
    fmt = format.lower()
    if fmt == "array":
        _write_array(arr, path)
    elif fmt == "csv":
        _write_csv(arr, path)
    else:
        raise FormatError(f"unknown matrix format {format!r} (use 'array' or 'csv')")


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------


def _parse_relevant(doc, n_queries: int, path) -> list:
    rel = doc.get("relevant")
    if isinstance(rel, dict):
        out = []
        for q in range(n_queries):
            key = str(q)
            if key not in rel and q not in rel:
                raise FormatError(f"{path}: relevant map is missing query {q}")
            out.append(rel.get(key, rel.get(q)))
        return out
    if isinstance(rel, list):
        if len(rel) != n_queries:
            raise FormatError(
                f"{path}: relevant list has {len(rel)} entries for {n_queries} queries"
            )
        return rel
    raise FormatError(f"{path}: 'relevant' must be a list or a query-indexed map")


def load_manifest(path) -> tuple[GroundTruth, list[ModelEntry]]:
    """Read a manifest: ground truth plus any model matrix references.

    Model paths are resolved relative to the manifest's directory and must
    exist at load time.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: manifest must be a JSON object")
    for key in ("n_queries", "n_gallery", "relevant"):
        if key not in doc:
            raise FormatError(f"{path}: manifest is missing '{key}'")
    n_queries, n_gallery = int(doc["n_queries"]), int(doc["n_gallery"])
    rel = _parse_relevant(doc, n_queries, path)
    try:
        gt = GroundTruth(relevant=tuple(rel), gallery_size=n_gallery)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    if gt.n_queries != n_queries:
        raise FormatError(f"{path}: {gt.n_queries} relevant rows for n_queries={n_queries}")

    base = os.path.dirname(os.path.abspath(path))
    models = []
    for i, entry in enumerate(doc.get("models", [])):
        if not isinstance(entry, dict) or "path" not in entry:
            raise FormatError(f"{path}: models[{i}] must be an object with a 'path'")
        mpath = entry["path"]
        if not os.path.isabs(mpath):
            mpath = os.path.join(base, mpath)
        if not os.path.exists(mpath):
            raise ValidationError(f"{path}: models[{i}] path does not exist: {mpath}")
        models.append(
            ModelEntry(
                name=str(entry.get("name", f"model-{i}")),
                path=mpath,
                format=str(entry.get("format", "array")),
            )
        )
    return gt, models


def load_ground_truth(path) -> GroundTruth:
    """Read only the ground-truth part of a manifest."""
    return load_manifest(path)[0]


def write_manifest(path, gt: GroundTruth, models: list[ModelEntry] = ()) -> None:
    """Write a manifest; model paths are stored as given."""
    doc = {
        "n_queries": gt.n_queries,
        "n_gallery": gt.gallery_size,
        "relevant": [sorted(rel) for rel in gt.relevant],
        "models": [
            {"name": m.name, "path": m.path, "format": m.format} for m in models
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
