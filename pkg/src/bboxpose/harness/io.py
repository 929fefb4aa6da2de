"""Point-set and assignment-matrix file formats.

* PLY: ``ascii`` or ``binary_little_endian`` with double x/y/z and an
  optional ``uchar label`` vertex property.
* JSON points: ``{"schema_version": 1, "points": [[x, y, z], ...],
  "labels": [...] | null}``.
* Assignment matrices: 16-byte little-endian header
  ``b"ASGN" | uint16 version | uint16 dtype (0=f8, 1=f4) | uint32 rows |
  uint32 cols`` followed by the row-major values.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

SCHEMA_VERSION = 1

_ASGN_HEADER = struct.Struct("<4sHHII")
_ASGN_DTYPES = {0: "<f8", 1: "<f4"}


def write_ply(path, points, labels=None, binary: bool = True) -> None:
    P = np.asarray(points, dtype="<f8").reshape(-1, 3)
    fmt = "binary_little_endian" if binary else "ascii"
    header = ["ply", f"format {fmt} 1.0", f"element vertex {len(P)}",
              "property double x", "property double y", "property double z"]
    if labels is not None:
        header.append("property uchar label")
    header.append("end_header")
    head = ("\n".join(header) + "\n").encode("ascii")
    with open(path, "wb") as f:
        f.write(head)
        if binary:
            if labels is None:
                f.write(P.tobytes())
            else:
                rec = np.zeros(len(P), dtype=[("xyz", "<f8", 3), ("label", "u1")])
                rec["xyz"] = P
                rec["label"] = np.asarray(labels, dtype=np.uint8)
                f.write(rec.tobytes())
        else:
            lab = None if labels is None else np.asarray(labels, dtype=int)
            lines = []
            for i, p in enumerate(P):
                row = " ".join(repr(float(v)) for v in p)
                if lab is not None:
                    row += f" {lab[i]}"
                lines.append(row)
            f.write(("\n".join(lines) + ("\n" if lines else "")).encode("ascii"))


def read_ply(path) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Return ``(points, labels)``; labels is None when absent."""
    data = Path(path).read_bytes()
    end = data.index(b"end_header")
    end = data.index(b"\n", end) + 1
    header = data[:end].decode("ascii").splitlines()
    if not header or header[0].strip() != "ply":
        raise ValueError(f"{path}: not a PLY file")
    fmt, n, props = None, 0, []
    for line in header[1:]:
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element" and tok[1] == "vertex":
            n = int(tok[2])
        elif tok[0] == "property":
            props.append((tok[2], tok[1]))
    names = [p[0] for p in props]
    if names[:3] != ["x", "y", "z"]:
        raise ValueError(f"{path}: expected x, y, z vertex properties")
    types = {"double": "<f8", "float": "<f4", "uchar": "u1", "int": "<i4", "uint8": "u1", "float32": "<f4",
             "float64": "<f8"}
    body = data[end:]
    if fmt == "binary_little_endian":
        dt = np.dtype([(name, types[t]) for name, t in props])
        rec = np.frombuffer(body, dtype=dt, count=n)
        pts = np.column_stack([rec["x"], rec["y"], rec["z"]]).astype(float)
        labels = rec["label"].astype(bool) if "label" in names else None
    elif fmt == "ascii":
        rows = np.array([line.split() for line in body.decode("ascii").splitlines()[:n]], dtype=float)
        rows = rows.reshape(n, len(props))
        pts = rows[:, :3]
        labels = rows[:, names.index("label")].astype(bool) if "label" in names else None
    else:
        raise ValueError(f"{path}: unsupported PLY format {fmt!r}")
    return pts, labels


def write_points_json(path, points, labels=None) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "points": np.asarray(points, dtype=float).tolist(),
        "labels": None if labels is None else np.asarray(labels, dtype=bool).tolist(),
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def read_points_json(path) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    pts = np.asarray(doc["points"], dtype=float).reshape(-1, 3)
    labels = doc.get("labels")
    return pts, None if labels is None else np.asarray(labels, dtype=bool)


def write_points(path, points, labels=None) -> None:
    path = Path(path)
    if path.suffix == ".ply":
        write_ply(path, points, labels)
    elif path.suffix == ".json":
        write_points_json(path, points, labels)
    else:
        raise ValueError(f"unknown point file extension {path.suffix!r}")


def read_points(path) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    path = Path(path)
    if path.suffix == ".ply":
        return read_ply(path)
    if path.suffix == ".json":
        return read_points_json(path)
    raise ValueError(f"unknown point file extension {path.suffix!r}")


def write_assignment(path, A, dtype: str = "<f8") -> None:
    A = np.asarray(A)
    if A.ndim != 2:
        raise ValueError("assignment must be 2-D")
    code = {v: k for k, v in _ASGN_DTYPES.items()}[np.dtype(dtype).newbyteorder("<").str]
    with open(path, "wb") as f:
        f.write(_ASGN_HEADER.pack(b"ASGN", 1, code, A.shape[0], A.shape[1]))
        f.write(np.ascontiguousarray(A, dtype=_ASGN_DTYPES[code]).tobytes())


def read_assignment(path) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, version, code, rows, cols = _ASGN_HEADER.unpack_from(data)
    if magic != b"ASGN" or version != 1:
        raise ValueError(f"{path}: not an assignment file")
    if code not in _ASGN_DTYPES:
        raise ValueError(f"{path}: unknown dtype code {code}")
    arr = np.frombuffer(data, dtype=_ASGN_DTYPES[code], count=rows * cols, offset=_ASGN_HEADER.size)
    return arr.reshape(rows, cols).astype(float)
