"""ACSF container: a small binary format for fields, maps and structures.

Layout (little-endian)::

    b"ACSF"  u32 version=1  u32 n  u32 N  u32 ncomp  f64 L  u8 kind
    then ncomp * N^(2n) pairs of f64 (re, im), component-major, grid order.

kind: 0 field, 1 map displacement, 2 structure J (real, ncomp = (2n)^2,
row-major matrix entries), 3 Beltrami matrix (ncomp = n^2, row-major).
Constant linear parts of maps and generator metadata go to a JSON sidecar
``<path>.json``.
"""
from __future__ import annotations

import json
import math
import os
import struct
import tempfile

import numpy as np

from .errors import FormatError
from .grid import Field, MapField, make_grid
from .structures import BeltramiMatrix, StructureField

MAGIC = b"ACSF"
VERSION = 1
HEADER = struct.Struct("<4sIIIIdB")
KIND_FIELD, KIND_MAP, KIND_J, KIND_A = 0, 1, 2, 3
KIND_NAMES = {KIND_FIELD: "field", KIND_MAP: "map", KIND_J: "structure", KIND_A: "beltrami"}


def _kind_and_values(obj):
    g = obj.grid
    if isinstance(obj, MapField):
        return KIND_MAP, obj.disp
    if isinstance(obj, BeltramiMatrix):
        return KIND_A, obj.a.reshape((g.n * g.n,) + g.shape)
    if isinstance(obj, StructureField):
        J = np.moveaxis(obj.J.reshape(g.shape + (g.m * g.m,)), -1, 0)
        return KIND_J, J.astype(complex)
    if isinstance(obj, Field):
        return KIND_FIELD, obj.values
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def encode(obj) -> bytes:
    g = obj.grid
    kind, vals = _kind_and_values(obj)
    vals = np.ascontiguousarray(vals, dtype="<c16")
    head = HEADER.pack(MAGIC, VERSION, g.n, g.N, vals.shape[0], g.L, kind)
    return head + vals.tobytes()


def decode(data: bytes, linear=None):
    """Object encoded by ``encode``; ``linear`` = (P, Q) for maps."""
    if len(data) < HEADER.size:
        raise FormatError("truncated ACSF header")
    magic, version, n, N, ncomp, L, kind = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported ACSF version {version}")
    if kind not in KIND_NAMES:
        raise FormatError(f"unknown kind byte {kind}")
    try:
        g = make_grid(n, N, L)
    except Exception as exc:
        raise FormatError(f"invalid grid in header: {exc}") from exc
    count = ncomp * g.size
    body = data[HEADER.size :]
    if len(body) != 16 * count:
        raise FormatError(f"expected {16 * count} payload bytes, found {len(body)}")
    vals = np.frombuffer(body, dtype="<c16").astype(complex).reshape((ncomp,) + g.shape)
    if not np.all(np.isfinite(vals)):
        raise FormatError("non-finite samples")
    expect = {KIND_MAP: n, KIND_A: n * n, KIND_J: 4 * n * n}.get(kind)
    if expect is not None and ncomp != expect:
        raise FormatError(f"kind {KIND_NAMES[kind]} needs {expect} components, header says {ncomp}")
    if kind == KIND_FIELD:
        return Field(g, vals)
    if kind == KIND_MAP:
        P, Q = linear if linear is not None else (None, None)
        return MapField(g, vals, P, Q)
    if kind == KIND_A:
        return BeltramiMatrix(g, vals.reshape((n, n) + g.shape))
    if np.abs(vals.imag).max(initial=0.0) > 0:
        raise FormatError("structure samples must be real")
    J = np.moveaxis(vals.real, 0, -1).reshape(g.shape + (2 * n, 2 * n))
    return StructureField(g, J)


# --------------------------------------------------------------------------
# JSON helpers shared with the CLI


def jsonable(x):
    """Plain JSON data: complex -> [re, im], non-finite floats -> strings."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [jsonable(float(x.real)), jsonable(float(x.imag))]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _matrix_from_json(m):
    a = np.asarray(m, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def atomic_write(path, data):
    """Write bytes or text via a temporary file in the target directory and rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sidecar_path(path) -> str:
    return os.fspath(path) + ".json"


def write(path, obj, meta=None) -> None:
    """Write ``obj`` as ACSF, plus a sidecar when there is metadata or a linear part."""
    atomic_write(path, encode(obj))
    side = {"kind": KIND_NAMES[_kind_and_values(obj)[0]]}
    if isinstance(obj, MapField):
        side["linear"] = {"P": obj.P, "Q": obj.Q}
    if meta:
        side["meta"] = meta
    atomic_write(sidecar_path(path), dumps(side))


def read_sidecar(path) -> dict:
    p = sidecar_path(path)
    if not os.path.exists(p):
        return {}
    try:
        with open(p, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, ValueError) as exc:
        raise FormatError(f"unreadable sidecar {p}: {exc}") from exc


def read(path):
    """(object, sidecar dict); map linear parts are restored from the sidecar."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    side = read_sidecar(path)
    linear = None
    if "linear" in side:
        try:
            linear = (_matrix_from_json(side["linear"]["P"]), _matrix_from_json(side["linear"]["Q"]))
        except (KeyError, ValueError, IndexError) as exc:
            raise FormatError(f"bad linear part in sidecar: {exc}") from exc
    return decode(data, linear), side
