"""JSON formats for matrices and classical shadows.

Complex entries are stored as [re, im] pairs, row-major. Floats are written
with 17 significant digits so every double round-trips exactly and the same
inputs always produce the same bytes.
"""
from __future__ import annotations

import json

import numpy as np

from .matcore import HERMITIAN_TOL, is_hermitian

SHADOW_FORMAT = "hpshadow.shadow"
SHADOW_VERSION = 1


class FormatError(ValueError):
    """Raised for malformed matrix or shadow documents."""


def _num(x: float) -> str:
    x = float(x)
    if not np.isfinite(x):
        raise FormatError("non-finite value")
    s = format(x, ".17g")
    # keep a float marker so integral values load back as floats
    return s if any(ch in s for ch in ".en") else s + ".0"


def _dump(obj) -> str:
    """Compact deterministic JSON with fixed-precision floats and preserved key order."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_dump(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_dump(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if obj is None or isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def complex_pairs(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def from_pairs(data, shape: tuple[int, int] | None = None) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"matrix data is not a nested list of numbers: {exc}") from None
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise FormatError("matrix data must be rows of [re, im] pairs")
    m = arr[..., 0] + 1j * arr[..., 1]
    if shape is not None and m.shape != shape:
        raise FormatError(f"expected shape {shape}, found {m.shape}")
    return m


# -- matrices ---------------------------------------------------------------

def matrix_to_json(m: np.ndarray) -> str:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("only square matrices are supported")
    return _dump({"hermitian": bool(is_hermitian(m)), "dim": m.shape[0], "data": complex_pairs(m)}) + "\n"


def matrix_from_json(text: str) -> np.ndarray:
    """Parse a matrix document; it must declare and be Hermitian."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or not {"hermitian", "dim", "data"} <= doc.keys():
        raise FormatError("matrix document needs 'hermitian', 'dim' and 'data'")
    dim = doc["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise FormatError("'dim' must be a positive integer")
    m = from_pairs(doc["data"], (dim, dim))
    if doc["hermitian"] is not True:
        raise FormatError("matrix must be flagged hermitian")
    if not is_hermitian(m, HERMITIAN_TOL):
        raise FormatError("matrix flagged hermitian is not Hermitian")
    return m


# -- shadows ----------------------------------------------------------------

def shadow_to_json(shadow) -> str:
    doc = {
        "format": SHADOW_FORMAT,
        "version": SHADOW_VERSION,
        "d": shadow.d,
        "k": shadow.k,
        "c": shadow.c,
        "basis": complex_pairs(shadow.basis),
        "b": list(shadow.sig.b),
        "rho_rough": complex_pairs(shadow.rho_rough),
        "e_hats": [complex_pairs(e) for e in shadow.e_hats],
        "meta": {k: shadow.meta[k] for k in sorted(shadow.meta)},
    }
    return _dump(doc) + "\n"


def shadow_from_json(text: str):
    from .splitting import ClassicalShadow, SplitSignature

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != SHADOW_FORMAT:
        raise FormatError("not a shadow document")
    if doc.get("version") != SHADOW_VERSION:
        raise FormatError(f"unsupported shadow version {doc.get('version')}")
    try:
        d, k, c = int(doc["d"]), int(doc["k"]), int(doc["c"])
        sig = SplitSignature(tuple(doc["b"]))
        basis = from_pairs(doc["basis"], (d, d))
        rho_rough = from_pairs(doc["rho_rough"], (d, d))
        e_hats = [from_pairs(e, (k, k)) for e in doc["e_hats"]]
        meta = dict(doc.get("meta", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed shadow: {exc}") from None
    if sig.k != k or sig.d != d or len(e_hats) != c:
        raise FormatError("shadow header disagrees with its contents")
    return ClassicalShadow(rho_rough, basis, sig, e_hats, meta)
