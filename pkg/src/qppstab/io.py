"""JSON system files and serialization of results."""

from __future__ import annotations

import json
import math

import numpy as np

from .core import PoissonData, QPFunctional, QPSystem
from .errors import StructuralError, SystemFileError

SYSTEM_FIELDS = {"n", "m", "lambda", "A", "B", "poisson"}
POISSON_FIELDS = {"K", "L", "D"}


def _vector(value, length, name):
    if not isinstance(value, list) or len(value) != length:
        raise SystemFileError(f"expected an array of {length} numbers", field=name)
    out = []
    for k, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SystemFileError(f"entry {k} is not a number", field=name)
        out.append(float(v))
    return out


def _matrix(value, rows, cols, name):
    if not isinstance(value, list) or len(value) != rows:
        raise SystemFileError(f"expected {rows} rows", field=name)
    return [_vector(r, cols, f"{name}[{i}]") for i, r in enumerate(value)]


def _int(doc, key):
    if key not in doc:
        raise SystemFileError("missing required field", field=key)
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise SystemFileError("must be a positive integer", field=key)
    return v


def parse_system(doc):
    """Build ``(QPSystem, PoissonData | None)`` from a decoded JSON object."""
    if not isinstance(doc, dict):
        raise SystemFileError("top level must be a JSON object")
    unknown = set(doc) - SYSTEM_FIELDS
    if unknown:
        raise SystemFileError("unknown field", field=sorted(unknown)[0])
    n, m = _int(doc, "n"), _int(doc, "m")
    for key in ("lambda", "A", "B"):
        if key not in doc:
            raise SystemFileError("missing required field", field=key)
    lam = _vector(doc["lambda"], n, "lambda")
    A = _matrix(doc["A"], n, m, "A")
    B = _matrix(doc["B"], m, n, "B")
    sys = QPSystem(np.array(lam), np.array(A).reshape(n, m), np.array(B).reshape(m, n))
    pd = None
    if "poisson" in doc:
        p = doc["poisson"]
        if not isinstance(p, dict):
            raise SystemFileError("must be an object", field="poisson")
        unknown = set(p) - POISSON_FIELDS
        if unknown:
            raise SystemFileError("unknown field", field="poisson." + sorted(unknown)[0])
        for key in ("K", "L", "D"):
            if key not in p:
                raise SystemFileError("missing required field", field="poisson." + key)
        K = _matrix(p["K"], n, n, "poisson.K")
        L = _vector(p["L"], n, "poisson.L")
        D = _vector(p["D"], m, "poisson.D")
        pd = PoissonData(np.array(K).reshape(n, n), np.array(L), np.array(D))
    return sys, pd


def loads_system(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SystemFileError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    return parse_system(doc)


def load_system(path):
    with open(path, encoding="utf-8") as fh:
        return loads_system(fh.read())


def system_to_dict(sys, pd=None):
    doc = {
        "n": sys.n,
        "m": sys.m,
        "lambda": sys.lam.tolist(),
        "A": sys.A.tolist(),
        "B": sys.B.tolist(),
    }
    if pd is not None:
        doc["poisson"] = {"K": pd.K.tolist(), "L": pd.L.tolist(), "D": pd.D.tolist()}
    return doc


def dump_system(path, sys, pd=None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(system_to_dict(sys, pd), fh, indent=2)
        fh.write("\n")


def functional_to_dict(f):
    return {
        "coeffs": f.coeffs.tolist(),
        "exponents": f.exponents.tolist(),
        "logcoeffs": f.logcoeffs.tolist(),
        "constant": f.constant,
    }


def functional_from_dict(doc):
    try:
        return QPFunctional(
            coeffs=doc["coeffs"],
            exponents=doc["exponents"],
            logcoeffs=doc["logcoeffs"],
            constant=doc.get("constant", 0.0),
        )
    except KeyError as exc:
        raise SystemFileError("missing functional field", field=exc.args[0]) from None
    except StructuralError as exc:
        raise SystemFileError(str(exc)) from None


def jsonable(obj):
    """Recursively convert numpy values so ``json.dumps`` accepts them.

    Non-finite floats become ``None`` to keep the output strict JSON.
    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, QPFunctional):
        return functional_to_dict(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj
