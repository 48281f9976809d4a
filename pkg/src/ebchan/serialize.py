"""JSON encoding of states, channels, optimiser results and reports.

Complex numbers are ``[re, im]`` pairs, matrices row-major nested lists of
those, states ``{"dims": [...], "data": [[...]]}``. Floats go through
``float.__repr__`` (shortest exact round trip), so parse -> serialize is
value-identical.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import SCHEMA
from .channels import (
    HolevoFormChannel,
    KrausChannel,
    make_special,
    validate_cpt,
)
from .errors import BadParams, EbchanError, ParseError, ValidationError
from .optimize import Ensemble, OptResult, PureDecomposition
from .qmath import DensityMatrix, PureState

SPECIAL_KINDS = ("identity", "depolarizing", "cq", "qc")


def encode_matrix(mat) -> list:
    mat = np.asarray(mat, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def encode_vector(vec) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(vec, dtype=complex).ravel()]


def _decode_complex(pair, where):
    if not (isinstance(pair, (list, tuple)) and len(pair) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)):
        raise ParseError("expected a [re, im] pair of numbers", where)
    return complex(pair[0], pair[1])


def decode_matrix(obj, where="matrix") -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ParseError("expected a non-empty list of rows", where)
    width = len(obj[0])
    rows = []
    for i, row in enumerate(obj):
        if len(row) != width:
            raise ParseError(f"row {i} has {len(row)} entries, expected {width}", where)
        rows.append([_decode_complex(z, f"{where}[{i}][{j}]") for j, z in enumerate(row)])
    return np.array(rows, dtype=complex)


def decode_vector(obj, where="vector") -> np.ndarray:
    if not isinstance(obj, list) or not obj:
        raise ParseError("expected a non-empty list", where)
    return np.array([_decode_complex(z, f"{where}[{i}]") for i, z in enumerate(obj)], dtype=complex)


def encode_state(rho: DensityMatrix) -> dict:
    return {"dims": list(rho.dims), "data": encode_matrix(rho.data)}


def decode_state(obj, where="state") -> DensityMatrix:
    if not isinstance(obj, dict):
        raise ParseError("expected an object with dims and data", where)
    _reject_unknown(obj, {"dims", "data", "schema"}, where)
    if "data" not in obj:
        raise ParseError("missing field 'data'", where)
    data = decode_matrix(obj["data"], f"{where}.data")
    dims = obj.get("dims")
    if dims is not None and (not isinstance(dims, list) or not all(isinstance(d, int) for d in dims)):
        raise ParseError("dims must be a list of integers", f"{where}.dims")
    try:
        return DensityMatrix(data, dims)
    except EbchanError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def encode_pure(state: PureState) -> dict:
    return {"dims": list(state.dims), "vector": encode_vector(state.vector)}


def _reject_unknown(obj, allowed, where):
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ParseError(f"unknown field(s) {extra}", where)


# --------------------------------------------------------------------------
# channels
# --------------------------------------------------------------------------

def channel_to_dict(ch, special: dict | None = None) -> dict:
    """Channel-spec JSON object. ``special`` re-emits a named channel's parameters verbatim."""
    if special is not None:
        return {"schema": SCHEMA, "type": "special", **special}
    if isinstance(ch, HolevoFormChannel):
        return {"schema": SCHEMA, "type": "holevo",
                "povm": [encode_matrix(x) for x in ch.povm],
                "outputs": [encode_state(o) for o in ch.outputs]}
    return {"schema": SCHEMA, "type": "kraus", "d_in": ch.d_in, "d_out": ch.d_out,
            "kraus": [encode_matrix(a) for a in ch.kraus_ops]}


def channel_from_dict(obj, tol: float = 1e-9):
    """Build and validate a channel. Raises ParseError or ValidationError."""
    if not isinstance(obj, dict):
        raise ParseError("channel spec must be a JSON object")
    schema = obj.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ParseError(f"unsupported schema {schema!r}, expected {SCHEMA!r}", "schema")
    kind = obj.get("type")
    if kind == "kraus":
        _reject_unknown(obj, {"schema", "type", "d_in", "d_out", "kraus"}, "channel")
        if not isinstance(obj.get("kraus"), list) or not obj["kraus"]:
            raise ParseError("expected a non-empty list of matrices", "kraus")
        ops = [decode_matrix(m, f"kraus[{i}]") for i, m in enumerate(obj["kraus"])]
        if len({op.shape for op in ops}) != 1:
            raise ParseError("Kraus operators have differing shapes", "kraus")
        ch = KrausChannel(np.array(ops))
        for key in ("d_in", "d_out"):
            if key in obj and obj[key] != getattr(ch, key):
                raise ParseError(f"declared {obj[key]} but operators give {getattr(ch, key)}", key)
        diag = validate_cpt(ch, tol)
        if not diag.passed:
            raise ValidationError(
                f"not a CPT map: trace-preservation residual {diag.tp_residual:.6g}, "
                f"Choi minimum eigenvalue {diag.choi_min_eig:.6g}", diag.tp_residual)
        return ch
    if kind == "holevo":
        _reject_unknown(obj, {"schema", "type", "povm", "outputs"}, "channel")
        for key in ("povm", "outputs"):
            if not isinstance(obj.get(key), list) or not obj[key]:
                raise ParseError("expected a non-empty list", key)
        povm = [decode_matrix(m, f"povm[{i}]") for i, m in enumerate(obj["povm"])]
        outs = [decode_state(s, f"outputs[{i}]") for i, s in enumerate(obj["outputs"])]
        if len({x.shape for x in povm}) != 1:
            raise ParseError("POVM elements have differing shapes", "povm")
        return HolevoFormChannel(np.array(povm), outs)
    if kind == "special":
        return _special_from_dict(obj)
    raise ParseError(f"unknown channel type {kind!r}", "type")


def _special_from_dict(obj):
    kind = obj.get("kind")
    if kind not in SPECIAL_KINDS:
        raise ParseError(f"unknown special kind {kind!r}", "kind")
    allowed = {"identity": {"d"}, "depolarizing": {"p", "d"}, "cq": {"basis", "outputs"},
               "qc": {"povm"}}[kind]
    _reject_unknown(obj, allowed | {"schema", "type", "kind"}, "channel")
    params = {}
    for key in allowed:
        if key not in obj:
            raise ParseError("missing parameter", key)
    if kind in ("identity", "depolarizing"):
        if not isinstance(obj["d"], int) or obj["d"] < 1:
            raise ParseError("must be a positive integer", "d")
        params["d"] = obj["d"]
    if kind == "depolarizing":
        if not isinstance(obj["p"], (int, float)) or isinstance(obj["p"], bool):
            raise ParseError("must be a number", "p")
        params["p"] = float(obj["p"])
    if kind == "cq":
        params["basis"] = np.array([decode_vector(v, f"basis[{i}]") for i, v in enumerate(obj["basis"])])
        params["outputs"] = [decode_state(s, f"outputs[{i}]") for i, s in enumerate(obj["outputs"])]
    if kind == "qc":
        params["povm"] = np.array([decode_matrix(m, f"povm[{i}]") for i, m in enumerate(obj["povm"])])
    try:
        return make_special(kind, **params)
    except BadParams as exc:
        raise ParseError(str(exc), "kind") from None


def _load_json(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", str(path)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", f"{path}:{exc.lineno}:{exc.colno}") from None


def parse_channel_file(path, tol: float = 1e-9):
    """Load a channel-spec file; CPT / POVM validity is enforced on load."""
    obj = _load_json(path)
    try:
        return channel_from_dict(obj, tol)
    except ParseError as exc:
        raise ParseError(str(exc), str(path)) from None


def parse_state_file(path) -> DensityMatrix:
    return decode_state(_load_json(path), str(path))


# --------------------------------------------------------------------------
# results
# --------------------------------------------------------------------------

def _clean(x):
    """Convert numpy scalars/arrays and nested containers to JSON-ready values."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {v} in report")
        return v + 0.0
    return x


def argument_to_dict(arg):
    if isinstance(arg, PureState):
        return {"kind": "pure_state", **encode_pure(arg)}
    if isinstance(arg, Ensemble):
        return {"kind": "ensemble", "probs": _clean(list(arg.probs)),
                "states": [encode_pure(s) for s in arg.states]}
    if isinstance(arg, PureDecomposition):
        return {"kind": "decomposition", "probs": _clean(list(arg.probs)),
                "states": [encode_pure(s) for s in arg.states]}
    return None


def optresult_to_dict(res: OptResult) -> dict:
    return _clean({
        "value": res.value,
        "bound_direction": res.bound_direction,
        "method": res.method,
        "iterations": res.iterations,
        "converged": res.converged,
        "seed": res.seed,
        "restart_values": list(res.restart_values),
        "argument": argument_to_dict(res.argument),
        **({"extra": res.extra} if res.extra else {}),
    })


def report_to_dict(rep) -> dict:
    return _clean({
        "theorem": rep.theorem,
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "slack": rep.slack,
        "delta": rep.delta,
        "passed": rep.passed,
        "grade": rep.grade,
        "components": rep.components,
        "bound_directions": rep.bound_directions,
        "seed": rep.seed,
        "d_in_A": rep.d_in_a,
        "d_in_B": rep.d_in_b,
        "trace": rep.trace,
        "warnings": rep.warnings,
    })


CSV_COLUMNS = ("theorem", "d_in_A", "d_in_B", "lhs", "rhs", "slack", "grade", "seed")


def report_csv_row(rep) -> list:
    return [rep.theorem, rep.d_in_a, rep.d_in_b, repr(float(rep.lhs)), repr(float(rep.rhs)),
            repr(float(rep.slack)), rep.grade, rep.seed]
