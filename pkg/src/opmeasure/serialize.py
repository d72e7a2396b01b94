"""JSON encoding of matrices, observables, instruments and models.

Matrices are nested row-major arrays of ``[re, im]`` pairs.  Python's
float ``repr`` is the shortest string that reads back to the same double,
so dumping and reloading is bit-exact.  Bare real numbers are accepted on
input as a convenience for hand-written files.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DimensionError, OpMeasureError
from .instruments import Instrument
from .models import IndirectModel
from .observables import DiscreteObservable, observable_from_hermitian


class FormatError(OpMeasureError, ValueError):
    """Malformed matrix literal or file record."""


def _scalar(x) -> complex:
    if isinstance(x, bool):
        raise FormatError(f"boolean {x!r} is not a number")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in x):
        return complex(x[0], x[1])
    raise FormatError(f"expected a number or an [re, im] pair, got {x!r}")


def encode_matrix(m) -> list:
    m = np.atleast_2d(np.asarray(m, dtype=np.complex128))
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def decode_matrix(data) -> np.ndarray:
    if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
        raise FormatError("matrix literal must be a non-empty list of rows")
    cols = len(data[0])
    if cols == 0 or any(len(r) != cols for r in data):
        raise FormatError("matrix literal rows have different lengths")
    return np.array([[_scalar(x) for x in row] for row in data], dtype=np.complex128)


def encode_vector(v) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=np.complex128).reshape(-1)]


def decode_vector(data) -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise FormatError("vector literal must be a non-empty list")
    return np.array([_scalar(x) for x in data], dtype=np.complex128)


def encode_observable(obs: DiscreteObservable) -> dict:
    return {"dim": obs.dim,
            "outcomes": [{"value": v, "projection": encode_matrix(p)} for v, p in obs.outcomes]}


def decode_observable(data: dict) -> DiscreteObservable:
    if "hermitian" in data:
        obs = observable_from_hermitian(decode_matrix(data["hermitian"]))
    elif "outcomes" in data:
        outs = data["outcomes"]
        obs = DiscreteObservable(tuple(o["value"] for o in outs),
                                 tuple(decode_matrix(o["projection"]) for o in outs))
    else:
        raise FormatError("observable needs 'outcomes' or 'hermitian'")
    if "dim" in data and data["dim"] != obs.dim:
        raise DimensionError(f"declared dim {data['dim']} but projections have dim {obs.dim}")
    return obs


def encode_instrument(instr: Instrument) -> dict:
    out = {"dim": instr.dim, "outcomes": list(instr.values),
           "branches": [[encode_matrix(k) for k in ks] for ks in instr.kraus()]}
    if instr.observable is not None:
        out["observable"] = encode_observable(instr.observable)
    return out


def decode_instrument(data: dict, check: bool = True) -> Instrument:
    """Rebuild an instrument; ``check=False`` skips the axiom validation."""
    try:
        values, branches = data["outcomes"], data["branches"]
    except KeyError as exc:
        raise FormatError(f"instrument record lacks {exc.args[0]!r}") from None
    if len(values) != len(branches):
        raise FormatError(f"{len(values)} outcomes but {len(branches)} branches")
    kraus = [[decode_matrix(k) for k in ks] for ks in branches]
    obs = decode_observable(data["observable"]) if "observable" in data else None
    instr = Instrument.from_kraus(values, kraus, observable=obs, check=check)
    if "dim" in data and data["dim"] != instr.dim:
        raise DimensionError(f"declared dim {data['dim']} but Kraus operators have dim {instr.dim}")
    return instr


def encode_model(model: IndirectModel) -> dict:
    return {"sys_dim": model.sys_dim, "probe_dim": model.probe_dim,
            "sigma": encode_matrix(model.sigma.matrix), "U": encode_matrix(model.U),
            "M": encode_observable(model.M)}


def decode_model(data: dict) -> IndirectModel:
    try:
        m = data["M"]
        probe_obs = decode_observable(m) if isinstance(m, dict) else observable_from_hermitian(
            decode_matrix(m))
        return IndirectModel(int(data["sys_dim"]), int(data["probe_dim"]),
                             decode_matrix(data["sigma"]), decode_matrix(data["U"]), probe_obs)
    except KeyError as exc:
        raise FormatError(f"model record lacks {exc.args[0]!r}") from None


def dumps(record: dict) -> str:
    return json.dumps(record, indent=2, sort_keys=True) + "\n"


def save(record: dict, path) -> None:
    Path(path).write_text(dumps(record))


def load_json(path) -> dict:
    """Read a JSON file; decoding errors keep their line and column."""
    return json.loads(Path(path).read_text())
