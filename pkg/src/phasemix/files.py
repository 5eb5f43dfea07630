"""JSON model and path files.

A model file holds ``{"n", "m", "Q", "pi0", "S0", "gamma"}``.  ``Q`` is a
list of ``m`` square matrices of size ``n+1``, ``S0`` a list of ``m``
switching diagonals of length ``n+1`` and ``gamma`` a list of closed sets
given by 1-based state numbers, with ``n+1`` the absorbing state.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from .errors import ShapeError
from .inference import PathRecord
from .model import ClosedSetFamily, MixtureModel

__all__ = ["MODEL_SCHEMA", "PATH_SCHEMA", "model_to_dict", "model_from_dict", "load_model", "save_model",
           "load_path", "save_path"]

_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}

MODEL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "m", "Q", "pi0", "S0"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "m": {"type": "integer", "minimum": 1},
        "Q": {"type": "array", "items": _matrix, "minItems": 1},
        "pi0": {"type": "array", "items": {"type": "number"}},
        "S0": _matrix,
        "gamma": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        },
    },
}

PATH_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["events", "horizon"],
    "properties": {
        "events": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "array",
                "prefixItems": [{"type": "number", "minimum": 0}, {"type": "integer", "minimum": 1}],
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "horizon": {"type": "number", "minimum": 0},
    },
}


def _check(data, schema, what):
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ShapeError(f"malformed {what} at {where}: {exc.message}") from None


def model_to_dict(model: MixtureModel, family: ClosedSetFamily | None = None) -> dict:
    out = {
        "n": model.n,
        "m": model.m,
        "Q": model.Q.tolist(),
        "pi0": model.pi0.tolist(),
        "S0": model.S0.tolist(),
    }
    if family is not None:
        out["gamma"] = [sorted(s + 1 for s in g) for g in family.gamma]
    return out


def model_from_dict(data: dict):
    """Returns ``(model, family)``; ``family`` is ``None`` when the file has no ``gamma``."""
    _check(data, MODEL_SCHEMA, "model")
    n, m = data["n"], data["m"]
    if len(data["Q"]) != m or len(data["S0"]) != m:
        raise ShapeError(f"model declares m={m} but lists {len(data['Q'])} generators and {len(data['S0'])} switching rows")
    model = MixtureModel(Q=data["Q"], pi0=data["pi0"], S0=data["S0"])
    if model.n != n:
        raise ShapeError(f"model declares n={n} but generators have size {model.n + 1}")
    family = None
    if "gamma" in data:
        bad = [s for g in data["gamma"] for s in g if s > n + 1]
        if bad:
            raise ShapeError(f"closed sets mention unknown states {bad}")
        family = ClosedSetFamily(n=n, gamma=tuple({s - 1 for s in g} for g in data["gamma"]))
    return model, family


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def save_model(path, model: MixtureModel, family: ClosedSetFamily | None = None):
    Path(path).write_text(json.dumps(model_to_dict(model, family), indent=2) + "\n", encoding="utf-8")


def load_path(path) -> PathRecord:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    _check(data, PATH_SCHEMA, "path record")
    return PathRecord.from_dict(data)


def save_path(path, record: PathRecord):
    Path(path).write_text(json.dumps(record.to_dict()) + "\n", encoding="utf-8")
