"""JSON persistence for fitted models."""

from __future__ import annotations

import json

from .errors import ParseError
from .hilr import HILRModel
from .ilr import ILRModel

KINDS = {"ilr": ILRModel, "hilr": HILRModel}


def model_to_json(model) -> str:
    # json writes floats with repr, which round-trips doubles exactly
    return json.dumps(model.to_dict())


def model_from_json(text: str):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"model file is not valid JSON: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(d, dict):
        raise ParseError("model file must contain a JSON object")
    kind = d.get("kind", "ilr")
    if kind not in KINDS:
        raise ParseError(f"unknown model kind {kind!r}")
    return KINDS[kind].from_dict(d)


def save_model(model, path):
    with open(path, "w") as fh:
        fh.write(model_to_json(model))


def load_model(path):
    with open(path) as fh:
        return model_from_json(fh.read())
