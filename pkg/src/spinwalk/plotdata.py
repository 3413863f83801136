"""Data-only plot documents and their JSON schema."""

from __future__ import annotations

import json

import jsonschema
import numpy as np

_NUMBERS = {"type": "array", "items": {"type": "number"}}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "spinwalk plot data",
    "type": "object",
    "required": ["config_hash", "seed", "command", "kind", "x_label", "y_label", "series"],
    "additionalProperties": False,
    "properties": {
        "config_hash": {"type": "string", "pattern": "^[0-9a-f]{16}$"},
        "seed": {"type": "integer", "minimum": 0},
        "command": {"type": "string"},
        "kind": {"enum": ["line", "grid", "histogram"]},
        "x_label": {"type": "string"},
        "y_label": {"type": "string"},
        "x": _NUMBERS,
        "y": _NUMBERS,
        "series": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "values"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "values": {
                        "oneOf": [
                            _NUMBERS,
                            {"type": "array", "items": _NUMBERS},
                        ]
                    },
                },
            },
        },
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "grid"}}}, "then": {"required": ["x", "y"]}},
        {"if": {"properties": {"kind": {"enum": ["line", "histogram"]}}}, "then": {"required": ["x"]}},
    ],
}


def _plain(a):
    return np.asarray(a, dtype=float).tolist()


def plot_document(kind: str, config_hash: str, seed: int, command: str, x, series: dict,
                  x_label: str, y_label: str, y=None) -> dict:
    doc = {
        "config_hash": config_hash,
        "seed": int(seed),
        "command": command,
        "kind": kind,
        "x_label": x_label,
        "y_label": y_label,
        "x": _plain(x),
        "series": [{"name": k, "values": _plain(v)} for k, v in series.items()],
    }
    if y is not None:
        doc["y"] = _plain(y)
    validate(doc)
    return doc


def validate(doc: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``doc`` does not match the schema."""
    jsonschema.validate(doc, SCHEMA)


def schema_json() -> str:
    return json.dumps(SCHEMA, indent=2)
