"""JSON schemas for run configs and result documents.

Each schema file keeps one ``$defs`` entry per document kind; a kind is
validated against a thin wrapper that points at its entry.
"""

from __future__ import annotations

import json
from collections.abc import Iterable
from functools import cache
from importlib import resources
from typing import Any

from jsonschema import Draft202012Validator

from sil import config
from sil.errors import SchemaViolation

CONFIG = "config"
RESULTS = "results"


@cache
def load_schema(name: str) -> dict:
    text = resources.files(__name__).joinpath(f"{name}.schema.json").read_text(encoding="utf-8")
    schema = json.loads(text)
    if schema.get("x-schema-version") != config.SCHEMA_VERSION:
        raise RuntimeError(f"{name} schema is version {schema.get('x-schema-version')!r}, expected {config.SCHEMA_VERSION!r}")
    return schema


def kinds(name: str) -> tuple[str, ...]:
    return tuple(load_schema(name)["$defs"])


@cache
def validator(name: str, kind: str) -> Draft202012Validator:
    schema = load_schema(name)
    if kind not in schema["$defs"]:
        raise KeyError(f"no '{kind}' document in the {name} schema")
    wrapper = {"$schema": schema["$schema"], "$defs": schema["$defs"], "$ref": f"#/$defs/{kind}"}
    Draft202012Validator.check_schema(wrapper)
    return Draft202012Validator(wrapper)


def field_path(parts: Iterable[Any]) -> str:
    """``network.n`` / ``penalty.grid[2]``, the form runconfig uses in its messages."""
    path = ""
    for part in parts:
        if isinstance(part, int):
            path += f"[{part}]"
        else:
            path = f"{path}.{part}" if path else str(part)
    return path


def schema_errors(document: Any, name: str, kind: str) -> list[tuple[str, str]]:
    found = [(field_path(error.absolute_path), error.message) for error in validator(name, kind).iter_errors(document)]
    return sorted(found)


def validate_document(document: Any, name: str, kind: str) -> None:
    issues = schema_errors(document, name, kind)
    if issues:
        raise SchemaViolation(kind, issues)
