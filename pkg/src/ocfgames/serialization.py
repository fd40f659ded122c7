"""JSON round-trip for games and outcomes.

Document layout::

    {
      "schema": "ocfgames.instance/1",
      "game": {"budgets": [...], "max_coalitions": K, "max_deviation_size": S,
               "n_tasks": null | T, "division": "...", "arbitration": "...",
               "admissible_tasks": null | [[...], ...],
               "value": {"kind": "projects" | "table" | "sum" | "zero", ...}},
      "outcome": {"structure": [{"resources": [...], "task": null | t}, ...],
                  "allocation": null | [[...], ...]}
    }

A missing allocation means "divide every coalition by the division rule".
"""
from __future__ import annotations

import json
from typing import Any

from ._validation import check_outcome
from .core import Coalition, GameSpec, InvariantViolation, Outcome, make_outcome
from .fixtures import ProjectValue, SumValue, TableValue, ZeroValue

__all__ = ["SCHEMA", "InstanceError", "dump_instance", "load_instance", "value_from_dict"]

SCHEMA = "ocfgames.instance/1"


class InstanceError(ValueError):
    """The serialized instance is malformed."""


def value_from_dict(doc: dict):
    kind = doc.get("kind")
    if kind == "projects":
        return ProjectValue(tuple((int(h), float(b)) for h, b in doc["projects"]))
    if kind == "sum":
        return SumValue(float(doc.get("scale", 1.0)))
    if kind == "zero":
        return ZeroValue()
    if kind == "table":
        per_task = bool(doc.get("per_task", False))
        if per_task:
            entries = {(int(t), tuple(r)): float(v) for t, r, v in doc["entries"]}
        else:
            entries = {tuple(r): float(v) for r, v in doc["entries"]}
        return TableValue(entries, default=float(doc.get("default", 0.0)), per_task=per_task)
    raise InstanceError(f"unknown value kind {kind!r}")


def game_to_dict(spec: GameSpec) -> dict:
    to_dict = getattr(spec.value_fn, "to_dict", None)
    if to_dict is None:
        raise InstanceError("value function cannot be serialized")
    return {
        "budgets": list(spec.budgets),
        "max_coalitions": spec.max_coalitions,
        "max_deviation_size": spec.max_deviation_size,
        "n_tasks": spec.n_tasks,
        "division": spec.division.value,
        "arbitration": spec.arbitration.value,
        "admissible_tasks": None if spec.admissible_tasks is None else [list(t) for t in spec.admissible_tasks],
        "name": spec.name,
        "value": to_dict(),
    }


def game_from_dict(doc: dict, **overrides) -> GameSpec:
    try:
        fields: dict[str, Any] = dict(
            budgets=tuple(int(b) for b in doc["budgets"]),
            value_fn=value_from_dict(doc["value"]),
            max_coalitions=int(doc.get("max_coalitions", 1)),
            max_deviation_size=int(doc.get("max_deviation_size", 1)),
            n_tasks=doc.get("n_tasks"),
            division=doc.get("division", "proportional"),
            arbitration=doc.get("arbitration", "optimistic"),
            admissible_tasks=None
            if doc.get("admissible_tasks") is None
            else tuple(tuple(t) for t in doc["admissible_tasks"]),
            name=str(doc.get("name", "")),
        )
        fields.update({k: v for k, v in overrides.items() if v is not None})
        return GameSpec(**fields)
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"bad game: {exc}") from exc


def outcome_to_dict(outcome: Outcome) -> dict:
    return {
        "structure": [{"resources": list(c.resources), "task": c.task} for c in outcome.structure],
        "allocation": [list(row) for row in outcome.allocation],
    }


def outcome_from_dict(spec: GameSpec, doc: dict) -> Outcome:
    try:
        structure = [Coalition(tuple(c["resources"]), c.get("task")) for c in doc["structure"]]
        alloc = doc.get("allocation")
        if alloc is None:
            return make_outcome(spec, structure)
        return check_outcome(spec, Outcome(tuple(structure), tuple(tuple(r) for r in alloc)))
    except (KeyError, TypeError, ValueError, InvariantViolation) as exc:
        raise InstanceError(f"bad outcome: {exc}") from exc


def dump_instance(spec: GameSpec, outcome: Outcome) -> str:
    doc = {"schema": SCHEMA, "game": game_to_dict(spec), "outcome": outcome_to_dict(outcome)}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def load_instance(text: str) -> tuple[GameSpec, Outcome]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
        raise InstanceError(f"expected schema {SCHEMA!r}")
    spec = game_from_dict(doc.get("game") or {})
    outcome = outcome_from_dict(spec, doc.get("outcome") or {"structure": []})
    return spec, outcome
