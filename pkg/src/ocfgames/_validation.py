"""Input validation shared by the estimators and the CLI."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import Coalition, GameSpec, Outcome, validate_structure, check_efficiency, structure_values


def check_game(game) -> GameSpec:
    if not isinstance(game, GameSpec):
        raise TypeError(f"expected a GameSpec, got {type(game).__name__}")
    return game


def check_resource_vector(spec: GameSpec, r: Sequence[int]) -> tuple[int, ...]:
    arr = np.asarray(r)
    if arr.ndim != 1 or arr.shape[0] != spec.n_players:
        raise ValueError(f"resource vector must have shape ({spec.n_players},), got {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ValueError("resource vectors hold whole units")
    vec = tuple(int(x) for x in arr)
    for i, (x, cap) in enumerate(zip(vec, spec.budgets)):
        if x < 0 or x > cap:
            raise ValueError(f"player {i} contributes {x}, outside [0, {cap}]")
    return vec


def check_outcome(spec: GameSpec, outcome: Outcome) -> Outcome:
    """Structural validity plus efficiency of the allocation."""
    if not isinstance(outcome, Outcome):
        raise TypeError(f"expected an Outcome, got {type(outcome).__name__}")
    for c in outcome.structure:
        if not isinstance(c, Coalition):
            raise TypeError("structure entries must be Coalition objects")
    validate_structure(spec, outcome.structure)
    for row in outcome.allocation:
        if len(row) != spec.n_players:
            raise ValueError("allocation rows need one entry per player")
    check_efficiency(outcome, structure_values(spec, outcome.structure))
    return outcome
