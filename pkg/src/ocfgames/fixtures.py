"""Reusable value functions and small games.

``ProjectValue`` models the three-developer software company: a coalition
earns the bonus of the largest project its pooled man-hours can complete.
``TableValue`` stores an explicit value per resource vector and is what the
random test games are built from.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import Coalition, GameSpec, Outcome, make_outcome

__all__ = [
    "ProjectValue",
    "SumValue",
    "TableValue",
    "ZeroValue",
    "company_cf_outcome",
    "company_ocf_outcome",
    "random_kcoalition_game",
    "random_ktask_game",
    "random_table",
    "software_company_game",
]


@dataclass(frozen=True)
class ProjectValue:
    """Bonus of the largest project (hours, bonus) the pooled hours cover."""

    projects: tuple[tuple[int, float], ...] = ((12, 2400.0), (8, 1000.0))

    def __call__(self, c: Coalition, ctx=None) -> float:
        hours = c.total
        best = 0.0
        for need, bonus in self.projects:
            if hours >= need and bonus > best:
                best = bonus
        return best

    def to_dict(self) -> dict:
        return {"kind": "projects", "projects": [list(p) for p in self.projects]}


@dataclass(frozen=True)
class SumValue:
    """v(r) = scale * sum(r); additive, so any split has the same total."""

    scale: float = 1.0

    def __call__(self, c: Coalition, ctx=None) -> float:
        return self.scale * c.total

    def to_dict(self) -> dict:
        return {"kind": "sum", "scale": self.scale}


@dataclass(frozen=True)
class ZeroValue:
    def __call__(self, c: Coalition, ctx=None) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {"kind": "zero"}


class TableValue:
    """Explicit values keyed by resource vector (plus task id in K-task games).

    Vectors missing from the table are worth ``default``.
    """

    def __init__(self, table: Mapping, default: float = 0.0, per_task: bool = False):
        self.per_task = per_task
        self.default = float(default)
        self.table = {self._key(k): float(v) for k, v in table.items()}

    def _key(self, k):
        if self.per_task:
            t, r = k
            return (int(t), tuple(int(x) for x in r))
        return tuple(int(x) for x in k)

    def __call__(self, c: Coalition, ctx=None) -> float:
        key = (c.task, c.resources) if self.per_task else c.resources
        return self.table.get(key, self.default)

    def to_dict(self) -> dict:
        if self.per_task:
            entries = [[t, list(r), v] for (t, r), v in sorted(self.table.items())]
        else:
            entries = [[list(r), v] for r, v in sorted(self.table.items())]
        return {"kind": "table", "per_task": self.per_task, "default": self.default, "entries": entries}


def software_company_game(
    division="proportional", arbitration="optimistic", max_coalitions: int = 2, max_deviation_size: int = 3
) -> GameSpec:
    """Three developers with 8 hours each; big project 12h/2400, small 8h/1000."""
    return GameSpec(
        budgets=(8, 8, 8),
        value_fn=ProjectValue(),
        max_coalitions=max_coalitions,
        max_deviation_size=max_deviation_size,
        division=division,
        arbitration=arbitration,
        name="software_company",
    )


def company_cf_outcome(spec: GameSpec) -> Outcome:
    """{A, B} on the big project with all their hours, C alone on a small one."""
    return make_outcome(spec, [Coalition((8, 8, 0)), Coalition((0, 0, 8))])


def company_ocf_outcome(spec: GameSpec) -> Outcome:
    """Two big projects: A gives 8h and B 4h to one, B 4h and C 8h to the other."""
    return make_outcome(spec, [Coalition((8, 4, 0)), Coalition((0, 4, 8))])


def random_table(
    rng: np.random.Generator,
    budgets: Sequence[int],
    high: int = 10,
    density: float = 0.7,
    tasks: int | None = None,
) -> TableValue:
    """Random non-negative integer values on every non-zero sub-vector of the budgets.

    Values are drawn up to ``high * total * members`` so that pooling tends to
    pay off without making the table monotone.
    """
    entries = {}
    for r in itertools.product(*(range(b + 1) for b in budgets)):
        if not any(r):
            continue
        scale = sum(r) * sum(1 for x in r if x)
        for t in range(tasks) if tasks is not None else [None]:
            v = int(rng.integers(1, high * scale + 1)) if rng.random() < density else 0
            entries[(t, r) if tasks is not None else r] = v
    return TableValue(entries, per_task=tasks is not None)


def random_kcoalition_game(
    rng: np.random.Generator,
    max_players: int = 5,
    max_budget: int = 3,
    max_coalitions: int = 2,
    max_deviation_size: int = 2,
    arbitration="optimistic",
    division="proportional",
    high: int = 10,
) -> GameSpec:
    n = int(rng.integers(1, max_players + 1))
    budgets = tuple(int(x) for x in rng.integers(1, max_budget + 1, size=n))
    return GameSpec(
        budgets=budgets,
        value_fn=random_table(rng, budgets, high=high),
        max_coalitions=max_coalitions,
        max_deviation_size=min(max_deviation_size, n),
        division=division,
        arbitration=arbitration,
        name="random_kcoalition",
    )


def random_ktask_game(
    rng: np.random.Generator,
    max_players: int = 4,
    max_tasks: int = 4,
    max_budget: int = 2,
    max_coalitions: int = 2,
    max_deviation_size: int = 2,
    arbitration="optimistic",
    division="proportional",
    high: int = 10,
) -> GameSpec:
    n = int(rng.integers(1, max_players + 1))
    t = int(rng.integers(1, max_tasks + 1))
    budgets = tuple(int(x) for x in rng.integers(1, max_budget + 1, size=n))
    # each player may work on at most K of the tasks
    admissible = []
    for _ in range(n):
        size = int(rng.integers(1, min(max_coalitions, t) + 1))
        admissible.append(tuple(sorted(int(k) for k in rng.choice(t, size=size, replace=False))))
    return GameSpec(
        budgets=budgets,
        value_fn=random_table(rng, budgets, high=high, tasks=t),
        max_coalitions=max_coalitions,
        max_deviation_size=min(max_deviation_size, n),
        n_tasks=t,
        admissible_tasks=tuple(admissible),
        division=division,
        arbitration=arbitration,
        name="random_ktask",
    )
