"""Comparators: no cooperation and non-overlapping (partition) coalitions.

In both baselines a player commits its whole budget to a single block.  A
block is turned into coalitions by ``block_structure``: in K-coalition
games the block pools everything into one coalition; in K-task games each
member spreads its budget over the tasks owned by other block members.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

from .core import (
    Coalition,
    GameSpec,
    Mode,
    Outcome,
    coalition_value,
    empty_outcome,
    make_outcome,
    social_welfare,
    uses_context,
)

__all__ = [
    "PartitionOutcome",
    "block_structure",
    "partition_outcome",
    "solve_local",
    "solve_nonoverlapping",
]


@dataclass(frozen=True)
class PartitionOutcome:
    partition: tuple[tuple[int, ...], ...]
    outcome: Outcome

    def payoffs(self, n_players: int) -> tuple[float, ...]:
        return self.outcome.payoffs(n_players)

    def block_payoffs(self, n_players: int) -> tuple[float, ...]:
        p = self.outcome.payoffs(n_players)
        return tuple(math.fsum(p[i] for i in block) for block in self.partition)

    def welfare(self) -> float:
        return self.outcome.welfare()


def _ktask_block(spec: GameSpec, block: Sequence[int], open_tasks=None) -> list[Coalition]:
    owner = spec.task_owner
    if owner is None:
        # without owners the block may use any task no earlier block claimed
        owned = set(range(spec.n_tasks)) if open_tasks is None else set(open_tasks)
    else:
        owned = {t for t, o in enumerate(owner) if o in set(block)}
    n = spec.n_players
    vectors: dict[int, list[int]] = {}
    for i in block:
        tasks = [t for t in spec.tasks_for(i) if t in owned]
        if not tasks:
            continue
        if owner is not None:
            # cyclic order starting after the player spreads load around the block
            pivot = next((k for k, t in enumerate(tasks) if (owner[t] or 0) > i), 0)
            tasks = tasks[pivot:] + tasks[:pivot]
        tasks = tasks[: spec.max_coalitions]
        b = spec.budgets[i]
        q, rem = divmod(b, len(tasks))
        for k, t in enumerate(tasks):
            amt = q + (1 if k < rem else 0)
            if amt:
                vectors.setdefault(t, [0] * n)[i] += amt
    return [Coalition(tuple(v), t) for t, v in sorted(vectors.items())]


def block_structure(spec: GameSpec, block: Sequence[int], open_tasks=None) -> list[Coalition]:
    """Coalitions a block forms when its members commit their full budgets.

    ``open_tasks`` limits the tasks of an ownerless K-task game.
    """
    block = tuple(sorted(block))
    if spec.mode is Mode.KTASK:
        return _ktask_block(spec, block, open_tasks)
    r = [0] * spec.n_players
    for i in block:
        r[i] = spec.budgets[i]
    return [Coalition(tuple(r))]


def _open_tasks(spec: GameSpec, partition) -> list:
    """Per block, the tasks it may use: ownerless tasks go to the first block claiming them."""
    if spec.mode is not Mode.KTASK or spec.task_owner is not None:
        return [None] * len(partition)
    claimed: set[int] = set()
    out = []
    for block in partition:
        free = frozenset(t for t in range(spec.n_tasks) if t not in claimed)
        out.append(free)
        claimed.update(c.task for c in block_structure(spec, block, free))
    return out


def _partition_structure(spec: GameSpec, partition) -> list[Coalition]:
    out = []
    for block, free in zip(partition, _open_tasks(spec, partition)):
        out.extend(block_structure(spec, block, free))
    if spec.mode is Mode.KTASK:
        out.sort(key=lambda c: c.task)
    return out


def partition_outcome(spec: GameSpec, partition) -> PartitionOutcome:
    """Outcome of a partition, dropping coalitions that are worth nothing."""
    partition = tuple(tuple(sorted(b)) for b in sorted(partition, key=min))
    structure = _partition_structure(spec, partition)
    if not structure:
        return PartitionOutcome(partition, empty_outcome())
    if uses_context(spec):
        kept = structure
    else:
        kept = [c for c in structure if coalition_value(spec, c) != 0.0]
    return PartitionOutcome(partition, make_outcome(spec, kept) if kept else empty_outcome())


def _welfare(spec: GameSpec, partition, cache: dict | None = None) -> float:
    if cache is None or uses_context(spec):
        return social_welfare(spec, _partition_structure(spec, partition))
    # pure values: a partition's welfare is the sum of its blocks' welfare
    total = []
    for block, free in zip(partition, _open_tasks(spec, partition)):
        v = cache.get((block, free))
        if v is None:
            v = cache[(block, free)] = social_welfare(spec, block_structure(spec, block, free))
        total.append(v)
    return math.fsum(total)


def solve_local(spec: GameSpec) -> Outcome:
    """Every player on its own with its full budget."""
    singles = tuple((i,) for i in range(spec.n_players))
    return partition_outcome(spec, singles).outcome


def solve_nonoverlapping(spec: GameSpec, max_block_size: int | None = None) -> PartitionOutcome:
    """Greedy pairwise merging of blocks while welfare strictly increases.

    Each round merges the pair with the largest welfare gain; ties go to the
    lexicographically smallest pair.  Merges whose member set is not an
    admissible coalition are skipped.
    """
    partition = [(i,) for i in range(spec.n_players)]
    cache: dict = {}
    welfare = _welfare(spec, partition, cache)
    while True:
        best = None
        for a, b in itertools.combinations(range(len(partition)), 2):
            merged = tuple(sorted(partition[a] + partition[b]))
            if max_block_size is not None and len(merged) > max_block_size:
                continue
            if spec.mode is Mode.KCOALITION and not spec.support_ok(merged):
                continue
            # blocks stay ordered by smallest member, which also fixes task claims
            trial = sorted([p for k, p in enumerate(partition) if k not in (a, b)] + [merged], key=min)
            gain = _welfare(spec, trial, cache) - welfare
            key = (partition[a], partition[b])
            if gain > 1e-12 * max(1.0, abs(welfare)) and (
                best is None or gain > best[0] or (gain == best[0] and key < best[1])
            ):
                best = (gain, key, trial)
        if best is None:
            break
        partition = best[2]
        welfare = _welfare(spec, partition, cache)
    return partition_outcome(spec, partition)
