"""Superadditive cover of a value function.

``v*(W)`` is the largest total value a pool of resources ``W`` can generate
when it is split into any multiset of coalitions.  It satisfies

    v*(W) = max(0, max_{0 != r <= W} v(r) + v*(W - r))

and is computed bottom-up over the lattice of sub-vectors of ``W``.  Players
with ``W_i = 0`` are dropped first, so the table has ``prod(W_i + 1)``
entries over the support only.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .core import Coalition, GameSpec, StructureContext, coalition_value

__all__ = [
    "CoverSolver",
    "CoverTable",
    "EnumerationCapExceeded",
    "brute_force_cover",
    "optimal_structure",
    "superadditive_cover",
]

DEFAULT_MAX_STATES = 10**6


class EnumerationCapExceeded(RuntimeError):
    """The brute-force search would visit more states than allowed."""


@dataclass
class CoverTable:
    """DP table over the sub-vector lattice of a queried pool.

    Keys are vectors restricted to ``support``; ``choice`` stores the first
    coalition of an optimal structure (``None`` when leaving it idle is best).
    """

    n_players: int
    support: tuple[int, ...]
    top: tuple[int, ...]
    value: dict[tuple[int, ...], float] = field(default_factory=dict)
    choice: dict[tuple[int, ...], tuple[int, ...] | None] = field(default_factory=dict)
    evaluations: int = 0
    transitions: int = 0

    def restrict(self, w: Sequence[int]) -> tuple[int, ...]:
        for i, x in enumerate(w):
            if x and i not in self.support:
                raise KeyError(f"player {i} is outside the table support")
        return tuple(w[i] for i in self.support)

    def expand(self, key: Sequence[int]) -> tuple[int, ...]:
        full = [0] * self.n_players
        for i, x in zip(self.support, key):
            full[i] = x
        return tuple(full)

    def __getitem__(self, w: Sequence[int]) -> float:
        return self.value[self.restrict(w)]


class CoverSolver:
    """Cached coalition values for one game and one valuation context.

    ``valuer`` overrides how candidate coalitions are priced (the solver
    passes a snapshot valuer for externality-aware games).
    """

    def __init__(
        self,
        spec: GameSpec,
        ctx: StructureContext | None = None,
        valuer: Callable[[Coalition], float] | None = None,
    ):
        self.spec = spec
        self.ctx = ctx
        self._valuer = valuer
        self._values: dict[tuple[int, ...], float] = {}
        self._bounded: dict[tuple, tuple[float, tuple[int, ...] | None]] = {}
        self.evaluations = 0

    def value(self, r: tuple[int, ...]) -> float:
        v = self._values.get(r)
        if v is None:
            c = Coalition(r)
            if not c.is_empty() and not self.spec.support_ok(c.members):
                v = 0.0
            elif self._valuer is not None:
                v = 0.0 if c.is_empty() else float(self._valuer(c))
            else:
                v = coalition_value(self.spec, c, self.ctx)
            self.evaluations += 1
            self._values[r] = v
        return v

    # -- unbounded cover ---------------------------------------------------

    def table(self, w: Sequence[int]) -> CoverTable:
        w = tuple(int(x) for x in w)
        if len(w) != self.spec.n_players:
            raise ValueError("resource vector has the wrong length")
        if any(x < 0 for x in w):
            raise ValueError(f"resource vector has a negative entry: {w}")
        support = tuple(i for i, x in enumerate(w) if x > 0)
        top = tuple(w[i] for i in support)
        tab = CoverTable(self.spec.n_players, support, top)
        start = self.evaluations
        ranges = [range(x + 1) for x in top]
        for key in itertools.product(*ranges):
            best, pick = 0.0, None
            for r in itertools.product(*(range(x + 1) for x in key)):
                if not any(r):
                    continue
                tab.transitions += 1
                val = self.value(tab.expand(r))
                if val <= 0.0:
                    continue
                total = val + tab.value[tuple(a - b for a, b in zip(key, r))]
                if total > best:
                    best, pick = total, r
            tab.value[key] = best
            tab.choice[key] = pick
        tab.evaluations = self.evaluations - start
        return tab

    # -- cover with per-player membership caps -----------------------------

    def bounded(self, w: Sequence[int], caps: Sequence[int]) -> tuple[float, list[Coalition]]:
        """Best structure from pool ``w`` where player i joins at most caps[i] coalitions."""
        w = tuple(int(x) for x in w)
        caps = tuple(max(0, int(c)) for c in caps)
        # a player without a free slot cannot use anything
        w = tuple(x if c > 0 else 0 for x, c in zip(w, caps))
        support = tuple(i for i, x in enumerate(w) if x > 0)
        n = self.spec.n_players
        # caps above the pool size never bind
        key_w = tuple(w[i] for i in support)
        key_c = tuple(min(caps[i], w[i]) for i in support)
        value = self._bounded_rec(support, key_w, key_c)
        structure = []
        kw, kc = key_w, key_c
        while True:
            _, pick = self._bounded[(support, kw, kc)]
            if pick is None:
                break
            full = [0] * n
            for i, x in zip(support, pick):
                full[i] = x
            structure.append(Coalition(tuple(full)))
            kw = tuple(a - b for a, b in zip(kw, pick))
            kc = tuple(min(c - (1 if b else 0), a) for a, b, c in zip(kw, pick, kc))
        return value, structure

    def _bounded_rec(self, support, kw, kc) -> float:
        key = (support, kw, kc)
        hit = self._bounded.get(key)
        if hit is not None:
            return hit[0]
        n = self.spec.n_players
        best, pick = 0.0, None
        ranges = [range(x + 1) if c > 0 else range(1) for x, c in zip(kw, kc)]
        for r in itertools.product(*ranges):
            if not any(r):
                continue
            full = [0] * n
            for i, x in zip(support, r):
                full[i] = x
            val = self.value(tuple(full))
            if val <= 0.0:
                continue
            nw = tuple(a - b for a, b in zip(kw, r))
            nc = tuple(min(c - (1 if b else 0), a) for a, b, c in zip(nw, r, kc))
            total = val + self._bounded_rec(support, nw, nc)
            if total > best:
                best, pick = total, r
        self._bounded[key] = (best, pick)
        return best


def superadditive_cover(
    spec: GameSpec, w: Sequence[int], ctx: StructureContext | None = None
) -> tuple[float, CoverTable]:
    """Exact ``v*(w)`` and the full DP table over sub-vectors of ``w``."""
    tab = CoverSolver(spec, ctx).table(w)
    return tab.value[tab.top], tab


def optimal_structure(spec: GameSpec, w: Sequence[int], table: CoverTable) -> list[Coalition]:
    """Trace the DP table back from ``w`` into an optimal structure."""
    key = table.restrict(w)
    if key not in table.value:
        raise KeyError("table was not built for this resource vector")
    out = []
    while table.choice[key] is not None:
        r = table.choice[key]
        out.append(Coalition(table.expand(r)))
        key = tuple(a - b for a, b in zip(key, r))
    return out


def brute_force_cover(
    spec: GameSpec,
    w: Sequence[int],
    caps: Sequence[int] | None = None,
    ctx: StructureContext | None = None,
    max_states: int = DEFAULT_MAX_STATES,
    valuer: Callable[[Coalition], float] | None = None,
    return_structure: bool = False,
):
    """Maximum total value over all multisets of coalitions fitting in ``w``.

    Plain recursive enumeration without memoization, kept as a test oracle.
    Zero-valued coalitions are skipped since they never raise the total.
    Refuses (``EnumerationCapExceeded``) once ``max_states`` nodes are visited.
    """
    w = tuple(int(x) for x in w)
    if any(x < 0 for x in w):
        raise ValueError(f"resource vector has a negative entry: {w}")
    n = len(w)
    caps = tuple(caps) if caps is not None else (10**9,) * n
    lattice = 1
    for x in w:
        lattice *= x + 1
    if lattice > max_states:
        raise EnumerationCapExceeded(f"lattice of {w} has {lattice} points")

    candidates = []
    for r in itertools.product(*(range(x + 1) for x in w)):
        if not any(r):
            continue
        c = Coalition(r)
        if not spec.support_ok(c.members):
            continue
        v = float(valuer(c)) if valuer is not None else coalition_value(spec, c, ctx)
        if v > 0.0:
            candidates.append((r, v))

    states = 0

    def rec(rem, start, left):
        nonlocal states
        states += 1
        if states > max_states:
            raise EnumerationCapExceeded(f"more than {max_states} states for {w}")
        best, best_set = 0.0, ()
        for j in range(start, len(candidates)):
            r, v = candidates[j]
            if any(a > b for a, b in zip(r, rem)):
                continue
            if any(a > 0 and k <= 0 for a, k in zip(r, left)):
                continue
            sub, sub_set = rec(
                tuple(b - a for a, b in zip(r, rem)),
                j,
                tuple(k - (1 if a else 0) for a, k in zip(r, left)),
            )
            if v + sub > best:
                best, best_set = v + sub, (r,) + sub_set
        return best, best_set

    best, best_set = rec(w, 0, caps)
    if return_structure:
        return best, [Coalition(r) for r in best_set]
    return best
