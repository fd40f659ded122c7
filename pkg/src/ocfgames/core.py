"""Domain types and the payoff machinery of discrete OCF games.

A coalition is a resource vector ``r`` (one integer entry per player) and a
structure is a list of such coalitions.  Players may split their budget over
several coalitions at once, which is what makes the coalitions overlap.

Value functions are plain callables ``value_fn(coalition, ctx)``.  Pure value
functions ignore ``ctx``; externality-aware ones (see the HetNet scenario)
set ``uses_context = True`` and read the rest of the structure from ``ctx``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

__all__ = [
    "Arbitration",
    "Coalition",
    "Deviation",
    "Division",
    "GameSpec",
    "InvariantViolation",
    "Mode",
    "Outcome",
    "ProfitCheck",
    "StructureContext",
    "apply_deviation",
    "arbitration_payoff",
    "coalition_value",
    "divide_payoff",
    "empty_outcome",
    "idle_budget",
    "is_profitable",
    "make_outcome",
    "player_payoff",
    "social_welfare",
    "split_structure",
    "structure_values",
    "uses_context",
    "validate_structure",
]

EFFICIENCY_RTOL = 1e-9
# Strict inequality in the profitability test, with a guard against float noise.
PROFIT_RTOL = 1e-9


class InvariantViolation(RuntimeError):
    """Raised when a runtime invariant (efficiency, welfare monotonicity) breaks."""


class Mode(str, enum.Enum):
    KCOALITION = "k_coalition"
    KTASK = "k_task"


class Division(str, enum.Enum):
    PROPORTIONAL = "proportional"
    EQUAL = "equal"


class Arbitration(str, enum.Enum):
    CONSERVATIVE = "conservative"
    REFINED = "refined"
    OPTIMISTIC = "optimistic"


@dataclass(frozen=True)
class Coalition:
    """A resource vector, optionally bound to a task (K-task games)."""

    resources: tuple[int, ...]
    task: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "resources", tuple(int(v) for v in self.resources))

    @cached_property
    def members(self) -> tuple[int, ...]:
        return tuple(i for i, v in enumerate(self.resources) if v > 0)

    @cached_property
    def total(self) -> int:
        return sum(self.resources)

    def is_empty(self) -> bool:
        return not any(self.resources)

    def sort_key(self):
        return (-1 if self.task is None else self.task, self.resources)


@dataclass(frozen=True)
class StructureContext:
    """The rest of a structure, handed to externality-aware value functions.

    ``cache`` is scratch space for the value function; it is keyed by the
    value function itself and never affects equality.
    """

    coalitions: tuple[Coalition, ...]
    cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)


@dataclass(frozen=True)
class GameSpec:
    """Static description of a discrete OCF game.

    ``n_tasks`` selects the mode: ``None`` is a K-coalition game, an integer
    ``T`` is a K-task game with tasks ``0..T-1``.
    """

    budgets: tuple[int, ...]
    value_fn: Callable
    max_coalitions: int = 1
    max_deviation_size: int = 1
    n_tasks: int | None = None
    division: Division = Division.PROPORTIONAL
    arbitration: Arbitration = Arbitration.OPTIMISTIC
    # K-coalition: which member sets may form a coalition (None = any).
    admissible_support: Callable[[frozenset], bool] | None = None
    # K-task: tasks each player may contribute to (None = all tasks).
    admissible_tasks: tuple[tuple[int, ...], ...] | None = None
    # K-task: owning player of each task, used by the partition baselines.
    task_owner: tuple[int | None, ...] | None = None
    name: str = ""

    def __post_init__(self):
        budgets = tuple(int(b) for b in self.budgets)
        object.__setattr__(self, "budgets", budgets)
        object.__setattr__(self, "division", Division(self.division))
        object.__setattr__(self, "arbitration", Arbitration(self.arbitration))
        if len(budgets) < 1:
            raise ValueError("a game needs at least one player")
        if any(b < 1 for b in budgets):
            raise ValueError(f"budgets must be positive integers, got {budgets}")
        if self.max_coalitions < 1:
            raise ValueError("max_coalitions (K) must be >= 1")
        if not 1 <= self.max_deviation_size <= len(budgets):
            raise ValueError(
                f"max_deviation_size must lie in [1, {len(budgets)}], got {self.max_deviation_size}"
            )
        if self.n_tasks is not None:
            if self.n_tasks < 1:
                raise ValueError("a K-task game needs at least one task")
            if self.admissible_tasks is not None:
                adm = tuple(tuple(sorted(set(int(t) for t in ts))) for ts in self.admissible_tasks)
                if len(adm) != len(budgets):
                    raise ValueError("admissible_tasks needs one entry per player")
                if any(t < 0 or t >= self.n_tasks for ts in adm for t in ts):
                    raise ValueError("admissible task index out of range")
                object.__setattr__(self, "admissible_tasks", adm)
            if self.task_owner is not None and len(self.task_owner) != self.n_tasks:
                raise ValueError("task_owner needs one entry per task")

    @property
    def n_players(self) -> int:
        return len(self.budgets)

    @property
    def mode(self) -> Mode:
        return Mode.KCOALITION if self.n_tasks is None else Mode.KTASK

    @property
    def max_budget(self) -> int:
        return max(self.budgets)

    def tasks_for(self, player: int) -> tuple[int, ...]:
        if self.n_tasks is None:
            return ()
        if self.admissible_tasks is None:
            return tuple(range(self.n_tasks))
        return self.admissible_tasks[player]

    def support_ok(self, members: Iterable[int]) -> bool:
        if self.admissible_support is None:
            return True
        return bool(self.admissible_support(frozenset(members)))


@dataclass(frozen=True)
class Outcome:
    """A coalition structure together with its per-coalition payoff split."""

    structure: tuple[Coalition, ...]
    allocation: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "structure", tuple(self.structure))
        object.__setattr__(self, "allocation", tuple(tuple(float(x) for x in row) for row in self.allocation))
        if len(self.structure) != len(self.allocation):
            raise ValueError("allocation must index exactly the coalitions of the structure")

    @property
    def n_players(self) -> int:
        if self.structure:
            return len(self.structure[0].resources)
        return 0

    def values(self) -> tuple[float, ...]:
        return tuple(math.fsum(row) for row in self.allocation)

    def payoffs(self, n_players: int | None = None) -> tuple[float, ...]:
        n = self.n_players if n_players is None else n_players
        return tuple(math.fsum(row[i] for row in self.allocation) for i in range(n))

    def welfare(self) -> float:
        return math.fsum(self.values())


@dataclass(frozen=True)
class Deviation:
    """A deviation by ``deviators``.

    ``withdrawals`` maps a structure index (a coalition that also involves
    non-deviators) to the vector the deviators take out of it.  In K-task
    games entries may be negative, meaning the deviators deposit resources
    into that task.  ``replacement`` is the sub-structure the deviators form
    from their pooled resources; it replaces every coalition they fully own.
    """

    deviators: tuple[int, ...]
    withdrawals: Mapping[int, tuple[int, ...]]
    replacement: tuple[Coalition, ...]

    def withdrawal(self, idx: int, n_players: int) -> tuple[int, ...]:
        return tuple(self.withdrawals.get(idx, (0,) * n_players))


@dataclass(frozen=True)
class ProfitCheck:
    """Both sides of the profitability inequality for one deviation."""

    lhs: float
    rhs: float

    @property
    def gain(self) -> float:
        return self.rhs - self.lhs

    @property
    def profitable(self) -> bool:
        scale = max(1.0, abs(self.lhs), abs(self.rhs))
        return self.rhs - self.lhs > PROFIT_RTOL * scale

    def __bool__(self):
        return self.profitable


def uses_context(spec: GameSpec) -> bool:
    return bool(getattr(spec.value_fn, "uses_context", False))


# --------------------------------------------------------------------------
# valuation and division
# --------------------------------------------------------------------------


def _check_vector(spec: GameSpec, r: Sequence[int]) -> None:
    if len(r) != spec.n_players:
        raise ValueError(f"resource vector has length {len(r)}, expected {spec.n_players}")
    for i, (v, cap) in enumerate(zip(r, spec.budgets)):
        if v < 0 or v > cap:
            raise ValueError(f"player {i} contributes {v}, outside [0, {cap}]")


def coalition_value(spec: GameSpec, c: Coalition, ctx: StructureContext | None = None) -> float:
    """Value of ``c``; ``ctx`` carries the rest of the structure when needed."""
    _check_vector(spec, c.resources)
    if c.is_empty():
        return 0.0
    return float(spec.value_fn(c, ctx))


def structure_values(spec: GameSpec, structure: Sequence[Coalition]) -> list[float]:
    structure = tuple(structure)
    fn = spec.value_fn
    if not uses_context(spec):
        return [coalition_value(spec, c) for c in structure]
    bulk = getattr(fn, "structure_values", None)
    if bulk is not None:
        for c in structure:
            _check_vector(spec, c.resources)
        return [float(v) for v in bulk(structure)]
    return [
        coalition_value(spec, c, StructureContext(structure[:k] + structure[k + 1:]))
        for k, c in enumerate(structure)
    ]


def social_welfare(spec: GameSpec, structure: Sequence[Coalition]) -> float:
    return math.fsum(structure_values(spec, structure))


def divide_payoff(spec: GameSpec, c: Coalition, value: float) -> tuple[float, ...]:
    """Split ``value`` among the members of ``c`` by the game's division rule.

    The highest-index member absorbs the rounding residue so the shares sum
    to ``value`` exactly.
    """
    members = c.members
    if not members:
        raise ValueError("cannot divide the value of an all-zero coalition")
    n = len(c.resources)
    shares = [0.0] * n
    if spec.division is Division.EQUAL:
        weights = {i: 1.0 for i in members}
    else:
        weights = {i: float(c.resources[i]) for i in members}
    total = sum(weights.values())
    running = 0.0
    for i in members[:-1]:
        shares[i] = value * weights[i] / total
        running += shares[i]
    shares[members[-1]] = value - running
    return tuple(shares)


def make_outcome(spec: GameSpec, structure: Sequence[Coalition]) -> Outcome:
    """Fresh outcome: every coalition divided by the division rule."""
    structure = tuple(structure)
    validate_structure(spec, structure)
    values = structure_values(spec, structure)
    return Outcome(structure, tuple(divide_payoff(spec, c, v) for c, v in zip(structure, values)))


def empty_outcome() -> Outcome:
    return Outcome((), ())


def player_payoff(outcome: Outcome, i: int) -> float:
    return math.fsum(row[i] for row in outcome.allocation)


# --------------------------------------------------------------------------
# structural checks
# --------------------------------------------------------------------------


def idle_budget(spec: GameSpec, structure: Sequence[Coalition]) -> tuple[int, ...]:
    used = [0] * spec.n_players
    for c in structure:
        for i, v in enumerate(c.resources):
            used[i] += v
    return tuple(b - u for b, u in zip(spec.budgets, used))


def validate_structure(spec: GameSpec, structure: Sequence[Coalition]) -> None:
    """Budget feasibility, the K-bound, and per-mode task rules."""
    counts = [0] * spec.n_players
    seen_tasks: set[int] = set()
    for c in structure:
        _check_vector(spec, c.resources)
        if c.is_empty():
            raise ValueError("all-zero coalitions are never stored in a structure")
        for i in c.members:
            counts[i] += 1
        if spec.mode is Mode.KTASK:
            if c.task is None or not 0 <= c.task < spec.n_tasks:
                raise ValueError(f"K-task coalition needs a task id in [0, {spec.n_tasks}), got {c.task}")
            if c.task in seen_tasks:
                raise ValueError(f"task {c.task} appears twice in the structure")
            seen_tasks.add(c.task)
            for i in c.members:
                if c.task not in spec.tasks_for(i):
                    raise ValueError(f"player {i} may not contribute to task {c.task}")
        else:
            if c.task is not None:
                raise ValueError("K-coalition coalitions carry no task id")
            if not spec.support_ok(c.members):
                raise ValueError(f"member set {c.members} is not an admissible coalition")
    if any(v < 0 for v in idle_budget(spec, structure)):
        raise ValueError("structure exceeds a player's budget")
    over = [i for i, k in enumerate(counts) if k > spec.max_coalitions]
    if over:
        raise ValueError(f"players {over} join more than K={spec.max_coalitions} coalitions")


def split_structure(outcome: Outcome, deviators: Iterable[int]) -> tuple[list[int], list[int]]:
    """Indices of coalitions the deviators fully own, and of mixed ones they touch.

    A coalition is owned when every contributor and every payoff holder is a
    deviator.  It is mixed-and-touched when some deviator contributes to it
    or holds a payoff in it, but it is not owned.
    """
    dev = set(deviators)
    owned, touched = [], []
    for k, (c, row) in enumerate(zip(outcome.structure, outcome.allocation)):
        involved = {i for i in c.members} | {i for i, x in enumerate(row) if x != 0.0}
        if involved and involved <= dev:
            owned.append(k)
        elif involved & dev:
            touched.append(k)
    return owned, touched


def _sub(a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
    return tuple(x - y for x, y in zip(a, b))


# --------------------------------------------------------------------------
# arbitration and profitability
# --------------------------------------------------------------------------


def arbitration_payoff(
    spec: GameSpec,
    outcome: Outcome,
    deviation: Deviation,
    idx: int,
    value_after: float | None = None,
) -> float:
    """Total payoff the deviators keep from mixed coalition ``idx``.

    ``value_after`` is v(r - d(r)); it is computed when not supplied and only
    the optimistic rule needs it.
    """
    n = spec.n_players
    dev = set(deviation.deviators)
    row = outcome.allocation[idx]
    d = deviation.withdrawal(idx, n)
    kind = spec.arbitration
    if kind is Arbitration.CONSERVATIVE:
        return 0.0
    if kind is Arbitration.REFINED:
        if any(d):
            return 0.0
        return math.fsum(row[i] for i in dev)
    if value_after is None:
        rest = Coalition(_sub(outcome.structure[idx].resources, d), outcome.structure[idx].task)
        value_after = coalition_value(spec, rest)
    return value_after - math.fsum(x for i, x in enumerate(row) if i not in dev)


def _post_structure(outcome: Outcome, deviation: Deviation, n: int):
    """Structure after the deviation, plus bookkeeping for re-allocation.

    Returns (coalitions, origin) where origin[k] is ('keep', old_idx),
    ('mixed', old_idx) or ('new', None).
    """
    owned, touched = split_structure(outcome, deviation.deviators)
    owned = set(owned)
    touched = set(touched) | set(deviation.withdrawals)
    coalitions, origin = [], []
    for k, c in enumerate(outcome.structure):
        if k in owned:
            continue
        if k in touched:
            rest = Coalition(_sub(c.resources, deviation.withdrawal(k, n)), c.task)
            coalitions.append(rest)
            origin.append(("mixed", k))
        else:
            coalitions.append(c)
            origin.append(("keep", k))
    for c in deviation.replacement:
        coalitions.append(c)
        origin.append(("new", None))
    return coalitions, origin


def is_profitable(
    spec: GameSpec,
    outcome: Outcome,
    deviation: Deviation,
    valuer: Callable[[Coalition], float] | None = None,
) -> ProfitCheck:
    """Evaluate the profitability inequality for ``deviation``.

    ``valuer`` prices coalitions after the deviation.  By default pure value
    functions are called directly and externality-aware ones are priced in
    the full post-deviation structure.  The result is truthy iff the
    deviators' current total payoff is strictly below what they secure.
    """
    n = spec.n_players
    dev = deviation.deviators
    payoffs = outcome.payoffs(n)
    lhs = math.fsum(payoffs[i] for i in dev)
    _, touched = split_structure(outcome, dev)
    touched = sorted(set(touched) | set(deviation.withdrawals))

    if valuer is None:
        if uses_context(spec):
            coalitions, origin = _post_structure(outcome, deviation, n)
            values = structure_values(spec, [c for c in coalitions if not c.is_empty()])
            it = iter(values)
            priced = {}
            new_total = []
            for c, (kind, k) in zip(coalitions, origin):
                v = 0.0 if c.is_empty() else next(it)
                if kind == "mixed":
                    priced[k] = v
                elif kind == "new":
                    new_total.append(v)
            rhs_new = math.fsum(new_total)
            after = priced.__getitem__
        else:
            rhs_new = math.fsum(coalition_value(spec, c) for c in deviation.replacement)

            def after(k):
                c = outcome.structure[k]
                return coalition_value(spec, Coalition(_sub(c.resources, deviation.withdrawal(k, n)), c.task))
    else:
        rhs_new = math.fsum(valuer(c) for c in deviation.replacement)

        def after(k):
            c = outcome.structure[k]
            rest = Coalition(_sub(c.resources, deviation.withdrawal(k, n)), c.task)
            return 0.0 if rest.is_empty() else valuer(rest)

    arb = []
    for k in touched:
        v_after = after(k) if spec.arbitration is Arbitration.OPTIMISTIC else None
        arb.append(arbitration_payoff(spec, outcome, deviation, k, v_after))
    return ProfitCheck(lhs=lhs, rhs=rhs_new + math.fsum(arb))


# --------------------------------------------------------------------------
# applying a deviation
# --------------------------------------------------------------------------


def _spread(amount: float, weights: Mapping[int, float], n: int) -> list[float]:
    out = [0.0] * n
    keys = [i for i in sorted(weights) if weights[i] > 0]
    total = sum(weights[i] for i in keys)
    if not keys or total <= 0:
        return out
    running = 0.0
    for i in keys[:-1]:
        out[i] = amount * weights[i] / total
        running += out[i]
    out[keys[-1]] = amount - running
    return out


def _rearbitrate(spec, before: Coalition, row, after: Coalition, value_after: float, dev: set, d) -> tuple:
    n = spec.n_players
    kind = spec.arbitration
    nondev_prior = math.fsum(x for i, x in enumerate(row) if i not in dev)
    dev_prior = math.fsum(x for i, x in enumerate(row) if i in dev)
    untouched = not any(d)
    new = [0.0] * n
    for i, x in enumerate(row):
        if i not in dev:
            new[i] = x

    if kind is Arbitration.OPTIMISTIC:
        leftover = value_after - nondev_prior
        if untouched and leftover == dev_prior:
            return tuple(row)
        weights = {i: after.resources[i] for i in dev}
        if not any(weights.values()):
            # deviators left entirely: the leftover stays with them (pure payoff holders)
            weights = {i: before.resources[i] for i in dev}
        if not any(weights.values()):
            weights = {i: abs(row[i]) for i in dev}
        if not any(weights.values()):
            weights = {i: after.resources[i] for i in range(n) if i not in dev}
            for i, x in enumerate(_spread(leftover, weights, n)):
                new[i] += x
            return tuple(new)
        for i, x in enumerate(_spread(leftover, weights, n)):
            new[i] += x
        return tuple(new)

    if kind is Arbitration.REFINED and untouched:
        amount = dev_prior
        for i in dev:
            new[i] = row[i]
    else:
        amount = 0.0
    residual = value_after - amount - nondev_prior
    if residual != 0.0:
        weights = {i: after.resources[i] for i in range(n) if i not in dev}
        if not any(weights.values()):
            weights = {i: abs(row[i]) for i in range(n) if i not in dev}
        if not any(weights.values()):
            weights = {i: after.resources[i] for i in dev}
        for i, x in enumerate(_spread(residual, weights, n)):
            new[i] += x
    return tuple(new)


def apply_deviation(spec: GameSpec, outcome: Outcome, deviation: Deviation) -> Outcome:
    """Carry out ``deviation`` and decide the new payoffs.

    Mixed coalitions shrink to r - d(r); the deviators' owned coalitions are
    replaced by ``deviation.replacement``.  Non-deviators keep their prior
    payoff in every mixed coalition under the optimistic rule and the
    deviators split the leftover; under the other rules the deviators get
    their arbitration amount and non-deviators absorb the residual.
    """
    n = spec.n_players
    dev = set(deviation.deviators)
    coalitions, origin = _post_structure(outcome, deviation, n)
    keep = [k for k, c in enumerate(coalitions) if not c.is_empty()]
    structure = tuple(coalitions[k] for k in keep)
    origin = [origin[k] for k in keep]
    if spec.mode is Mode.KTASK:
        order = sorted(range(len(structure)), key=lambda k: structure[k].task)
        structure = tuple(structure[k] for k in order)
        origin = [origin[k] for k in order]
    validate_structure(spec, structure)

    if uses_context(spec):
        values = structure_values(spec, structure)
    else:
        values = []
        for c, (kind, k) in zip(structure, origin):
            if kind == "keep":
                values.append(math.fsum(outcome.allocation[k]))
            else:
                values.append(coalition_value(spec, c))

    allocation = []
    for c, v, (kind, k) in zip(structure, values, origin):
        if kind == "new":
            allocation.append(divide_payoff(spec, c, v))
        elif kind == "mixed":
            d = deviation.withdrawal(k, n)
            allocation.append(_rearbitrate(spec, outcome.structure[k], outcome.allocation[k], c, v, dev, d))
        else:
            row = outcome.allocation[k]
            old = math.fsum(row)
            if math.isclose(old, v, rel_tol=1e-15, abs_tol=0.0):
                allocation.append(row)
            elif old != 0.0:
                allocation.append(tuple(x * v / old for x in row))
            else:
                allocation.append(divide_payoff(spec, c, v))
    result = Outcome(structure, tuple(allocation))
    check_efficiency(result, values)
    return result


def check_efficiency(outcome: Outcome, values: Sequence[float]) -> None:
    for row, v in zip(outcome.allocation, values):
        s = math.fsum(row)
        if abs(s - v) > EFFICIENCY_RTOL * max(1.0, abs(v)):
            raise InvariantViolation(f"payoffs sum to {s}, coalition value is {v}")
