"""Bounded deviation search and the stabilization loops for OCF games.

K-coalition games enumerate, for every deviator set of size at most
``max_deviation_size``, every withdrawal combination from the coalitions
the deviators share with others; the deviators' replacement is the best
K-feasible structure over their pooled resources.  K-task games enumerate
transfers: each deviator moves some units from one task (or its idle pool)
to another.  Both loops accept profitable deviations until none is left.
"""
from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .core import (
    Arbitration,
    Coalition,
    Deviation,
    GameSpec,
    InvariantViolation,
    Mode,
    Outcome,
    ProfitCheck,
    StructureContext,
    apply_deviation,
    arbitration_payoff,
    coalition_value,
    empty_outcome,
    idle_budget,
    is_profitable,
    social_welfare,
    split_structure,
    uses_context,
)
from .cover import DEFAULT_MAX_STATES, CoverSolver, EnumerationCapExceeded, brute_force_cover

__all__ = [
    "ConvergenceReport",
    "IDLE",
    "Improvement",
    "Move",
    "SolverConfig",
    "Termination",
    "Transfer",
    "certify_o_stable",
    "deviation_bound",
    "enumerate_deviations_kcoalition",
    "enumerate_transfers_ktask",
    "find_profitable_deviation",
    "solve",
    "solve_kcoalition",
    "solve_ktask",
    "transfer_bound",
    "transfer_to_deviation",
]

log = logging.getLogger(__name__)

# Pseudo-task standing for a player's uncommitted budget in K-task transfers.
IDLE = -1


class Improvement(str, enum.Enum):
    FIRST = "first"
    BEST = "best"


class Termination(str, enum.Enum):
    STABLE = "stable"
    ITERATION_CAP = "iteration_cap"
    # an earlier outcome came back; only possible outside the optimistic rule
    CYCLE = "cycle"


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 100_000
    improvement: Improvement = Improvement.FIRST
    deterministic_order: bool = True
    random_state: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "improvement", Improvement(self.improvement))
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class ConvergenceReport:
    iterations: int = 0
    welfare_trace: list[float] = field(default_factory=list)
    terminated: Termination = Termination.STABLE
    # candidates that passed the profitability test but lowered realized welfare
    rejected: int = 0
    # non-monotone welfare steps, only possible outside the optimistic rule
    welfare_drops: int = 0
    idle_pool: bool = False


class Move(NamedTuple):
    player: int
    source: int
    dest: int
    amount: int


@dataclass(frozen=True)
class Transfer:
    """One move per deviator, applied atomically."""

    moves: tuple[Move, ...]

    @property
    def deviators(self) -> tuple[int, ...]:
        return tuple(m.player for m in self.moves)


# --------------------------------------------------------------------------
# bounds
# --------------------------------------------------------------------------


def deviation_bound(n: int, s: int, k: int, r: int) -> int:
    """Count bound for deviator sets of size exactly ``s``: C(N,s) (R+1)^(sK)."""
    return math.comb(n, s) * (r + 1) ** (s * k)


def transfer_bound(n: int, s: int, k: int, r: int, idle: bool = True) -> int:
    """Count bound C(N,s) [K^2 (R+1)]^s; the idle pool counts as one more task."""
    kk = k + 1 if idle else k
    return math.comb(n, s) * (kk * kk * (r + 1)) ** s


# --------------------------------------------------------------------------
# shared helpers
# --------------------------------------------------------------------------


class _Pricing:
    """Prices coalitions during one deviation scan.

    Pure value functions share one cache across the whole solve.  For
    externality-aware ones each deviator set gets a snapshot context: the
    current structure without the coalitions the deviators are involved in.
    """

    def __init__(self, spec: GameSpec, shared: dict | None = None):
        self.spec = spec
        self.contextual = uses_context(spec)
        self.shared = shared if shared is not None else {}
        self.solvers: dict[tuple, CoverSolver] = {}

    def for_set(self, outcome: Outcome, deviators: tuple[int, ...], owned, touched):
        spec = self.spec
        if not self.contextual:
            cache = self.shared

            def valuer(c: Coalition) -> float:
                v = cache.get(c)
                if v is None:
                    v = cache[c] = coalition_value(spec, c)
                return v

            solver = self.solvers.get(("pure", deviators))
            if solver is None:
                solver = self.solvers[("pure", deviators)] = CoverSolver(spec, valuer=valuer)
            return valuer, solver
        skip = set(owned) | set(touched)
        ctx = StructureContext(tuple(c for k, c in enumerate(outcome.structure) if k not in skip))
        cache: dict = {}

        def valuer(c: Coalition) -> float:
            v = cache.get(c)
            if v is None:
                v = cache[c] = coalition_value(spec, c, ctx)
            return v

        return valuer, CoverSolver(spec, valuer=valuer)


def _deviator_sets(spec: GameSpec, cfg: SolverConfig) -> list[tuple[int, ...]]:
    sets = []
    for s in range(1, spec.max_deviation_size + 1):
        for combo in itertools.combinations(range(spec.n_players), s):
            if spec.mode is Mode.KCOALITION and len(combo) > 1 and not spec.support_ok(combo):
                # non-admissible sets cannot share a coalition; their moves decompose
                continue
            sets.append(combo)
    if not cfg.deterministic_order:
        rng = np.random.default_rng(cfg.random_state)
        order = rng.permutation(len(sets))
        sets = [sets[k] for k in order]
    return sets


def _add(a, b):
    return tuple(x + y for x, y in zip(a, b))


# --------------------------------------------------------------------------
# K-coalition games
# --------------------------------------------------------------------------


def _withdrawal_slots(outcome: Outcome, deviators, touched):
    slots = []
    for k in touched:
        r = outcome.structure[k].resources
        for i in deviators:
            if r[i] > 0:
                slots.append((k, i, r[i]))
    return slots


def _kcoalition_candidates(
    spec: GameSpec, outcome: Outcome, cfg: SolverConfig, pricing: _Pricing
) -> Iterator[tuple[Deviation, ProfitCheck]]:
    n = spec.n_players
    idle = idle_budget(spec, outcome.structure)
    payoffs = outcome.payoffs(n)
    optimistic = spec.arbitration is Arbitration.OPTIMISTIC
    for S in _deviator_sets(spec, cfg):
        owned, touched = split_structure(outcome, S)
        valuer, solver = pricing.for_set(outcome, S, owned, touched)
        base = [0] * n
        for i in S:
            base[i] = idle[i]
        for k in owned:
            base = list(_add(base, outcome.structure[k].resources))
        lhs = math.fsum(payoffs[i] for i in S)
        slots = _withdrawal_slots(outcome, S, touched)
        arb_cache: dict = {}
        for combo in itertools.product(*(range(cap + 1) for _, _, cap in slots)):
            d = {k: [0] * n for k in touched}
            for (k, i, _), amt in zip(slots, combo):
                d[k][i] = amt
            w = list(base)
            used = [0] * n
            for k in touched:
                r = outcome.structure[k].resources
                for i in S:
                    w[i] += d[k][i]
                    if r[i] - d[k][i] > 0:
                        used[i] += 1
            caps = [spec.max_coalitions - used[i] if i in S else 0 for i in range(n)]
            value, replacement = solver.bounded(w, caps)
            arb = []
            for k in touched:
                dk = tuple(d[k])
                key = (k, dk)
                a = arb_cache.get(key)
                if a is None:
                    dev_k = Deviation(S, {k: dk}, ())
                    v_after = None
                    if optimistic:
                        rest = Coalition(tuple(x - y for x, y in zip(outcome.structure[k].resources, dk)))
                        v_after = 0.0 if rest.is_empty() else valuer(rest)
                    a = arb_cache[key] = arbitration_payoff(spec, outcome, dev_k, k, v_after)
                arb.append(a)
            withdrawals = {k: tuple(d[k]) for k in touched if any(d[k])}
            dev = Deviation(S, withdrawals, tuple(replacement))
            yield dev, ProfitCheck(lhs=lhs, rhs=value + math.fsum(arb))


def enumerate_deviations_kcoalition(
    spec: GameSpec, outcome: Outcome, cfg: SolverConfig | None = None
) -> Iterator[Deviation]:
    """Every bounded deviation, deviator sets by size then lexicographically."""
    if spec.mode is not Mode.KCOALITION:
        raise ValueError("enumerate_deviations_kcoalition needs a K-coalition game")
    cfg = cfg or SolverConfig()
    for dev, _ in _kcoalition_candidates(spec, outcome, cfg, _Pricing(spec)):
        yield dev


# --------------------------------------------------------------------------
# K-task games
# --------------------------------------------------------------------------


def _contributions(spec: GameSpec, outcome: Outcome) -> list[dict[int, int]]:
    contrib = [dict() for _ in range(spec.n_players)]
    for c in outcome.structure:
        for i in c.members:
            contrib[i][c.task] = c.resources[i]
    return contrib


def _player_moves(spec: GameSpec, i: int, held: dict[int, int], idle: int) -> list[Move]:
    tasks = spec.tasks_for(i)
    sources = [t for t in sorted(held) if held[t] > 0]
    if idle > 0:
        sources.append(IDLE)
    dests = list(tasks) + [IDLE]
    support = sum(1 for t in held if held[t] > 0)
    moves = []
    for src in sources:
        avail = idle if src == IDLE else held[src]
        for dst in dests:
            if dst == src:
                continue
            for amt in range(1, avail + 1):
                count = support
                if src != IDLE and amt == held[src]:
                    count -= 1
                if dst != IDLE and held.get(dst, 0) == 0:
                    count += 1
                if count > spec.max_coalitions:
                    continue
                moves.append(Move(i, src, dst, amt))
    return moves


def transfer_to_deviation(spec: GameSpec, outcome: Outcome, transfer: Transfer) -> Deviation:
    """Express a transfer as a deviation with signed withdrawals."""
    S = tuple(sorted(transfer.deviators))
    owned, _ = split_structure(outcome, S)
    return _transfer_deviation(spec, outcome, transfer, owned)


def _transfer_deviation(spec: GameSpec, outcome: Outcome, transfer: Transfer, owned) -> Deviation:
    n = spec.n_players
    S = tuple(sorted(transfer.deviators))
    if len(set(S)) != len(S):
        raise ValueError("a transfer has one move per deviator")
    by_task = {c.task: k for k, c in enumerate(outcome.structure)}
    delta: dict[int, list[int]] = {}
    for m in transfer.moves:
        if m.amount <= 0:
            raise ValueError("transfer amounts are positive")
        if m.source != IDLE:
            delta.setdefault(m.source, [0] * n)[m.player] -= m.amount
        if m.dest != IDLE:
            delta.setdefault(m.dest, [0] * n)[m.player] += m.amount
    owned_tasks = {outcome.structure[k].task for k in owned}
    withdrawals = {}
    replacement = []
    for t in sorted(set(delta) | owned_tasks):
        k = by_task.get(t)
        old = outcome.structure[k].resources if k is not None else (0,) * n
        ch = delta.get(t, [0] * n)
        new = tuple(a + b for a, b in zip(old, ch))
        if any(x < 0 for x in new):
            raise ValueError(f"transfer takes more than is held on task {t}")
        if k is None or t in owned_tasks:
            if any(new):
                replacement.append(Coalition(new, t))
        elif any(ch):
            withdrawals[k] = tuple(-x for x in ch)
    return Deviation(S, withdrawals, tuple(replacement))


def _ktask_candidates(
    spec: GameSpec, outcome: Outcome, cfg: SolverConfig, pricing: _Pricing
) -> Iterator[tuple[Transfer, Deviation, ProfitCheck]]:
    n = spec.n_players
    contrib = _contributions(spec, outcome)
    idle = idle_budget(spec, outcome.structure)
    payoffs = outcome.payoffs(n)
    for S in _deviator_sets(spec, cfg):
        owned, touched = split_structure(outcome, S)
        valuer, _ = pricing.for_set(outcome, S, owned, touched)
        lhs = math.fsum(payoffs[i] for i in S)
        per_player = [_player_moves(spec, i, contrib[i], idle[i]) for i in S]
        for moves in itertools.product(*per_player):
            transfer = Transfer(tuple(moves))
            dev = _transfer_deviation(spec, outcome, transfer, owned)
            rhs = math.fsum(valuer(c) for c in dev.replacement)
            arb = []
            for k in sorted(set(touched) | set(dev.withdrawals)):
                v_after = None
                if spec.arbitration is Arbitration.OPTIMISTIC:
                    c = outcome.structure[k]
                    d = dev.withdrawal(k, n)
                    rest = Coalition(tuple(x - y for x, y in zip(c.resources, d)), c.task)
                    v_after = 0.0 if rest.is_empty() else valuer(rest)
                arb.append(arbitration_payoff(spec, outcome, dev, k, v_after))
            yield transfer, dev, ProfitCheck(lhs=lhs, rhs=rhs + math.fsum(arb))


def enumerate_transfers_ktask(
    spec: GameSpec, outcome: Outcome, cfg: SolverConfig | None = None
) -> Iterator[Transfer]:
    """Every bounded transfer: per deviator one (source, dest, amount) move."""
    if spec.mode is not Mode.KTASK:
        raise ValueError("enumerate_transfers_ktask needs a K-task game")
    cfg = cfg or SolverConfig()
    contrib = _contributions(spec, outcome)
    idle = idle_budget(spec, outcome.structure)
    for S in _deviator_sets(spec, cfg):
        per_player = [_player_moves(spec, i, contrib[i], idle[i]) for i in S]
        for moves in itertools.product(*per_player):
            yield Transfer(tuple(moves))


# --------------------------------------------------------------------------
# search and loops
# --------------------------------------------------------------------------


def _candidates(spec, outcome, cfg, pricing):
    if spec.mode is Mode.KCOALITION:
        for dev, check in _kcoalition_candidates(spec, outcome, cfg, pricing):
            yield dev, check
    else:
        for _, dev, check in _ktask_candidates(spec, outcome, cfg, pricing):
            yield dev, check


def _accept(spec, outcome, dev, check, welfare_now):
    """Apply a profitable candidate; for externality-aware games re-check it.

    With externalities the snapshot prices are estimates, so the deviation
    is re-tested in the real post-deviation structure and must also raise
    realized welfare.
    """
    after = apply_deviation(spec, outcome, dev)
    if uses_context(spec):
        exact = is_profitable(spec, outcome, dev)
        if not exact.profitable or after.welfare() <= welfare_now + 1e-12 * max(1.0, abs(welfare_now)):
            return None, exact
        return after, exact
    return after, check


def find_profitable_deviation(
    spec: GameSpec,
    outcome: Outcome,
    cfg: SolverConfig | None = None,
    _pricing: _Pricing | None = None,
    _report: ConvergenceReport | None = None,
):
    """First (or best) profitable deviation as ``(deviation, gain)``, else ``None``."""
    cfg = cfg or SolverConfig()
    pricing = _pricing or _Pricing(spec)
    welfare_now = outcome.welfare()
    found = _find(spec, outcome, cfg, pricing, welfare_now, _report)
    if found is None:
        return None
    dev, check, _ = found
    return dev, check.gain


def _find(spec, outcome, cfg, pricing, welfare_now, report):
    if cfg.improvement is Improvement.FIRST:
        for dev, check in _candidates(spec, outcome, cfg, pricing):
            if not check.profitable:
                continue
            after, exact = _accept(spec, outcome, dev, check, welfare_now)
            if after is None:
                if report is not None:
                    report.rejected += 1
                continue
            return dev, exact, after
        return None
    ranked = [(dev, check) for dev, check in _candidates(spec, outcome, cfg, pricing) if check.profitable]
    order = sorted(range(len(ranked)), key=lambda j: (-ranked[j][1].gain, j))
    for j in order:
        dev, check = ranked[j]
        after, exact = _accept(spec, outcome, dev, check, welfare_now)
        if after is None:
            if report is not None:
                report.rejected += 1
            continue
        return dev, exact, after
    return None


def solve(spec: GameSpec, initial: Outcome | None = None, cfg: SolverConfig | None = None):
    """Iterate profitable deviations from ``initial`` until none is left.

    Returns ``(final_outcome, report)``.  Hitting ``max_iterations`` is not an
    error; the report says so.
    """
    cfg = cfg or SolverConfig()
    outcome = initial if initial is not None else empty_outcome()
    pricing = _Pricing(spec)
    report = ConvergenceReport(idle_pool=spec.mode is Mode.KTASK)
    welfare = social_welfare(spec, outcome.structure)
    strict = spec.arbitration is Arbitration.OPTIMISTIC
    seen = {_state_key(outcome)}
    while True:
        if report.iterations >= cfg.max_iterations:
            report.terminated = Termination.ITERATION_CAP
            break
        found = _find(spec, outcome, cfg, pricing, welfare, report)
        if found is None:
            report.terminated = Termination.STABLE
            break
        _, _, outcome = found
        new_welfare = outcome.welfare()
        if new_welfare <= welfare:
            report.welfare_drops += 1
            if strict and not uses_context(spec):
                raise InvariantViolation(
                    f"accepted deviation moved welfare from {welfare} to {new_welfare}"
                )
            log.info("welfare did not increase: %.6g -> %.6g", welfare, new_welfare)
        welfare = new_welfare
        report.iterations += 1
        report.welfare_trace.append(welfare)
        key = _state_key(outcome)
        if key in seen:
            report.terminated = Termination.CYCLE
            break
        seen.add(key)
    return outcome, report


def _state_key(outcome: Outcome):
    rows = tuple(tuple(round(x, 9) for x in row) for row in outcome.allocation)
    return tuple(sorted(zip((c.sort_key() for c in outcome.structure), rows)))


def solve_kcoalition(spec: GameSpec, initial: Outcome | None = None, cfg: SolverConfig | None = None):
    if spec.mode is not Mode.KCOALITION:
        raise ValueError("solve_kcoalition needs a K-coalition game")
    return solve(spec, initial, cfg)


def solve_ktask(spec: GameSpec, initial: Outcome | None = None, cfg: SolverConfig | None = None):
    if spec.mode is not Mode.KTASK:
        raise ValueError("solve_ktask needs a K-task game")
    return solve(spec, initial, cfg)


# --------------------------------------------------------------------------
# exhaustive certification (test oracle)
# --------------------------------------------------------------------------


@dataclass
class Certificate:
    stable: bool
    witness: Deviation | None = None
    gain: float = 0.0
    checked: int = 0

    def __bool__(self):
        return self.stable


def _all_withdrawals(spec: GameSpec, outcome: Outcome, S, touched) -> list[dict[int, tuple]]:
    """Every withdrawal map, built coalition by coalition."""
    n = spec.n_players
    maps: list[dict[int, tuple]] = [{}]
    for k in touched:
        r = outcome.structure[k].resources
        options = [()]
        for i in range(n):
            hi = r[i] if i in S else 0
            options = [o + (x,) for o in options for x in range(hi + 1)]
        maps = [({**m, k: o} if any(o) else m) for m in maps for o in options]
    return maps


def _all_task_vectors(spec: GameSpec, i: int) -> list[dict[int, int]]:
    """All ways player i can spread its budget over its tasks and the idle pool."""
    slots = list(spec.tasks_for(i))
    out = []
    b = spec.budgets[i]
    for combo in itertools.product(range(b + 1), repeat=len(slots)):
        if sum(combo) > b:
            continue
        if sum(1 for x in combo if x) > spec.max_coalitions:
            continue
        out.append({t: x for t, x in zip(slots, combo) if x})
    return out


def _single_move(old: dict[int, int], old_idle: int, new: dict[int, int], new_idle: int, i: int):
    diff = {t: new.get(t, 0) - old.get(t, 0) for t in set(old) | set(new)}
    diff[IDLE] = new_idle - old_idle
    diff = {t: x for t, x in diff.items() if x}
    if len(diff) != 2:
        return None
    (a, da), (b, db) = sorted(diff.items(), key=lambda kv: kv[1])
    if da >= 0 or da + db != 0:
        return None
    return Move(i, a, b, db)


def _brute_force_transfers(spec: GameSpec, outcome: Outcome) -> Iterator[Transfer]:
    contrib = _contributions(spec, outcome)
    idle = idle_budget(spec, outcome.structure)
    for s in range(1, spec.max_deviation_size + 1):
        for S in itertools.combinations(range(spec.n_players), s):
            per = []
            for i in S:
                moves = []
                for vec in _all_task_vectors(spec, i):
                    new_idle = spec.budgets[i] - sum(vec.values())
                    m = _single_move(contrib[i], idle[i], vec, new_idle, i)
                    if m is not None:
                        moves.append(m)
                per.append(moves)
            for moves in itertools.product(*per):
                yield Transfer(tuple(moves))


def certify_o_stable(
    spec: GameSpec, outcome: Outcome, max_states: int = DEFAULT_MAX_STATES
) -> Certificate:
    """Exhaustively look for a profitable bounded deviation.

    Replacement structures are found by brute-force enumeration, and the
    withdrawal and transfer sets are generated independently of the
    solver's enumerators.  Refuses instances whose search exceeds
    ``max_states`` deviations.
    """
    n = spec.n_players
    checked = 0
    best_gain = 0.0
    if spec.mode is Mode.KTASK:
        for transfer in _brute_force_transfers(spec, outcome):
            checked += 1
            if checked > max_states:
                raise EnumerationCapExceeded("too many transfers to certify")
            dev = transfer_to_deviation(spec, outcome, transfer)
            check = is_profitable(spec, outcome, dev)
            if check.profitable:
                return Certificate(False, dev, check.gain, checked)
        return Certificate(True, None, best_gain, checked)

    idle = idle_budget(spec, outcome.structure)
    for s in range(1, spec.max_deviation_size + 1):
        for S in itertools.combinations(range(n), s):
            owned, touched = split_structure(outcome, S)
            base = [idle[i] if i in S else 0 for i in range(n)]
            for k in owned:
                base = [a + b for a, b in zip(base, outcome.structure[k].resources)]
            for wmap in _all_withdrawals(spec, outcome, S, touched):
                checked += 1
                if checked > max_states:
                    raise EnumerationCapExceeded("too many deviations to certify")
                w = list(base)
                for d in wmap.values():
                    w = [a + b for a, b in zip(w, d)]
                caps = []
                for i in range(n):
                    if i not in S:
                        caps.append(0)
                        continue
                    stay = sum(
                        1
                        for k in touched
                        if outcome.structure[k].resources[i] - wmap.get(k, (0,) * n)[i] > 0
                    )
                    caps.append(spec.max_coalitions - stay)
                _, repl = brute_force_cover(spec, w, caps=caps, max_states=max_states, return_structure=True)
                dev = Deviation(S, wmap, tuple(repl))
                check = is_profitable(spec, outcome, dev)
                if check.profitable:
                    return Certificate(False, dev, check.gain, checked)
    return Certificate(True, None, best_gain, checked)
