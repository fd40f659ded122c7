import itertools
import math

import numpy as np
import pytest

from ocfgames.core import (
    Coalition,
    GameSpec,
    InvariantViolation,
    apply_deviation,
    is_profitable,
    make_outcome,
    split_structure,
)
from ocfgames.fixtures import (
    SumValue,
    ZeroValue,
    company_cf_outcome,
    company_ocf_outcome,
    random_kcoalition_game,
    random_ktask_game,
    random_table,
    software_company_game,
)
from ocfgames.solver import (
    IDLE,
    Improvement,
    Move,
    SolverConfig,
    Termination,
    Transfer,
    _all_withdrawals,
    _brute_force_transfers,
    certify_o_stable,
    deviation_bound,
    enumerate_deviations_kcoalition,
    enumerate_transfers_ktask,
    find_profitable_deviation,
    solve,
    solve_kcoalition,
    solve_ktask,
    transfer_bound,
    transfer_to_deviation,
)


def squares(c, ctx=None):
    return float(c.total) ** 2


# -- K-coalition enumeration ----------------------------------------------------


def test_single_idle_player_can_form_singleton():
    spec = GameSpec((1,), SumValue())
    devs = list(enumerate_deviations_kcoalition(spec, make_outcome(spec, [])))
    assert [d.replacement for d in devs] == [(Coalition((1,)),)]


def test_grand_deviation_is_enumerated():
    spec = software_company_game()
    cf = company_cf_outcome(spec)
    welfare = [apply_deviation(spec, cf, d).welfare() for d in enumerate_deviations_kcoalition(spec, cf)]
    assert max(welfare) == 4800.0


def test_deviation_count_within_bound():
    spec = GameSpec((2, 2, 2), SumValue(), max_coalitions=2, max_deviation_size=2)
    # overlapping start: each player sits in two coalitions
    out = make_outcome(spec, [Coalition((1, 1, 0)), Coalition((0, 1, 1)), Coalition((1, 0, 1))])
    count = sum(1 for _ in enumerate_deviations_kcoalition(spec, out))
    bound = deviation_bound(3, 2, 2, 2) + deviation_bound(3, 1, 2, 2)
    assert bound == 3 * 81 + 3 * 9
    assert 0 < count <= bound


def test_enumeration_rejects_wrong_mode():
    spec = GameSpec((1, 1), ZeroValue(), n_tasks=2)
    with pytest.raises(ValueError):
        next(enumerate_deviations_kcoalition(spec, make_outcome(spec, [])))
    with pytest.raises(ValueError):
        solve_kcoalition(spec)
    with pytest.raises(ValueError):
        solve_ktask(software_company_game())


def test_replacements_respect_k_bound():
    rng = np.random.default_rng(5)
    for _ in range(20):
        spec = random_kcoalition_game(rng, max_players=3, max_budget=3, max_coalitions=1)
        out, _ = solve(spec, None, SolverConfig(max_iterations=2))
        for dev in enumerate_deviations_kcoalition(spec, out):
            for i in dev.deviators:
                assert sum(1 for c in dev.replacement if c.resources[i]) <= 1
            apply_deviation(spec, out, dev)


@pytest.mark.parametrize("seed", range(15))
def test_kcoalition_enumeration_complete(seed):
    rng = np.random.default_rng(seed)
    spec = random_kcoalition_game(rng, max_players=3, max_budget=2)
    out, _ = solve(spec, None, SolverConfig(max_iterations=2))
    enumerated = {}
    for dev in enumerate_deviations_kcoalition(spec, out):
        key = (dev.deviators, tuple(sorted(dev.withdrawals.items())))
        enumerated[key] = is_profitable(spec, out, dev).rhs
    oracle = set()
    for s in range(1, spec.max_deviation_size + 1):
        for S in itertools.combinations(range(spec.n_players), s):
            _, touched = split_structure(out, S)
            for wmap in _all_withdrawals(spec, out, S, touched):
                oracle.add((S, tuple(sorted(wmap.items()))))
    assert set(enumerated) == oracle


# -- search and loop ------------------------------------------------------------


def test_find_on_company_outcomes():
    spec = software_company_game()
    assert find_profitable_deviation(spec, company_ocf_outcome(spec)) is None
    dev, gain = find_profitable_deviation(spec, company_cf_outcome(spec))
    assert gain > 0
    assert find_profitable_deviation(GameSpec((2,), ZeroValue()), make_outcome(GameSpec((2,), ZeroValue()), [])) is None


def test_best_improvement_picks_largest_gain():
    spec = software_company_game()
    cf = company_cf_outcome(spec)
    _, best = find_profitable_deviation(spec, cf, SolverConfig(improvement=Improvement.BEST))
    _, first = find_profitable_deviation(spec, cf)
    assert best >= first


def test_company_from_idle():
    spec = software_company_game()
    out, report = solve_kcoalition(spec)
    assert out.welfare() == 4800.0
    assert out.payoffs() == (1600.0, 1600.0, 1600.0)
    assert report.terminated is Termination.STABLE
    assert all(b > a for a, b in zip(report.welfare_trace, report.welfare_trace[1:]))


def test_zero_value_returns_initial():
    spec = GameSpec((2, 2), ZeroValue())
    out, report = solve(spec)
    assert out.structure == () and report.iterations == 0


def test_iteration_cap_reported():
    out, report = solve(software_company_game(), None, SolverConfig(max_iterations=1))
    assert report.iterations == 1
    assert report.terminated is Termination.ITERATION_CAP


def test_conservative_cycle_detected():
    spec = software_company_game(arbitration="conservative")
    _, report = solve(spec)
    assert report.terminated in (Termination.CYCLE, Termination.STABLE)
    assert report.iterations < 100


def test_invariant_violation_on_welfare_drop(monkeypatch):
    import ocfgames.solver as solver_mod

    spec = software_company_game()
    # an apply step that loses every coalition must trip the runtime check
    monkeypatch.setattr(solver_mod, "apply_deviation", lambda spec, outcome, dev: make_outcome(spec, []))
    with pytest.raises(InvariantViolation):
        solve(spec)


def test_random_order_reaches_stable_outcome():
    spec = software_company_game()
    out, report = solve(spec, None, SolverConfig(deterministic_order=False, random_state=3))
    assert report.terminated is Termination.STABLE
    assert certify_o_stable(spec, out)


# -- K-task transfers -----------------------------------------------------------


def test_single_player_transfers():
    spec = GameSpec((2,), SumValue(), max_coalitions=2, n_tasks=2)
    out = make_outcome(spec, [Coalition((2,), 0)])
    moves = {t.moves[0] for t in enumerate_transfers_ktask(spec, out)}
    assert moves == {Move(0, 0, 1, 1), Move(0, 0, 1, 2), Move(0, 0, IDLE, 1), Move(0, 0, IDLE, 2)}


def test_single_player_transfers_from_idle():
    spec = GameSpec((2,), SumValue(), max_coalitions=2, n_tasks=2)
    out = make_outcome(spec, [Coalition((1,), 0)])
    moves = {t.moves[0] for t in enumerate_transfers_ktask(spec, out)}
    assert Move(0, IDLE, 1, 1) in moves and Move(0, IDLE, 0, 1) in moves
    assert not any(m.source == IDLE and m.amount > 1 for m in moves)


def test_transfer_count_within_bound():
    spec = GameSpec((1, 1), SumValue(), max_coalitions=2, n_tasks=2)
    assert transfer_bound(2, 1, 2, 1, idle=False) == 16
    for structure in ([], [Coalition((1, 0), 0)], [Coalition((1, 1), 0)], [Coalition((1, 0), 0), Coalition((0, 1), 1)]):
        out = make_outcome(spec, structure)
        count = sum(1 for _ in enumerate_transfers_ktask(spec, out))
        assert count <= 16


def test_transfer_to_deviation_signs():
    spec = GameSpec((2, 2), SumValue(), max_coalitions=2, n_tasks=2)
    out = make_outcome(spec, [Coalition((1, 1), 0), Coalition((1, 1), 1)])
    dev = transfer_to_deviation(spec, out, Transfer((Move(0, 1, 0, 1),)))
    assert dev.withdrawals == {0: (-1, 0), 1: (1, 0)}
    assert apply_deviation(spec, out, dev).structure == (Coalition((2, 1), 0), Coalition((0, 1), 1))


def test_transfer_overdraw_rejected():
    spec = GameSpec((2, 2), SumValue(), max_coalitions=2, n_tasks=2)
    out = make_outcome(spec, [Coalition((1, 1), 0)])
    with pytest.raises(ValueError):
        transfer_to_deviation(spec, out, Transfer((Move(0, 0, 1, 2),)))


def test_squares_toy_stacks_on_one_task():
    spec = GameSpec((2, 2), squares, max_coalitions=2, max_deviation_size=1, n_tasks=2)
    start = make_outcome(spec, [Coalition((1, 1), 0), Coalition((1, 1), 1)])
    assert start.welfare() == 8.0
    out, report = solve_ktask(spec, start)
    assert out.welfare() == 16.0
    assert len(out.structure) == 1 and out.structure[0].resources == (2, 2)
    assert all(b > a for a, b in zip([8.0] + report.welfare_trace, report.welfare_trace))


def test_single_task_fully_committed_is_stable():
    spec = GameSpec((2, 2), SumValue(), max_coalitions=1, max_deviation_size=2, n_tasks=1)
    start = make_outcome(spec, [Coalition((2, 2), 0)])
    out, report = solve_ktask(spec, start)
    assert report.iterations == 0 and out == start


@pytest.mark.parametrize("seed", range(15))
def test_ktask_enumeration_complete(seed):
    rng = np.random.default_rng(100 + seed)
    spec = random_ktask_game(rng, max_players=3, max_tasks=3, max_budget=2)
    out, _ = solve(spec, None, SolverConfig(max_iterations=2))

    def key(t):
        return tuple(sorted(t.moves))

    assert {key(t) for t in enumerate_transfers_ktask(spec, out)} == {key(t) for t in _brute_force_transfers(spec, out)}


# -- certifier ------------------------------------------------------------------


def test_certifier_on_company():
    spec = software_company_game()
    assert certify_o_stable(spec, company_ocf_outcome(spec))
    cert = certify_o_stable(spec, company_cf_outcome(spec))
    assert not cert and cert.gain > 0
    assert certify_o_stable(GameSpec((2, 2), ZeroValue(), 2, 2), make_outcome(GameSpec((2, 2), ZeroValue()), [Coalition((1, 1))]))


@pytest.mark.parametrize("seed", range(25))
def test_kcoalition_solver_sound_and_monotone(seed):
    rng = np.random.default_rng(1000 + seed)
    spec = random_kcoalition_game(rng, max_players=4, max_budget=2)
    out, report = solve(spec)
    assert report.terminated is Termination.STABLE
    trace = [0.0] + report.welfare_trace
    assert all(b > a for a, b in zip(trace, trace[1:]))
    assert certify_o_stable(spec, out)


@pytest.mark.parametrize("seed", range(25))
def test_ktask_solver_sound_and_monotone(seed):
    rng = np.random.default_rng(2000 + seed)
    spec = random_ktask_game(rng, max_players=4, max_tasks=4, max_budget=2)
    out, report = solve(spec)
    assert report.terminated is Termination.STABLE
    trace = [0.0] + report.welfare_trace
    assert all(b > a for a, b in zip(trace, trace[1:]))
    assert certify_o_stable(spec, out)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_termination_up_to_six_players(seed):
    rng = np.random.default_rng(3000 + seed)
    n = 6
    budgets = tuple(int(x) for x in rng.integers(1, 3, size=n))
    spec = GameSpec(budgets, random_table(rng, budgets), max_coalitions=2, max_deviation_size=2)
    _, report = solve(spec)
    assert report.terminated is Termination.STABLE
    assert math.isfinite(report.welfare_trace[-1] if report.welfare_trace else 0.0)
