import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ocfgames.core import Coalition, GameSpec, coalition_value
from ocfgames.cover import (
    CoverSolver,
    EnumerationCapExceeded,
    brute_force_cover,
    optimal_structure,
    superadditive_cover,
)
from ocfgames.fixtures import SumValue, ZeroValue, random_table, software_company_game


def _random_spec(seed, n_max=4, r_max=3):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, n_max + 1))
    budgets = tuple(int(x) for x in rng.integers(1, r_max + 1, size=n))
    return GameSpec(budgets, random_table(rng, budgets), max_coalitions=n * r_max), rng


def test_company_cover():
    spec = software_company_game()
    value, table = superadditive_cover(spec, (8, 8, 8))
    assert value == 4800.0
    structure = optimal_structure(spec, (8, 8, 8), table)
    assert sum(spec.value_fn(c) for c in structure) == 4800.0
    assert all(sum(c.resources[i] for c in structure) <= 8 for i in range(3))
    assert brute_force_cover(software_company_game(), (8, 4, 4)) == 2400.0


def test_company_cover_brute_force():
    # a (9,9,9) lattice is 729 states; coarse enough for the oracle
    spec = GameSpec((8, 8, 8), software_company_game().value_fn)
    assert brute_force_cover(spec, (8, 8, 8)) == 4800.0


def test_zero_pool():
    spec = software_company_game()
    value, table = superadditive_cover(spec, (0, 0, 0))
    assert value == 0.0
    assert optimal_structure(spec, (0, 0, 0), table) == []


def test_single_entry_with_sum_value():
    spec = GameSpec((5, 5), SumValue())
    assert brute_force_cover(spec, (0, 5)) == 5.0
    assert superadditive_cover(spec, (0, 5))[0] == 5.0


def test_negative_entry_rejected():
    spec = software_company_game()
    with pytest.raises(ValueError):
        superadditive_cover(spec, (1, -1, 0))
    with pytest.raises(ValueError):
        brute_force_cover(spec, (1, -1, 0))


def test_brute_force_refuses_large_lattice():
    spec = GameSpec((50,) * 4, ZeroValue())
    with pytest.raises(EnumerationCapExceeded):
        brute_force_cover(spec, (50,) * 4)
    with pytest.raises(EnumerationCapExceeded):
        brute_force_cover(GameSpec((3, 3), SumValue()), (3, 3), max_states=5)


def test_table_restricted_to_support():
    spec = GameSpec((3, 3, 3), SumValue())
    _, table = superadditive_cover(spec, (2, 0, 1))
    assert table.support == (0, 2)
    assert len(table.value) == 3 * 2
    with pytest.raises(KeyError):
        table[(0, 1, 0)]


def test_lexicographic_tie_break():
    # every split is worth the same, so the first coalition is the smallest vector
    spec = GameSpec((2, 2), SumValue())
    _, table = superadditive_cover(spec, (2, 2))
    first = optimal_structure(spec, (2, 2), table)[0]
    assert first.resources == (0, 1)


@pytest.mark.parametrize("seed", range(30))
def test_matches_oracle(seed):
    spec, _ = _random_spec(seed)
    w = spec.budgets
    value, table = superadditive_cover(spec, w)
    assert value == brute_force_cover(spec, w)
    structure = optimal_structure(spec, w, table)
    assert sum(coalition_value(spec, c) for c in structure) == value


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_superadditive_dominant_monotone(seed):
    spec, rng = _random_spec(seed, n_max=3)
    _, table = superadditive_cover(spec, spec.budgets)
    star = table.value
    points = list(itertools.product(*(range(b + 1) for b in spec.budgets)))
    for w in points:
        if any(w):
            assert star[w] >= coalition_value(spec, Coalition(w))
    for _ in range(30):
        a = points[int(rng.integers(len(points)))]
        b = tuple(int(rng.integers(0, x - y + 1)) for x, y in zip(spec.budgets, a))
        s = tuple(x + y for x, y in zip(a, b))
        assert star[s] >= star[a] + star[b]
        # b is a second point below s, so it also checks monotonicity
        assert star[a] <= star[s] and star[b] <= star[s]


@pytest.mark.parametrize("seed", range(20))
def test_bounded_cover_matches_capped_oracle(seed):
    spec, rng = _random_spec(seed, n_max=3, r_max=3)
    caps = tuple(int(x) for x in rng.integers(0, 3, size=spec.n_players))
    value, structure = CoverSolver(spec).bounded(spec.budgets, caps)
    assert value == brute_force_cover(spec, spec.budgets, caps=caps)
    assert sum(coalition_value(spec, c) for c in structure) == value
    for i, cap in enumerate(caps):
        assert sum(1 for c in structure if c.resources[i]) <= cap


def test_evaluations_cached():
    calls = []

    def v(c, ctx=None):
        calls.append(c.resources)
        return float(c.total)

    spec = GameSpec((2, 2), v)
    solver = CoverSolver(spec)
    solver.table((2, 2))
    assert len(calls) == len(set(calls)) == 8
