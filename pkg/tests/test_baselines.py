import numpy as np
import pytest

from ocfgames.baselines import block_structure, partition_outcome, solve_local, solve_nonoverlapping
from ocfgames.core import Coalition, GameSpec
from ocfgames.fixtures import ZeroValue, random_kcoalition_game, random_ktask_game, software_company_game
from ocfgames.solver import solve


def test_company_local():
    out = solve_local(software_company_game())
    assert out.payoffs() == (1000.0, 1000.0, 1000.0)
    assert out.welfare() == 3000.0


def test_company_nonoverlapping():
    no = solve_nonoverlapping(software_company_game())
    assert no.partition == ((0, 1), (2,))
    assert no.payoffs(3) == (1200.0, 1200.0, 1000.0)
    assert no.welfare() == 3400.0


def test_block_cap_one_gives_singletons():
    no = solve_nonoverlapping(software_company_game(), max_block_size=1)
    assert no.partition == ((0,), (1,), (2,))


def test_zero_value_baselines():
    spec = GameSpec((1, 2, 3), ZeroValue())
    assert solve_local(spec).welfare() == 0.0
    no = solve_nonoverlapping(spec)
    assert no.partition == ((0,), (1,), (2,))
    assert no.welfare() == 0.0


def test_block_structure_pools_full_budgets():
    spec = software_company_game()
    assert block_structure(spec, (0, 2)) == [Coalition((8, 0, 8))]


def test_ktask_block_spreads_over_peer_tasks():
    spec = GameSpec((2, 2), ZeroValue(), max_coalitions=1, n_tasks=2, task_owner=(0, 1))
    structure = block_structure(spec, (0, 1))
    assert sorted((c.task, c.resources) for c in structure) == [(0, (0, 2)), (1, (2, 0))]


def test_partition_outcome_rejects_overlap():
    with pytest.raises(ValueError):
        partition_outcome(software_company_game(), ((0, 1), (1, 2)))


@pytest.mark.parametrize("seed", range(20))
def test_partitions_valid_and_dominance(seed):
    rng = np.random.default_rng(seed)
    make = random_kcoalition_game if seed % 2 else random_ktask_game
    spec = make(rng)
    no = solve_nonoverlapping(spec)
    flat = sorted(i for block in no.partition for i in block)
    assert flat == list(range(spec.n_players))
    assert solve_local(spec).welfare() <= no.welfare()
    final, _ = solve(spec, no.outcome)
    assert no.welfare() <= final.welfare()


def test_ownerless_tasks_claimed_once():
    spec = GameSpec((1, 1), lambda c, ctx=None: float(c.total), max_coalitions=1, n_tasks=1)
    local = solve_local(spec)
    assert local.structure == (Coalition((1, 0), 0),)
    no = solve_nonoverlapping(spec)
    assert no.partition == ((0, 1),)
    assert no.welfare() == 2.0
