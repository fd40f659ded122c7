import json

import numpy as np
import pytest

from ocfgames.core import Coalition, GameSpec, make_outcome
from ocfgames.fixtures import (
    SumValue,
    ZeroValue,
    company_ocf_outcome,
    random_ktask_game,
    software_company_game,
)
from ocfgames.serialization import SCHEMA, InstanceError, dump_instance, load_instance


def _same_game(a: GameSpec, b: GameSpec):
    assert a.budgets == b.budgets
    assert (a.max_coalitions, a.max_deviation_size, a.n_tasks) == (b.max_coalitions, b.max_deviation_size, b.n_tasks)
    assert (a.division, a.arbitration, a.admissible_tasks) == (b.division, b.arbitration, b.admissible_tasks)


def test_company_round_trip():
    spec = software_company_game(division="equal")
    out = company_ocf_outcome(spec)
    text = dump_instance(spec, out)
    assert json.loads(text)["schema"] == SCHEMA
    spec2, out2 = load_instance(text)
    _same_game(spec, spec2)
    assert out2 == out
    assert spec2.value_fn(Coalition((8, 4, 0))) == 2400.0
    assert dump_instance(spec2, out2) == text


def test_ktask_table_round_trip():
    spec = random_ktask_game(np.random.default_rng(4))
    out = make_outcome(spec, [])
    spec2, out2 = load_instance(dump_instance(spec, out))
    _same_game(spec, spec2)
    for (t, r), v in spec.value_fn.table.items():
        assert spec2.value_fn(Coalition(r, t)) == v


@pytest.mark.parametrize("value", [SumValue(2.5), ZeroValue()])
def test_simple_values(value):
    spec = GameSpec((2, 2), value)
    spec2, _ = load_instance(dump_instance(spec, make_outcome(spec, [])))
    assert spec2.value_fn(Coalition((1, 2))) == value(Coalition((1, 2)))


def test_missing_allocation_uses_division():
    doc = json.loads(dump_instance(software_company_game(), company_ocf_outcome(software_company_game())))
    doc["outcome"]["allocation"] = None
    _, out = load_instance(json.dumps(doc))
    assert out.payoffs() == (1600.0, 1600.0, 1600.0)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(schema="other/1"),
        lambda d: d["game"].pop("budgets"),
        lambda d: d["game"]["value"].update(kind="mystery"),
        lambda d: d["outcome"]["structure"].append({"resources": [9, 0, 0], "task": None}),
        lambda d: d["outcome"]["allocation"][0].__setitem__(0, 0.0),
    ],
)
def test_malformed_instances(mutate):
    doc = json.loads(dump_instance(software_company_game(), company_ocf_outcome(software_company_game())))
    mutate(doc)
    with pytest.raises(InstanceError):
        load_instance(json.dumps(doc))


def test_not_json():
    with pytest.raises(InstanceError):
        load_instance("{not json")


def test_unserializable_value():
    spec = GameSpec((1,), lambda c, ctx=None: 1.0)
    with pytest.raises(InstanceError):
        dump_instance(spec, make_outcome(spec, []))
