from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vmts.kernel import MachineTransaction
from vmts.platform_bonds import (
    CoinsAndBonds,
    GCBState,
    NotAGCBTransaction,
    conservation_check,
    counter,
    gcb_class_of,
    gcb_generate,
    is_mature,
    is_multiset,
    multiset,
    size,
    sub_multisets,
)
from vmts.protocols import GenerationBounds, ProtocolInstance, random_run
from vmts.runs import ChangeVolition, Fire, replay

BONDS = st.lists(st.tuples(st.sampled_from("abc"), st.integers(0, 3)), max_size=6)


@given(BONDS)
def test_multiset_round_trip(bonds):
    ms = multiset(bonds)
    assert is_multiset(ms)
    assert size(ms) == len(bonds)
    assert multiset(counter(ms)) == ms


@given(BONDS, st.integers(1, 3))
def test_sub_multisets_are_contained_and_bounded(bonds, k):
    ms = multiset(bonds)
    have = counter(ms)
    for sub in sub_multisets(ms, k):
        assert 1 <= size(sub) <= k
        assert not counter(sub) - have


def test_maturity_is_judged_by_the_holder():
    assert is_mature(("a", 2), GCBState((), 2))
    assert not is_mature(("a", 2), GCBState((), 1))


def gcb(agents="ab", bounds=GenerationBounds(2, 2, 2)):
    return ProtocolInstance(CoinsAndBonds(), agents, bounds)


def act(inst, c, action, *willers):
    key = inst.spec.key_of_action(action, inst.agents, c.machines())
    for w in willers:
        c = inst.apply(ChangeVolition(w, c.volition(w) | {key}), c)
    (gt,) = inst.spec.build(action, inst.agents, c.machines())
    return inst.apply(Fire(gt), c)


def test_mint_then_swap():
    inst = gcb()
    c = act(inst, inst.initial(), ("mint", "a", 2, 1), "a")
    c = act(inst, c, ("mint", "b", 1, 0), "b")
    c = act(inst, c, ("swap", "a", "b", [("a", 1, 1)], [("b", 0, 1)]), "a", "b")
    assert c.machine("a").holdings == (("a", 1, 1), ("b", 0, 1))
    assert c.machine("b").holdings == (("a", 1, 1),)


def test_swap_class_is_symmetric_in_argument_order():
    inst = gcb()
    c = act(inst, inst.initial(), ("mint", "a", 1, 0), "a")
    c = act(inst, c, ("mint", "b", 1, 0), "b")
    k1 = inst.spec.key_of_action(("swap", "a", "b", (("a", 0, 1),), (("b", 0, 1),)), inst.agents, c.machines())
    k2 = inst.spec.key_of_action(("swap", "b", "a", (("b", 0, 1),), (("a", 0, 1),)), inst.agents, c.machines())
    assert k1 == k2


def test_pay_needs_a_mature_bond_of_the_payee():
    inst = gcb()
    c = act(inst, inst.initial(), ("mint", "b", 1, 1), "b")
    c = act(inst, c, ("mint", "a", 1, 0), "a")
    c = act(inst, c, ("swap", "a", "b", [("a", 0, 1)], [("b", 1, 1)]), "a", "b")
    pay = ("pay", "a", "b", (("b", 1, 1),))
    assert not inst.spec.build(pay, inst.agents, c.machines())
    c = act(inst, c, ("advance", "a"))
    c = act(inst, c, pay, "a")
    assert c.machine("b").holdings == (("a", 0, 1), ("b", 1, 1))
    assert c.machine("a").holdings == ()


def test_redeem_exchanges_a_mature_bond_for_one_of_the_issuer():
    inst = gcb()
    c = act(inst, inst.initial(), ("mint", "b", 2, 0), "b")
    c = act(inst, c, ("mint", "a", 1, 0), "a")
    c = act(inst, c, ("swap", "a", "b", [("a", 0, 1)], [("b", 0, 1)]), "a", "b")
    c = act(inst, c, ("mint", "b", 1, 2), "b")
    c = act(inst, c, ("redeem", "a", "b", [("b", 0, 1)], [("b", 2, 1)]), "a")
    assert c.machine("a").holdings == (("b", 2, 1),)


def test_advance_is_unguarded_and_always_enabled():
    inst = gcb()
    c = inst.initial()
    for _ in range(3):
        assert {("advance", "a"), ("advance", "b")} <= inst.enabled_classes(c)
        c = act(inst, c, ("advance", "a"))
    assert c.machine("a").local_date == 3


def test_unknown_action_rejected():
    with pytest.raises(NotAGCBTransaction):
        gcb_class_of(MachineTransaction(("burn", "a"), {"a": GCBState()}, {"a": GCBState((("a", 0, 1),))}))


def test_generated_transactions_have_nonempty_guards_except_advance():
    inst = gcb("abc")
    c = act(inst, inst.initial(), ("mint", "a", 1, 0), "a")
    c = act(inst, c, ("mint", "b", 1, 0), "b")
    for gt in gcb_generate(inst.agents, c, inst.bounds):
        assert bool(gt.guard) == (gt.txn.action[0] != "advance")


def test_conservation_check_catches_counterfeits():
    inst = gcb()
    c0 = inst.initial()
    c1 = act(inst, c0, ("mint", "a", 1, 0), "a")
    assert not conservation_check([c0, c1], [ChangeVolition("a", set())])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_random_runs_conserve_bonds(seed):
    inst = gcb("abcd", GenerationBounds(3, 3, 2))
    trace = random_run(inst, random.Random(seed), 40)
    assert conservation_check(replay(trace, inst), trace.steps)


def test_lasso_closure_saturates_dates_past_all_maturities():
    inst = gcb()
    c = act(inst, inst.initial(), ("mint", "a", 1, 1), "a")
    segment = [c]
    for p in "ab":
        segment.append(act(inst, segment[-1], ("advance", p)))
    assert not inst.lasso_closes(segment)
    c = segment[-1]
    later = [c, act(inst, act(inst, c, ("advance", "a")), ("advance", "b"))]
    assert inst.lasso_closes(later)


def test_state_json_round_trip():
    spec = CoinsAndBonds()
    s = GCBState((("a", 0, 2), ("b", 1, 1)), 4)
    assert spec.state_from_json(spec.state_to_json(s)) == s
