from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vmts.kernel import (
    Configuration,
    DomainMismatch,
    GuardedSystem,
    GuardedTransaction,
    IdentityTransaction,
    MachineTransaction,
    NoChange,
    NotEnabled,
    UnknownAgent,
    UnknownClass,
    change_volition,
    class_enabled,
    enabled,
    enabled_classes,
    fire,
    is_transition,
    machine_precondition_holds,
    validate_transaction,
)
from vmts.platform_social import SocialGraph, sg_class_of, sg_generate

from strategies import SG_KEYS3, sg_configurations


def by_action(t):
    return t.action


def flip(p, q):
    return MachineTransaction(("flip", p, q), {p: 0, q: 0}, {p: 1, q: 1})


@pytest.fixture
def c0():
    return Configuration.initial(["p", "q", "r"], lambda _: 0)


def test_identity_transaction_rejected():
    with pytest.raises(IdentityTransaction):
        validate_transaction(MachineTransaction("noop", {"p": 0}, {"p": 0}))


def test_pre_post_domains_must_agree():
    with pytest.raises(DomainMismatch):
        validate_transaction(MachineTransaction("bad", {"p": 0}, {"p": 1, "q": 1}))


def test_guard_outside_participants_rejected():
    with pytest.raises(DomainMismatch):
        GuardedTransaction(flip("p", "q"), frozenset({"r"}))


def test_machine_precondition(c0):
    assert machine_precondition_holds(flip("p", "q"), c0)
    assert not machine_precondition_holds(flip("p", "z"), c0)


def test_guard_needs_every_member_to_will(c0):
    gt = GuardedTransaction(flip("p", "q"), frozenset({"p", "q"}))
    key = ("flip", "p", "q")
    assert not enabled(gt, c0, by_action)
    c1 = change_volition("p", {key}, c0, {key})
    assert not enabled(gt, c1, by_action)
    c2 = change_volition("q", {key}, c1, {key})
    assert enabled(gt, c2, by_action)
    assert class_enabled(key, c2, [gt], by_action)
    assert enabled_classes(c2, [gt], by_action) == {key}


def test_unguarded_transaction_is_enabled_without_volition(c0):
    gt = GuardedTransaction(flip("p", "q"), frozenset())
    assert enabled(gt, c0, by_action)


def test_fire_discharges_class_from_every_agent(c0):
    key = ("flip", "p", "q")
    c = c0
    for agent in ("p", "q", "r"):
        c = change_volition(agent, {key}, c, {key})
    gt = GuardedTransaction(flip("p", "q"), frozenset({"p"}))
    c2 = fire(gt, c, by_action)
    assert all(key not in c2.volition(a) for a in c2)
    assert c2.machine("p") == c2.machine("q") == 1
    assert c2.machine("r") == 0


def test_fire_when_not_enabled_raises(c0):
    with pytest.raises(NotEnabled):
        fire(GuardedTransaction(flip("p", "q"), frozenset({"p"})), c0, by_action)


def test_change_volition_errors(c0):
    with pytest.raises(UnknownAgent):
        change_volition("z", {"k"}, c0, {"k"})
    with pytest.raises(NoChange):
        change_volition("p", set(), c0, {"k"})
    with pytest.raises(UnknownClass):
        change_volition("p", {"other"}, c0, {"k"})


def test_configuration_restrict_and_merge_round_trip(c0):
    left, right = c0.restrict({"p"}), c0.restrict({"q", "r"})
    assert Configuration.merge(left, right) == c0
    with pytest.raises(DomainMismatch):
        Configuration.merge(left, c0)


def test_guarded_system_lists_enabled_classes(c0):
    gts = [GuardedTransaction(flip("p", "q"), frozenset({"p"})), GuardedTransaction(flip("q", "r"), frozenset())]
    system = GuardedSystem(gts, by_action, c0.agents)
    assert system.enabled_classes(c0) == {("flip", "q", "r")}
    assert system.instances(("flip", "p", "q"), c0) == [gts[0]]


@given(sg_configurations(), st.data())
def test_fire_discharge_and_frame(c, data):
    gts = [gt for gt in sg_generate(c.agents, c) if enabled(gt, c, sg_class_of)]
    if not gts:
        return
    gt = data.draw(st.sampled_from(gts))
    c2 = fire(gt, c, sg_class_of)
    key = sg_class_of(gt.txn)
    for p in c:
        assert c2.volition(p) == c.volition(p) - {key}
        if p not in gt.txn.participants:
            assert c2.machine(p) == c.machine(p)
        else:
            assert c2.machine(p) == gt.txn.post[p]


@given(sg_configurations(), st.data())
def test_shrinking_a_guard_never_disables(c, data):
    for gt in sg_generate(c.agents, c):
        if not enabled(gt, c, sg_class_of):
            continue
        smaller = data.draw(st.frozensets(st.sampled_from(sorted(gt.guard))) if gt.guard else st.just(frozenset()))
        assert enabled(GuardedTransaction(gt.txn, smaller), c, sg_class_of)


@given(sg_configurations())
def test_generated_sg_transactions_are_well_formed(c):
    for gt in sg_generate(c.agents, c):
        validate_transaction(gt.txn)
        assert gt.guard <= gt.txn.participants


@given(sg_configurations(), st.sampled_from(("a", "b", "c")), st.frozensets(st.sampled_from(SG_KEYS3)))
def test_change_volition_agrees_with_oracle(c, agent, volition):
    spec_universe = set(SG_KEYS3)
    if volition == c.volition(agent):
        with pytest.raises(NoChange):
            change_volition(agent, volition, c, spec_universe)
        return
    c2 = change_volition(agent, volition, c, spec_universe)
    assert is_transition(c, c2, [], sg_class_of, spec_universe)
    assert [p for p in c if c[p] != c2[p]] == [agent]


@settings(max_examples=50)
@given(sg_configurations())
def test_social_graph_membership_matches_generation(c):
    spec = SocialGraph()
    for gt in sg_generate(c.agents, c):
        assert spec.is_member(c.agents, gt)
        assert not spec.is_member(c.agents, GuardedTransaction(gt.txn, frozenset()))
