from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vmts.kernel import GuardedTransaction, MachineTransaction
from vmts.negatives import ToyChain
from vmts.platform_bonds import CoinsAndBonds
from vmts.platform_social import SocialGraph
from vmts.protocols import (
    BudgetExceeded,
    GenerationBounds,
    ProtocolInstance,
    ProtocolSpec,
    RunBounds,
    ScheduleMismatch,
    check_grassroots,
    check_oblivious,
    cross_transactions,
    enumerate_runs,
    find_interactivity_witness,
    guard_check,
    interleave,
    is_cross_step,
    restrict,
    schedules,
    validate_interleaving,
)
from vmts.runs import TERMINAL, Fire, Trace, check_run, replay


class Islands(ProtocolSpec):
    """Each agent toggles a private bit; nothing ever involves two agents."""

    name = "islands"

    def initial_state(self, p):
        return 0

    def state_valid(self, agents, state):
        return state in (0, 1)

    def generate(self, agents, machines, bounds):
        return [self._toggle(p, machines) for p in sorted(agents)]

    def _toggle(self, p, machines):
        s = machines[p]
        return GuardedTransaction(MachineTransaction(("toggle", p, s), {p: s}, {p: 1 - s}), frozenset({p}))

    def class_of(self, txn):
        return txn.action[:2]

    def key_participants(self, key):
        return frozenset({key[1]}) if len(key) == 2 and key[0] == "toggle" else None

    def instantiate(self, key, agents, machines):
        return [self._toggle(key[1], machines)] if self.key_valid(agents, key) else []

    def build(self, action, agents, machines):
        return self.instantiate(action[:2], agents, machines)

    def key_of_action(self, action, agents, machines):
        return tuple(action[:2])

    def state_to_json(self, state):
        return state

    def state_from_json(self, obj):
        return obj


SPLITS4 = [(frozenset(p), frozenset(q)) for p, q in [("a", "bcd"), ("ab", "cd"), ("ac", "bd")]]

def test_restrict_keeps_only_agents_in_scope():
    c = ProtocolInstance(SocialGraph(), "abcd").initial()
    gts = restrict(SocialGraph(), "ab", c, GenerationBounds())
    assert [gt.txn.action for gt in gts] == [("befriend", "a", "b")]


def test_cross_transactions_span_both_groups():
    spec = SocialGraph()
    c = ProtocolInstance(spec, "abcd").initial()
    cross = cross_transactions(spec, "ab", "cd", c, GenerationBounds())
    assert {gt.txn.action for gt in cross} == {("befriend", p, q) for p in "ab" for q in "cd"}
    with pytest.raises(ValueError):
        cross_transactions(spec, "ab", "bc", c, GenerationBounds())


def test_islands_have_no_cross_transactions_and_no_witness():
    spec = Islands()
    bounds = RunBounds(max_steps=4)
    assert guard_check(spec, "a", "b").ok
    assert find_interactivity_witness(spec, "a", "b", bounds) is None
    report = check_grassroots(spec, "a", "b", bounds)
    assert not report.grassroots and report.failed == ("interactive",)
    assert report.oblivious.oblivious


@pytest.mark.parametrize("p,q", SPLITS4)
def test_sg_and_gcb_cross_transactions_are_guarded(p, q):
    assert guard_check(SocialGraph(), p, q).ok
    assert guard_check(CoinsAndBonds(), p, q, depth=2).ok


def test_toychain_offenders_are_propagations():
    report = guard_check(ToyChain("ab"), "a", "b")
    assert not report.ok
    assert {gt.txn.action[0] for gt in report.offenders} == {"propagate"}


def test_schedules_enumerate_binomially_many():
    assert sorted(schedules(1, 1)) == [(0, 1), (1, 0)]
    assert len(list(schedules(3, 2))) == 10


def test_schedule_shape_is_checked():
    inst = ProtocolInstance(SocialGraph(), "a")
    t = Trace(inst.initial())
    u = Trace(ProtocolInstance(SocialGraph(), "b").initial())
    with pytest.raises(ScheduleMismatch):
        interleave(t, u, (0,))
    with pytest.raises(ScheduleMismatch):
        interleave(Trace(t.initial, (), None), Trace(u.initial, (), None), (), loop_schedule=(0,))


def test_every_interleaving_validates_against_component_runs():
    spec = SocialGraph()
    runs_p = enumerate_runs(spec, "ab", RunBounds(max_steps=3))
    runs_q = enumerate_runs(spec, "cd", RunBounds(max_steps=3))
    combined = ProtocolInstance(spec, "abcd")
    r1 = max(runs_p, key=lambda t: len(t.steps))
    r2 = max(runs_q, key=lambda t: len(t.steps))
    cp = replay(r1, ProtocolInstance(spec, "ab"))
    cq = replay(r2, ProtocolInstance(spec, "cd"))
    for sched in schedules(len(r1.steps), len(r2.steps)):
        trace = interleave(r1, r2, sched)
        configs = replay(trace, combined)
        assert validate_interleaving(cp, cq, configs)
        assert check_run(trace, combined).correct
    assert not validate_interleaving(cp, cq, configs[:-1])
    assert validate_interleaving(cp, cq, configs[:-1], complete=False)
    assert not validate_interleaving(cq, cp, list(reversed(configs)))


def test_enumerated_runs_are_correct_and_bounded():
    spec = SocialGraph()
    inst = ProtocolInstance(spec, "ab")
    runs = enumerate_runs(spec, "ab", RunBounds(max_steps=4))
    assert Trace(inst.initial()) in runs
    for r in runs:
        assert len(r.steps) <= 4
        assert check_run(r, inst).correct


def test_budget_exceeded_is_raised():
    with pytest.raises(BudgetExceeded):
        check_oblivious(SocialGraph(), "ab", "cd", RunBounds(max_steps=4, node_budget=100))


def test_sg_witness_befriends_across_groups():
    w = find_interactivity_witness(SocialGraph(), "ab", "cd", RunBounds(max_steps=4), TERMINAL)
    inst = ProtocolInstance(SocialGraph(), "abcd")
    assert check_run(w, inst).correct
    cross = [s for s in w.steps if is_cross_step(s, frozenset("ab"), frozenset("cd"))]
    assert cross and all(s.gt.txn.action[0] == "befriend" for s in cross)


def test_seeded_witness_search_is_reproducible():
    bounds = RunBounds(max_steps=4, seed=7)
    first = find_interactivity_witness(SocialGraph(), "ab", "cd", bounds)
    assert first == find_interactivity_witness(SocialGraph(), "ab", "cd", bounds)


def test_toychain_counterexample_pending_propagate():
    report = check_oblivious(ToyChain("ab"), "a", "b", RunBounds(max_steps=2))
    assert not report.oblivious
    assert any(k[0] == "propagate" for k in report.pending)
    mines = [s for s in report.counterexample.steps if isinstance(s, Fire)]
    assert [s.gt.txn.action[:2] for s in mines] == [("mine", "a")]


@settings(max_examples=25, deadline=None)
@given(st.data())
def test_interleavings_of_sg_runs_are_runs(data):
    spec = SocialGraph()
    runs_p = enumerate_runs(spec, "ab", RunBounds(max_steps=3), correct_only=False)
    runs_q = enumerate_runs(spec, "c", RunBounds(max_steps=3), correct_only=False)
    r1 = data.draw(st.sampled_from(runs_p))
    r2 = data.draw(st.sampled_from(runs_q))
    sched = data.draw(st.permutations([0] * len(r1.steps) + [1] * len(r2.steps)))
    combined = ProtocolInstance(spec, "abc")
    configs = replay(interleave(r1, r2, sched), combined)
    cp = replay(r1, ProtocolInstance(spec, "ab"))
    cq = replay(r2, ProtocolInstance(spec, "c"))
    assert validate_interleaving(cp, cq, configs)


@pytest.mark.parametrize("spec,semantics", [(SocialGraph(), TERMINAL), (CoinsAndBonds(), "lasso")])
def test_interleaved_volitions_never_name_cross_classes(spec, semantics):
    p, q = frozenset("a"), frozenset("b")
    bounds = RunBounds(max_steps=3)
    runs_p = enumerate_runs(spec, p, bounds, semantics)
    runs_q = enumerate_runs(spec, q, bounds, semantics)
    combined = ProtocolInstance(spec, p | q)
    for r1 in runs_p[:10]:
        for r2 in runs_q[:10]:
            sched = [0] * len(r1.prefix) + [1] * len(r2.prefix)
            loop = None if not r1.is_lasso else [0] * len(r1.loop) + [1] * len(r2.loop)
            for c in replay(interleave(r1, r2, sched, loop), combined):
                for agent in c:
                    for key in c.volition(agent):
                        assert not (spec.key_participants(key) & p and spec.key_participants(key) & q)
