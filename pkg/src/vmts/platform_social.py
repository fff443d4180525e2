"""Grassroots social graph and its child-safe variant."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

from .kernel import AgentId, ClassKey, Configuration, GuardedTransaction, MachineTransaction, VMTSError
from .protocols import GenerationBounds, ProtocolSpec, order


class NotASocialGraphTransaction(VMTSError):
    pass


class MissingParent(VMTSError):
    pass


@dataclass(frozen=True)
class SGState:
    friends: frozenset = frozenset()

    def __post_init__(self):
        if not isinstance(self.friends, frozenset):
            object.__setattr__(self, "friends", frozenset(self.friends))


def _pair(p: AgentId, q: AgentId) -> tuple[AgentId, AgentId]:
    return (p, q) if p <= q else (q, p)


def _befriend(kind: str, p: AgentId, q: AgentId, machines: Mapping, extra: Mapping = {}) -> MachineTransaction:
    sp, sq = machines[p], machines[q]
    pre = {p: sp, q: sq, **extra}
    post = {p: SGState(sp.friends | {q}), q: SGState(sq.friends | {p}), **extra}
    return MachineTransaction((kind, p, q), pre, post)


def _unfriend(kind: str, p: AgentId, q: AgentId, machines: Mapping, extra: Mapping = {}) -> MachineTransaction:
    sp, sq = machines[p], machines[q]
    pre = {p: sp, q: sq, **extra}
    post = {p: SGState(sp.friends - {q}), q: SGState(sq.friends - {p}), **extra}
    return MachineTransaction((kind, p, q), pre, post)


def sg_pair_transactions(p: AgentId, q: AgentId, machines: Mapping) -> list[GuardedTransaction]:
    """Befriend or the two unfriend variants for one pair, per current states."""
    p, q = _pair(p, q)
    if q not in machines[p].friends:
        return [GuardedTransaction(_befriend("befriend", p, q, machines), frozenset({p, q}))]
    t = _unfriend("unfriend", p, q, machines)
    return [GuardedTransaction(t, frozenset({p})), GuardedTransaction(t, frozenset({q}))]


def sg_generate(agents, c, bounds: Optional[GenerationBounds] = None) -> list[GuardedTransaction]:
    """Every SG guarded transaction over ``agents`` applicable at ``c``.

    ``c`` may be a Configuration or a plain mapping of machine states.
    """
    machines = c.machines() if isinstance(c, Configuration) else c
    out = []
    for p, q in combinations(sorted(agents), 2):
        out.extend(sg_pair_transactions(p, q, machines))
    return out


def sg_class_of(t: MachineTransaction) -> ClassKey:
    kind = t.action[0] if t.action else None
    if kind not in ("befriend", "unfriend") or len(t.action) != 3:
        raise NotASocialGraphTransaction(f"{t.action!r} is not befriend/unfriend")
    return (kind, _pair(t.action[1], t.action[2]))


def mutuality_check(c) -> bool:
    """q is a friend of p exactly when p is a friend of q."""
    machines = c.machines() if isinstance(c, Configuration) else c
    for p, state in machines.items():
        for q in state.friends:
            if q not in machines or p not in machines[q].friends:
                return False
    return True


def friendship_edges(c) -> frozenset:
    machines = c.machines() if isinstance(c, Configuration) else c
    return frozenset(frozenset((p, q)) for p, s in machines.items() for q in s.friends)


def _sg_key_pair(key) -> Optional[tuple]:
    if not (isinstance(key, tuple) and len(key) == 2 and isinstance(key[1], tuple) and len(key[1]) == 2):
        return None
    p, q = key[1]
    if not (isinstance(p, str) and isinstance(q, str)) or p >= q:
        return None
    return p, q


class _FriendshipSpec(ProtocolSpec):
    """Shared state handling for the social-graph protocols."""

    def initial_state(self, p: AgentId) -> SGState:
        return SGState()

    def state_valid(self, agents, state) -> bool:
        return isinstance(state, SGState) and state.friends <= agents

    def state_to_json(self, state: SGState):
        return {"friends": sorted(state.friends)}

    def state_from_json(self, obj) -> SGState:
        return SGState(frozenset(obj["friends"]))


class SocialGraph(_FriendshipSpec):
    name = "sg"

    def generate(self, agents, machines, bounds):
        return sg_generate(agents, machines, bounds)

    def class_of(self, txn):
        return sg_class_of(txn)

    def unguarded(self, agents, machines, bounds):
        return []

    def will_options(self, agents, machines, agent, bounds):
        friends = machines[agent].friends
        return order(("unfriend" if q in friends else "befriend", _pair(agent, q)) for q in agents if q != agent)

    def key_participants(self, key):
        if not key or key[0] not in ("befriend", "unfriend"):
            return None
        pair = _sg_key_pair(key)
        return frozenset(pair) if pair else None

    def instantiate(self, key, agents, machines):
        if not self.key_valid(agents, key):
            return []
        p, q = key[1]
        return [gt for gt in sg_pair_transactions(p, q, machines) if sg_class_of(gt.txn) == key]

    def build(self, action, agents, machines):
        if len(action) != 3 or action[0] not in ("befriend", "unfriend"):
            raise NotASocialGraphTransaction(f"unknown action {action!r}")
        return self.instantiate((action[0], _pair(action[1], action[2])), agents, machines)

    def key_of_action(self, action, agents, machines):
        if len(action) != 3 or action[0] not in ("befriend", "unfriend"):
            raise NotASocialGraphTransaction(f"unknown action {action!r}")
        return (action[0], _pair(action[1], action[2]))


class ChildSafeSocialGraph(_FriendshipSpec):
    """Adults befriend as in SG; children befriend only with all four consents.

    ``parents`` maps each child to its parent, fixed outside agent state.
    Adults are the agents that are not children.
    """

    name = "csg"

    def __init__(self, parents: Mapping[AgentId, AgentId]):
        parents = dict(parents)
        for child, parent in parents.items():
            if parent is None or parent == child:
                raise MissingParent(f"child {child} has no valid parent")
            if parent in parents:
                raise MissingParent(f"parent {parent} of {child} is itself a child")
        self.parents = parents

    def _adult_pairs(self, agents):
        adults = sorted(a for a in agents if a not in self.parents)
        return combinations(adults, 2)

    def _child_pair_ok(self, agents, r, s) -> bool:
        if r == s or r not in self.parents or s not in self.parents:
            return False
        p, q = self.parents[r], self.parents[s]
        return p != q and {r, s, p, q} <= agents

    def _child_transactions(self, r, s, machines) -> list[GuardedTransaction]:
        r, s = _pair(r, s)
        p, q = self.parents[r], self.parents[s]
        extra = {p: machines[p], q: machines[q]}
        everyone = frozenset({r, s, p, q})
        if s in machines[r].friends:
            t = _unfriend("child-unfriend", r, s, machines, extra)
            return [GuardedTransaction(t, frozenset({g})) for g in sorted(everyone)]
        if q in machines[p].friends:
            return [GuardedTransaction(_befriend("child-befriend", r, s, machines, extra), everyone)]
        return []

    def generate(self, agents, machines, bounds):
        return csg_generate(agents, machines, self.parents, bounds)

    def class_of(self, txn):
        kind = txn.action[0] if txn.action else None
        if kind in ("befriend", "unfriend"):
            return sg_class_of(txn)
        if kind in ("child-befriend", "child-unfriend") and len(txn.action) == 3:
            return (kind, _pair(txn.action[1], txn.action[2]))
        raise NotASocialGraphTransaction(f"{txn.action!r} is not a child-safe transaction")

    def key_participants(self, key):
        if not key or key[0] not in ("befriend", "unfriend", "child-befriend", "child-unfriend"):
            return None
        pair = _sg_key_pair(key)
        if pair is None:
            return None
        r, s = pair
        if key[0].startswith("child-"):
            if r not in self.parents or s not in self.parents or self.parents[r] == self.parents[s]:
                return None
            return frozenset({r, s, self.parents[r], self.parents[s]})
        if r in self.parents or s in self.parents:
            return None
        return frozenset(pair)

    def instantiate(self, key, agents, machines):
        if not self.key_valid(agents, key):
            return []
        r, s = key[1]
        if key[0].startswith("child-"):
            gts = self._child_transactions(r, s, machines)
        else:
            gts = sg_pair_transactions(r, s, machines)
        return [gt for gt in gts if self.class_of(gt.txn) == key]

    def build(self, action, agents, machines):
        return self.instantiate(self.key_of_action(action, agents, machines), agents, machines)

    def key_of_action(self, action, agents, machines):
        if len(action) != 3 or action[0] not in ("befriend", "unfriend", "child-befriend", "child-unfriend"):
            raise NotASocialGraphTransaction(f"unknown action {action!r}")
        return (action[0], _pair(action[1], action[2]))


def csg_generate(agents, c, parents: Mapping[AgentId, AgentId], bounds: Optional[GenerationBounds] = None) -> list[GuardedTransaction]:
    """Child-safe transactions over ``agents`` applicable at ``c``."""
    spec = parents if isinstance(parents, ChildSafeSocialGraph) else ChildSafeSocialGraph(parents)
    machines = c.machines() if isinstance(c, Configuration) else c
    agents = frozenset(agents)
    out = []
    for p, q in spec._adult_pairs(agents):
        out.extend(sg_pair_transactions(p, q, machines))
    children = sorted(a for a in agents if a in spec.parents)
    for r, s in combinations(children, 2):
        if spec._child_pair_ok(agents, r, s):
            out.extend(spec._child_transactions(r, s, machines))
    return out
