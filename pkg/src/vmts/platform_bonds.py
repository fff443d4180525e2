"""Grassroots coins and bonds.

A bond is an ``(issuer, maturity)`` pair. Holdings are multisets stored as
sorted ``(issuer, maturity, count)`` triples so that states hash and compare
structurally. Maturity is judged by the holder's own local date.
"""

from __future__ import annotations

import random
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from itertools import combinations, permutations
from typing import Optional

from .kernel import AgentId, ClassKey, Configuration, GuardedTransaction, MachineTransaction, VMTSError
from .protocols import GenerationBounds, ProtocolSpec, order
from .runs import LASSO, Fire, Step

Bond = tuple  # (issuer, maturity)
Multiset = tuple  # sorted ((issuer, maturity, count), ...)


class NotAGCBTransaction(VMTSError):
    pass


def multiset(bonds: Mapping | Iterable) -> Multiset:
    """Canonical multiset from a Counter-like mapping or an iterable of bonds."""
    counts = Counter(bonds)
    return tuple(sorted((i, m, n) for (i, m), n in counts.items() if n > 0))


def counter(ms: Iterable) -> Counter:
    out: Counter = Counter()
    for i, m, n in ms:
        out[(i, m)] += n
    return out


def size(ms: Multiset) -> int:
    return sum(n for _, _, n in ms)


def is_multiset(ms) -> bool:
    if not isinstance(ms, tuple):
        return False
    for entry in ms:
        if not (isinstance(entry, tuple) and len(entry) == 3):
            return False
        i, m, n = entry
        if not isinstance(i, str) or not isinstance(m, int) or not isinstance(n, int) or m < 0 or n < 1:
            return False
    return list(ms) == sorted(ms) and len({(i, m) for i, m, _ in ms}) == len(ms)


def sub_multisets(ms: Multiset, max_size: int) -> list[Multiset]:
    """Nonempty sub-multisets of ``ms`` with at most ``max_size`` bonds."""
    out: list[Multiset] = []

    def go(idx: int, room: int, acc: list) -> None:
        if idx == len(ms):
            if acc:
                out.append(tuple(acc))
            return
        i, m, n = ms[idx]
        for take in range(min(n, room) + 1):
            go(idx + 1, room - take, acc + [(i, m, take)] if take else acc)

    go(0, max_size, [])
    return sorted(out)


@dataclass(frozen=True)
class GCBState:
    holdings: Multiset = ()
    local_date: int = 0

    def __post_init__(self):
        if not isinstance(self.holdings, tuple) or not is_multiset(self.holdings):
            object.__setattr__(self, "holdings", multiset(counter(tuple(self.holdings))))
        if self.local_date < 0:
            raise ValueError("local_date must be nonnegative")


def is_mature(bond: Bond, holder_state: GCBState) -> bool:
    return bond[1] <= holder_state.local_date


def _contains(big: Multiset, small: Multiset) -> bool:
    have = counter(big)
    return all(have[(i, m)] >= n for i, m, n in small)


def _plus(a: Multiset, b: Multiset) -> Multiset:
    return multiset(counter(a) + counter(b))


def _minus(a: Multiset, b: Multiset) -> Multiset:
    return multiset(counter(a) - counter(b))


def _mk(action, pre: dict, post: dict, guard) -> GuardedTransaction:
    return GuardedTransaction(MachineTransaction(action, pre, post), frozenset(guard))


def _txn(action: tuple, machines: Mapping) -> Optional[GuardedTransaction]:
    """Guarded transaction for a canonical action, or None if inapplicable."""
    kind = action[0]
    if kind == "mint":
        _, p, k, d = action
        s = machines[p]
        if k < 1 or d < 0:
            return None
        post = GCBState(_plus(s.holdings, ((p, d, k),)), s.local_date)
        return _mk(action, {p: s}, {p: post}, {p})
    if kind == "advance":
        _, p, date = action
        s = machines[p]
        if date <= s.local_date:
            return None
        return _mk(action, {p: s}, {p: GCBState(s.holdings, date)}, ())
    if kind == "swap":
        _, p, q, x, y = action
        if p == q or not x or not y:
            return None
        sp, sq = machines[p], machines[q]
        if not (_contains(sp.holdings, x) and _contains(sq.holdings, y)):
            return None
        if {(i, m) for i, m, _ in x} & {(i, m) for i, m, _ in y}:
            return None
        post_p = GCBState(_plus(_minus(sp.holdings, x), y), sp.local_date)
        post_q = GCBState(_plus(_minus(sq.holdings, y), x), sq.local_date)
        return _mk(action, {p: sp, q: sq}, {p: post_p, q: post_q}, {p, q})
    if kind == "pay":
        _, p, q, x = action
        if p == q or not x:
            return None
        sp, sq = machines[p], machines[q]
        if not _contains(sp.holdings, x):
            return None
        if any(i != q or not is_mature((i, m), sp) for i, m, _ in x):
            return None
        post_p = GCBState(_minus(sp.holdings, x), sp.local_date)
        post_q = GCBState(_plus(sq.holdings, x), sq.local_date)
        return _mk(action, {p: sp, q: sq}, {p: post_p, q: post_q}, {p})
    if kind == "redeem":
        _, p, q, x, y = action
        if p == q or size(x) != 1 or size(y) != 1 or x == y:
            return None
        sp, sq = machines[p], machines[q]
        (xi, xm, _), = x
        if xi != q or not is_mature((xi, xm), sp):
            return None
        if not (_contains(sp.holdings, x) and _contains(sq.holdings, y)):
            return None
        post_p = GCBState(_plus(_minus(sp.holdings, x), y), sp.local_date)
        post_q = GCBState(_plus(_minus(sq.holdings, y), x), sq.local_date)
        return _mk(action, {p: sp, q: sq}, {p: post_p, q: post_q}, {p})
    raise NotAGCBTransaction(f"unknown action {action!r}")


def gcb_class_of(t: MachineTransaction) -> ClassKey:
    a = t.action
    kind = a[0] if a else None
    if kind == "mint" and len(a) == 4:
        return a
    if kind == "advance" and len(a) == 3:
        return ("advance", a[1])
    if kind == "swap" and len(a) == 5:
        _, p, q, x, y = a
        return ("swap", (p, q), x, y) if p < q else ("swap", (q, p), y, x)
    if kind == "pay" and len(a) == 4:
        return a
    if kind == "redeem" and len(a) == 5:
        return a
    raise NotAGCBTransaction(f"{a!r} is not a coins-and-bonds transaction")


def _action_of_key(key: ClassKey, machines: Mapping) -> Optional[tuple]:
    kind = key[0]
    if kind == "advance":
        p = key[1]
        return ("advance", p, machines[p].local_date + 1)
    if kind == "swap":
        _, (p, q), x, y = key
        return ("swap", p, q, x, y)
    return key


def gcb_generate(agents, c, bounds: GenerationBounds) -> list[GuardedTransaction]:
    """Bounded enumeration of every GCB transaction applicable at ``c``."""
    machines = c.machines() if isinstance(c, Configuration) else c
    ordered = sorted(agents)
    out: list[GuardedTransaction] = []
    for p in ordered:
        for k in range(1, bounds.max_mint_quantity + 1):
            for d in range(bounds.max_date + 1):
                out.append(_txn(("mint", p, k, d), machines))
        out.append(_txn(("advance", p, machines[p].local_date + 1), machines))
    for p, q in combinations(ordered, 2):
        xs = sub_multisets(machines[p].holdings, bounds.max_multiset_size)
        ys = sub_multisets(machines[q].holdings, bounds.max_multiset_size)
        for x in xs:
            for y in ys:
                gt = _txn(("swap", p, q, x, y), machines)
                if gt is not None:
                    out.append(gt)
    for p, q in permutations(ordered, 2):
        sp = machines[p]
        payable = tuple(e for e in sp.holdings if e[0] == q and is_mature(e[:2], sp))
        for x in sub_multisets(payable, bounds.max_multiset_size):
            out.append(_txn(("pay", p, q, x), machines))
        for i, m, _ in payable:
            for j, n, _ in machines[q].holdings:
                gt = _txn(("redeem", p, q, ((i, m, 1),), ((j, n, 1),)), machines)
                if gt is not None:
                    out.append(gt)
    return out


def conservation_check(configs: Sequence[Configuration], steps: Sequence[Step]) -> bool:
    """Bonds in circulation equal the bonds minted so far, at every configuration."""
    minted: Counter = Counter()
    for idx, c in enumerate(configs):
        if idx > 0:
            step = steps[idx - 1]
            if isinstance(step, Fire) and step.gt.txn.action[0] == "mint":
                _, p, k, d = step.gt.txn.action
                minted[(p, d)] += k
        held: Counter = Counter()
        for p in c:
            held += counter(c.machine(p).holdings)
        if held != minted:
            return False
    return True


def _bond_horizon(segment: Sequence[Configuration], p: AgentId) -> int:
    """Largest maturity that can matter to ``p`` anywhere in ``segment``."""
    horizon = 0
    for c in segment:
        for i, m, _ in c.machine(p).holdings:
            horizon = max(horizon, m)
        for a in c:
            for key in c.volition(a):
                if key[0] in ("pay", "redeem") and key[1] == p:
                    horizon = max(horizon, max(m for _, m, _ in key[3]))
    return horizon


class CoinsAndBonds(ProtocolSpec):
    name = "gcb"
    default_semantics = LASSO

    def initial_state(self, p):
        return GCBState()

    def state_valid(self, agents, state) -> bool:
        return isinstance(state, GCBState) and all(i in agents for i, _, _ in state.holdings)

    def generate(self, agents, machines, bounds):
        return gcb_generate(agents, machines, bounds)

    def unguarded(self, agents, machines, bounds):
        return [_txn(("advance", p, machines[p].local_date + 1), machines) for p in sorted(agents)]

    def class_of(self, txn):
        return gcb_class_of(txn)

    def key_participants(self, key):
        if not isinstance(key, tuple) or not key:
            return None
        kind = key[0]
        if kind == "mint" and len(key) == 4:
            _, p, k, d = key
            ok = isinstance(p, str) and isinstance(k, int) and isinstance(d, int) and k >= 1 and d >= 0
            return frozenset({p}) if ok else None
        if kind == "advance" and len(key) == 2 and isinstance(key[1], str):
            return frozenset({key[1]})
        if kind == "swap" and len(key) == 4:
            _, pair, x, y = key
            if not (isinstance(pair, tuple) and len(pair) == 2 and pair[0] < pair[1]):
                return None
            if not (is_multiset(x) and is_multiset(y) and x and y):
                return None
            return frozenset(pair)
        if kind == "pay" and len(key) == 4:
            _, p, q, x = key
            if p == q or not is_multiset(x) or not x or any(i != q for i, _, _ in x):
                return None
            return frozenset({p, q})
        if kind == "redeem" and len(key) == 5:
            _, p, q, x, y = key
            if p == q or not (is_multiset(x) and is_multiset(y)) or size(x) != 1 or size(y) != 1:
                return None
            if x[0][0] != q or x == y:
                return None
            return frozenset({p, q})
        return None

    def key_valid(self, agents, key) -> bool:
        participants = self.key_participants(key)
        if participants is None or not participants <= agents:
            return False
        issuers = {e[0] for part in key[2:] if isinstance(part, tuple) for e in part}
        return issuers <= agents

    def instantiate(self, key, agents, machines):
        if not self.key_valid(agents, key):
            return []
        gt = _txn(_action_of_key(key, machines), machines)
        return [gt] if gt is not None else []

    def build(self, action, agents, machines):
        action = self.normalize_action(action, machines)
        participants = {a for a in action[1:3] if isinstance(a, str)} if action[0] in ("swap", "pay", "redeem") else {action[1]}
        if not participants <= agents:
            return []
        gt = _txn(action, machines)
        if gt is None or not all(self.state_valid(agents, s) for s in gt.txn.post.values()):
            return []
        return [gt]

    def normalize_action(self, action: tuple, machines: Mapping) -> tuple:
        """Fill defaults in scripted actions (``advance`` without a date)."""
        if not action:
            raise NotAGCBTransaction("empty action")
        if action[0] == "advance" and len(action) == 2:
            return ("advance", action[1], machines[action[1]].local_date + 1)
        if action[0] in ("swap", "redeem") and len(action) == 5:
            return action[:3] + (multiset(counter(action[3])), multiset(counter(action[4])))
        if action[0] == "pay" and len(action) == 4:
            return action[:3] + (multiset(counter(action[3])),)
        return action

    def key_of_action(self, action, agents, machines):
        action = self.normalize_action(action, machines)
        return gcb_class_of(MachineTransaction(action, {}, {}))

    def will_options(self, agents, machines, agent, bounds):
        keys = {self.class_of(gt.txn) for gt in gcb_generate(agents, machines, bounds) if agent in gt.guard}
        return order(keys)

    def sample_will(self, rng: random.Random, agents, machines, agent, bounds):
        others = sorted(a for a in agents if a != agent)
        mine = machines[agent].holdings
        kind = rng.choice(("mint", "swap", "pay", "redeem"))
        if kind == "mint" or not others:
            return ("mint", agent, rng.randint(1, bounds.max_mint_quantity), rng.randint(0, bounds.max_date))
        q = rng.choice(others)
        theirs = machines[q].holdings
        if kind == "swap":
            xs = sub_multisets(mine, bounds.max_multiset_size)
            ys = sub_multisets(theirs, bounds.max_multiset_size)
            if not xs or not ys:
                return None
            gt = _txn(("swap", agent, q, rng.choice(xs), rng.choice(ys)), machines)
            return self.class_of(gt.txn) if gt else None
        payable = tuple(e for e in mine if e[0] == q and is_mature(e[:2], machines[agent]))
        if not payable:
            return None
        if kind == "pay":
            return ("pay", agent, q, rng.choice(sub_multisets(payable, bounds.max_multiset_size)))
        if not theirs:
            return None
        i, m, _ = rng.choice(payable)
        j, n, _ = rng.choice(theirs)
        gt = _txn(("redeem", agent, q, ((i, m, 1),), ((j, n, 1),)), machines)
        return self.class_of(gt.txn) if gt else None

    def idle_loop(self, agents, c):
        machines = c.machines()
        return [Fire(_txn(("advance", p, machines[p].local_date + 1), machines)) for p in sorted(agents)]

    def lasso_closes(self, segment):
        """Closure up to local dates past every maturity that matters.

        Once an agent's date reaches the largest maturity it can observe in
        the loop, further advances change no enablement, so dates are
        compared after saturating at that horizon.
        """
        first, last = segment[0], segment[-1]
        if first.keys() != last.keys():
            return False
        for p in first:
            a, b = first[p], last[p]
            if a.volition != b.volition or a.machine.holdings != b.machine.holdings:
                return False
            h = _bond_horizon(segment, p)
            if min(a.machine.local_date, h) != min(b.machine.local_date, h):
                return False
        return True

    def state_to_json(self, state: GCBState):
        return {"holdings": [list(e) for e in state.holdings], "date": state.local_date}

    def state_from_json(self, obj) -> GCBState:
        return GCBState(multiset(counter(tuple(tuple(e) for e in obj["holdings"]))), int(obj["date"]))
