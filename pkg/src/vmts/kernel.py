"""Core semantics of volitional multiagent transition systems.

Agents are plain strings. A configuration maps every agent to an
:class:`AgentState` holding a volition (a finite set of class keys) and a
machine state. Machine transactions carry an action label next to their
pre/post states; the label is what ``class_of`` functions read to produce a
canonical :data:`ClassKey`.

Everything here is immutable, so configurations can be hashed, cached and
shared freely between searches.
"""

from __future__ import annotations

from collections.abc import Callable, Hashable, Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Any

AgentId = str
ClassKey = tuple
ClassOf = Callable[["MachineTransaction"], ClassKey]


class VMTSError(Exception):
    """Base class for errors raised by the engine."""


class DomainMismatch(VMTSError):
    pass


class IdentityTransaction(VMTSError):
    pass


class NotEnabled(VMTSError):
    pass


class NoChange(VMTSError):
    pass


class UnknownClass(VMTSError):
    pass


class UnknownAgent(VMTSError):
    pass


class FrozenMap(Mapping):
    """Hashable read-only mapping; iteration follows sorted key order."""

    __slots__ = ("_data", "_hash")

    def __init__(self, data: Mapping | Iterable = ()):
        items = data.items() if isinstance(data, Mapping) else data
        self._data = dict(sorted(items, key=lambda kv: kv[0]))
        self._hash = None

    def __getitem__(self, key):
        return self._data[key]

    def __iter__(self) -> Iterator:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(self._data.items()))
        return self._hash

    def __eq__(self, other) -> bool:
        if isinstance(other, FrozenMap):
            if self._hash is not None and other._hash is not None and self._hash != other._hash:
                return False
            return self._data == other._data
        if isinstance(other, Mapping):
            return self._data == dict(other)
        return NotImplemented

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self._data!r})"


@dataclass(frozen=True)
class MachineTransaction:
    """A labelled pair of machine configurations over its participants."""

    action: tuple
    pre: FrozenMap
    post: FrozenMap

    def __post_init__(self):
        if not isinstance(self.pre, FrozenMap):
            object.__setattr__(self, "pre", FrozenMap(self.pre))
        if not isinstance(self.post, FrozenMap):
            object.__setattr__(self, "post", FrozenMap(self.post))

    @property
    def participants(self) -> frozenset[AgentId]:
        return frozenset(self.pre)

    @property
    def active(self) -> frozenset[AgentId]:
        """Participants whose machine state changes."""
        return frozenset(p for p in self.pre if self.post.get(p) != self.pre[p])


@dataclass(frozen=True)
class GuardedTransaction:
    txn: MachineTransaction
    guard: frozenset[AgentId] = field(default_factory=frozenset)

    def __post_init__(self):
        if not isinstance(self.guard, frozenset):
            object.__setattr__(self, "guard", frozenset(self.guard))
        if not self.guard <= self.txn.participants:
            raise DomainMismatch(
                f"guard {sorted(self.guard)} not within participants "
                f"{sorted(self.txn.participants)}"
            )

    @property
    def participants(self) -> frozenset[AgentId]:
        return self.txn.participants


@dataclass(frozen=True)
class AgentState:
    volition: frozenset = frozenset()
    machine: Hashable = None

    def __post_init__(self):
        if not isinstance(self.volition, frozenset):
            object.__setattr__(self, "volition", frozenset(self.volition))


class Configuration(FrozenMap):
    """Mapping from every agent of a fixed finite set to its AgentState."""

    __slots__ = ()

    @classmethod
    def initial(cls, agents: Iterable[AgentId], initial_state: Callable[[AgentId], Any]) -> Configuration:
        return cls((p, AgentState(frozenset(), initial_state(p))) for p in agents)

    @property
    def agents(self) -> frozenset[AgentId]:
        return frozenset(self._data)

    def machine(self, p: AgentId):
        return self._data[p].machine

    def volition(self, p: AgentId) -> frozenset:
        return self._data[p].volition

    def machines(self) -> dict[AgentId, Any]:
        return {p: s.machine for p, s in self._data.items()}

    def updated(self, changes: Mapping[AgentId, AgentState]) -> Configuration:
        data = dict(self._data)
        data.update(changes)
        return Configuration(data)

    def restrict(self, agents: Iterable[AgentId]) -> Configuration:
        return Configuration((p, self._data[p]) for p in agents)

    @classmethod
    def merge(cls, *parts: Configuration) -> Configuration:
        data: dict = {}
        for part in parts:
            overlap = data.keys() & part.keys()
            if overlap:
                raise DomainMismatch(f"agent sets overlap: {sorted(overlap)}")
            data.update(part.items())
        return cls(data)


def validate_transaction(t: MachineTransaction) -> None:
    """Raise unless ``t`` is a well-formed machine transaction."""
    if not t.pre:
        raise DomainMismatch("a transaction needs at least one participant")
    if set(t.pre) != set(t.post):
        raise DomainMismatch(
            f"pre is over {sorted(t.pre)} but post is over {sorted(t.post)}"
        )
    if t.pre == t.post:
        raise IdentityTransaction(f"{t.action!r} leaves every participant unchanged")


def machine_precondition_holds(t: MachineTransaction, c: Configuration) -> bool:
    for p, state in t.pre.items():
        if p not in c or c.machine(p) != state:
            return False
    return True


def enabled(gt: GuardedTransaction, c: Configuration, class_of: ClassOf) -> bool:
    if not machine_precondition_holds(gt.txn, c):
        return False
    if not gt.guard:
        return True
    key = class_of(gt.txn)
    return all(key in c.volition(q) for q in gt.guard)


def class_enabled(
    k: ClassKey,
    c: Configuration,
    candidates: Iterable[GuardedTransaction],
    class_of: ClassOf,
) -> bool:
    return any(class_of(gt.txn) == k and enabled(gt, c, class_of) for gt in candidates)


def enabled_classes(
    c: Configuration, candidates: Iterable[GuardedTransaction], class_of: ClassOf
) -> frozenset:
    return frozenset(class_of(gt.txn) for gt in candidates if enabled(gt, c, class_of))


def fire(gt: GuardedTransaction, c: Configuration, class_of: ClassOf) -> Configuration:
    """Take the volitional machine transaction induced by ``gt`` at ``c``.

    Participants move to their post states and the fired class is discharged
    from the volition of every agent in ``c``.
    """
    if not enabled(gt, c, class_of):
        raise NotEnabled(f"{gt.txn.action!r} guarded by {sorted(gt.guard)} is not enabled")
    key = class_of(gt.txn)
    changes = {}
    for p, state in c.items():
        machine = gt.txn.post[p] if p in gt.txn.post else state.machine
        volition = state.volition - {key} if key in state.volition else state.volition
        if machine is not state.machine or volition is not state.volition:
            changes[p] = AgentState(volition, machine)
    out = c.updated(changes)
    if out == c:
        raise IdentityTransaction(f"firing {gt.txn.action!r} leaves the configuration unchanged")
    return out


def change_volition(
    p: AgentId, new_volition: Iterable[ClassKey], c: Configuration, universe
) -> Configuration:
    """Replace the volition of ``p``; keys must belong to ``universe``.

    ``universe`` is anything supporting ``in`` over class keys.
    """
    if p not in c:
        raise UnknownAgent(p)
    new_volition = frozenset(new_volition)
    if new_volition == c.volition(p):
        raise NoChange(f"volition of {p} already equals the requested set")
    for k in new_volition:
        if k not in universe:
            raise UnknownClass(f"{k!r} is not a class of this instance")
    return c.updated({p: AgentState(new_volition, c.machine(p))})


def is_transition(
    c: Configuration,
    c2: Configuration,
    transactions: Iterable[GuardedTransaction],
    class_of: ClassOf,
    universe,
) -> bool:
    """Closure-membership check, written directly against the transition forms.

    Deliberately independent of :func:`fire` and :func:`change_volition`; the
    test suite uses it as an oracle for them.
    """
    if c.keys() != c2.keys() or c == c2:
        return False
    changed = [p for p in c if c[p] != c2[p]]
    machine_changed = [p for p in changed if c[p].machine != c2[p].machine]

    if not machine_changed:
        if len(changed) != 1:
            return False
        return all(k in universe for k in c2[changed[0]].volition)

    for gt in transactions:
        t = gt.txn
        q = t.pre.keys()
        if not q <= c.keys():
            continue
        if any(c[p].machine != t.pre[p] or c2[p].machine != t.post[p] for p in q):
            continue
        if any(c[p].machine != c2[p].machine for p in c if p not in q):
            continue
        key = class_of(t)
        if any(key not in c[g].volition for g in gt.guard):
            continue
        if all(c2[p].volition == c[p].volition - {key} for p in c):
            return True
    return False


class GuardedSystem:
    """An explicit finite set of guarded transactions with its equivalence.

    This is the small, fully enumerated counterpart of a protocol instance;
    both expose the same methods to :mod:`vmts.runs`.
    """

    def __init__(
        self,
        transactions: Iterable[GuardedTransaction],
        class_of: ClassOf,
        agents: Iterable[AgentId],
        universe=None,
    ):
        self.transactions = tuple(dict.fromkeys(transactions))
        for gt in self.transactions:
            validate_transaction(gt.txn)
        self.class_of = class_of
        self.agents = frozenset(agents)
        self.universe = (
            frozenset(class_of(gt.txn) for gt in self.transactions) if universe is None else universe
        )

    def __contains__(self, gt: GuardedTransaction) -> bool:
        return gt in self.transactions

    def candidates(self, c: Configuration) -> Iterable[GuardedTransaction]:
        return [gt for gt in self.transactions if machine_precondition_holds(gt.txn, c)]

    def enabled_transactions(self, c: Configuration) -> list[GuardedTransaction]:
        return [gt for gt in self.candidates(c) if enabled(gt, c, self.class_of)]

    def enabled_classes(self, c: Configuration) -> frozenset:
        return frozenset(self.class_of(gt.txn) for gt in self.enabled_transactions(c))

    def instances(self, key: ClassKey, c: Configuration) -> list[GuardedTransaction]:
        return [gt for gt in self.candidates(c) if self.class_of(gt.txn) == key]

    def lasso_closes(self, segment) -> bool:
        return segment[0] == segment[-1]
