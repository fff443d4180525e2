"""Protocol families, interleavings, and the grassroots checkers.

A :class:`ProtocolSpec` describes a protocol for every agent set at once: it
generates the guarded transactions available from a machine configuration
and names their equivalence classes. :class:`ProtocolInstance` fixes the
agent set and generation bounds, yielding the object :mod:`vmts.runs`
replays traces against.

The checkers work on desk-scale instances. Runs are enumerated depth first
in a canonical order (agents sorted, removals before additions before
fires), so counterexamples and witnesses are reproducible.
"""

from __future__ import annotations

import abc
import itertools
import random
from collections import deque
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from typing import Any, Optional

from .kernel import (
    AgentId,
    AgentState,
    ClassKey,
    Configuration,
    GuardedTransaction,
    MachineTransaction,
    VMTSError,
    enabled,
)
from .runs import (
    TERMINAL,
    ChangeVolition,
    Fire,
    NotALasso,
    ReplayFailed,
    Step,
    Trace,
    apply_step,
    check_lasso,
    check_run,
)


class BudgetExceeded(VMTSError):
    pass


class ScheduleMismatch(VMTSError):
    pass


@dataclass(frozen=True)
class GenerationBounds:
    """Caps that make the infinite transaction sets finite for enumeration."""

    max_mint_quantity: int = 1
    max_date: int = 1
    max_multiset_size: int = 1

    def __post_init__(self):
        for name in ("max_mint_quantity", "max_date", "max_multiset_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")


@dataclass(frozen=True)
class RunBounds:
    max_steps: int = 4
    generation: GenerationBounds = GenerationBounds()
    max_volition: int = 1
    node_budget: int = 10**7
    seed: int = 0


def order(items: Iterable) -> list:
    """Deterministic ordering for heterogeneous keys and transactions."""
    return sorted(items, key=repr)


class ProtocolSpec(abc.ABC):
    """A transactions-based protocol over a local-states function.

    Machine-state arguments named ``machines`` are mappings from agents to
    machine states; only the states of the agents involved are consulted.
    """

    name: str = "protocol"
    default_semantics: str = TERMINAL

    @abc.abstractmethod
    def initial_state(self, p: AgentId) -> Any: ...

    @abc.abstractmethod
    def state_valid(self, agents: frozenset, state: Any) -> bool: ...

    @abc.abstractmethod
    def generate(self, agents: frozenset, machines: Mapping, bounds: GenerationBounds) -> list[GuardedTransaction]: ...

    @abc.abstractmethod
    def class_of(self, txn: MachineTransaction) -> ClassKey: ...

    @abc.abstractmethod
    def key_participants(self, key: ClassKey) -> Optional[frozenset]:
        """Participants shared by every member of ``key``; None if malformed."""

    @abc.abstractmethod
    def instantiate(self, key: ClassKey, agents: frozenset, machines: Mapping) -> list[GuardedTransaction]:
        """All guarded members of ``key`` whose machine precondition holds."""

    @abc.abstractmethod
    def build(self, action: tuple, agents: frozenset, machines: Mapping) -> list[GuardedTransaction]:
        """Guarded variants of a scripted action at the given machine states."""

    @abc.abstractmethod
    def key_of_action(self, action: tuple, agents: frozenset, machines: Mapping) -> ClassKey: ...

    @abc.abstractmethod
    def state_to_json(self, state: Any) -> Any: ...

    @abc.abstractmethod
    def state_from_json(self, obj: Any) -> Any: ...

    def key_valid(self, agents: frozenset, key: ClassKey) -> bool:
        participants = self.key_participants(key)
        return participants is not None and participants <= agents

    def is_member(self, agents: frozenset, gt: GuardedTransaction) -> bool:
        """Whether ``gt`` belongs to R(agents)."""
        if not gt.participants <= agents:
            return False
        if not all(self.state_valid(agents, s) for s in (*gt.txn.pre.values(), *gt.txn.post.values())):
            return False
        try:
            return gt in self.build(gt.txn.action, agents, gt.txn.pre)
        except (VMTSError, KeyError, TypeError, ValueError):
            return False

    def unguarded(self, agents: frozenset, machines: Mapping, bounds: GenerationBounds) -> list[GuardedTransaction]:
        return [gt for gt in self.generate(agents, machines, bounds) if not gt.guard]

    def will_options(self, agents: frozenset, machines: Mapping, agent: AgentId, bounds: GenerationBounds) -> list[ClassKey]:
        """Classes ``agent`` may usefully will: generated ones it guards."""
        keys = {self.class_of(gt.txn) for gt in self.generate(agents, machines, bounds) if agent in gt.guard}
        return order(keys)

    def sample_will(self, rng: random.Random, agents: frozenset, machines: Mapping, agent: AgentId, bounds: GenerationBounds) -> Optional[ClassKey]:
        options = self.will_options(agents, machines, agent, bounds)
        return rng.choice(options) if options else None

    def idle_loop(self, agents: frozenset, c: Configuration) -> Optional[list[Step]]:
        """Steps of a minimal loop for lasso runs, or None when not needed."""
        return None

    def lasso_closes(self, segment: Sequence[Configuration]) -> bool:
        return segment[0] == segment[-1]


class _Universe:
    """Membership view of the class keys of R(P)."""

    def __init__(self, spec: ProtocolSpec, agents: frozenset):
        self._spec = spec
        self._agents = agents

    def __contains__(self, key) -> bool:
        try:
            return self._spec.key_valid(self._agents, key)
        except (TypeError, ValueError):
            return False


class ProtocolInstance:
    """F(P): a protocol fixed to an agent set and generation bounds."""

    def __init__(self, spec: ProtocolSpec, agents: Iterable[AgentId], bounds: GenerationBounds = GenerationBounds()):
        self.spec = spec
        self.agents = frozenset(agents)
        if not self.agents:
            raise ValueError("an instance needs at least one agent")
        self.bounds = bounds
        self.class_of = spec.class_of
        self.universe = _Universe(spec, self.agents)
        self._member: dict = {}
        self._enabled: dict = {}
        self._applied: dict = {}

    def __contains__(self, gt: GuardedTransaction) -> bool:
        hit = self._member.get(gt)
        if hit is None:
            hit = self._member[gt] = self.spec.is_member(self.agents, gt)
        return hit

    def initial(self) -> Configuration:
        return Configuration.initial(sorted(self.agents), self.spec.initial_state)

    def generate(self, c: Configuration) -> list[GuardedTransaction]:
        return self.spec.generate(self.agents, c.machines(), self.bounds)

    def instances(self, key: ClassKey, c: Configuration) -> list[GuardedTransaction]:
        return self.spec.instantiate(key, self.agents, c.machines())

    def enabled_transactions(self, c: Configuration) -> list[GuardedTransaction]:
        """Every enabled member of every enabled class (one per guard variant).

        A guarded transaction can only be enabled if its class is willed, so
        instantiating the willed classes plus the unguarded generators is
        exhaustive without enumerating the bounded transaction set.
        """
        hit = self._enabled.get(c)
        if hit is not None:
            return hit
        machines = c.machines()
        found = dict.fromkeys(self.spec.unguarded(self.agents, machines, self.bounds))
        willed = set().union(*(c.volition(p) for p in c))
        for key in willed:
            found.update(dict.fromkeys(self.spec.instantiate(key, self.agents, machines)))
        result = order(gt for gt in found if enabled(gt, c, self.class_of))
        self._enabled[c] = result
        return result

    def enabled_classes(self, c: Configuration) -> frozenset:
        return frozenset(self.class_of(gt.txn) for gt in self.enabled_transactions(c))

    def apply(self, step: Step, c: Configuration) -> Configuration:
        memo = (step, c)
        hit = self._applied.get(memo)
        if hit is None:
            hit = self._applied[memo] = apply_step(step, c, self)
        return hit

    def lasso_closes(self, segment: Sequence[Configuration]) -> bool:
        return self.spec.lasso_closes(segment)

    def idle_loop(self, c: Configuration) -> Optional[list[Step]]:
        return self.spec.idle_loop(self.agents, c)

    def moves(self, c: Configuration, max_volition: int, fire_unguarded: bool = True) -> list[tuple[Step, Configuration]]:
        """Successor steps used by the enumerators, deduplicated by target."""
        out: dict[Configuration, Step] = {}
        machines = c.machines()
        for p in sorted(c):
            current = c.volition(p)
            for key in order(current):
                step = ChangeVolition(p, current - {key})
                out.setdefault(self.apply(step, c), step)
            if len(current) < max_volition:
                for key in self.spec.will_options(self.agents, machines, p, self.bounds):
                    if key not in current:
                        step = ChangeVolition(p, current | {key})
                        out.setdefault(self.apply(step, c), step)
        for gt in self.enabled_transactions(c):
            if not fire_unguarded and not gt.guard:
                continue
            step = Fire(gt)
            out.setdefault(self.apply(step, c), step)
        return [(step, target) for target, step in out.items()]


class _Budget:
    def __init__(self, limit: int):
        self.limit = limit
        self.used = 0

    def tick(self, n: int = 1) -> None:
        self.used += n
        if self.used > self.limit:
            raise BudgetExceeded(f"node budget of {self.limit} exhausted")


def _require_disjoint(p: frozenset, q: frozenset) -> None:
    if not p or not q:
        raise ValueError("groups must be nonempty")
    if p & q:
        raise ValueError(f"groups overlap on {sorted(p & q)}")


def spans(participants: Iterable[AgentId], p: frozenset, q: frozenset) -> bool:
    participants = frozenset(participants)
    return bool(participants & p) and bool(participants & q)


def restrict(spec: ProtocolSpec, agents: Iterable[AgentId], c: Configuration, bounds: GenerationBounds) -> list[GuardedTransaction]:
    """Members of R(agents) generated from the machine states in ``c``."""
    agents = frozenset(agents)
    machines = {p: c.machine(p) for p in agents}
    return [
        gt
        for gt in spec.generate(agents, machines, bounds)
        if gt.participants <= agents
        and all(spec.state_valid(agents, s) for s in (*gt.txn.pre.values(), *gt.txn.post.values()))
    ]


def cross_transactions(
    spec: ProtocolSpec, p: Iterable[AgentId], q: Iterable[AgentId], c: Configuration, bounds: GenerationBounds
) -> list[GuardedTransaction]:
    p, q = frozenset(p), frozenset(q)
    _require_disjoint(p, q)
    return [gt for gt in restrict(spec, p | q, c, bounds) if spans(gt.participants, p, q)]


@dataclass(frozen=True)
class GuardReport:
    ok: bool
    offenders: tuple = ()
    configurations: int = 0


def guard_check(
    spec: ProtocolSpec,
    p: Iterable[AgentId],
    q: Iterable[AgentId],
    bounds: GenerationBounds = GenerationBounds(),
    depth: int = 3,
    node_budget: int = 10**6,
) -> GuardReport:
    """Look for unguarded cross transactions over machine-reachable states.

    Reachability ignores volitions: every generated transaction may be taken,
    since any guard can be satisfied by willing.
    """
    p, q = frozenset(p), frozenset(q)
    _require_disjoint(p, q)
    inst = ProtocolInstance(spec, p | q, bounds)
    budget = _Budget(node_budget)
    start = inst.initial()
    seen = {_machine_key(start)}
    frontier = [start]
    offenders: dict = {}
    for level in range(depth + 1):
        nxt = []
        for c in frontier:
            budget.tick()
            for gt in cross_transactions(spec, p, q, c, bounds):
                if not gt.guard:
                    offenders.setdefault(spec.class_of(gt.txn), gt)
            if level == depth:
                continue
            for gt in inst.generate(c):
                c2 = c.updated({a: AgentState(c.volition(a), s) for a, s in gt.txn.post.items()})
                key = _machine_key(c2)
                if key not in seen:
                    seen.add(key)
                    nxt.append(c2)
        frontier = nxt
    found = tuple(offenders[k] for k in order(offenders))
    return GuardReport(ok=not found, offenders=found, configurations=len(seen))


def _machine_key(c: Configuration) -> tuple:
    return tuple((a, c.machine(a)) for a in c)


Schedule = Sequence[int]


def _weave(first: Sequence[Step], second: Sequence[Step], schedule: Schedule) -> list[Step]:
    if len(schedule) != len(first) + len(second):
        raise ScheduleMismatch(
            f"schedule has {len(schedule)} entries for {len(first)} + {len(second)} steps"
        )
    if any(s not in (0, 1) for s in schedule) or list(schedule).count(0) != len(first):
        raise ScheduleMismatch("schedule must contain one 0 per P-step and one 1 per P'-step")
    it = (iter(first), iter(second))
    return [next(it[s]) for s in schedule]


def interleave(trace_p: Trace, trace_q: Trace, schedule: Schedule, loop_schedule: Optional[Schedule] = None) -> Trace:
    """Combine runs of two disjoint groups following ``schedule``.

    Entry 0 takes the next P-step, entry 1 the next P'-step. For two lassos
    the prefixes follow ``schedule`` and the loops follow ``loop_schedule``.
    """
    initial = Configuration.merge(trace_p.initial, trace_q.initial)
    if trace_p.is_lasso != trace_q.is_lasso:
        raise ScheduleMismatch("cannot interleave a lasso with a finite trace")
    if not trace_p.is_lasso:
        if loop_schedule:
            raise ScheduleMismatch("loop schedule given for finite traces")
        return Trace(initial, _weave(trace_p.steps, trace_q.steps, schedule))
    if loop_schedule is None:
        raise ScheduleMismatch("lasso traces need a loop schedule")
    prefix = _weave(trace_p.prefix, trace_q.prefix, schedule)
    loop = _weave(trace_p.loop, trace_q.loop, loop_schedule)
    return Trace(initial, prefix + loop, loop_start=len(prefix))


def schedules(n: int, m: int) -> Iterator[tuple[int, ...]]:
    """All interleavings of n P-steps and m P'-steps, each exactly once."""
    for positions in itertools.combinations(range(n + m), m):
        chosen = set(positions)
        yield tuple(1 if k in chosen else 0 for k in range(n + m))


def validate_interleaving(
    configs_p: Sequence[Configuration],
    configs_q: Sequence[Configuration],
    combined: Sequence[Configuration],
    complete: bool = True,
) -> bool:
    """Search for index sequences witnessing ``combined`` as an interleaving."""
    if not combined:
        return False
    p_agents = configs_p[0].keys()
    q_agents = configs_q[0].keys()

    def matches(k: int, i: int, j: int) -> bool:
        e = combined[k]
        return all(e[a] == configs_p[i][a] for a in p_agents) and all(e[a] == configs_q[j][a] for a in q_agents)

    if set(combined[0].keys()) != set(p_agents) | set(q_agents):
        return False
    reachable = {(0, 0)} if matches(0, 0, 0) else set()
    for k in range(1, len(combined)):
        nxt = set()
        for i, j in reachable:
            if i + 1 < len(configs_p) and matches(k, i + 1, j):
                nxt.add((i + 1, j))
            if j + 1 < len(configs_q) and matches(k, i, j + 1):
                nxt.add((i, j + 1))
        reachable = nxt
    if complete:
        return (len(configs_p) - 1, len(configs_q) - 1) in reachable
    return bool(reachable)


def enumerate_runs(
    spec: ProtocolSpec,
    agents: Iterable[AgentId],
    bounds: RunBounds = RunBounds(),
    semantics: str = TERMINAL,
    correct_only: bool = True,
    budget: Optional[_Budget] = None,
) -> list[Trace]:
    """Depth-first enumeration of the runs of F(agents) within ``bounds``.

    Under lasso semantics every prefix is closed with the protocol's idle
    loop; prefixes whose loop does not close are skipped.
    """
    inst = ProtocolInstance(spec, agents, bounds.generation)
    budget = budget or _Budget(bounds.node_budget)
    start = inst.initial()
    found: list[Trace] = []

    def visit(c: Configuration, steps: list[Step]) -> None:
        budget.tick()
        if semantics == TERMINAL:
            if not correct_only or not inst.enabled_classes(c):
                found.append(Trace(start, steps))
        else:
            loop = inst.idle_loop(c)
            if loop is None:
                raise ValueError(f"{spec.name} has no idle loop for lasso semantics")
            trace = Trace(start, steps + loop, loop_start=len(steps))
            try:
                verdict = check_lasso(trace, inst)
            except (NotALasso, ReplayFailed):
                verdict = None
            if verdict is not None and (verdict.correct or not correct_only):
                found.append(trace)
        if len(steps) < bounds.max_steps:
            for step, target in inst.moves(c, bounds.max_volition):
                visit(target, steps + [step])

    visit(start, [])
    return found


@dataclass(frozen=True)
class ObliviousReport:
    oblivious: bool
    semantics: str
    counterexample: Optional[Trace] = None
    pending: frozenset = frozenset()
    reason: str = ""
    runs: tuple = (0, 0)
    interleavings: int = 0


def _check_pair(inst: ProtocolInstance, r1: Trace, r2: Trace, budget: _Budget, counter: list) -> Optional[tuple]:
    """Walk the schedule tree of one pair of runs; return the first failure."""
    start = Configuration.merge(r1.initial, r2.initial)
    if start != inst.initial():
        return ((), None, frozenset(), "initial configurations disagree")
    lasso = r1.is_lasso

    def weave(a, b, c):
        # yields (schedule, final configuration, visited configurations) or ("fail", schedule, reason)
        stack = [(0, 0, c, (), (c,))]
        while stack:
            i, j, cur, sched, visited = stack.pop()
            budget.tick()
            if i == len(a) and j == len(b):
                yield sched, cur, visited
                continue
            for side in (1, 0):
                steps, idx = (a, i) if side == 0 else (b, j)
                if idx >= len(steps):
                    continue
                try:
                    nxt = inst.apply(steps[idx], cur)
                except VMTSError as exc:
                    yield ("fail", sched + (side,), f"not a transition of the combined system: {exc}")
                    return
                stack.append((i + (side == 0), j + (side == 1), nxt, sched + (side,), visited + (nxt,)))

    for res in weave(r1.prefix, r2.prefix, start):
        if res[0] == "fail":
            return (res[1], None, frozenset(), res[2])
        sched, mid, _ = res
        if not lasso:
            counter[0] += 1
            pending = inst.enabled_classes(mid)
            if pending:
                return (sched, None, pending, "classes enabled at the end of the run")
            continue
        fired = {inst.class_of(s.gt.txn) for s in (*r1.loop, *r2.loop) if isinstance(s, Fire)}
        for res2 in weave(r1.loop, r2.loop, mid):
            if res2[0] == "fail":
                return (sched, res2[1], frozenset(), res2[2])
            loop_sched, _, visited = res2
            counter[0] += 1
            if not inst.lasso_closes(visited):
                return (sched, loop_sched, frozenset(), "combined loop does not close")
            always = inst.enabled_classes(visited[0])
            for cfg in visited[1:-1]:
                always = always & inst.enabled_classes(cfg)
            pending = frozenset(k for k in always if k not in fired)
            if pending:
                return (sched, loop_sched, pending, "classes enabled throughout the loop but never taken")
    return None


def check_oblivious(
    spec: ProtocolSpec,
    p: Iterable[AgentId],
    q: Iterable[AgentId],
    bounds: RunBounds = RunBounds(),
    semantics: Optional[str] = None,
) -> ObliviousReport:
    """Check every interleaving of every pair of enumerated correct runs."""
    p, q = frozenset(p), frozenset(q)
    _require_disjoint(p, q)
    semantics = semantics or spec.default_semantics
    budget = _Budget(bounds.node_budget)
    runs_p = enumerate_runs(spec, p, bounds, semantics, budget=budget)
    runs_q = enumerate_runs(spec, q, bounds, semantics, budget=budget)
    combined = ProtocolInstance(spec, p | q, bounds.generation)
    counter = [0]
    # shortest pairs first so that a counterexample, if any, is small
    pairs = sorted(
        itertools.product(runs_p, runs_q),
        key=lambda rr: (len(rr[0].steps) + len(rr[1].steps), -len(rr[0].steps)),
    )
    for r1, r2 in pairs:
        failure = _check_pair(combined, r1, r2, budget, counter)
        if failure is None:
            continue
        sched, loop_sched, pending, reason = failure
        trace = _partial_interleaving(r1, r2, sched, loop_sched)
        if not pending and trace is not None:
            try:
                pending = check_run(trace, combined).pending
            except VMTSError:
                pass
        return ObliviousReport(
            oblivious=False,
            semantics=semantics,
            counterexample=trace,
            pending=frozenset(pending),
            reason=reason,
            runs=(len(runs_p), len(runs_q)),
            interleavings=counter[0],
        )
    return ObliviousReport(
        oblivious=True,
        semantics=semantics,
        runs=(len(runs_p), len(runs_q)),
        interleavings=counter[0],
    )


def _take(first: Sequence[Step], second: Sequence[Step], sched: Sequence[int]) -> list[Step]:
    it = (iter(first), iter(second))
    return [next(it[s]) for s in sched]


def _partial_interleaving(r1: Trace, r2: Trace, sched, loop_sched) -> Trace:
    initial = Configuration.merge(r1.initial, r2.initial)
    prefix = _take(r1.prefix, r2.prefix, sched)
    if loop_sched is None:
        return Trace(initial, prefix)
    loop = _take(r1.loop, r2.loop, loop_sched)
    if len(loop) == len(r1.loop) + len(r2.loop):
        return Trace(initial, prefix + loop, loop_start=len(prefix))
    return Trace(initial, prefix + loop)


def is_cross_step(step: Step, p: frozenset, q: frozenset) -> bool:
    """A fired step that changes machine states in both groups."""
    return isinstance(step, Fire) and spans(step.gt.txn.active, p, q)


def find_interactivity_witness(
    spec: ProtocolSpec,
    p: Iterable[AgentId],
    q: Iterable[AgentId],
    bounds: RunBounds = RunBounds(),
    semantics: Optional[str] = None,
) -> Optional[Trace]:
    """Breadth-first search for a correct run of F(P ∪ P') with a cross step.

    Under lasso semantics the prefix never fires unguarded classes; the idle
    loop is responsible for those.
    """
    p, q = frozenset(p), frozenset(q)
    _require_disjoint(p, q)
    semantics = semantics or spec.default_semantics
    inst = ProtocolInstance(spec, p | q, bounds.generation)
    budget = _Budget(bounds.node_budget)
    rng = random.Random(bounds.seed) if bounds.seed else None
    start = (inst.initial(), False)
    parent: dict = {start: None}
    frontier = deque([(start, 0)])
    while frontier:
        node, depth = frontier.popleft()
        budget.tick()
        c, crossed = node
        if crossed:
            steps = _path(parent, node)
            if semantics == TERMINAL:
                if not inst.enabled_classes(c):
                    return Trace(start[0], steps)
            else:
                loop = inst.idle_loop(c)
                if loop is None:
                    raise ValueError(f"{spec.name} has no idle loop for lasso semantics")
                trace = Trace(start[0], steps + loop, loop_start=len(steps))
                try:
                    if check_lasso(trace, inst).correct:
                        return trace
                except (NotALasso, ReplayFailed):
                    pass
        if depth >= bounds.max_steps:
            continue
        moves = inst.moves(c, bounds.max_volition, fire_unguarded=semantics == TERMINAL)
        if rng is not None:
            rng.shuffle(moves)
        for step, target in moves:
            child = (target, crossed or is_cross_step(step, p, q))
            if child not in parent:
                parent[child] = (node, step)
                frontier.append((child, depth + 1))
    return None


def _path(parent: dict, node) -> list[Step]:
    steps = []
    while parent[node] is not None:
        node, step = parent[node]
        steps.append(step)
    steps.reverse()
    return steps


@dataclass(frozen=True)
class GrassrootsReport:
    grassroots: bool
    oblivious: ObliviousReport
    witness: Optional[Trace]
    failed: tuple = ()


def check_grassroots(
    spec: ProtocolSpec,
    p: Iterable[AgentId],
    q: Iterable[AgentId],
    bounds: RunBounds = RunBounds(),
    semantics: Optional[str] = None,
    witness_bounds: Optional[RunBounds] = None,
) -> GrassrootsReport:
    """Oblivious and interactive; the witness search may use its own bounds."""
    obl = check_oblivious(spec, p, q, bounds, semantics)
    witness = find_interactivity_witness(spec, p, q, witness_bounds or bounds, semantics)
    failed = tuple(
        name for name, ok in (("oblivious", obl.oblivious), ("interactive", witness is not None)) if not ok
    )
    return GrassrootsReport(grassroots=not failed, oblivious=obl, witness=witness, failed=failed)


def random_run(
    inst: ProtocolInstance,
    rng: random.Random,
    max_steps: int,
    max_volition: int = 2,
) -> Trace:
    """A random legal run: each step fires an enabled transaction or edits a volition."""
    start = inst.initial()
    c = start
    steps: list[Step] = []
    agents = sorted(inst.agents)
    for _ in range(max_steps):
        fires = inst.enabled_transactions(c)
        if fires and rng.random() < 0.5:
            step: Step = Fire(rng.choice(fires))
        else:
            a = rng.choice(agents)
            current = c.volition(a)
            if current and (len(current) >= max_volition or rng.random() < 0.3):
                step = ChangeVolition(a, current - {rng.choice(order(current))})
            else:
                key = inst.spec.sample_will(rng, inst.agents, c.machines(), a, inst.bounds)
                if key is None or key in current:
                    continue
                step = ChangeVolition(a, current | {key})
        c = inst.apply(step, c)
        steps.append(step)
    return Trace(start, steps)
