"""Traces, replay, and liveness verdicts.

A trace is an initial configuration plus a list of steps. With
``loop_start`` set it stands for the infinite run that repeats
``steps[loop_start:]`` forever (a lasso).

Two readings of correctness are supported:

* terminal -- a finite run is correct iff no class is enabled in its last
  configuration;
* lasso -- the infinite run is correct iff every class enabled at *every*
  configuration of the loop has a member fired inside the loop.

The ``system`` argument is duck-typed: :class:`vmts.kernel.GuardedSystem`
and :class:`vmts.protocols.ProtocolInstance` both qualify.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .kernel import (
    AgentId,
    ClassKey,
    Configuration,
    GuardedTransaction,
    VMTSError,
    change_volition,
    fire,
)

TERMINAL = "terminal"
LASSO = "lasso"


class StepNotApplicable(VMTSError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"step {index}: {reason}")
        self.index = index
        self.reason = reason


class ReplayFailed(VMTSError):
    pass


class NotALasso(VMTSError):
    pass


class ContainmentViolation(VMTSError):
    pass


class NotInstantiable(VMTSError):
    """No member of a class can be instantiated at the current configuration."""


@dataclass(frozen=True)
class ChangeVolition:
    agent: AgentId
    volition: frozenset

    def __post_init__(self):
        if not isinstance(self.volition, frozenset):
            object.__setattr__(self, "volition", frozenset(self.volition))


@dataclass(frozen=True)
class Fire:
    gt: GuardedTransaction


Step = Union[ChangeVolition, Fire]


@dataclass(frozen=True)
class Trace:
    initial: Configuration
    steps: tuple = ()
    loop_start: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.steps, tuple):
            object.__setattr__(self, "steps", tuple(self.steps))
        if self.loop_start is not None and not 0 <= self.loop_start <= len(self.steps):
            raise ValueError(f"loop_start {self.loop_start} outside 0..{len(self.steps)}")

    @property
    def is_lasso(self) -> bool:
        return self.loop_start is not None

    @property
    def prefix(self) -> tuple:
        return self.steps if self.loop_start is None else self.steps[: self.loop_start]

    @property
    def loop(self) -> tuple:
        return () if self.loop_start is None else self.steps[self.loop_start :]


@dataclass(frozen=True)
class LivenessVerdict:
    correct: bool
    pending: frozenset = field(default_factory=frozenset)
    witness_index: Optional[int] = None
    semantics: str = TERMINAL


def apply_step(step: Step, c: Configuration, system) -> Configuration:
    """Apply one step; raises a kernel error if it is not a legal transition."""
    if isinstance(step, ChangeVolition):
        return change_volition(step.agent, step.volition, c, system.universe)
    if step.gt not in system:
        raise VMTSError(f"{step.gt.txn.action!r} is not a transaction of this instance")
    return fire(step.gt, c, system.class_of)


def _check_containment(c: Configuration, system, index: int) -> None:
    for p, state in c.items():
        stray = [k for k in state.volition if k not in system.universe]
        if stray:
            raise ContainmentViolation(f"configuration {index}: {p} wills unknown classes {stray}")


def replay(trace: Trace, system) -> list[Configuration]:
    """Return the configurations c_0..c_n visited by ``trace``."""
    c = trace.initial
    _check_containment(c, system, 0)
    configs = [c]
    for i, step in enumerate(trace.steps):
        try:
            c = apply_step(step, c, system)
        except VMTSError as exc:
            raise StepNotApplicable(i, str(exc)) from exc
        _check_containment(c, system, i + 1)
        configs.append(c)
    return configs


def fired_class(step: Step, system) -> Optional[ClassKey]:
    return system.class_of(step.gt.txn) if isinstance(step, Fire) else None


def check_terminal(trace: Trace, system) -> LivenessVerdict:
    if trace.is_lasso:
        raise ValueError("terminal semantics applies to finite traces only")
    try:
        configs = replay(trace, system)
    except StepNotApplicable as exc:
        raise ReplayFailed(str(exc)) from exc
    pending = system.enabled_classes(configs[-1])
    return LivenessVerdict(
        correct=not pending,
        pending=pending,
        witness_index=len(configs) - 1 if pending else None,
        semantics=TERMINAL,
    )


def lasso_configurations(trace: Trace, system) -> list[Configuration]:
    """Replay a lasso and verify that its loop closes."""
    if not trace.is_lasso:
        raise NotALasso("trace has no loop_start")
    if not trace.loop:
        raise NotALasso("loop segment is empty")
    try:
        configs = replay(trace, system)
    except StepNotApplicable as exc:
        raise ReplayFailed(str(exc)) from exc
    if not system.lasso_closes(configs[trace.loop_start :]):
        raise NotALasso(
            f"configuration after the last step does not return to configuration {trace.loop_start}"
        )
    return configs


def check_lasso(trace: Trace, system) -> LivenessVerdict:
    configs = lasso_configurations(trace, system)
    loop_configs = configs[trace.loop_start : -1]
    always = system.enabled_classes(loop_configs[0])
    for c in loop_configs[1:]:
        if not always:
            break
        always = always & system.enabled_classes(c)
    fired = {fired_class(s, system) for s in trace.loop}
    pending = frozenset(k for k in always if k not in fired)
    return LivenessVerdict(
        correct=not pending,
        pending=pending,
        witness_index=trace.loop_start if pending else None,
        semantics=LASSO,
    )


def check_run(trace: Trace, system) -> LivenessVerdict:
    return check_lasso(trace, system) if trace.is_lasso else check_terminal(trace, system)


def rebase(step: Step, c: Configuration, system) -> Step:
    """Re-instantiate a fire step at ``c`` by class, keeping its guard."""
    if isinstance(step, ChangeVolition):
        return step
    key = system.class_of(step.gt.txn)
    for gt in system.instances(key, c):
        if gt.guard == step.gt.guard:
            return Fire(gt)
    raise NotInstantiable(f"no member of {key!r} guarded by {sorted(step.gt.guard)} applies here")


def unroll(trace: Trace, system, iterations: int) -> tuple[Trace, list[Configuration]]:
    """Expand a lasso into a finite trace that runs the loop ``iterations`` times.

    Loop fire steps are re-instantiated by class at each pass, which is what
    lets a loop of advancing clocks repeat.
    """
    if not trace.is_lasso:
        raise NotALasso("trace has no loop_start")
    configs = replay(Trace(trace.initial, trace.prefix), system)
    steps = list(trace.prefix)
    c = configs[-1]
    for _ in range(iterations):
        for step in trace.loop:
            step = rebase(step, c, system)
            c = apply_step(step, c, system)
            steps.append(step)
            configs.append(c)
    return Trace(trace.initial, steps), configs
