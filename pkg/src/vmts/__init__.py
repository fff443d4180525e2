"""Volitional multiagent transition systems: engine and bounded checker."""

from .kernel import (
    AgentState,
    Configuration,
    GuardedSystem,
    GuardedTransaction,
    MachineTransaction,
    change_volition,
    class_enabled,
    enabled,
    fire,
    is_transition,
    machine_precondition_holds,
    validate_transaction,
)
from .protocols import (
    GenerationBounds,
    ProtocolInstance,
    ProtocolSpec,
    RunBounds,
    check_grassroots,
    check_oblivious,
    find_interactivity_witness,
    guard_check,
    interleave,
)
from .runs import ChangeVolition, Fire, LivenessVerdict, Trace, check_lasso, check_run, check_terminal, replay

__all__ = [
    "AgentState",
    "ChangeVolition",
    "Configuration",
    "Fire",
    "GenerationBounds",
    "GuardedSystem",
    "GuardedTransaction",
    "LivenessVerdict",
    "MachineTransaction",
    "ProtocolInstance",
    "ProtocolSpec",
    "RunBounds",
    "Trace",
    "change_volition",
    "check_grassroots",
    "check_lasso",
    "check_oblivious",
    "check_run",
    "check_terminal",
    "class_enabled",
    "enabled",
    "find_interactivity_witness",
    "fire",
    "guard_check",
    "interleave",
    "is_transition",
    "machine_precondition_holds",
    "replay",
    "validate_transaction",
]

__version__ = "0.1.0"
