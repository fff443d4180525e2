"""Scenario files: parsing, validation, and JSON encoding of steps and keys.

Scenarios are JSON objects. Class keys and actions are nested tuples in
memory and nested lists on disk; :func:`tupleize` converts back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

from .kernel import AgentState, Configuration, VMTSError
from .negatives import ToyChain
from .platform_bonds import CoinsAndBonds
from .platform_social import ChildSafeSocialGraph, MissingParent, SocialGraph
from .protocols import GenerationBounds, ProtocolInstance, ProtocolSpec, order
from .runs import ChangeVolition, Fire, Step, StepNotApplicable, Trace

PROTOCOLS = ("sg", "csg", "gcb", "toychain")
SCENARIO_FIELDS = ("protocol", "agents", "parents", "bootnodes", "bounds", "steps", "loop_start", "groups")
# Fields a report adds on top of its scenario; tolerated so reports re-parse.
REPORT_FIELDS = ("command", "records", "status", "error", "verdict", "result")


class InvalidScenario(VMTSError):
    pass


def tupleize(obj: Any) -> Any:
    if isinstance(obj, list):
        return tuple(tupleize(x) for x in obj)
    return obj


def listify(obj: Any) -> Any:
    if isinstance(obj, (tuple, list)):
        return [listify(x) for x in obj]
    if isinstance(obj, (frozenset, set)):
        return [listify(x) for x in order(obj)]
    return obj


@dataclass(frozen=True)
class ScriptedStep:
    """A step as written in a scenario, resolved against a configuration on replay."""

    kind: str
    agent: Optional[str] = None
    volition: Optional[tuple] = None
    add: tuple = ()
    remove: tuple = ()
    action: Optional[tuple] = None
    guard: Optional[frozenset] = None


@dataclass(frozen=True)
class Scenario:
    protocol: str
    agents: tuple
    bounds: GenerationBounds = GenerationBounds()
    steps: tuple = ()
    loop_start: Optional[int] = None
    parents: Optional[dict] = None
    bootnodes: Optional[tuple] = None
    groups: Optional[tuple] = None
    extra: dict = field(default_factory=dict, compare=False)

    def spec(self) -> ProtocolSpec:
        if self.protocol == "sg":
            return SocialGraph()
        if self.protocol == "csg":
            return ChildSafeSocialGraph(self.parents)
        if self.protocol == "gcb":
            return CoinsAndBonds()
        return ToyChain(self.bootnodes)

    def instance(self) -> ProtocolInstance:
        return ProtocolInstance(self.spec(), self.agents, self.bounds)


def _agent_list(obj, what: str) -> tuple:
    if not isinstance(obj, list) or not all(isinstance(a, str) for a in obj):
        raise InvalidScenario(f"{what} must be a list of strings")
    if len(set(obj)) != len(obj):
        raise InvalidScenario(f"{what} contains duplicates")
    return tuple(obj)


def _nat(obj, what: str) -> int:
    if not isinstance(obj, int) or isinstance(obj, bool) or obj < 0:
        raise InvalidScenario(f"{what} must be a natural number")
    return obj


def _parse_step(obj, i: int, agents: frozenset) -> ScriptedStep:
    if not isinstance(obj, dict):
        raise InvalidScenario(f"step {i} is not an object")
    kind = obj.get("kind")
    if kind == "will":
        allowed = {"kind", "agent", "volition", "add", "remove"}
        if set(obj) - allowed:
            raise InvalidScenario(f"step {i} has unknown fields {sorted(set(obj) - allowed)}")
        agent = obj.get("agent")
        if not isinstance(agent, str):
            raise InvalidScenario(f"step {i}: will needs an agent")
        lists = {}
        for name in ("volition", "add", "remove"):
            if name in obj:
                if not isinstance(obj[name], list):
                    raise InvalidScenario(f"step {i}: {name} must be a list")
                lists[name] = tuple(tupleize(x) for x in obj[name])
        if "volition" in lists and ("add" in lists or "remove" in lists):
            raise InvalidScenario(f"step {i}: volition excludes add/remove")
        if not lists:
            raise InvalidScenario(f"step {i}: will needs volition, add or remove")
        return ScriptedStep("will", agent, lists.get("volition"), lists.get("add", ()), lists.get("remove", ()))
    if kind == "fire":
        allowed = {"kind", "action", "guard"}
        if set(obj) - allowed:
            raise InvalidScenario(f"step {i} has unknown fields {sorted(set(obj) - allowed)}")
        action = obj.get("action")
        if not isinstance(action, list) or not action or not isinstance(action[0], str):
            raise InvalidScenario(f"step {i}: fire needs an action list starting with its name")
        guard = None
        if "guard" in obj:
            guard = frozenset(_agent_list(obj["guard"], f"step {i} guard"))
        return ScriptedStep("fire", action=tupleize(action), guard=guard)
    raise InvalidScenario(f"step {i}: kind must be 'will' or 'fire'")


def parse_scenario(obj: Any) -> Scenario:
    """Validate a decoded JSON object and build a :class:`Scenario`."""
    if not isinstance(obj, dict):
        raise InvalidScenario("scenario must be a JSON object")
    unknown = set(obj) - set(SCENARIO_FIELDS) - set(REPORT_FIELDS)
    if unknown:
        raise InvalidScenario(f"unknown fields {sorted(unknown)}")
    protocol = obj.get("protocol")
    if protocol not in PROTOCOLS:
        raise InvalidScenario(f"protocol must be one of {', '.join(PROTOCOLS)}")
    agents = _agent_list(obj.get("agents"), "agents")
    if not agents:
        raise InvalidScenario("agents must be nonempty")
    everyone = frozenset(agents)

    parents = None
    if ("parents" in obj) != (protocol == "csg"):
        raise InvalidScenario("parents are required for csg and only for csg")
    if protocol == "csg":
        raw = obj["parents"]
        if not isinstance(raw, dict) or not all(isinstance(v, str) for v in raw.values()):
            raise InvalidScenario("parents must map child to parent")
        if not set(raw) | set(raw.values()) <= everyone:
            raise InvalidScenario("parents mention unknown agents")
        parents = dict(sorted(raw.items()))

    bootnodes = None
    if ("bootnodes" in obj) != (protocol == "toychain"):
        raise InvalidScenario("bootnodes are required for toychain and only for toychain")
    if protocol == "toychain":
        bootnodes = _agent_list(obj["bootnodes"], "bootnodes")
        if not set(bootnodes) <= everyone:
            raise InvalidScenario("bootnodes mention unknown agents")

    raw_bounds = obj.get("bounds", {})
    if not isinstance(raw_bounds, dict) or set(raw_bounds) - {"max_mint_quantity", "max_date", "max_multiset_size"}:
        raise InvalidScenario("bounds must hold max_mint_quantity, max_date, max_multiset_size")
    try:
        bounds = GenerationBounds(**{k: _nat(v, k) for k, v in raw_bounds.items()})
    except ValueError as exc:
        raise InvalidScenario(str(exc)) from exc

    raw_steps = obj.get("steps", [])
    if not isinstance(raw_steps, list):
        raise InvalidScenario("steps must be a list")
    steps = tuple(_parse_step(s, i, everyone) for i, s in enumerate(raw_steps))

    loop_start = obj.get("loop_start")
    if loop_start is not None:
        loop_start = _nat(loop_start, "loop_start")
        if loop_start >= len(steps):
            raise InvalidScenario("loop_start must index a step")

    groups = None
    if obj.get("groups") is not None:
        raw = obj["groups"]
        if not isinstance(raw, list) or len(raw) != 2:
            raise InvalidScenario("groups must be a pair of agent lists")
        g1, g2 = (_agent_list(g, "group") for g in raw)
        if not g1 or not g2 or set(g1) & set(g2):
            raise InvalidScenario("groups must be nonempty and disjoint")
        if not set(g1) | set(g2) <= everyone:
            raise InvalidScenario("groups mention unknown agents")
        groups = (g1, g2)

    scenario = Scenario(protocol, agents, bounds, steps, loop_start, parents, bootnodes, groups)
    try:
        scenario.spec()
    except MissingParent as exc:
        raise InvalidScenario(str(exc)) from exc
    return scenario


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidScenario(f"cannot read {path}: {exc}") from exc
    return parse_scenario(obj)


def _resolve_key(item: tuple, inst: ProtocolInstance, c: Configuration):
    """A willed entry is a class key or, failing that, an action naming one."""
    if item in inst.universe:
        return item
    try:
        return inst.spec.key_of_action(item, inst.agents, c.machines())
    except (VMTSError, LookupError, TypeError, ValueError, IndexError):
        return item


def resolve_step(step: ScriptedStep, c: Configuration, inst: ProtocolInstance) -> Step:
    """Turn a scripted step into a concrete kernel step at configuration ``c``."""
    if step.kind == "will":
        if step.agent not in c:
            raise VMTSError(f"unknown agent {step.agent}")
        if step.volition is not None:
            return ChangeVolition(step.agent, frozenset(_resolve_key(k, inst, c) for k in step.volition))
        current = c.volition(step.agent)
        add = {_resolve_key(k, inst, c) for k in step.add}
        remove = {_resolve_key(k, inst, c) for k in step.remove}
        return ChangeVolition(step.agent, (current - remove) | add)
    try:
        gts = inst.spec.build(step.action, inst.agents, c.machines())
    except (LookupError, TypeError, ValueError, IndexError) as exc:
        raise VMTSError(f"malformed action {list(step.action)!r}") from exc
    if step.guard is not None:
        gts = [gt for gt in gts if gt.guard == step.guard]
    if not gts:
        raise VMTSError(f"no transaction {list(step.action)!r} applies here")
    enabled = set(inst.enabled_transactions(c))
    for gt in gts:
        if gt in enabled:
            return Fire(gt)
    return Fire(gts[0])


def resolve(scenario: Scenario, inst: Optional[ProtocolInstance] = None) -> tuple[Trace, list[Configuration]]:
    """Resolve and replay every scripted step.

    Raises :class:`StepNotApplicable` at the first step that cannot be taken.
    """
    inst = inst or scenario.instance()
    c = inst.initial()
    configs = [c]
    steps: list[Step] = []
    for i, scripted in enumerate(scenario.steps):
        try:
            step = resolve_step(scripted, c, inst)
            c = inst.apply(step, c)
        except VMTSError as exc:
            raise StepNotApplicable(i, str(exc)) from exc
        steps.append(step)
        configs.append(c)
    return Trace(configs[0], steps, scenario.loop_start), configs


def step_json(step: Step) -> dict:
    if isinstance(step, ChangeVolition):
        return {"kind": "will", "agent": step.agent, "volition": listify(step.volition)}
    return {"kind": "fire", "action": listify(step.gt.txn.action), "guard": sorted(step.gt.guard)}


def trace_json(trace: Trace) -> dict:
    return {"steps": [step_json(s) for s in trace.steps], "loop_start": trace.loop_start}


def state_json(state: AgentState, spec: ProtocolSpec) -> dict:
    return {"machine": spec.state_to_json(state.machine), "volition": listify(state.volition)}


def config_json(c: Configuration, spec: ProtocolSpec) -> dict:
    return {p: state_json(c[p], spec) for p in sorted(c)}


def scenario_json(scenario: Scenario, steps: Optional[list] = None) -> dict:
    """Scenario header fields, with ``steps`` replaced when given."""
    out: dict = {"protocol": scenario.protocol, "agents": list(scenario.agents)}
    if scenario.parents is not None:
        out["parents"] = dict(scenario.parents)
    if scenario.bootnodes is not None:
        out["bootnodes"] = list(scenario.bootnodes)
    b = scenario.bounds
    out["bounds"] = {
        "max_mint_quantity": b.max_mint_quantity,
        "max_date": b.max_date,
        "max_multiset_size": b.max_multiset_size,
    }
    if scenario.groups is not None:
        out["groups"] = [list(g) for g in scenario.groups]
    out["steps"] = steps if steps is not None else [_scripted_json(s) for s in scenario.steps]
    out["loop_start"] = scenario.loop_start
    return out


def _scripted_json(step: ScriptedStep) -> dict:
    if step.kind == "fire":
        out = {"kind": "fire", "action": listify(step.action)}
        if step.guard is not None:
            out["guard"] = sorted(step.guard)
        return out
    out = {"kind": "will", "agent": step.agent}
    if step.volition is not None:
        out["volition"] = listify(step.volition)
    if step.add:
        out["add"] = listify(step.add)
    if step.remove:
        out["remove"] = listify(step.remove)
    return out


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"
