"""Command-line front end: ``vmts run | check-run | check <property> SCENARIO``.

Exit codes: 0 pass or witness found, 1 violation or no witness, 2 budget
exceeded or usage error, 3 invalid scenario.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from .kernel import VMTSError
from .protocols import (
    BudgetExceeded,
    RunBounds,
    check_grassroots,
    check_oblivious,
    find_interactivity_witness,
    guard_check,
    order,
)
from .runs import LASSO, TERMINAL, NotALasso, ReplayFailed, StepNotApplicable, check_run
from .scenario import (
    InvalidScenario,
    Scenario,
    config_json,
    dumps,
    listify,
    load_scenario,
    resolve,
    scenario_json,
    step_json,
    trace_json,
)

EXIT_OK, EXIT_FAIL, EXIT_BUDGET, EXIT_INVALID = 0, 1, 2, 3
CHECKS = ("guards", "oblivious", "interactive", "grassroots")


class UsageError(Exception):
    pass


def _records(scenario: Scenario, trace, configs, inst) -> list[dict]:
    spec = inst.spec
    out = []
    for i, c in enumerate(configs):
        out.append(
            {
                "index": i,
                "step": None if i == 0 else step_json(trace.steps[i - 1]),
                "state": config_json(c, spec),
                "enabled": listify(order(inst.enabled_classes(c))),
            }
        )
    return out


def cmd_run(scenario: Scenario, args) -> tuple[int, dict]:
    inst = scenario.instance()
    try:
        trace, configs = resolve(scenario, inst)
    except StepNotApplicable as exc:
        report = scenario_json(scenario)
        report.update(command="run", status="error", error={"index": exc.index, "reason": exc.reason})
        return EXIT_FAIL, report
    report = scenario_json(scenario, [step_json(s) for s in trace.steps])
    report.update(command="run", status="ok", records=_records(scenario, trace, configs, inst))
    return EXIT_OK, report


def cmd_check_run(scenario: Scenario, args) -> tuple[int, dict]:
    wanted = LASSO if scenario.loop_start is not None else TERMINAL
    if args.semantics and args.semantics != wanted:
        raise UsageError(f"--semantics {args.semantics} conflicts with loop_start {scenario.loop_start}")
    inst = scenario.instance()
    try:
        trace, _ = resolve(scenario, inst)
    except StepNotApplicable as exc:
        report = scenario_json(scenario)
        report.update(command="check-run", status="error", error={"index": exc.index, "reason": exc.reason})
        return EXIT_FAIL, report
    report = scenario_json(scenario, [step_json(s) for s in trace.steps])
    try:
        verdict = check_run(trace, inst)
    except (NotALasso, ReplayFailed) as exc:
        report.update(command="check-run", status="error", error={"index": scenario.loop_start, "reason": str(exc)})
        return EXIT_FAIL, report
    report.update(
        command="check-run",
        status="ok",
        verdict={
            "correct": verdict.correct,
            "semantics": verdict.semantics,
            "pending": listify(order(verdict.pending)),
            "witness_index": verdict.witness_index,
        },
    )
    return (EXIT_OK if verdict.correct else EXIT_FAIL), report


def _run_bounds(scenario: Scenario, args, default_steps: int) -> RunBounds:
    return RunBounds(
        max_steps=args.max_steps if args.max_steps is not None else default_steps,
        generation=scenario.bounds,
        node_budget=args.node_budget,
        seed=args.seed,
    )


def _oblivious_json(rep) -> dict:
    out = {
        "oblivious": rep.oblivious,
        "semantics": rep.semantics,
        "runs": list(rep.runs),
        "interleavings": rep.interleavings,
    }
    if not rep.oblivious:
        out["reason"] = rep.reason
        out["pending"] = listify(order(rep.pending))
        out["counterexample"] = trace_json(rep.counterexample) if rep.counterexample else None
    return out


def cmd_check(scenario: Scenario, which: str, args) -> tuple[int, dict]:
    if scenario.groups is None:
        raise InvalidScenario("checks need groups")
    g1, g2 = scenario.groups
    spec = scenario.spec()
    semantics = args.semantics or spec.default_semantics
    enum_steps = 4 if semantics == TERMINAL else 3
    search_steps = 4 if semantics == TERMINAL else 8
    report = scenario_json(scenario)
    report["command"] = f"check {which}"
    if which == "guards":
        rep = guard_check(spec, g1, g2, scenario.bounds, depth=args.max_steps or 3, node_budget=args.node_budget)
        result = {
            "ok": rep.ok,
            "configurations": rep.configurations,
            "offenders": [
                {"class": listify(spec.class_of(gt.txn)), "action": listify(gt.txn.action)} for gt in rep.offenders
            ],
        }
        ok = rep.ok
    elif which == "oblivious":
        rep = check_oblivious(spec, g1, g2, _run_bounds(scenario, args, enum_steps), semantics)
        result = _oblivious_json(rep)
        ok = rep.oblivious
    elif which == "interactive":
        witness = find_interactivity_witness(spec, g1, g2, _run_bounds(scenario, args, search_steps), semantics)
        result = {"interactive": witness is not None, "semantics": semantics}
        result["witness"] = trace_json(witness) if witness else None
        ok = witness is not None
    else:
        rep = check_grassroots(
            spec,
            g1,
            g2,
            _run_bounds(scenario, args, enum_steps),
            semantics,
            witness_bounds=_run_bounds(scenario, args, search_steps),
        )
        result = {
            "grassroots": rep.grassroots,
            "failed": list(rep.failed),
            "oblivious": _oblivious_json(rep.oblivious),
            "witness": trace_json(rep.witness) if rep.witness else None,
        }
        ok = rep.grassroots
    report["status"] = "ok"
    report["result"] = result
    return (EXIT_OK if ok else EXIT_FAIL), report


def _text(report: dict) -> str:
    """A compact human-readable rendering of a report."""
    lines = [f"{report['command']}: {report['protocol']} agents={','.join(report['agents'])}"]
    if "error" in report:
        err = report["error"]
        lines.append(f"error at step {err['index']}: {err['reason']}")
    for rec in report.get("records", []):
        step = rec["step"]
        label = "initial" if step is None else _step_text(step)
        lines.append(f"[{rec['index']}] {label}")
        for p, st in rec["state"].items():
            lines.append(f"    {p}: {_compact(st['machine'])} wills {_compact(st['volition'])}")
        lines.append(f"    enabled {_compact(rec['enabled'])}")
    if "verdict" in report:
        v = report["verdict"]
        lines.append(f"{'correct' if v['correct'] else 'incorrect'} ({v['semantics']})")
        for k in v["pending"]:
            lines.append(f"    pending {_compact(k)}")
    if "result" in report:
        for name, value in report["result"].items():
            if isinstance(value, dict) and "steps" in value:
                lines.append(f"{name}:")
                for i, s in enumerate(value["steps"]):
                    mark = "*" if value["loop_start"] is not None and i >= value["loop_start"] else " "
                    lines.append(f"  {mark}{i} {_step_text(s)}")
            else:
                lines.append(f"{name}: {_compact(value)}")
    return "\n".join(lines) + "\n"


def _step_text(step: dict) -> str:
    if step["kind"] == "will":
        return f"{step['agent']} wills {_compact(step['volition'])}"
    return f"fire {_compact(step['action'])} guard {_compact(step['guard'])}"


def _compact(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vmts", description="Replay and check volitional multiagent transition systems.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_nat, default=0, help="tie-breaking seed for searches")
    common.add_argument("--max-steps", type=_nat, default=None, help="step bound for enumeration and search")
    common.add_argument("--node-budget", type=_nat, default=10**7, help="abort after this many search nodes")
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--semantics", choices=(TERMINAL, LASSO), default=None)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="replay a scenario and print every configuration")
    run.add_argument("scenario")
    check_run = sub.add_parser("check-run", parents=[common], help="liveness verdict for a scripted run")
    check_run.add_argument("scenario")
    check = sub.add_parser("check", parents=[common], help="check a grassroots property for the scenario's groups")
    check.add_argument("which", choices=CHECKS)
    check.add_argument("scenario")
    return parser


def _nat(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("expected a natural number")
    return value


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
        if args.command == "run":
            code, report = cmd_run(scenario, args)
        elif args.command == "check-run":
            code, report = cmd_check_run(scenario, args)
        else:
            code, report = cmd_check(scenario, args.which, args)
    except InvalidScenario as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except VMTSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    sys.stdout.write(dumps(report) if args.format == "json" else _text(report))
    if "error" in report:
        print(f"step {report['error']['index']}: {report['error']['reason']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
