"""The episode engine: reason, execute, observe until a final message or the
tool-call budget runs out; plus the two-phase planner/executor variant."""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Callable, Sequence

from ..provider import (
    ChatMessage,
    ModelTurn,
    PricingTable,
    Provider,
    ProviderError,
    TokenUsage,
    compute_cost,
)
from ..taxonomy import OutcomeCategory, classify_outcome
from .tools import Toolset, ToolOutcome, error_envelope
from .trace import PhaseSummary, ToolResult, Trace, TraceStep

Classifier = Callable[[str, object], OutcomeCategory]


class PlanError(ValueError):
    pass


class NoPlanHeading(PlanError):
    pass


class EmptyPlan(PlanError):
    pass


@dataclass
class Plan:
    steps: list[str]
    raw: str

    def render(self) -> str:
        return "\n".join(f"{i}. {s}" for i, s in enumerate(self.steps, 1))


_PLAN_HEADING = re.compile(r"^[ \t]*###[ \t]+Plan[ \t]*:?[ \t]*$", re.MULTILINE)
_NUMBERED = re.compile(r"^[ \t]*(\d+)[.)][ \t]+(.*\S)[ \t]*$")


def extract_plan(message: str) -> Plan:
    headings = list(_PLAN_HEADING.finditer(message or ""))
    if not headings:
        raise NoPlanHeading("planner output has no '### Plan' heading")
    body = message[headings[-1].end():]
    steps: list[str] = []
    for line in body.splitlines():
        if re.match(r"^[ \t]*#{1,3}[ \t]", line):
            break
        m = _NUMBERED.match(line)
        if m:
            steps.append(m.group(2))
        elif steps and line.strip() and line[:1] in " \t":
            steps[-1] += "\n" + line.strip()
    if not steps:
        raise EmptyPlan("the plan section contains no numbered steps")
    return Plan(steps, message)


@dataclass
class _Dispatcher:
    toolsets: Sequence[Toolset]
    owners: dict[str, Toolset] = field(default_factory=dict)

    def __post_init__(self):
        for ts in self.toolsets:
            for name in ts.tool_names():
                if name in self.owners:
                    raise ValueError(f"tool {name!r} is provided by more than one toolset")
                self.owners[name] = ts

    def schemas(self):
        return [s for ts in self.toolsets for s in ts.schemas()]

    def dispatch(self, invocation) -> tuple[str, ToolOutcome]:
        ts = self.owners.get(invocation.tool_name)
        if ts is None:
            # attribute unknown names to the first toolset so shares still sum to 1
            owner = self.toolsets[0].name if self.toolsets else "unknown"
            msg = error_envelope(f"Unknown tool {invocation.tool_name!r}", "Check the list of available tools.")
            return owner, ToolOutcome(msg)
        return ts.name, ts.dispatch(invocation)


def _run_phase(
    trace: Trace,
    phase: str,
    system_prompt: str,
    goal: str,
    dispatcher: _Dispatcher,
    provider: Provider,
    model: str,
    budget: int,
    classifier: Classifier,
) -> tuple[str, str, int, TokenUsage]:
    """Run one conversation; returns (termination, final_message, calls, usage)."""
    history = [ChatMessage("system", system_prompt), ChatMessage("user", goal)]
    schemas = dispatcher.schemas()
    usage = TokenUsage()
    calls = 0
    while True:
        try:
            turn = provider.complete(history, schemas, model)
        except ProviderError as exc:
            trace.error = f"{exc.kind}: {exc}"
            return "provider_error", "", calls, usage
        usage = usage + turn.usage
        history.append(ChatMessage("assistant", turn.text or "", tool_calls=turn.tool_calls))
        if not turn.tool_calls:
            trace.steps.append(TraceStep(turn, [], phase))
            return "final", turn.text or "", calls, usage
        allowed = turn.tool_calls[: max(0, budget - calls)]
        step = TraceStep(turn, [], phase, len(turn.tool_calls) - len(allowed))
        for inv in allowed:
            owner, outcome = dispatcher.dispatch(inv)
            category = classifier(outcome.observation, outcome.exec_result)
            step.tool_results.append(ToolResult(inv, owner, outcome.observation, outcome.exec_result, category))
            history.append(ChatMessage("tool", outcome.observation, tool_call_id=inv.id))
        calls += len(allowed)
        trace.steps.append(step)
        if calls >= budget:
            return "limit", "", calls, usage


def _finish(trace: Trace, usage: TokenUsage, model: str, pricing: PricingTable | None, start: float) -> Trace:
    trace.total_usage = usage
    trace.total_cost = compute_cost(usage, model, pricing) if pricing is not None else Decimal(0)
    trace.wall_clock = time.monotonic() - start
    return trace


def run_episode(
    goal: str,
    config,
    toolsets: Sequence[Toolset],
    provider: Provider,
    *,
    system_prompt: str,
    pricing: PricingTable | None = None,
    task_id: str = "",
    classifier: Classifier = classify_outcome,
) -> Trace:
    """Single-agent episode. Provider failures end the episode with
    ``termination_reason == "provider_error"`` instead of raising."""
    _check_toolsets(config, toolsets)
    start = time.monotonic()
    trace = Trace(task_id=task_id, model=config.model, system_prompts={"agent": system_prompt})
    dispatcher = _Dispatcher(toolsets)
    reason, final, calls, usage = _run_phase(
        trace, "agent", system_prompt, goal, dispatcher, provider, config.model, config.max_tool_calls, classifier
    )
    trace.termination_reason, trace.final_message = reason, final
    trace.phases = [PhaseSummary("agent", len(trace.steps), calls, usage, final)]
    return _finish(trace, usage, config.model, pricing, start)


def run_planner_executor(
    goal: str,
    config,
    toolsets: Sequence[Toolset],
    provider: Provider,
    *,
    planner_prompt: str,
    executor_prompt: Callable[[Plan], str],
    fallback_prompt: str,
    pricing: PricingTable | None = None,
    task_id: str = "",
    classifier: Classifier = classify_outcome,
) -> Trace:
    """Planner phase (read-only toolsets) followed by an executor phase that
    sees only the extracted plan. One tool-call budget covers both phases.

    If the planner's answer has no usable plan the second phase runs with the
    single-agent prompt and the trace is flagged ``fallback``.
    """
    _check_toolsets(config, toolsets)
    start = time.monotonic()
    trace = Trace(task_id=task_id, model=config.model)
    dispatcher = _Dispatcher(toolsets)

    for ts in toolsets:
        ts.set_read_only(True)
    try:
        reason, planner_final, p_calls, p_usage = _run_phase(
            trace, "planner", planner_prompt, goal, dispatcher, provider, config.model, config.max_tool_calls, classifier
        )
    finally:
        for ts in toolsets:
            ts.set_read_only(False)
    trace.system_prompts["planner"] = planner_prompt
    trace.phases.append(PhaseSummary("planner", len(trace.steps), p_calls, p_usage, planner_final))
    if reason == "provider_error":
        trace.termination_reason = reason
        return _finish(trace, p_usage, config.model, pricing, start)

    try:
        plan = extract_plan(planner_final)
        prompt = executor_prompt(plan)
    except PlanError:
        trace.fallback = True
        prompt = fallback_prompt
    trace.system_prompts["executor"] = prompt
    before = len(trace.steps)
    remaining = config.max_tool_calls - p_calls
    if remaining <= 0:
        trace.termination_reason = "limit"
        trace.phases.append(PhaseSummary("executor", 0, 0, TokenUsage()))
        return _finish(trace, p_usage, config.model, pricing, start)
    reason, final, e_calls, e_usage = _run_phase(
        trace, "executor", prompt, goal, dispatcher, provider, config.model, remaining, classifier
    )
    trace.phases.append(PhaseSummary("executor", len(trace.steps) - before, e_calls, e_usage, final))
    trace.termination_reason, trace.final_message = reason, final
    return _finish(trace, p_usage + e_usage, config.model, pricing, start)


def _check_toolsets(config, toolsets: Sequence[Toolset]) -> None:
    names = [ts.name for ts in toolsets]
    if not toolsets:
        raise ValueError("an episode needs at least one toolset")
    if config.paradigm == "hybrid" and len(toolsets) < 2:
        raise ValueError("a hybrid configuration needs at least two toolsets")
    if config.paradigm == "web_adapter" and "browser" not in names:
        raise ValueError("web_adapter requires an externally supplied browser toolset")
    if len(set(names)) != len(names):
        raise ValueError("toolset names must be unique")
