"""Episode traces and their line-delimited on-disk form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Iterable

from ..provider import ModelTurn, TokenUsage, ToolInvocation
from ..sandbox import ExecResult
from ..taxonomy import OutcomeCategory

# fields that legitimately differ between otherwise identical replays
VOLATILE_KEYS = frozenset({"wall_clock", "duration", "started_at", "finished_at"})


@dataclass
class ToolResult:
    invocation: ToolInvocation
    toolset: str
    observation: str
    exec_result: ExecResult | None = None
    outcome: OutcomeCategory | None = None

    def to_dict(self) -> dict:
        return {
            "invocation": self.invocation.to_dict(),
            "toolset": self.toolset,
            "observation": self.observation,
            "exec_result": self.exec_result.to_dict() if self.exec_result else None,
            "outcome": self.outcome.value if self.outcome else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ToolResult:
        return cls(
            ToolInvocation.from_dict(d["invocation"]),
            d["toolset"],
            d["observation"],
            ExecResult.from_dict(d["exec_result"]) if d.get("exec_result") else None,
            OutcomeCategory(d["outcome"]) if d.get("outcome") else None,
        )


@dataclass
class TraceStep:
    model_turn: ModelTurn
    tool_results: list[ToolResult] = field(default_factory=list)
    phase: str = "agent"
    # invocations emitted past the tool-call budget and never dispatched
    dropped_tool_calls: int = 0

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "model_turn": self.model_turn.to_dict(),
            "tool_results": [r.to_dict() for r in self.tool_results],
            "dropped_tool_calls": self.dropped_tool_calls,
        }

    @classmethod
    def from_dict(cls, d: dict) -> TraceStep:
        return cls(
            ModelTurn.from_dict(d["model_turn"]),
            [ToolResult.from_dict(r) for r in d["tool_results"]],
            d.get("phase", "agent"),
            d.get("dropped_tool_calls", 0),
        )


@dataclass
class PhaseSummary:
    name: str
    steps: int
    tool_calls: int
    usage: TokenUsage
    final_message: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name, "steps": self.steps, "tool_calls": self.tool_calls,
            "usage": self.usage.to_dict(), "final_message": self.final_message,
        }

    @classmethod
    def from_dict(cls, d: dict) -> PhaseSummary:
        return cls(d["name"], d["steps"], d["tool_calls"], TokenUsage.from_dict(d["usage"]), d.get("final_message", ""))


@dataclass
class Trace:
    task_id: str = ""
    model: str = ""
    steps: list[TraceStep] = field(default_factory=list)
    total_usage: TokenUsage = TokenUsage()
    total_cost: Decimal = Decimal(0)
    wall_clock: float = 0.0
    final_message: str = ""
    termination_reason: str = ""  # final | limit | provider_error
    error: str = ""
    phases: list[PhaseSummary] = field(default_factory=list)
    fallback: bool = False
    system_prompts: dict[str, str] = field(default_factory=dict)

    @property
    def tool_results(self) -> list[ToolResult]:
        return [r for s in self.steps for r in s.tool_results]

    @property
    def tool_call_count(self) -> int:
        return sum(len(s.tool_results) for s in self.steps)

    @property
    def toolset_shares(self) -> dict[str, float]:
        total = self.tool_call_count
        if not total:
            return {}
        counts: dict[str, int] = {}
        for r in self.tool_results:
            counts[r.toolset] = counts.get(r.toolset, 0) + 1
        return {k: counts[k] / total for k in sorted(counts)}

    @property
    def outcomes(self) -> list[OutcomeCategory]:
        return [r.outcome for r in self.tool_results if r.outcome is not None]

    @property
    def failed(self) -> bool:
        return self.termination_reason == "provider_error"

    # -- persistence --------------------------------------------------------

    def header(self) -> dict:
        return {"type": "episode", "task_id": self.task_id, "model": self.model, "system_prompts": self.system_prompts}

    def footer(self) -> dict:
        return {
            "type": "summary",
            "task_id": self.task_id,
            "total_usage": self.total_usage.to_dict(),
            "total_cost": str(self.total_cost),
            "tool_call_count": self.tool_call_count,
            "toolset_shares": self.toolset_shares,
            "wall_clock": self.wall_clock,
            "final_message": self.final_message,
            "termination_reason": self.termination_reason,
            "error": self.error,
            "phases": [p.to_dict() for p in self.phases],
            "fallback": self.fallback,
        }

    def to_records(self) -> list[dict]:
        steps = [{"type": "step", "index": i, **s.to_dict()} for i, s in enumerate(self.steps)]
        return [self.header(), *steps, self.footer()]

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> Trace:
        trace = cls()
        for rec in records:
            kind = rec.get("type")
            if kind == "episode":
                trace.task_id, trace.model = rec["task_id"], rec.get("model", "")
                trace.system_prompts = rec.get("system_prompts", {})
            elif kind == "step":
                trace.steps.append(TraceStep.from_dict(rec))
            elif kind == "summary":
                trace.total_usage = TokenUsage.from_dict(rec["total_usage"])
                trace.total_cost = Decimal(rec["total_cost"])
                trace.wall_clock = rec.get("wall_clock", 0.0)
                trace.final_message = rec.get("final_message", "")
                trace.termination_reason = rec.get("termination_reason", "")
                trace.error = rec.get("error", "")
                trace.phases = [PhaseSummary.from_dict(p) for p in rec.get("phases", [])]
                trace.fallback = rec.get("fallback", False)
        return trace

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for rec in self.to_records():
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> Trace:
        with Path(path).open(encoding="utf-8") as fh:
            return cls.from_records(json.loads(line) for line in fh if line.strip())


def strip_volatile(obj):
    """Drop timing fields recursively, for replay comparisons."""
    if isinstance(obj, dict):
        return {k: strip_volatile(v) for k, v in obj.items() if k not in VOLATILE_KEYS}
    if isinstance(obj, list):
        return [strip_volatile(v) for v in obj]
    return obj
