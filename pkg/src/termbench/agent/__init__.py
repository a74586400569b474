"""Episode engine: prompts, toolsets, the agent loop and traces."""

from .environment import EpisodeEnvironment
from .loop import EmptyPlan, NoPlanHeading, Plan, PlanError, extract_plan, run_episode, run_planner_executor
from .prompts import AgentConfig, UnknownProfile, assemble_system_prompt
from .tools import (
    DuplicateTool,
    TerminalToolset,
    ToolOutcome,
    ToolRegistry,
    Toolset,
    WebAdapterToolset,
    platform_registry,
    register_tool,
)
from .trace import PhaseSummary, ToolResult, Trace, TraceStep, strip_volatile

__all__ = [
    "AgentConfig",
    "DuplicateTool",
    "EmptyPlan",
    "EpisodeEnvironment",
    "NoPlanHeading",
    "PhaseSummary",
    "Plan",
    "PlanError",
    "TerminalToolset",
    "ToolOutcome",
    "ToolRegistry",
    "ToolResult",
    "Toolset",
    "Trace",
    "TraceStep",
    "UnknownProfile",
    "WebAdapterToolset",
    "assemble_system_prompt",
    "extract_plan",
    "platform_registry",
    "register_tool",
    "run_episode",
    "run_planner_executor",
    "strip_volatile",
]
