"""Per-episode wiring: workdir layout, sandbox env, toolsets and prompts."""

from __future__ import annotations

import shutil
from pathlib import Path
from typing import Sequence

from ..platform import Platform
from ..provider import PricingTable, Provider
from ..sandbox import ExecLimits, SandboxPolicy, make_workdir
from .loop import Plan, run_episode, run_planner_executor
from .prompts import AgentConfig, assemble_system_prompt
from .tools import TerminalToolset, Toolset, platform_registry
from .trace import Trace


class EpisodeEnvironment:
    """Everything one episode owns: a private workdir (with ``skills/`` and
    ``docs/`` linked in when enabled), the toolsets for the configured
    paradigm, and a handle on the platform instance."""

    def __init__(
        self,
        platform: Platform,
        config: AgentConfig,
        *,
        workdir: str | Path | None = None,
        skills_root: str | Path | None = None,
        docs_dir: str | Path | None = None,
        limits: ExecLimits = ExecLimits(),
        extra_toolsets: Sequence[Toolset] = (),
    ):
        self.platform = platform
        self.config = config
        self.base_url = platform.serve()
        self._owns_workdir = workdir is None
        self.workdir = Path(workdir) if workdir is not None else make_workdir()
        self.workdir.mkdir(parents=True, exist_ok=True)
        if "skills" in config.features:
            if skills_root is None:
                raise ValueError("the skills feature needs a skills root")
            Path(skills_root).mkdir(parents=True, exist_ok=True)
            self._link("skills", Path(skills_root))
        if "docs" in config.features:
            if docs_dir is not None:
                self._link("docs", Path(docs_dir))
            else:
                (self.workdir / "docs").mkdir(exist_ok=True)
        self.policy = SandboxPolicy(self.workdir, env=platform.profile.sandbox_env(self.base_url))
        self.toolsets = self._build_toolsets(limits, extra_toolsets)

    def _link(self, name: str, target: Path) -> None:
        link = self.workdir / name
        if link.is_symlink() or link.exists():
            return
        link.symlink_to(target.resolve(), target_is_directory=True)

    def _build_toolsets(self, limits, extra) -> list[Toolset]:
        paradigm = self.config.paradigm
        terminal = TerminalToolset(self.policy, limits)
        if paradigm == "terminal":
            return [terminal]
        if paradigm == "tool_registry":
            return [platform_registry(self.platform)]
        if paradigm == "hybrid":
            sets: list[Toolset] = [terminal, *extra]
            if not any(ts.name == "registry" for ts in extra) and not any(ts.name == "browser" for ts in extra):
                sets.insert(1, platform_registry(self.platform))
            return sets
        return list(extra)

    def toolset_map(self) -> dict[str, list[str]]:
        return {ts.name: sorted(ts.tool_names()) for ts in self.toolsets}

    def system_prompt(self, role: str = "agent", plan: Plan | None = None) -> str:
        return assemble_system_prompt(
            self.platform.profile, self.config, base_url=self.base_url, role=role,
            plan_text=plan.render() if plan else "", toolsets=self.toolset_map(),
        )

    def run(self, goal: str, provider: Provider, *, pricing: PricingTable | None = None, task_id: str = "") -> Trace:
        if self.config.orchestration == "planner_executor":
            return run_planner_executor(
                goal, self.config, self.toolsets, provider,
                planner_prompt=self.system_prompt("planner"),
                executor_prompt=lambda plan: self.system_prompt("executor", plan),
                fallback_prompt=self.system_prompt("agent"),
                pricing=pricing, task_id=task_id,
            )
        return run_episode(
            goal, self.config, self.toolsets, provider,
            system_prompt=self.system_prompt("agent"), pricing=pricing, task_id=task_id,
        )

    def close(self) -> None:
        if self._owns_workdir:
            shutil.rmtree(self.workdir, ignore_errors=True)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
