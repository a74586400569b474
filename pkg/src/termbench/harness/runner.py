"""Task execution: reset, pre-check, episode, post-check; plus whole suites
with an on-disk run directory."""

from __future__ import annotations

import json
import os
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal
from pathlib import Path
from typing import Callable, Sequence

from ..agent import AgentConfig, EpisodeEnvironment, Trace
from ..platform import Platform, Snapshot
from ..provider import HttpChatProvider, PricingTable, Provider, ProviderError, TurnScript, make_scripted
from ..sandbox import ExecLimits
from ..skills import SkillStore, is_skills_read
from .metrics import Rate, success_rate_se
from .tasks import Suite, TaskInstance, evaluate_check

STATUSES = ("success", "failure", "invalid-task", "environment-failure")
ProviderFactory = Callable[[TaskInstance], Provider]


class ProviderUnconfigured(RuntimeError):
    pass


@dataclass
class TaskResult:
    task_id: str
    category: str
    kind: str
    status: str
    cost: Decimal = Decimal(0)
    tool_calls: int = 0
    wall_clock: float = 0.0
    checks: list[bool] = field(default_factory=list)
    pre_checks: list[bool] = field(default_factory=list)
    termination_reason: str = ""
    error: str = ""
    trace: Trace | None = None
    trace_ref: str = ""

    @property
    def success(self) -> bool:
        return self.status == "success"

    @property
    def scored(self) -> bool:
        return self.status in ("success", "failure")

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "category": self.category,
            "kind": self.kind,
            "status": self.status,
            "success": self.success,
            "cost": str(self.cost),
            "tool_calls": self.tool_calls,
            "wall_clock": self.wall_clock,
            "checks": self.checks,
            "pre_checks": self.pre_checks,
            "termination_reason": self.termination_reason,
            "error": self.error,
            "trace_ref": self.trace_ref,
        }

    @classmethod
    def from_dict(cls, d: dict) -> TaskResult:
        return cls(
            d["task_id"], d.get("category", ""), d.get("kind", "write"), d["status"], Decimal(d.get("cost", "0")),
            d.get("tool_calls", 0), d.get("wall_clock", 0.0), d.get("checks", []), d.get("pre_checks", []),
            d.get("termination_reason", ""), d.get("error", ""), None, d.get("trace_ref", ""),
        )


def agent_label(config: AgentConfig) -> str:
    base = {"terminal": "terminal", "tool_registry": "tools", "hybrid": "hybrid", "web_adapter": "web"}[config.paradigm]
    label = base + "".join(f"+{f}" for f in sorted(config.features))
    if config.orchestration == "planner_executor":
        label += " (planner-executor)"
    return label


@dataclass
class SuiteResult:
    suite: str
    platform: str
    agent: str
    results: list[TaskResult]
    config: dict = field(default_factory=dict)

    @property
    def scored(self) -> list[TaskResult]:
        return [r for r in self.results if r.scored]

    def rate(self) -> Rate:
        scored = self.scored
        return success_rate_se(sum(r.success for r in scored), len(scored))

    def _mean(self, values) -> float:
        values = list(values)
        return sum(values) / len(values) if values else 0.0

    @property
    def total_cost(self) -> Decimal:
        return sum((r.cost for r in self.scored), Decimal(0))

    @property
    def mean_cost(self) -> Decimal:
        n = len(self.scored)
        return self.total_cost / n if n else Decimal(0)

    @property
    def mean_tool_calls(self) -> float:
        return self._mean(r.tool_calls for r in self.scored)

    @property
    def mean_wall_clock(self) -> float:
        return self._mean(r.wall_clock for r in self.scored)

    def count(self, status: str) -> int:
        return sum(r.status == status for r in self.results)

    def by_category(self) -> dict[str, dict]:
        out: dict[str, dict] = {}
        for r in self.scored:
            entry = out.setdefault(r.category, {"n": 0, "successes": 0})
            entry["n"] += 1
            entry["successes"] += r.success
        for entry in out.values():
            entry["sr"] = entry["successes"] / entry["n"]
        return dict(sorted(out.items()))

    def outcomes(self) -> dict[str, bool]:
        return {r.task_id: r.success for r in self.scored}


# -- single task --------------------------------------------------------------

def platform_healthy(base_url: str, timeout: float = 5.0) -> bool:
    try:
        with urllib.request.urlopen(f"{base_url}/health", timeout=timeout) as resp:
            return resp.status == 200
    except OSError:
        return False


def run_task(
    instance: TaskInstance,
    config: AgentConfig,
    provider: Provider,
    *,
    platform: Platform,
    snapshot: Snapshot,
    pricing: PricingTable | None = None,
    skills_root: str | Path | None = None,
    docs_dir: str | Path | None = None,
    limits: ExecLimits = ExecLimits(),
) -> TaskResult:
    """Reset, verify the checks fail on the untouched state, run the episode,
    then evaluate the checks. Success iff every check passes afterwards."""
    result = TaskResult(instance.id, instance.category, instance.kind, "failure")
    platform.reset(snapshot)
    result.pre_checks = [evaluate_check(c, platform, "") for c in instance.checks]
    if any(result.pre_checks):
        result.status = "invalid-task"
        result.error = "a check passes before the agent acted"
        return result

    base_url = platform.serve()
    if not platform_healthy(base_url):
        result.status = "environment-failure"
        result.error = "platform unreachable before the episode"
        return result

    with EpisodeEnvironment(platform, config, skills_root=skills_root, docs_dir=docs_dir, limits=limits) as env:
        trace = env.run(instance.goal, provider, pricing=pricing, task_id=instance.id)
    result.trace = trace
    result.cost = trace.total_cost
    result.tool_calls = trace.tool_call_count
    result.wall_clock = trace.wall_clock
    result.termination_reason = trace.termination_reason
    result.error = trace.error

    if not platform_healthy(base_url):
        result.status = "environment-failure"
        result.error = "platform unreachable after the episode"
        return result
    result.checks = [evaluate_check(c, platform, trace.final_message) for c in instance.checks]
    result.status = "success" if all(result.checks) else "failure"
    return result


# -- providers ----------------------------------------------------------------

def scripted_factory(trajectories: dict[str, dict]) -> ProviderFactory:
    """Per-task scripted providers. Tasks without a script answer immediately."""

    def factory(task: TaskInstance) -> Provider:
        spec = dict(trajectories.get(task.id, {}))
        spec.setdefault("exhaustion", "final_message")
        return make_scripted(TurnScript.from_dict(spec))

    return factory


def live_factory() -> ProviderFactory:
    if not os.environ.get("PROVIDER_BASE_URL"):
        raise ProviderUnconfigured("set PROVIDER_BASE_URL (and PROVIDER_API_KEY) to use the live provider")
    try:
        shared = HttpChatProvider()
    except ProviderError as exc:
        raise ProviderUnconfigured(str(exc)) from exc
    return lambda task: shared


# -- suites -------------------------------------------------------------------

def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _skills_event(task_id: str, index: int, success: bool, before: dict, after: dict, store: SkillStore, trace) -> dict:
    created = sorted(set(after) - set(before))
    deleted = sorted(set(before) - set(after))
    modified = sorted(k for k in set(after) & set(before) if after[k] != before[k])
    promoted = sorted(
        k for k in set(after) & set(before) if before[k]["status"] == "unverified" and after[k]["status"] == "verified"
    )
    stats = store.stats()
    return {
        "task_id": task_id,
        "index": index,
        "success": success,
        "created": created,
        "modified": modified,
        "deleted": deleted,
        "promoted": promoted,
        "statuses": {k: v["status"] for k, v in sorted(after.items())},
        "file_count": stats.file_count,
        "total_kilobytes": stats.total_kilobytes,
        "first_skills_read": first_skills_read(trace) if trace is not None else None,
    }


def first_skills_read(trace: Trace) -> int | None:
    """1-based index of the first tool call that reads the skills directory."""
    for i, r in enumerate(trace.tool_results, 1):
        cmd = r.invocation.arguments.get("command", "")
        if isinstance(cmd, str) and is_skills_read(cmd):
            return i
    return None


class RunDirectory:
    """Layout: ``manifest.json``, ``traces/<task>.jsonl``, ``results.jsonl``,
    ``report.md``, ``report.json`` and, with skills, ``skills-events.jsonl``."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def manifest(self) -> dict:
        if not self.manifest_path.is_file():
            raise FileNotFoundError(f"no manifest in {self.root}")
        return json.loads(self.manifest_path.read_text("utf-8"))

    def write_manifest(self, manifest: dict) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = self.manifest_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8")
        tmp.replace(self.manifest_path)

    def trace_path(self, task_id: str) -> Path:
        return self.root / "traces" / f"{task_id}.jsonl"

    def read_trace(self, task_id: str) -> Trace:
        path = self.trace_path(task_id)
        if not path.is_file():
            raise FileNotFoundError(f"no trace for task {task_id!r} in {self.root}")
        return Trace.read(path)

    def results(self) -> list[TaskResult]:
        path = self.root / "results.jsonl"
        return [TaskResult.from_dict(json.loads(l)) for l in path.read_text("utf-8").splitlines() if l.strip()]

    def suite_result(self) -> SuiteResult:
        m = self.manifest()
        return SuiteResult(m["suite"]["name"], m["platform"], m["agent"], self.results(), m["agent_config"])

    def skills_events(self) -> list[dict]:
        path = self.root / "skills-events.jsonl"
        if not path.is_file():
            return []
        return [json.loads(l) for l in path.read_text("utf-8").splitlines() if l.strip()]


def run_suite(
    suite: Suite,
    config: AgentConfig,
    provider_factory: ProviderFactory,
    *,
    out_dir: str | Path | None = None,
    jobs: int = 1,
    pricing: PricingTable | None = None,
    skills_root: str | Path | None = None,
    docs_dir: str | Path | None = None,
    limits: ExecLimits = ExecLimits(),
    provider_kind: str = "scripted",
    run_id: str | None = None,
    tasks: Sequence[str] | None = None,
) -> SuiteResult:
    """Run every task of ``suite``. Sequential by default; ``jobs > 1`` runs
    tasks concurrently with one platform instance per task (skills must be
    off). Results are always listed in suite order."""
    from .report import emit_report  # report imports this module

    skills_on = "skills" in config.features
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    if skills_on and jobs > 1:
        raise ValueError("skills require sequential execution")
    if skills_on and skills_root is None:
        if out_dir is None:
            raise ValueError("the skills feature needs a skills root or an output directory")
        skills_root = Path(out_dir) / "skills"
    selected = [t for t in suite.tasks if tasks is None or t.id in tasks]
    fixtures = {name: suite.fixture_data(name) for name in sorted({t.fixture for t in selected})}

    run = RunDirectory(out_dir) if out_dir is not None else None
    manifest: dict = {}
    if run is not None:
        digests = {}
        for name, data in fixtures.items():
            probe = Platform(suite.platform)
            digests[name] = probe.seed(data).digest
        manifest = {
            "run_id": run_id or datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ"),
            "suite": {"name": suite.name, "path": str(suite.path) if suite.path else None},
            "platform": suite.platform,
            "agent": agent_label(config),
            "agent_config": config.to_dict(),
            "provider": provider_kind,
            "jobs": jobs,
            "fixture_digests": digests,
            "started_at": _now(),
            "finished_at": None,
            "artifacts": [],
        }
        run.write_manifest(manifest)
        (run.root / "traces").mkdir(parents=True, exist_ok=True)
        for stale in ("results.jsonl", "skills-events.jsonl"):
            (run.root / stale).unlink(missing_ok=True)

    def execute(task: TaskInstance, platform: Platform, snapshot: Snapshot) -> TaskResult:
        try:
            provider = provider_factory(task)
        except ProviderError as exc:
            raise ProviderUnconfigured(str(exc)) from exc
        return run_task(
            task, config, provider, platform=platform, snapshot=snapshot, pricing=pricing,
            skills_root=skills_root, docs_dir=docs_dir, limits=limits,
        )

    results: list[TaskResult] = []
    events: list[dict] = []
    if jobs == 1:
        platforms: dict[str, tuple[Platform, Snapshot]] = {}
        store = SkillStore(skills_root) if skills_on else None
        try:
            for index, task in enumerate(selected):
                if task.fixture not in platforms:
                    p = Platform(suite.platform)
                    platforms[task.fixture] = (p, p.seed(fixtures[task.fixture]))
                platform, snapshot = platforms[task.fixture]
                before = store.inventory() if store else {}
                res = execute(task, platform, snapshot)
                results.append(res)
                if store is not None:
                    events.append(_skills_event(task.id, index, res.success, before, store.inventory(), store, res.trace))
        finally:
            for p, _ in platforms.values():
                p.shutdown()
    else:
        def isolated(task: TaskInstance) -> TaskResult:
            p = Platform(suite.platform)
            try:
                return execute(task, p, p.seed(fixtures[task.fixture]))
            finally:
                p.shutdown()

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(isolated, selected))

    outcome = SuiteResult(suite.name, suite.platform, agent_label(config), results, config.to_dict())
    if run is not None:
        artifacts = []
        for res in results:
            if res.trace is not None:
                path = run.trace_path(res.task_id)
                res.trace.write(path)
                res.trace_ref = path.relative_to(run.root).as_posix()
                artifacts.append(res.trace_ref)
        with (run.root / "results.jsonl").open("w", encoding="utf-8") as fh:
            for res in results:
                fh.write(json.dumps(res.to_dict(), sort_keys=True) + "\n")
        artifacts.append("results.jsonl")
        if skills_on:
            with (run.root / "skills-events.jsonl").open("w", encoding="utf-8") as fh:
                for ev in events:
                    fh.write(json.dumps(ev, sort_keys=True) + "\n")
            artifacts.append("skills-events.jsonl")
            root = Path(skills_root).resolve()
            if run.root.resolve() in root.parents:
                artifacts.append(root.relative_to(run.root.resolve()).as_posix() + "/")
        (run.root / "report.md").write_text(emit_report([outcome], "markdown_table"), "utf-8")
        (run.root / "report.json").write_text(emit_report([outcome], "structured"), "utf-8")
        artifacts += ["report.md", "report.json"]
        manifest["artifacts"] = artifacts
        manifest["finished_at"] = _now()
        run.write_manifest(manifest)
    return outcome
