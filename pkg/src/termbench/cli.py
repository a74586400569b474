"""Command-line entry point: ``termbench <group> <command> ...``."""

from __future__ import annotations

import argparse
import errno
import json
import sys
from pathlib import Path

from .agent import AgentConfig
from .harness import (
    MismatchedTaskSets,
    OutcomeCategory,
    ProviderUnconfigured,
    RunDirectory,
    SuiteError,
    cohort_histograms,
    emit_report,
    error_breakdown,
    live_factory,
    load_suite,
    oracle_union,
    run_suite,
    scripted_factory,
    skills_growth,
)
from .harness.tasks import shipped_path
from .platform import FixtureError, Platform, load_fixture
from .provider import PricingTable

EXIT_OK = 0
EXIT_ENVIRONMENT = 1  # the run finished but some task hit an environment failure
EXIT_USAGE = 2  # bad input: unknown suite, malformed fixture, busy port, ...

AGENTS = {"terminal": "terminal", "tools": "tool_registry", "hybrid": "hybrid"}


class CliError(Exception):
    pass


def _resolve_fixture(ref: str) -> Path:
    p = Path(ref)
    if p.is_file():
        return p
    for candidate in (shipped_path("fixtures", ref), shipped_path("fixtures", f"{ref}.json")):
        if candidate.is_file():
            return candidate
    return p  # let load_fixture report the missing file


# -- platform -----------------------------------------------------------------

def cmd_platform_serve(args) -> int:
    try:
        fixture = load_fixture(_resolve_fixture(args.fixture))
    except FixtureError as exc:
        raise CliError(f"malformed fixture: {exc}") from None
    platform = Platform(args.profile)
    snapshot = platform.seed(fixture)
    try:
        url = platform.serve(args.host, args.port)
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            raise CliError(f"port {args.port} is already in use") from None
        raise
    print(f"serving fixture {fixture['name']!r} at {url} (digest {snapshot.digest})", flush=True)
    try:
        platform.wait()
    except KeyboardInterrupt:
        pass
    finally:
        platform.shutdown()
    return EXIT_OK


# -- bench --------------------------------------------------------------------

def _load_overrides(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text("utf-8"))
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read config file {path}: {exc}") from None


def cmd_bench_run(args) -> int:
    # file-based overrides fill in anything not given on the command line
    for key, value in _load_overrides(args.config).items():
        key = key.replace("-", "_")
        if getattr(args, key, None) in (None, False):
            setattr(args, key, value)
    try:
        suite = load_suite(args.suite)
    except FileNotFoundError as exc:
        raise CliError(str(exc)) from None
    except (SuiteError, FixtureError) as exc:
        raise CliError(f"invalid suite: {exc}") from None

    features = {f for f, on in (("docs", args.docs), ("skills", args.skills)) if on}
    model = args.model or ("scripted" if args.provider == "scripted" else None)
    if model is None:
        raise CliError("--model is required with the live provider")
    config = AgentConfig(
        paradigm=AGENTS[args.agent or "terminal"], features=features,
        orchestration=args.orchestration or "single", max_tool_calls=args.max_tool_calls or 50,
        model=model, platform=suite.platform,
    )
    pricing = PricingTable.load(args.pricing or shipped_path("pricing.json"))
    if model not in pricing:
        raise CliError(f"no price for model {model!r} in the pricing file")

    try:
        if args.provider == "live":
            factory = live_factory()
        else:
            traj = json.loads(Path(args.trajectories).read_text("utf-8")) if args.trajectories else suite.load_trajectories()
            factory = scripted_factory(traj)
    except ProviderUnconfigured as exc:
        raise CliError(f"provider unconfigured: {exc}") from None

    try:
        result = run_suite(
            suite, config, factory, out_dir=args.out_dir, jobs=args.jobs or 1, pricing=pricing,
            skills_root=args.skills_dir, docs_dir=args.docs_dir, provider_kind=args.provider, run_id=args.run_id,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    except ProviderUnconfigured as exc:
        raise CliError(f"provider unconfigured: {exc}") from None
    print(emit_report([result], "markdown_table"), end="")
    print(f"\nrun directory: {args.out_dir}")
    return EXIT_ENVIRONMENT if result.count("environment-failure") else EXIT_OK


def cmd_report(args) -> int:
    results = [_open_run(r).suite_result() for r in args.runs]
    fmt = "structured" if args.format == "json" else "markdown_table"
    print(emit_report(results, fmt), end="")
    return EXIT_OK


# -- trace --------------------------------------------------------------------

def _open_run(path: str) -> RunDirectory:
    run = RunDirectory(path)
    try:
        run.manifest()
    except FileNotFoundError as exc:
        raise CliError(str(exc)) from None
    return run


def _indent(text: str, prefix: str = "      ") -> str:
    return "\n".join(prefix + line for line in text.splitlines()) or prefix


def render_trace(trace, full: bool = False, limit: int = 600) -> str:
    lines = [f"task {trace.task_id}  model {trace.model}"]
    n = 0
    for i, step in enumerate(trace.steps):
        usage = step.model_turn.usage
        lines.append(f"[step {i}] {step.phase}  tokens in={usage.input_tokens} out={usage.output_tokens}")
        if step.model_turn.text:
            lines.append(_indent(step.model_turn.text, "  > "))
        for r in step.tool_results:
            n += 1
            args = r.invocation.arguments
            shown = args["command"] if set(args) == {"command"} else json.dumps(args, sort_keys=True)
            lines.append(f"  call {n} [{r.toolset}:{r.invocation.tool_name}] {r.outcome.value if r.outcome else '?'}")
            lines.append(_indent(shown, "    $ "))
            obs = r.observation if full or len(r.observation) <= limit else r.observation[:limit] + " ..."
            lines.append(_indent(obs))
        if step.dropped_tool_calls:
            lines.append(f"  ({step.dropped_tool_calls} tool call(s) dropped at the budget)")
    u = trace.total_usage
    lines += [
        f"termination: {trace.termination_reason}" + (f" ({trace.error})" if trace.error else ""),
        f"tool calls: {n}",
        f"tokens: in={u.input_tokens} out={u.output_tokens}  cost: ${trace.total_cost}",
    ]
    if trace.fallback:
        lines.append("planner produced no plan; executor ran with the single-agent prompt")
    lines.append(f"final message: {trace.final_message}")
    return "\n".join(lines) + "\n"


def cmd_trace_show(args) -> int:
    run = _open_run(args.run)
    try:
        trace = run.read_trace(args.task_id)
    except FileNotFoundError as exc:
        raise CliError(f"not found: {exc}") from None
    status = {r.task_id: r.status for r in run.results()}.get(args.task_id, "?")
    print(render_trace(trace, full=args.full), end="")
    print(f"status: {status}")
    return EXIT_OK


# -- analyze ------------------------------------------------------------------

def _emit(args, payload, table: list[list[str]]) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
        return
    widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    for row in table:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())


def cmd_analyze(args) -> int:
    runs = [_open_run(r) for r in args.runs]
    what = args.what
    if what == "oracle":
        if len(runs) != 2:
            raise CliError("oracle needs exactly two runs")
        a, b = (r.suite_result().outcomes() for r in runs)
        try:
            o = oracle_union(a, b)
        except MismatchedTaskSets as exc:
            raise CliError(f"mismatched task sets: {exc}") from None
        payload = {"n": o.n, "both": o.both, "only_a": o.only_a, "only_b": o.only_b, "sr_oracle": o.sr_oracle}
        table = [["n", "both", "only_a", "only_b", "oracle SR (%)"],
                 [str(o.n), str(o.both), str(o.only_a), str(o.only_b), f"{o.sr_oracle * 100:.1f}"]]
        _emit(args, payload, table)
        return EXIT_OK
    if len(runs) != 1:
        raise CliError(f"{what} takes exactly one run")
    run = runs[0]
    results = run.results()
    if what == "histogram":
        hist = cohort_histograms(results, args.cap)
        bins = sorted(set(hist["success"]) | set(hist["failure"]))
        table = [["tool calls", "success", "failure"]] + [
            [str(b) + ("+" if b == args.cap else ""), str(hist["success"].get(b, 0)), str(hist["failure"].get(b, 0))]
            for b in bins
        ]
        _emit(args, {k: {str(b): c for b, c in v.items()} for k, v in hist.items()}, table)
    elif what == "errors":
        traces = {r.task_id: run.read_trace(r.task_id) for r in results if r.scored and r.trace_ref}
        cohorts = {
            "success": error_breakdown(traces[r.task_id] for r in results if r.success and r.task_id in traces),
            "failure": error_breakdown(traces[r.task_id] for r in results if r.scored and not r.success
                                       and r.task_id in traces),
        }
        table = [["category", "success (%)", "failure (%)"]] + [
            [c.value, f"{cohorts['success'][c] * 100:.1f}", f"{cohorts['failure'][c] * 100:.1f}"]
            for c in OutcomeCategory
        ]
        _emit(args, {k: {c.value: f for c, f in v.items()} for k, v in cohorts.items()}, table)
    elif what == "skills-growth":
        events = run.skills_events()
        if not events:
            raise CliError("run has no skills events (was --skills enabled?)")
        series = skills_growth(events)
        table = [["task", "cumulative successes", "files", "KB"]] + [
            [s["task_id"], str(s["cumulative_successes"]), str(s["file_count"]), f"{s['total_kilobytes']:.2f}"]
            for s in series
        ]
        _emit(args, series, table)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="termbench", description="Terminal-agent benchmark harness")
    groups = parser.add_subparsers(dest="group", required=True)

    plat = groups.add_parser("platform", help="mock platform").add_subparsers(dest="command", required=True)
    serve = plat.add_parser("serve", help="serve a fixture over HTTP until interrupted")
    serve.add_argument("--fixture", required=True, help="fixture file or shipped fixture name")
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--profile", choices=["servicenow", "erpnext"], default="servicenow")
    serve.set_defaults(func=cmd_platform_serve)

    bench = groups.add_parser("bench", help="benchmark runs").add_subparsers(dest="command", required=True)
    run = bench.add_parser("run", help="run a task suite")
    run.add_argument("--suite", required=True, help="suite file, suite directory or shipped suite name")
    run.add_argument("--agent", choices=sorted(AGENTS))
    run.add_argument("--orchestration", choices=["single", "planner_executor"])
    run.add_argument("--provider", choices=["scripted", "live"], default="scripted")
    run.add_argument("--model")
    run.add_argument("--docs", action="store_true", help="enable the documentation extension")
    run.add_argument("--docs-dir")
    run.add_argument("--skills", action="store_true", help="enable the skills extension (sequential only)")
    run.add_argument("--skills-dir", help="skills root (default: <out-dir>/skills)")
    run.add_argument("--out-dir", required=True)
    run.add_argument("--jobs", type=int)
    run.add_argument("--pricing", help="JSON pricing file (default: shipped table)")
    run.add_argument("--trajectories", help="scripted trajectories file (default: the suite's own)")
    run.add_argument("--max-tool-calls", type=int)
    run.add_argument("--run-id")
    run.add_argument("--config", help="JSON file whose keys fill in flags not given on the command line")
    run.set_defaults(func=cmd_bench_run)

    report = bench.add_parser("report", help="combined report over run directories")
    report.add_argument("runs", nargs="+")
    report.add_argument("--format", choices=["markdown", "json"], default="markdown")
    report.set_defaults(func=cmd_report)

    trace = groups.add_parser("trace", help="trace inspection").add_subparsers(dest="command", required=True)
    show = trace.add_parser("show", help="render one episode")
    show.add_argument("run")
    show.add_argument("task_id")
    show.add_argument("--full", action="store_true", help="do not shorten long observations")
    show.set_defaults(func=cmd_trace_show)

    analyze = groups.add_parser("analyze", help="aggregates over run directories")
    analyze.add_argument("what", choices=["histogram", "errors", "skills-growth", "oracle"])
    analyze.add_argument("runs", nargs="+")
    analyze.add_argument("--cap", type=int, default=50)
    analyze.add_argument("--format", choices=["table", "json"], default="table")
    analyze.set_defaults(func=cmd_analyze)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"termbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
