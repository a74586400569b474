"""Report emission: a markdown table and a structured JSON document.

Numbers are carried at full precision until emission. In the markdown table
success rates and standard errors are shown in percentage points with one
decimal and costs in dollars with two; a row is bold when its success rate is
within one standard error of the best row for the same platform.
"""

from __future__ import annotations

import json
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

from .runner import SuiteResult

TIMING_FIELDS = ("mean_wall_clock",)
_MD_HEADER = ("Platform", "Agent", "n", "SR (%)", "SE (pp)", "Cost ($)", "Tool calls", "Wall-clock (s)")


def _round(x: Decimal | float, places: int) -> str:
    q = Decimal(1).scaleb(-places)
    return str(Decimal(str(x)).quantize(q, rounding=ROUND_HALF_UP))


def best_equivalent(rows: Sequence[dict]) -> list[bool]:
    """Flag rows whose SR is within one SE (of the best row) of the best
    SR on the same platform."""
    flags = []
    for row in rows:
        peers = [r for r in rows if r["platform"] == row["platform"] and r["sr"] is not None]
        if row["sr"] is None:
            flags.append(False)
            continue
        best = max(peers, key=lambda r: (r["sr"], -r["se"]))
        flags.append(best["sr"] - row["sr"] <= best["se"] + 1e-12)
    return flags


def report_rows(results: Sequence[SuiteResult]) -> list[dict]:
    if not results:
        raise ValueError("a report needs at least one suite result")
    rows = []
    for res in results:
        scored = res.scored
        # with every task excluded there is no rate to report
        rate = res.rate() if scored else None
        rows.append({
            "suite": res.suite,
            "platform": res.platform,
            "agent": res.agent,
            "n": len(scored),
            "successes": sum(r.success for r in scored),
            "sr": rate.sr if rate else None,
            "se": rate.se if rate else None,
            "total_cost": str(res.total_cost),
            "mean_cost": str(res.mean_cost),
            "mean_tool_calls": res.mean_tool_calls,
            "mean_wall_clock": res.mean_wall_clock,
            "invalid_tasks": res.count("invalid-task"),
            "environment_failures": res.count("environment-failure"),
            "categories": res.by_category(),
            "outcomes": {r.task_id: r.status for r in res.results},
        })
    for row, flag in zip(rows, best_equivalent(rows)):
        row["best"] = flag
    return rows


def _markdown(rows: list[dict]) -> str:
    lines = [
        "| " + " | ".join(_MD_HEADER) + " |",
        "|" + "|".join(["---"] * 2 + ["---:"] * (len(_MD_HEADER) - 2)) + "|",
    ]
    for r in rows:
        sr = _round(r["sr"] * 100, 1) if r["sr"] is not None else "n/a"
        if r["best"]:
            sr = f"**{sr}**"
        se = _round(r["se"] * 100, 1) if r["se"] is not None else "n/a"
        cells = [
            r["platform"], r["agent"], str(r["n"]), sr, se,
            _round(Decimal(r["mean_cost"]), 2), _round(r["mean_tool_calls"], 1), _round(r["mean_wall_clock"], 1),
        ]
        lines.append("| " + " | ".join(cells) + " |")
    notes = []
    for r in rows:
        excluded = r["invalid_tasks"] + r["environment_failures"]
        if excluded:
            notes.append(
                f"{r['platform']}/{r['agent']}: {r['invalid_tasks']} invalid task(s) and "
                f"{r['environment_failures']} environment failure(s) excluded from n."
            )
    text = "\n".join(lines) + "\n"
    if notes:
        text += "\n" + "\n".join(notes) + "\n"
    return text


def emit_report(results: Sequence[SuiteResult], format: str = "markdown_table") -> str:
    rows = report_rows(results)
    if format == "markdown_table":
        return _markdown(rows)
    if format == "structured":
        return json.dumps({"rows": rows}, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def parse_report(text: str) -> list[dict]:
    return json.loads(text)["rows"]


def strip_timing(text: str, format: str = "markdown_table") -> str:
    """The report with wall-clock figures removed, for run-to-run comparison."""
    if format == "structured":
        rows = parse_report(text)
        for r in rows:
            for k in TIMING_FIELDS:
                r.pop(k, None)
        return json.dumps({"rows": rows}, indent=2, sort_keys=True) + "\n"
    out = []
    for line in text.splitlines():
        if line.startswith("|"):
            line = line[: line.rstrip("|").rstrip().rfind("|") + 1]
        out.append(line)
    return "\n".join(out) + "\n"
