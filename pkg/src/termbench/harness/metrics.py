"""Aggregates over task results and traces."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from ..agent.trace import Trace
from ..taxonomy import OutcomeCategory


class MismatchedTaskSets(ValueError):
    pass


@dataclass(frozen=True)
class Rate:
    sr: float
    se: float
    successes: int
    n: int


def success_rate_se(successes: int, n: int) -> Rate:
    """Sample proportion and its standard error sqrt(p(1-p)/n)."""
    if n <= 0:
        raise ValueError("n must be positive")
    if not 0 <= successes <= n:
        raise ValueError("successes must lie in [0, n]")
    p = successes / n
    return Rate(p, math.sqrt(p * (1.0 - p) / n), successes, n)


def _count(item) -> int:
    return item.tool_call_count if hasattr(item, "tool_call_count") else int(item)


def tool_call_histogram(items: Iterable, cap: int = 50) -> dict[int, int]:
    """Bin per-task tool-call counts; counts above ``cap`` land in the cap bin.

    ``items`` may be traces or plain integers.
    """
    if cap <= 0:
        raise ValueError("cap must be positive")
    bins = Counter(min(_count(x), cap) for x in items)
    return dict(sorted(bins.items()))


def cohort_histograms(results: Sequence, cap: int = 50) -> dict[str, dict[int, int]]:
    """Separate histograms for the success and failure cohorts of scored tasks."""
    scored = [r for r in results if r.status in ("success", "failure")]
    return {
        "success": tool_call_histogram((r.tool_calls for r in scored if r.success), cap),
        "failure": tool_call_histogram((r.tool_calls for r in scored if not r.success), cap),
    }


def error_breakdown(traces: Iterable[Trace | Sequence[OutcomeCategory]]) -> dict[OutcomeCategory, float]:
    """Fraction of ALL tool calls in the cohort falling in each category.

    Every category is present in the result; for a cohort with at least one
    call the fractions sum to 1.
    """
    counts: Counter = Counter()
    for t in traces:
        outcomes = t.outcomes if isinstance(t, Trace) else t
        counts.update(OutcomeCategory(o) for o in outcomes)
    total = sum(counts.values())
    return {c: (counts[c] / total if total else 0.0) for c in OutcomeCategory}


@dataclass(frozen=True)
class OracleResult:
    sr_oracle: float
    only_a: int
    only_b: int
    both: int
    n: int


def oracle_union(results_a: Mapping[str, bool], results_b: Mapping[str, bool]) -> OracleResult:
    """Per-task OR of two agents' outcomes, keyed by task id."""
    if set(results_a) != set(results_b):
        raise MismatchedTaskSets("the two result sets cover different tasks")
    n = len(results_a)
    if n == 0:
        raise ValueError("empty result sets")
    both = sum(1 for k in results_a if results_a[k] and results_b[k])
    only_a = sum(1 for k in results_a if results_a[k] and not results_b[k])
    only_b = sum(1 for k in results_a if results_b[k] and not results_a[k])
    return OracleResult((both + only_a + only_b) / n, only_a, only_b, both, n)


def cumulative_successes(outcomes: Sequence[bool]) -> list[int]:
    out, running = [], 0
    for ok in outcomes:
        running += bool(ok)
        out.append(running)
    return out


def skills_growth(events: Sequence[Mapping]) -> list[dict]:
    """Cumulative per-task series from skills events: successes, file count, KB."""
    series = []
    successes = 0
    for ev in events:
        successes += bool(ev.get("success"))
        series.append({
            "task_id": ev["task_id"],
            "cumulative_successes": successes,
            "file_count": ev["file_count"],
            "total_kilobytes": ev["total_kilobytes"],
        })
    return series
