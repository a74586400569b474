"""Benchmark harness: tasks and validators, runs, metrics and reports."""

from ..taxonomy import SUCCESS_CATEGORIES, OutcomeCategory, classify_outcome
from .metrics import (
    MismatchedTaskSets,
    OracleResult,
    Rate,
    cohort_histograms,
    cumulative_successes,
    error_breakdown,
    oracle_union,
    skills_growth,
    success_rate_se,
    tool_call_histogram,
)
from .report import best_equivalent, emit_report, parse_report, report_rows, strip_timing
from .runner import (
    ProviderUnconfigured,
    RunDirectory,
    SuiteResult,
    TaskResult,
    agent_label,
    first_skills_read,
    live_factory,
    run_suite,
    run_task,
    scripted_factory,
)
from .tasks import Suite, SuiteError, TaskInstance, ValidatorCheck, evaluate_check, load_suite, normalize_answer

__all__ = [
    "MismatchedTaskSets",
    "OracleResult",
    "OutcomeCategory",
    "ProviderUnconfigured",
    "Rate",
    "RunDirectory",
    "SUCCESS_CATEGORIES",
    "Suite",
    "SuiteError",
    "SuiteResult",
    "TaskInstance",
    "TaskResult",
    "ValidatorCheck",
    "agent_label",
    "best_equivalent",
    "classify_outcome",
    "cohort_histograms",
    "cumulative_successes",
    "emit_report",
    "error_breakdown",
    "evaluate_check",
    "first_skills_read",
    "live_factory",
    "load_suite",
    "normalize_answer",
    "oracle_union",
    "parse_report",
    "report_rows",
    "run_suite",
    "run_task",
    "scripted_factory",
    "skills_growth",
    "strip_timing",
    "success_rate_se",
    "tool_call_histogram",
]
