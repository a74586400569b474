"""Run the shipped 10-task ITSM suite, print the report and the trace analytics."""

import tempfile
from pathlib import Path

from termbench.agent import AgentConfig
from termbench.harness import (
    cohort_histograms,
    emit_report,
    error_breakdown,
    load_suite,
    oracle_union,
    run_suite,
    scripted_factory,
)
from termbench.harness.runner import RunDirectory
from termbench.harness.tasks import shipped_path
from termbench.provider import PricingTable

suite = load_suite("itsm-demo")
pricing = PricingTable.load(shipped_path("pricing.json"))
out = Path(tempfile.mkdtemp()) / "itsm"
result = run_suite(suite, AgentConfig(), scripted_factory(suite.load_trajectories()), out_dir=out, pricing=pricing)

print(emit_report([result]))
for r in result.results:
    print(f"  {r.task_id}  {r.category:<22} {r.status:<8} calls={r.tool_calls}")

run = RunDirectory(out)
print("\ntool-call histogram:", cohort_histograms(run.results()))
traces = [run.read_trace(r.task_id) for r in run.results() if not r.success]
print("failure-cohort breakdown:")
for category, share in error_breakdown(traces).items():
    if share:
        print(f"  {category.value:<18} {share:.0%}")

# two agents' outcome vectors combined by a per-task oracle
a = result.outcomes()
b = {k: (not v) if k in ("t04", "t08") else v for k, v in a.items()}
o = oracle_union(a, b)
print(f"\noracle over two agents: {o.sr_oracle:.0%} (both {o.both}, only a {o.only_a}, only b {o.only_b})")
print(f"run directory: {out}")
