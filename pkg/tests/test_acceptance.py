"""Headline acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line (bypassing output capture)
so the verdicts are visible in a plain ``pytest -v`` log.
"""

from __future__ import annotations

import contextlib
import json
import random
import sys
import time
from decimal import Decimal
from fractions import Fraction

import pytest

from query_oracle import FIELD_TYPES, random_query, random_records, reference_query
from taxonomy_cases import ROWS
from termbench.agent import AgentConfig, EpisodeEnvironment
from termbench.harness import (
    emit_report,
    evaluate_check,
    load_suite,
    oracle_union,
    run_suite,
    scripted_factory,
    strip_timing,
    success_rate_se,
)
from termbench.harness.report import report_rows
from termbench.harness.runner import RunDirectory
from termbench.platform import Platform, evaluate_query, parse_query
from termbench.provider import (
    ModelPrice,
    ModelTurn,
    PricingTable,
    TokenUsage,
    ToolInvocation,
    compute_cost,
    make_scripted,
)
from termbench.sandbox import TRUNCATION_MARKER, ExecLimits, SandboxPolicy, execute, make_workdir
from termbench.taxonomy import classify_outcome


@pytest.fixture
def criterion(request, capsys):
    """Print one verdict line for the running criterion."""

    @contextlib.contextmanager
    def verdict(name: str, detail=lambda: ""):
        try:
            yield
        except BaseException:
            with capsys.disabled():
                print(f"\nFAIL  {name}", flush=True)
            raise
        with capsys.disabled():
            extra = detail()
            print(f"\nPASS  {name}" + (f"  ({extra})" if extra else ""), flush=True)

    return verdict


def test_se_reproduction(criterion):
    targets = {330: 2.2, 192: 2.9, 207: 2.8, 729: 1.5}
    got = {}
    with criterion("SE reproduction", lambda: ", ".join(f"n={n}: {v:.3f} pp" for n, v in got.items())):
        for n, pp in targets.items():
            # successes are whole tasks, so 0.8 n is rounded (192 -> 154, 207 -> 166)
            got[n] = success_rate_se(round(0.8 * n), n).se * 100
            assert abs(got[n] - pp) <= 0.05, (n, got[n])


def test_oracle_reproduction(criterion):
    result = {}
    with criterion("Oracle reproduction", lambda: f"{result['sr'] * 100:.2f}%"):
        ids = [f"task-{i:03d}" for i in range(330)]
        terminal = {t: i < 187 + 55 for i, t in enumerate(ids)}
        web = {t: i < 187 or 242 <= i < 242 + 52 for i, t in enumerate(ids)}
        r = oracle_union(terminal, web)
        result["sr"] = r.sr_oracle
        assert (r.both, r.only_a, r.only_b) == (187, 55, 52)
        assert abs(r.sr_oracle * 100 - 89.1) <= 0.1


def test_classifier_fidelity(criterion):
    hits = []
    with criterion("Classifier fidelity", lambda: f"{sum(hits)}/{len(ROWS)}"):
        for observation, exec_result, expected in ROWS:
            hits.append(classify_outcome(observation, exec_result) is expected)
        assert all(hits) and len(hits) == 11


def test_query_engine_oracle_equivalence(criterion):
    elapsed = []
    with criterion("Query-engine oracle equivalence", lambda: f"1000 cases in {elapsed[0]:.2f}s"):
        types = {**FIELD_TYPES, "sys_id": "sys_id"}
        rng = random.Random(20240601)
        start = time.perf_counter()
        for _ in range(1000):
            records = random_records(rng, rng.randint(0, 200))
            q, conjuncts, order = random_query(rng, records)
            limit = rng.choice([None, rng.randint(0, 50)])
            assert evaluate_query(parse_query(q), records, types, limit=limit) == \
                reference_query(records, types, conjuncts, order, limit), q
        elapsed.append(time.perf_counter() - start)
        assert elapsed[0] < 10


def _mutation_burst(platform: Platform, rng: random.Random, ops: int) -> None:
    prefix = "/api/now/table/" if platform.profile.name == "servicenow" else "/api/resource/"
    tables = sorted(platform.state.tables)
    for _ in range(ops):
        table = rng.choice(tables)
        fields = [f for f in platform.state.schemas[table].field_types() if f not in ("sys_id", "sys_created_on")]
        rows = platform.state.tables[table]
        op = rng.choice(["create", "update", "delete"] if rows else ["create"])
        body = json.dumps({rng.choice(fields): f"v{rng.randint(0, 999)}"})
        if op == "create":
            resp = platform.handle_request("POST", prefix + table, trusted=True, body=body)
        else:
            sid = rng.choice(rows)["sys_id"]
            method = "PATCH" if op == "update" else "DELETE"
            resp = platform.handle_request(method, f"{prefix}{table}/{sid}", trusted=True, body=body)
        assert resp.status in (200, 201)


def test_reset_contract(criterion):
    stats = {"fixtures": 0, "tasks": 0}
    with criterion("Reset contract", lambda: f"{stats['fixtures']} fixtures, {stats['tasks']} tasks pre-checked"):
        start = time.perf_counter()
        rng = random.Random(7)
        suites = [load_suite(name) for name in ("itsm-demo", "erp-demo", "skills-lifecycle")]
        seen = set()
        for suite in suites:
            for name, path in suite.fixtures.items():
                if path.resolve() in seen:
                    continue
                seen.add(path.resolve())
                platform = Platform(suite.platform)
                snapshot = platform.seed(suite.fixture_data(name))
                _mutation_burst(platform, rng, 60)
                assert platform.state_digest() != snapshot.digest
                platform.reset()
                assert platform.state_digest() == snapshot.digest
                stats["fixtures"] += 1
            for task in suite.tasks:
                platform = Platform(suite.platform)
                platform.seed(suite.fixture_data(task.fixture))
                assert not any(evaluate_check(c, platform, "") for c in task.checks), task.id
                stats["tasks"] += 1
        assert stats["fixtures"] >= 2
        assert time.perf_counter() - start < 10


def _expected_cost(trajectories: dict, pricing: PricingTable, model: str) -> Fraction:
    price = pricing[model]
    total = Fraction(0)
    for spec in trajectories.values():
        for turn in spec["turns"]:
            u = turn.get("usage") or {}
            total += (Fraction(u.get("input_tokens", 0)) * Fraction(price.input_price)
                      + Fraction(u.get("output_tokens", 0)) * Fraction(price.output_price)) / 10**6
    return total


def test_end_to_end_scripted_benchmark(criterion, tmp_path, pricing):
    info = {}
    with criterion("End-to-end scripted benchmark",
                   lambda: f"SR {info['sr'] * 100:.1f}%, cost ${info['cost']}, {info['elapsed']:.1f}s"):
        start = time.perf_counter()
        suite = load_suite("itsm-demo")
        expected = json.loads((suite.path.parent / "expected.json").read_text())["outcomes"]
        trajectories = suite.load_trajectories()
        reports = []
        for i in range(2):
            out = tmp_path / f"run{i}"
            res = run_suite(suite, AgentConfig(), scripted_factory(trajectories), out_dir=out, pricing=pricing)
            assert {r.task_id: r.status for r in res.results} == expected
            # each script is consumed in full, so the cost is the priced sum of all scripted usage
            for r in res.results:
                assert len(r.trace.steps) == len(trajectories[r.task_id]["turns"])
            rate = res.rate()
            wins = sum(v == "success" for v in expected.values())
            assert (rate.successes, rate.n) == (wins, len(expected))
            assert rate.sr == wins / len(expected)
            assert rate.se == (rate.sr * (1 - rate.sr) / rate.n) ** 0.5
            assert Fraction(res.total_cost) == _expected_cost(trajectories, pricing, "scripted")
            row = report_rows([res])[0]
            assert Decimal(row["total_cost"]) == res.total_cost
            reports.append(tuple((out / name).read_text() for name in ("report.md", "report.json")))
            info.update(sr=rate.sr, cost=res.total_cost)
            assert RunDirectory(out).manifest()["fixture_digests"]
        (md0, js0), (md1, js1) = reports
        assert strip_timing(md0) == strip_timing(md1)
        assert strip_timing(js0, "structured") == strip_timing(js1, "structured")
        info["elapsed"] = time.perf_counter() - start
        assert info["elapsed"] < 30


def test_skills_lifecycle(criterion, tmp_path, pricing):
    info = {}
    with criterion("Skills lifecycle", lambda: f"KB {info['kb']}, first skills read at call {info['first']}"):
        start = time.perf_counter()
        suite = load_suite("skills-lifecycle")
        cfg = AgentConfig(features={"skills"})
        res = run_suite(suite, cfg, scripted_factory(suite.load_trajectories()), out_dir=tmp_path, pricing=pricing)
        assert [r.status for r in res.results] == ["success"] * 3
        events = RunDirectory(tmp_path).skills_events()
        topic = "procedures/create_change_request.md"
        assert events[0]["created"] == [topic]
        statuses = [ev["statuses"][topic] for ev in events]
        assert statuses == ["unverified", "verified", "verified"]
        assert topic in events[1]["promoted"]
        rank = {"unverified": 0, "verified": 1}
        assert all(rank[a] <= rank[b] for a, b in zip(statuses, statuses[1:]))
        kb = [ev["total_kilobytes"] for ev in events]
        info["kb"] = [round(k, 4) for k in kb]
        assert kb[0] > 0 and all(a <= b for a, b in zip(kb, kb[1:]))
        info["first"] = events[2]["first_skills_read"]
        assert info["first"] is not None and info["first"] <= 2
        assert time.perf_counter() - start < 10


def test_sandbox_limits(criterion):
    info = {}
    with criterion("Sandbox limits", lambda: f"timeout after {info['t']:.1f}s, truncated at {info['n']} bytes"):
        policy = SandboxPolicy(make_workdir())
        r = execute("sleep 31", policy)
        info["t"] = r.duration
        assert r.timed_out
        assert "[error] Command timed out after 30s." in r.stderr
        assert "[error] Command timed out after 30s." in r.render()
        big = execute("head -c 1048576 /dev/zero | tr '\\0' a", policy, ExecLimits(max_output_bytes=16384))
        info["n"] = len(big.output.encode()) - len(" " + TRUNCATION_MARKER)
        assert big.truncated and big.output.endswith("[OUTPUT TRUNCATED]")
        assert info["n"] == 16384


def test_planner_purity(criterion, platform):
    info = {}
    with criterion("Planner purity", lambda: info.get("obs", "")):
        post = ("eval curl -s -X POST $SERVICENOW_EXTRA_HTTP_HEADERS -H \"'Content-Type: application/json'\" "
                "-d \"'{\\\"short_description\\\": \\\"x\\\"}'\" \"'$INSTANCE_URL/api/now/table/incident'\"")
        script = [
            ModelTurn(tool_calls=(ToolInvocation("p1", "terminal", {"command": post}),)),
            ModelTurn(text="### Plan\n1. Create the incident"),
            ModelTurn(text="nothing to do"),
        ]
        cfg = AgentConfig(orchestration="planner_executor")
        before = platform.state_digest()
        with EpisodeEnvironment(platform, cfg) as env:
            trace = env.run("g", make_scripted(script))
        result = trace.steps[0].tool_results[0]
        info["obs"] = result.observation.splitlines()[0]
        assert trace.steps[0].phase == "planner"
        assert result.observation.startswith("[denied] state-changing API calls are not permitted in the planning phase")
        assert platform.state_digest() == before
        assert not any(m == "POST" for m, _, _ in platform.request_log)


def test_cost_accounting(criterion):
    worst = []
    with criterion("Cost accounting", lambda: f"max error {max(worst):.1e}"):
        rng = random.Random(99)
        usages = []
        for _ in range(100):
            ip = Decimal(rng.randint(0, 3000)) / 100
            op = Decimal(rng.randint(0, 9000)) / 100
            u = TokenUsage(rng.randint(0, 5_000_000), rng.randint(0, 500_000))
            table = PricingTable({"m": ModelPrice(ip, op)})
            by_hand = (u.input_tokens * float(ip) + u.output_tokens * float(op)) / 1_000_000
            worst.append(abs(float(compute_cost(u, "m", table)) - by_hand))
            assert worst[-1] <= 1e-9
            usages.append(u)
        table = PricingTable({"m": ModelPrice(Decimal("1.25"), Decimal("10.00"))})
        total = TokenUsage()
        for u in usages:
            total = total + u
        assert compute_cost(total, "m", table) == sum((compute_cost(u, "m", table) for u in usages), Decimal(0))
        # full precision until emission: the structured row keeps every digit
        from termbench.harness.runner import SuiteResult, TaskResult
        res = SuiteResult("s", "p", "a", [TaskResult("t", "c", "write", "success", Decimal("0.123456"))])
        row = report_rows([res])[0]
        assert row["total_cost"] == "0.123456"
        assert "| 0.12 |" in emit_report([res])


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
