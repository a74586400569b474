from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from termbench.sandbox import (
    NO_OUTPUT,
    PLANNING_DENIAL,
    TIMEOUT_EXIT_CODE,
    TRUNCATION_MARKER,
    ExecLimits,
    ExecResult,
    SandboxPolicy,
    SpawnError,
    check_policy,
    execute,
    make_workdir,
)


@pytest.fixture
def policy(tmp_path):
    return SandboxPolicy(tmp_path)


def test_echo(policy):
    r = execute("echo hi", policy)
    assert (r.stdout, r.exit_code, r.truncated, r.timed_out) == ("hi\n", 0, False, False)
    assert r.render() == "hi\n"


def test_nonzero_exit_is_rendered(policy):
    r = execute("echo oops >&2; exit 3", policy)
    assert r.exit_code == 3 and r.stderr == "oops\n"
    assert r.render() == "oops\n[exit code: 3]"


def test_empty_output_renders_marker(policy):
    assert execute("true", policy).render() == NO_OUTPUT


def test_streams_interleave_in_capture_order(policy):
    r = execute("echo a; sleep 0.2; echo b >&2; sleep 0.2; echo c", policy)
    assert r.output == "a\nb\nc\n"
    assert r.stdout == "a\nc\n" and r.stderr == "b\n"


def test_env_injection_and_workdir(policy, tmp_path):
    policy.env["INSTANCE_URL"] = "http://x"
    r = execute("echo $INSTANCE_URL; pwd", policy)
    assert r.stdout.splitlines() == ["http://x", str(tmp_path)]


def test_parent_env_does_not_leak(policy, monkeypatch):
    monkeypatch.setenv("SECRET_TOKEN", "s3cret")
    assert execute("echo ${SECRET_TOKEN:-unset}", policy).stdout == "unset\n"


def test_timeout_short(policy):
    r = execute("sleep 5", policy, ExecLimits(timeout=0.5))
    assert r.timed_out and r.exit_code == TIMEOUT_EXIT_CODE
    assert r.stderr.endswith("[error] Command timed out after 0.5s.")
    assert r.duration < 0.5 + 2


def test_timeout_kills_background_children(policy, tmp_path):
    r = execute("(sleep 3; touch late) & sleep 5", policy, ExecLimits(timeout=0.5))
    assert r.timed_out
    import time
    time.sleep(3.5)
    assert not (tmp_path / "late").exists()


def test_truncation(policy):
    r = execute("head -c 1000000 /dev/zero | tr '\\0' x", policy, ExecLimits(max_output_bytes=16384))
    assert r.truncated and r.exit_code == 0
    assert r.output.endswith(TRUNCATION_MARKER)
    assert len(r.output.encode()) == 16384 + len(" " + TRUNCATION_MARKER)


def test_truncation_budget_spans_both_streams(policy):
    r = execute("printf 'aaaaaaaa'; printf 'bbbbbbbb' >&2", policy, ExecLimits(max_output_bytes=12))
    assert r.truncated
    assert r.output.replace(" " + TRUNCATION_MARKER, "") in ("aaaaaaaabbbb", "bbbbbbbbaaaa")


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4000), st.integers(1, 2048))
def test_truncation_is_length_bounded(n, cap):
    wd = make_workdir()
    r = execute(f"head -c {n} /dev/zero | tr '\\0' y", SandboxPolicy(wd), ExecLimits(max_output_bytes=cap))
    assert len(r.output.encode()) <= cap + len(" " + TRUNCATION_MARKER)
    assert r.truncated == (n > cap)


def test_missing_workdir_is_spawn_error(tmp_path):
    with pytest.raises(SpawnError):
        execute("true", SandboxPolicy(tmp_path / "missing"))


def test_workdirs_are_isolated():
    a, b = make_workdir(), make_workdir()
    assert a != b
    execute("echo secret > note.txt", SandboxPolicy(a))
    r = execute("cat note.txt", SandboxPolicy(b))
    assert r.exit_code != 0
    assert (a / "note.txt").read_text() == "secret\n"


def test_limits_validate():
    with pytest.raises(ValueError):
        ExecLimits(timeout=0)
    with pytest.raises(ValueError):
        ExecLimits(max_output_bytes=0)
    with pytest.raises(ValueError):
        SandboxPolicy(".", mode="sandboxed")


@pytest.mark.parametrize(
    "command",
    [
        "curl -s -X POST http://x/api",
        "curl -s -x post http://x/api",
        "curl --request PATCH http://x",
        "curl --request=DELETE http://x",
        "eval curl -s -X 'PUT' $H http://x",
    ],
)
def test_read_only_denies_mutating_methods(policy, command):
    policy.mode = "read_only_http"
    d = check_policy(command, policy)
    assert not d.allowed and d.reason == PLANNING_DENIAL


@pytest.mark.parametrize("command", ["curl -s 'http://x/api/now/table/incident?a=1'", "curl -X GET http://x", "ls"])
def test_read_only_allows_reads(policy, command):
    policy.mode = "read_only_http"
    assert check_policy(command, policy).allowed


def test_unrestricted_allows_everything(policy):
    assert check_policy("curl -X DELETE http://x", policy).allowed


def test_exec_result_round_trip(policy):
    r = execute("echo hi; exit 1", policy)
    assert ExecResult.from_dict(r.to_dict()) == r
    assert "duration" not in r.to_dict(with_duration=False)
