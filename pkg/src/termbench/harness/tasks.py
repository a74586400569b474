"""Task instances, declarative validator checks, and suite files."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any
from urllib.parse import parse_qs, unquote, urlsplit

from ..platform import Platform, parse_query
from ..platform.query import QueryError

CHECK_KINDS = ("record_exists", "record_absent", "field_equals", "count_equals", "answer_matches", "url_matches")
STATE_CHECKS = frozenset({"record_exists", "record_absent", "field_equals", "count_equals"})
ANSWER_CHECKS = frozenset({"answer_matches", "url_matches"})
_URL = re.compile(r"https?://[^\s<>()\[\]`'\"]+")


class SuiteError(ValueError):
    pass


@dataclass(frozen=True)
class ValidatorCheck:
    kind: str
    table: str = ""
    query: str = ""
    field: str = ""
    expected: Any = None
    path: str = ""  # url_matches: regex searched in the URL path
    query_equals: str | None = None  # url_matches: expected sysparm_query, compared as a plan
    record: dict | None = None  # url_matches: {"table", "query"} whose sys_id the URL must carry

    def __post_init__(self):
        if self.kind not in CHECK_KINDS:
            raise SuiteError(f"unknown check kind {self.kind!r}")
        if self.kind in STATE_CHECKS and not self.table:
            raise SuiteError(f"{self.kind} needs a table")
        if self.kind in ("field_equals",) and not self.field:
            raise SuiteError("field_equals needs a field")
        if self.kind in ("field_equals", "count_equals", "answer_matches") and self.expected is None:
            raise SuiteError(f"{self.kind} needs an expected value")

    @property
    def is_state(self) -> bool:
        return self.kind in STATE_CHECKS

    @classmethod
    def from_dict(cls, d: dict) -> ValidatorCheck:
        return cls(**d)

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v not in (None, "")}


@dataclass(frozen=True)
class TaskInstance:
    id: str
    category: str
    goal: str
    fixture: str
    checks: tuple[ValidatorCheck, ...]
    kind: str = "write"

    def __post_init__(self):
        if self.kind not in ("write", "read"):
            raise SuiteError(f"{self.id}: kind must be write or read")
        if self.kind == "write" and not any(c.is_state for c in self.checks):
            raise SuiteError(f"{self.id}: write tasks need at least one state check")
        if self.kind == "read" and not any(not c.is_state for c in self.checks):
            raise SuiteError(f"{self.id}: read tasks need at least one answer check")

    @classmethod
    def from_dict(cls, d: dict) -> TaskInstance:
        return cls(
            d["id"], d.get("category", ""), d["goal"], d["fixture"],
            tuple(ValidatorCheck.from_dict(c) for c in d["checks"]), d.get("kind", "write"),
        )


@dataclass
class Suite:
    name: str
    platform: str
    fixtures: dict[str, Path]
    tasks: list[TaskInstance]
    path: Path | None = None
    trajectories: Path | None = None

    def fixture_data(self, name: str) -> dict:
        from ..platform import load_fixture
        return load_fixture(self.fixtures[name])

    def load_trajectories(self) -> dict[str, dict]:
        if self.trajectories is None or not self.trajectories.is_file():
            return {}
        return json.loads(self.trajectories.read_text("utf-8"))


def shipped_path(*parts: str) -> Path:
    return Path(str(resources.files("termbench").joinpath("data"))).joinpath(*parts)


def resolve_suite_path(ref: str | Path) -> Path:
    """A suite file path, a suite directory, or the name of a shipped suite."""
    p = Path(ref)
    if p.is_dir():
        p = p / "suite.json"
    if p.is_file():
        return p
    shipped = shipped_path("suites", str(ref), "suite.json")
    if shipped.is_file():
        return shipped
    raise FileNotFoundError(f"suite not found: {ref}")


def load_suite(ref: str | Path) -> Suite:
    path = resolve_suite_path(ref)
    try:
        data = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise SuiteError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    fixtures = {}
    for name, rel in data.get("fixtures", {}).items():
        candidate = (path.parent / rel).resolve()
        if not candidate.is_file():
            candidate = shipped_path("fixtures", Path(rel).name)
        fixtures[name] = candidate
    tasks = [TaskInstance.from_dict(t) for t in data["tasks"]]
    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise SuiteError(f"{path}: duplicate task ids")
    for t in tasks:
        if t.fixture not in fixtures:
            raise SuiteError(f"{path}: task {t.id} references unknown fixture {t.fixture!r}")
    traj = data.get("trajectories")
    return Suite(
        data.get("name", path.parent.name), data.get("platform", "servicenow"), fixtures, tasks, path,
        (path.parent / traj) if traj else None,
    )


# -- evaluation ---------------------------------------------------------------

def normalize_answer(text: str) -> str:
    text = text.strip().casefold()
    text = re.sub(r"(?<=\d),(?=\d{3}(?!\d))", "", text)
    return text.rstrip(".")


def _contains_answer(message: str, expected: str) -> bool:
    norm = normalize_answer(message)
    exp = normalize_answer(str(expected))
    if not exp:
        return False
    return re.search(rf"(?<![\w.]){re.escape(exp)}(?!\w|\.\d)", norm) is not None


def _query(platform: Platform, table: str, query: str) -> list[dict] | None:
    resp = platform.handle_request("GET", f"/api/now/table/{table}", {}, {"sysparm_query": query}, trusted=True)
    if resp.status != 200:
        return None
    return resp.json()["result"]


def _same_plan(a: str, b: str) -> bool:
    try:
        pa, pb = parse_query(a), parse_query(b)
    except QueryError:
        return False
    return set(pa.conjuncts) == set(pb.conjuncts) and pa.order == pb.order


def _url_ok(check: ValidatorCheck, url: str, platform: Platform) -> bool:
    parts = urlsplit(url.rstrip(".,;"))
    if check.path and not re.search(check.path, parts.path):
        return False
    params = {k: v[-1] for k, v in parse_qs(parts.query, keep_blank_values=True).items()}
    if check.query_equals is not None and not _same_plan(unquote(params.get("sysparm_query", "")), check.query_equals):
        return False
    if check.record:
        rows = _query(platform, check.record["table"], check.record.get("query", ""))
        if not rows or len(rows) != 1 or params.get("sys_id") != rows[0]["sys_id"]:
            return False
    return True


def evaluate_check(check: ValidatorCheck, platform: Platform, final_message: str = "") -> bool:
    if check.kind == "answer_matches":
        expected = check.expected if isinstance(check.expected, list) else [check.expected]
        return all(_contains_answer(final_message, e) for e in expected)
    if check.kind == "url_matches":
        return any(_url_ok(check, u, platform) for u in _URL.findall(final_message or ""))
    rows = _query(platform, check.table, check.query)
    if rows is None:
        return False
    if check.kind == "record_exists":
        return len(rows) > 0
    if check.kind == "record_absent":
        return len(rows) == 0
    if check.kind == "count_equals":
        return len(rows) == int(check.expected)
    return bool(rows) and all(r.get(check.field) == str(check.expected) for r in rows)
