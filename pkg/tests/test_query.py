from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from query_oracle import FIELD_TYPES, random_query, random_records, reference_query
from termbench.platform import parse_query
from termbench.platform.query import (
    MalformedToken,
    OrderBy,
    Predicate,
    QueryPlan,
    UnknownOrderField,
    evaluate_query,
)

TYPES = {**FIELD_TYPES, "sys_id": "sys_id"}


def test_parse_filter_and_order():
    plan = parse_query("active=true^ORDERBYDESCsys_created_on")
    assert plan.conjuncts == (Predicate("active", "EQ", "true"),)
    assert plan.order == OrderBy("sys_created_on", "DESC")


def test_parse_order_only():
    assert parse_query("ORDERBYDESCpriority") == QueryPlan((), OrderBy("priority", "DESC"))


def test_parse_two_equalities():
    plan = parse_query("name=change_request^element=impact")
    assert plan.conjuncts == (Predicate("name", "EQ", "change_request"), Predicate("element", "EQ", "impact"))
    assert plan.order is None


def test_parse_operators_and_empty():
    assert parse_query("") == QueryPlan()
    plan = parse_query("state!=7^short_descriptionLIKEprinter^ORDERBYnumber")
    assert plan.conjuncts == (Predicate("state", "NEQ", "7"), Predicate("short_description", "LIKE", "printer"))
    assert plan.order == OrderBy("number", "ASC")


@pytest.mark.parametrize("q", ["active", "^ORactive=true", "active=true^NQstate=1", "ORDERBY", "ORDERBYa^ORDERBYb", "=x"])
def test_malformed(q):
    with pytest.raises(MalformedToken):
        parse_query(q)


def _records(n):
    return [{"sys_id": f"{i:032x}", "active": "true" if i % 3 else "false", "priority": str(i % 4)} for i in range(n)]


def test_filter_matches_brute_force():
    recs = _records(5)
    got = evaluate_query(parse_query("active=true"), recs, {"active": "boolean", "sys_id": "sys_id"})
    assert [r["sys_id"] for r in got] == [r["sys_id"] for r in recs if r["active"] == "true"]
    assert len(got) == 3


def test_limit_keeps_insertion_order():
    recs = _records(20)
    got = evaluate_query(QueryPlan(), recs, {"sys_id": "sys_id"}, limit=5)
    assert got == recs[:5]


def test_offset_and_projection():
    recs = _records(6)
    got = evaluate_query(QueryPlan(), recs, {"sys_id": "sys_id", "priority": "integer"}, fields=["priority"], offset=4)
    assert got == [{"sys_id": recs[4]["sys_id"], "priority": "0"}, {"sys_id": recs[5]["sys_id"], "priority": "1"}]


def test_numeric_vs_lexicographic_order():
    recs = [{"sys_id": f"{i:032x}", "n": v} for i, v in enumerate(["10", "9", "100"])]
    plan = parse_query("ORDERBYn")
    assert [r["n"] for r in evaluate_query(plan, recs, {"n": "integer"})] == ["9", "10", "100"]
    assert [r["n"] for r in evaluate_query(plan, recs, {"n": "string"})] == ["10", "100", "9"]


def test_desc_ties_stay_sys_id_ascending():
    recs = [{"sys_id": s, "p": "1"} for s in ["c" * 32, "a" * 32, "b" * 32]]
    got = evaluate_query(parse_query("ORDERBYDESCp"), recs, {"p": "integer", "sys_id": "sys_id"})
    assert [r["sys_id"][0] for r in got] == ["a", "b", "c"]


def test_unknown_filter_field_matches_nothing():
    assert evaluate_query(parse_query("nope=1"), _records(4), {"sys_id": "sys_id"}) == []


def test_unknown_order_field_raises():
    with pytest.raises(UnknownOrderField):
        evaluate_query(parse_query("ORDERBYnope"), _records(2), {"sys_id": "sys_id"})


def test_like_is_case_insensitive_substring():
    recs = [{"sys_id": "0" * 32, "d": "Printer Offline"}]
    assert evaluate_query(parse_query("dLIKEprinter off"), recs, {"d": "string"}) == recs
    assert evaluate_query(parse_query("dLIKEscanner"), recs, {"d": "string"}) == []


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 60))
def test_oracle_equivalence(seed, n):
    rng = random.Random(seed)
    recs = random_records(rng, n)
    q, conjuncts, order = random_query(rng, recs)
    plan = parse_query(q)
    limit = rng.choice([None, None, rng.randint(0, 10)])
    assert evaluate_query(plan, recs, TYPES, limit=limit) == reference_query(recs, TYPES, conjuncts, order, limit)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32))
def test_render_round_trip(seed):
    rng = random.Random(seed)
    q, _, _ = random_query(rng, random_records(rng, 5))
    plan = parse_query(q)
    assert parse_query(plan.render()) == plan
