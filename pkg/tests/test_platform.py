from __future__ import annotations

import copy
import json
import urllib.error
import urllib.request

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from termbench.platform import FixtureError, Platform, load_fixture, validate_fixture

AUTH = {"X-Auth-Token": "desk-token"}


def call(p, method, path, query="", body=None, headers=AUTH):
    return p.handle_request(method, path, headers, query, body)


def http(url, method="GET", data=None, headers=AUTH):
    req = urllib.request.Request(url, method=method, data=data, headers=dict(headers))
    try:
        with urllib.request.urlopen(req, timeout=5) as r:
            return r.status, r.headers.get("Content-Type"), r.read().decode()
    except urllib.error.HTTPError as e:
        return e.code, e.headers.get("Content-Type"), e.read().decode()


# -- envelopes ----------------------------------------------------------------

def test_list_filters_active_p1(platform):
    r = call(platform, "GET", "/api/now/table/incident", "sysparm_query=active=true^priority=1")
    assert r.status == 200
    assert [x["number"] for x in r.json()["result"]] == ["INC0000001", "INC0000003", "INC0000009"]


def test_fields_projection_keeps_sys_id(platform):
    r = call(platform, "GET", "/api/now/table/sys_user", "sysparm_fields=user_name&sysparm_limit=2")
    rows = r.json()["result"]
    assert len(rows) == 2 and set(rows[0]) == {"sys_id", "user_name"}


def test_post_returns_201_with_new_record(platform):
    r = call(platform, "POST", "/api/now/table/change_request", body=json.dumps({"short_description": "x", "impact": 2}))
    assert r.status == 201
    rec = r.json()["result"]
    assert rec["number"] == "CHG0000004" and rec["impact"] == "2" and len(rec["sys_id"]) == 32


def test_invalid_json_body(platform):
    r = call(platform, "POST", "/api/now/table/incident", body="{'bad':")
    assert r.status == 400
    assert r.json()["error"]["detail"] == "The payload is not valid JSON."
    assert r.json()["status"] == "failure"


def test_missing_auth_gets_html_redirect(platform):
    r = call(platform, "GET", "/api/now/table/incident", headers={})
    assert r.status == 200 and r.content_type == "text/html" and r.kind == "auth_html"
    assert r.body.startswith("<html>")


def test_unknown_table_and_record(platform):
    assert call(platform, "GET", "/api/now/table/nope").status == 404
    r = call(platform, "GET", "/api/now/table/incident/" + "0" * 32)
    assert r.status == 404 and r.json()["error"]["message"] == "No Record found"
    assert call(platform, "GET", "/elsewhere").status == 404


def test_patch_put_delete_cycle(platform):
    sid = call(platform, "GET", "/api/now/table/incident", "sysparm_limit=1").json()["result"][0]["sys_id"]
    r = call(platform, "PATCH", f"/api/now/table/incident/{sid}", body='{"state": 6, "bogus": "x"}')
    assert r.json()["result"]["state"] == "6" and "bogus" not in r.json()["result"]
    r = call(platform, "PUT", f"/api/now/table/incident/{sid}", body='{"state": 7}')
    assert r.json()["result"]["state"] == "7"
    assert call(platform, "DELETE", f"/api/now/table/incident/{sid}").json()["result"] == {"sys_id": sid, "deleted": True}
    assert call(platform, "GET", f"/api/now/table/incident/{sid}").status == 404


def test_lookup_by_number(platform):
    r = call(platform, "GET", "/api/now/table/incident/INC0000007")
    assert r.json()["result"]["number"] == "INC0000007"


def test_bad_query_is_400(platform):
    r = call(platform, "GET", "/api/now/table/incident", "sysparm_query=ORDERBYnope")
    assert r.status == 400
    assert call(platform, "GET", "/api/now/table/incident", "sysparm_query=active").status == 400
    assert call(platform, "GET", "/api/now/table/incident", "sysparm_limit=-1").status == 400


def test_sys_dictionary_is_derived_and_read_only(platform):
    r = call(platform, "GET", "/api/now/table/sys_dictionary", "sysparm_query=name=change_request^element=impact")
    rows = r.json()["result"]
    assert len(rows) == 1 and rows[0]["internal_type"] == "integer"
    assert call(platform, "POST", "/api/now/table/sys_dictionary", body="{}").status == 405


# -- ERPNext-shaped routes ------------------------------------------------------

def test_erp_filters_and_schema(erp_platform):
    r = call(erp_platform, "GET", "/api/resource/Sales Order", {"filters": '[["customer", "=", "Acme Corp"]]'})
    assert len(r.json()["result"]) == 3
    r = call(erp_platform, "GET", "/api/resource/Item", {"filters": '{"item_group": "Raw Material"}', "fields": '["item_name"]'})
    assert r.json()["result"] and all(set(x) == {"sys_id", "item_name"} for x in r.json()["result"])
    schema = call(erp_platform, "GET", "/api/resource/DocType/Customer").json()["result"]
    assert [f["name"] for f in schema["fields"]][:2] == ["name", "customer_name"]
    assert call(erp_platform, "GET", "/api/resource/DocType/Nope").status == 404


def test_erp_autonumber_and_order(erp_platform):
    rec = call(erp_platform, "POST", "/api/resource/Sales Order", body='{"customer": "Globex", "grand_total": 5}').json()["result"]
    assert rec["name"] == "SAL-ORD-2024-00011"
    r = call(erp_platform, "GET", "/api/resource/Sales Order", {"order_by": "grand_total desc", "limit_page_length": "1"})
    assert len(r.json()["result"]) == 1


# -- HTTP transport -------------------------------------------------------------

def test_served_crud(platform):
    url = platform.serve()
    status, ctype, body = http(f"{url}/health", headers={})
    assert status == 200 and json.loads(body)["result"]["digest"] == platform.state_digest()
    status, ctype, body = http(f"{url}/api/now/table/incident", "POST", b'{"short_description": "net"}',
                               {**AUTH, "Content-Type": "application/json"})
    assert status == 201 and ctype.startswith("application/json")
    sid = json.loads(body)["result"]["sys_id"]
    assert http(f"{url}/api/now/table/incident/{sid}", "DELETE")[0] == 200
    assert http(f"{url}/api/now/table/incident/{sid}")[0] == 404
    status, ctype, _ = http(f"{url}/api/now/table/incident", headers={})
    assert ctype.startswith("text/html")


# -- snapshots and fixtures -----------------------------------------------------

def test_digest_is_deterministic(itsm_fixture, erp_fixture):
    a, b, c = Platform(), Platform(), Platform("erpnext")
    assert a.seed(copy.deepcopy(itsm_fixture)).digest == b.seed(copy.deepcopy(itsm_fixture)).digest
    assert c.seed(copy.deepcopy(erp_fixture)).digest != a.state_digest()


def test_reset_restores_and_is_idempotent(platform):
    before = platform.state_digest()
    call(platform, "POST", "/api/now/table/incident", body='{"short_description": "x"}')
    assert platform.state_digest() != before
    platform.reset()
    platform.reset()
    assert platform.state_digest() == before
    # counters are restored too, so the next number repeats
    assert call(platform, "POST", "/api/now/table/incident", body="{}").json()["result"]["number"] == "INC0000021"


def test_reset_before_seed():
    with pytest.raises(RuntimeError):
        Platform().reset()


def test_malformed_fixture_reports_location(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x",\n "tables": {,}}')
    with pytest.raises(FixtureError, match=r"bad\.json:2:"):
        load_fixture(bad)


@pytest.mark.parametrize(
    "data, fragment",
    [
        ([], "top level"),
        ({"name": "x", "tables": {}}, "non-empty"),
        ({"name": "x", "tables": {"t": {"fields": []}}}, "tables.t.fields"),
        ({"name": "x", "tables": {"t": {"fields": [{"name": "a"}], "records": [{"b": 1}]}}}, "unknown field"),
        ({"name": "x", "tables": {"t": {"fields": [{"name": "a"}], "records": [{"sys_id": "XYZ"}]}}}, "sys_id"),
    ],
)
def test_validate_fixture_errors(data, fragment):
    with pytest.raises(FixtureError, match=fragment):
        validate_fixture(data)


# -- properties -----------------------------------------------------------------

ops = st.lists(
    st.tuples(st.sampled_from(["create", "update", "delete"]), st.integers(0, 50), st.text("abc xyz", max_size=8)),
    max_size=25,
)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(ops)
def test_crud_consistency_and_reset(platform, steps):
    platform.reset()
    start = platform.state_digest()
    model = {r["sys_id"]: dict(r) for r in call(platform, "GET", "/api/now/table/incident").json()["result"]}
    for op, idx, text in steps:
        if op == "create":
            rec = call(platform, "POST", "/api/now/table/incident", body=json.dumps({"short_description": text})).json()["result"]
            model[rec["sys_id"]] = rec
        elif model:
            sid = sorted(model)[idx % len(model)]
            if op == "update":
                model[sid] = call(platform, "PATCH", f"/api/now/table/incident/{sid}",
                                  body=json.dumps({"short_description": text})).json()["result"]
            else:
                call(platform, "DELETE", f"/api/now/table/incident/{sid}")
                del model[sid]
    got = call(platform, "GET", "/api/now/table/incident").json()["result"]
    assert {r["sys_id"]: r for r in got} == model
    platform.reset()
    assert platform.state_digest() == start


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(
    st.sampled_from(["GET", "POST", "PATCH", "PUT", "DELETE", "HEAD"]),
    st.lists(st.sampled_from(["api", "now", "table", "resource", "incident", "DocType", "x", "INC0000001"]), max_size=6),
    st.text(max_size=30),
    st.one_of(st.none(), st.text(max_size=30)),
    st.booleans(),
)
def test_every_request_gets_an_envelope(platform, method, parts, query, body, authed):
    r = call(platform, method, "/" + "/".join(parts), query, body, AUTH if authed else {})
    if r.kind == "auth_html":
        assert r.content_type == "text/html"
        return
    data = r.json()
    if r.status < 400:
        assert "result" in data
    else:
        assert set(data["error"]) == {"message", "detail"} and data["status"] == "failure"
