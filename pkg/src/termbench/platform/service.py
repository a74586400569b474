"""HTTP surface of the mock platform: table CRUD under ``/api/now/table`` and
``/api/resource``, schema introspection, auth gating and JSON envelopes."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Mapping
from urllib.parse import parse_qs, unquote, urlsplit

from .query import OrderBy, Predicate, QueryError, QueryPlan, parse_query
from .store import (
    DICTIONARY_FIELDS,
    DICTIONARY_TABLE,
    PlatformState,
    RecordNotFound,
    Snapshot,
    UnknownTable,
)
from .query import evaluate_query

AUTH_REDIRECT_HTML = (
    "<html><head><title>Redirecting</title>"
    '<meta http-equiv="refresh" content="0;url=/login.do"></head>'
    "<body>Authentication required. Redirecting to the login page.</body></html>"
)
INVALID_JSON_DETAIL = "The payload is not valid JSON."


@dataclass(frozen=True)
class PlatformProfile:
    """How a platform presents itself to an agent: URL scheme, auth header, env names."""

    name: str
    display_name: str
    headers_env: str
    auth_header: str = "X-Auth-Token"
    auth_token: str = "desk-token"
    record_url: str = "<url>/now/nav/ui/classic/params/target/incident.do?sys_id=<sys_id>"

    def auth_flags(self) -> str:
        # shaped for `eval curl -s $VAR ...`: eval re-splits the quoted header
        return f'-H "{self.auth_header}: {self.auth_token}"'

    def sandbox_env(self, base_url: str) -> dict[str, str]:
        return {"INSTANCE_URL": base_url, self.headers_env: self.auth_flags()}


PROFILES = {
    "servicenow": PlatformProfile("servicenow", "ServiceNow", "SERVICENOW_EXTRA_HTTP_HEADERS"),
    "erpnext": PlatformProfile(
        "erpnext", "ERPNext", "ERPNEXT_EXTRA_HTTP_HEADERS", record_url="<url>/app/<doctype>/<name>"
    ),
}


def get_profile(name: str) -> PlatformProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise KeyError(f"unknown platform profile {name!r}") from None


@dataclass
class Response:
    status: int
    body: str
    content_type: str = "application/json"
    kind: str = "result"  # result | error | auth_html

    def json(self) -> Any:
        return json.loads(self.body)


def ok(result: Any, status: int = 200) -> Response:
    return Response(status, json.dumps({"result": result}))


def fail(status: int, message: str, detail: str | None = None) -> Response:
    body = {"error": {"message": message, "detail": detail}, "status": "failure"}
    return Response(status, json.dumps(body), kind="error")


def auth_redirect() -> Response:
    return Response(200, AUTH_REDIRECT_HTML, "text/html", "auth_html")


def _parse_body(body: bytes | str | None) -> tuple[dict | None, Response | None]:
    if isinstance(body, bytes):
        body = body.decode("utf-8", "replace")
    try:
        data = json.loads(body or "")
    except ValueError:
        return None, fail(400, "Exception while reading request", INVALID_JSON_DETAIL)
    if not isinstance(data, dict):
        return None, fail(400, "Exception while reading request", "The payload must be a JSON object.")
    return data, None


def _erpnext_filters(raw: str) -> QueryPlan:
    """``[["field", "=", "value"], ...]`` or ``{"field": "value"}`` to a plan."""
    data = json.loads(raw)
    ops = {"=": "EQ", "!=": "NEQ", "like": "LIKE"}
    preds = []
    if isinstance(data, dict):
        preds = [Predicate(k, "EQ", str(v)) for k, v in data.items()]
    else:
        for item in data:
            if len(item) != 3 or str(item[1]).lower() not in ops:
                raise QueryError(f"unsupported filter {item!r}")
            value = str(item[2]).strip("%") if str(item[1]).lower() == "like" else str(item[2])
            preds.append(Predicate(str(item[0]), ops[str(item[1]).lower()], value))
    return QueryPlan(tuple(preds))


class Platform:
    """One mock platform instance: state plus request dispatch.

    ``handle_request`` is transport-free; :meth:`serve` wraps it in a
    loopback HTTP server so agent ``curl`` commands work unchanged.
    """

    def __init__(self, profile: PlatformProfile | str = "servicenow"):
        self.profile = get_profile(profile) if isinstance(profile, str) else profile
        self.state = PlatformState()
        self.snapshot: Snapshot | None = None
        self.request_log: list[tuple[str, str, int]] = []
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    # -- lifecycle ----------------------------------------------------------

    def seed(self, fixture: dict) -> Snapshot:
        self.snapshot = self.state.seed(fixture)
        return self.snapshot

    def reset(self, snapshot: Snapshot | None = None) -> None:
        snapshot = snapshot or self.snapshot
        if snapshot is None:
            raise RuntimeError("platform has not been seeded")
        self.state.reset(snapshot)
        self.request_log.clear()

    def state_digest(self) -> str:
        return self.state.state_digest()

    # -- dispatch -----------------------------------------------------------

    def authorized(self, headers: Mapping[str, str]) -> bool:
        want = self.profile.auth_header.lower()
        for k, v in headers.items():
            if k.lower() == want:
                return v.strip() == self.profile.auth_token
        return False

    def handle_request(
        self,
        method: str,
        path: str,
        headers: Mapping[str, str] | None = None,
        query: str | Mapping[str, str] = "",
        body: bytes | str | None = None,
        *,
        trusted: bool = False,
    ) -> Response:
        method = method.upper()
        if isinstance(query, str):
            params = {k: v[-1] for k, v in parse_qs(query, keep_blank_values=True).items()}
        else:
            params = dict(query)
        parts = [unquote(p) for p in path.split("/") if p]
        if parts == ["health"]:
            resp = ok({"fixture": self.state.fixture_name, "digest": self.state_digest()})
        elif not trusted and not self.authorized(headers or {}):
            resp = auth_redirect()
        else:
            resp = self._route(method, parts, params, body)
        self.request_log.append((method, path, resp.status))
        return resp

    def _route(self, method, parts, params, body) -> Response:
        if parts[:3] == ["api", "now", "table"] and len(parts) in (4, 5):
            table = parts[3]
            key = parts[4] if len(parts) == 5 else None
            return self._table_op(method, table, key, params, body, style="now")
        if parts[:2] == ["api", "resource"] and len(parts) in (3, 4):
            if parts[2] == "DocType" and len(parts) == 4:
                if method != "GET":
                    return fail(405, "Method not allowed", f"{method} is not supported on schema resources")
                return self._schema(parts[3])
            key = parts[3] if len(parts) == 4 else None
            return self._table_op(method, parts[2], key, params, body, style="resource")
        return fail(404, "Requested URI does not represent any resource", "/" + "/".join(parts))

    def _schema(self, table: str) -> Response:
        schema = self.state.schemas.get(table)
        if schema is None:
            return fail(404, f"DocType {table} not found", f"No schema for {table}")
        return ok(schema.to_dict())

    def _table_op(self, method, table, key, params, body, style) -> Response:
        if table == DICTIONARY_TABLE and table not in self.state.tables:
            if method != "GET" or key is not None:
                return fail(405, "Method not allowed", "sys_dictionary is read-only")
            return self._list(table, params, style, rows=self.state.dictionary_rows(), types=DICTIONARY_FIELDS)
        if table not in self.state.tables:
            return fail(404, f"Invalid table {table}", None)
        try:
            if key is None:
                if method == "GET":
                    return self._list(table, params, style)
                if method == "POST":
                    data, err = _parse_body(body)
                    if err:
                        return err
                    return ok(self.state.create(table, data), 201)
                return fail(405, "Method not allowed", f"{method} is not supported on a table collection")
            if method == "GET":
                return ok(self._project(self.state.find(table, key), params))
            if method in ("PATCH", "PUT"):
                data, err = _parse_body(body)
                if err:
                    return err
                return ok(self.state.update(table, key, data))
            if method == "DELETE":
                rec = self.state.delete(table, key)
                return ok({"sys_id": rec["sys_id"], "deleted": True})
            return fail(405, "Method not allowed", f"{method} is not supported on a record")
        except RecordNotFound:
            return fail(404, "No Record found", "Record doesn't exist or ACL restricts the record retrieval")
        except UnknownTable:
            return fail(404, f"Invalid table {table}", None)

    @staticmethod
    def _fields_param(params, style) -> list[str] | None:
        raw = params.get("sysparm_fields") if style == "now" else params.get("fields")
        if raw is None and style == "resource":
            raw = params.get("sysparm_fields")
        if not raw:
            return None
        if raw.lstrip().startswith("["):
            return [str(f) for f in json.loads(raw)]
        return [f.strip() for f in raw.split(",") if f.strip()]

    def _project(self, rec, params):
        fields = self._fields_param(params, "now")
        if not fields:
            return dict(rec)
        return {f: rec[f] for f in ["sys_id", *fields] if f in rec}

    def _list(self, table, params, style, rows=None, types=None) -> Response:
        try:
            if style == "resource" and params.get("filters"):
                plan = _erpnext_filters(params["filters"])
            else:
                plan = parse_query(params.get("sysparm_query", ""))
            if style == "resource" and params.get("order_by"):
                field_name, _, direction = params["order_by"].partition(" ")
                plan = QueryPlan(plan.conjuncts, OrderBy(field_name, "DESC" if direction.lower() == "desc" else "ASC"))
            fields = self._fields_param(params, style)
            limit_raw = params.get("sysparm_limit") or params.get("limit_page_length") or params.get("limit")
            limit = int(limit_raw) if limit_raw else None
            offset = int(params.get("sysparm_offset") or params.get("limit_start") or 0)
            if limit is not None and limit < 0 or offset < 0:
                raise ValueError("limit and offset must be non-negative")
            if rows is None:
                result = self.state.query(table, plan, fields, limit, offset)
            else:
                result = evaluate_query(plan, rows, types, fields, limit, offset)
        except (QueryError, ValueError) as exc:
            return fail(400, "Invalid query", str(exc))
        return ok(result)

    # -- HTTP ---------------------------------------------------------------

    def serve(self, host: str = "127.0.0.1", port: int = 0) -> str:
        """Start the loopback HTTP server in a daemon thread; return its base URL."""
        if self._server is not None:
            return self.base_url
        self._server = ThreadingHTTPServer((host, port), _make_handler(self))
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever, name="platform-http", daemon=True)
        self._thread.start()
        return self.base_url

    @property
    def base_url(self) -> str:
        if self._server is None:
            raise RuntimeError("platform is not serving")
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def wait(self) -> None:
        """Block until the server thread exits."""
        if self._thread is not None:
            self._thread.join()

    def shutdown(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None
            self._thread = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


def _make_handler(platform: Platform):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def _dispatch(self):
            split = urlsplit(self.path)
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b""
            resp = platform.handle_request(self.command, split.path, dict(self.headers.items()), split.query, body)
            payload = resp.body.encode("utf-8")
            self.send_response(resp.status)
            self.send_header("Content-Type", f"{resp.content_type}; charset=utf-8")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        do_GET = do_POST = do_PUT = do_PATCH = do_DELETE = _dispatch

        def log_message(self, format, *args):
            pass

    return Handler
