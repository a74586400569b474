"""Toolsets an episode can dispatch to: the sandboxed terminal, a named tool
registry (with the generic platform tools), and the browser adapter slot."""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable

from ..platform import Platform
from ..provider import ToolInvocation, ToolParameter, ToolSchema
from ..sandbox import ExecLimits, ExecResult, SandboxPolicy, SpawnError, check_policy, execute


class DuplicateTool(ValueError):
    pass


@dataclass
class ToolOutcome:
    observation: str
    exec_result: ExecResult | None = None


def error_envelope(message: str, detail: str | None = None) -> str:
    return json.dumps({"error": {"message": message, "detail": detail}, "status": "failure"})


class Toolset(ABC):
    name: str = "toolset"

    @abstractmethod
    def schemas(self) -> list[ToolSchema]: ...

    @abstractmethod
    def dispatch(self, invocation: ToolInvocation) -> ToolOutcome: ...

    def tool_names(self) -> set[str]:
        return {s.name for s in self.schemas()}

    def set_read_only(self, read_only: bool) -> None:
        """Restrict the toolset to non-mutating operations (planning phase)."""


TERMINAL_SCHEMA = ToolSchema(
    "terminal",
    "Run a shell command in your working directory and return its combined output.",
    (ToolParameter("command", "string", True, "The shell command to run."),),
)


def _synthetic(output: str, exit_code: int) -> ExecResult:
    return ExecResult(stdout="", stderr=output, exit_code=exit_code, duration=0.0, output=output)


class TerminalToolset(Toolset):
    name = "terminal"

    def __init__(self, policy: SandboxPolicy, limits: ExecLimits = ExecLimits()):
        self.policy = policy
        self.limits = limits

    def schemas(self):
        return [TERMINAL_SCHEMA]

    def set_read_only(self, read_only: bool) -> None:
        self.policy.mode = "read_only_http" if read_only else "unrestricted"

    def dispatch(self, invocation):
        command = invocation.arguments.get("command")
        if not isinstance(command, str) or not command.strip():
            result = _synthetic("terminal: a non-empty 'command' argument is required", 2)
            return ToolOutcome(result.render(), result)
        decision = check_policy(command, self.policy)
        if not decision.allowed:
            result = _synthetic(f"[denied] {decision.reason}", 1)
            return ToolOutcome(result.render(), result)
        try:
            result = execute(command, self.policy, self.limits)
        except SpawnError as exc:
            result = _synthetic(f"sh: cannot run command: {exc}", 127)
        return ToolOutcome(result.render(), result)


Handler = Callable[..., Any]


class ToolRegistry(Toolset):
    """Named tools with fixed parameter schemas; failures come back as error envelopes."""

    def __init__(self, name: str = "registry"):
        self.name = name
        self._tools: dict[str, tuple[ToolSchema, Handler, bool]] = {}
        self.read_only = False

    def __len__(self):
        return len(self._tools)

    def __contains__(self, name):
        return name in self._tools

    def register(self, schema: ToolSchema, handler: Handler, *, mutating: bool = False) -> None:
        if schema.name in self._tools:
            raise DuplicateTool(f"tool {schema.name!r} is already registered")
        self._tools[schema.name] = (schema, handler, mutating)

    def schemas(self):
        return [t[0] for t in self._tools.values()]

    def set_read_only(self, read_only: bool) -> None:
        self.read_only = read_only

    def dispatch(self, invocation):
        entry = self._tools.get(invocation.tool_name)
        if entry is None:
            return ToolOutcome(error_envelope(f"Unknown tool {invocation.tool_name!r}", "Check the list of available tools."))
        schema, handler, mutating = entry
        if mutating and self.read_only:
            return ToolOutcome(error_envelope(
                "state-changing API calls are not permitted in the planning phase", invocation.tool_name))
        args = dict(invocation.arguments)
        missing = [p.name for p in schema.parameters if p.required and p.name not in args]
        if missing:
            return ToolOutcome(error_envelope(f"Missing required argument(s): {', '.join(missing)}", schema.name))
        allowed = {p.name for p in schema.parameters}
        unknown = sorted(set(args) - allowed)
        if unknown:
            return ToolOutcome(error_envelope(f"Unexpected argument(s): {', '.join(unknown)}", schema.name))
        try:
            result = handler(**args)
        except Exception as exc:  # handler bugs become observations, not aborts
            return ToolOutcome(error_envelope(f"{type(exc).__name__}: {exc}", schema.name))
        return ToolOutcome(result if isinstance(result, str) else json.dumps(result))


def register_tool(registry: ToolRegistry, schema: ToolSchema, handler: Handler, *, mutating: bool = False) -> None:
    registry.register(schema, handler, mutating=mutating)


class WebAdapterToolset(Toolset):
    """Slot for a browser toolset supplied by the caller.

    Subclasses provide the tool schemas (navigate, click, snapshot, ...) and
    the dispatch; nothing browser-related ships with this package.
    """

    name = "browser"


def _param(name, type_="string", required=True, description=""):
    return ToolParameter(name, type_, required, description)


PLATFORM_TOOL_SCHEMAS = (
    ToolSchema("authenticate_erpnext", "Authenticate the session against the platform.", ()),
    ToolSchema(
        "get_documents",
        "List documents of a DocType, optionally filtered, projected and limited.",
        (
            _param("doctype"),
            _param("filters", "object", False, 'Either {"field": "value"} or [["field", "=", "value"], ...].'),
            _param("fields", "array", False, "Field names to return."),
            _param("limit", "integer", False),
            _param("order_by", "string", False, 'e.g. "sys_created_on desc"'),
        ),
    ),
    ToolSchema("create_document", "Create a document.", (_param("doctype"), _param("data", "object"))),
    ToolSchema(
        "update_document",
        "Update fields of an existing document.",
        (_param("doctype"), _param("name", description="sys_id or document name"), _param("data", "object")),
    ),
    ToolSchema("get_doctypes", "List all DocTypes.", ()),
    ToolSchema("get_doctype_fields", "Describe the fields of a DocType.", (_param("doctype"),)),
    ToolSchema(
        "run_report",
        "Count documents of a DocType grouped by one field.",
        (_param("doctype"), _param("group_by"), _param("filters", "object", False)),
    ),
)


def platform_registry(platform: Platform, name: str = "registry") -> ToolRegistry:
    """The seven generic document tools, bound to ``platform``."""
    schemas = {s.name: s for s in PLATFORM_TOOL_SCHEMAS}
    reg = ToolRegistry(name)

    def call(method, path, params=None, body=None):
        return platform.handle_request(method, path, {}, params or {}, body, trusted=True).body

    def authenticate_erpnext():
        return {"result": {"authenticated": True}}

    def get_documents(doctype, filters=None, fields=None, limit=None, order_by=None):
        params = {}
        if filters:
            params["filters"] = json.dumps(filters)
        if fields:
            params["fields"] = json.dumps(fields)
        if limit is not None:
            params["limit_page_length"] = str(limit)
        if order_by:
            params["order_by"] = order_by
        return call("GET", f"/api/resource/{doctype}", params)

    def create_document(doctype, data):
        return call("POST", f"/api/resource/{doctype}", body=json.dumps(data))

    def update_document(doctype, name, data):
        return call("PATCH", f"/api/resource/{doctype}/{name}", body=json.dumps(data))

    def get_doctypes():
        return {"result": [{"name": s.table, "label": s.label} for s in platform.state.schemas.values()]}

    def get_doctype_fields(doctype):
        return call("GET", f"/api/resource/DocType/{doctype}")

    def run_report(doctype, group_by, filters=None):
        params = {"filters": json.dumps(filters)} if filters else {}
        resp = json.loads(call("GET", f"/api/resource/{doctype}", params))
        if "error" in resp:
            return resp
        counts: dict[str, int] = {}
        for row in resp["result"]:
            key = row.get(group_by, "")
            counts[key] = counts.get(key, 0) + 1
        rows = [{"value": k, "count": counts[k]} for k in sorted(counts)]
        return {"result": {"doctype": doctype, "group_by": group_by, "rows": rows}}

    handlers = {
        "authenticate_erpnext": (authenticate_erpnext, False),
        "get_documents": (get_documents, False),
        "create_document": (create_document, True),
        "update_document": (update_document, True),
        "get_doctypes": (get_doctypes, False),
        "get_doctype_fields": (get_doctype_fields, False),
        "run_report": (run_report, False),
    }
    for tool, (fn, mutating) in handlers.items():
        reg.register(schemas[tool], fn, mutating=mutating)
    return reg
