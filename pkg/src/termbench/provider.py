"""Model providers: message types, the scripted test double, a generic HTTP
chat-completions client, and token/cost accounting."""

from __future__ import annotations

import json
import os
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any, Protocol, Sequence

ROLES = ("system", "user", "assistant", "tool")
FINAL_SCRIPT_MESSAGE = "(scripted run complete)"


class ProviderError(RuntimeError):
    """Base class for backend failures surfaced by :meth:`Provider.complete`."""

    kind = "provider-error"


class BackendUnreachable(ProviderError):
    kind = "backend-unreachable"


class MalformedResponse(ProviderError):
    kind = "malformed-response"


class ContextLimitExceeded(ProviderError):
    kind = "context-limit-exceeded"


class ScriptExhausted(ProviderError):
    kind = "script-exhausted"


class UnknownModel(KeyError):
    pass


@dataclass(frozen=True)
class TokenUsage:
    input_tokens: int = 0
    output_tokens: int = 0

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def __add__(self, other: TokenUsage) -> TokenUsage:
        return TokenUsage(
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
        )

    def to_dict(self) -> dict:
        return {"input_tokens": self.input_tokens, "output_tokens": self.output_tokens}

    @classmethod
    def from_dict(cls, d: dict | None) -> TokenUsage:
        d = d or {}
        return cls(int(d.get("input_tokens", 0)), int(d.get("output_tokens", 0)))


@dataclass(frozen=True)
class ToolInvocation:
    id: str
    tool_name: str
    arguments: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"id": self.id, "tool_name": self.tool_name, "arguments": self.arguments}

    @classmethod
    def from_dict(cls, d: dict) -> ToolInvocation:
        return cls(str(d["id"]), str(d["tool_name"]), dict(d.get("arguments") or {}))


@dataclass(frozen=True)
class ModelTurn:
    text: str | None = None
    tool_calls: tuple[ToolInvocation, ...] = ()
    usage: TokenUsage = TokenUsage()

    def __post_init__(self):
        object.__setattr__(self, "tool_calls", tuple(self.tool_calls))
        if self.text is None and not self.tool_calls:
            raise ValueError("a model turn needs text, tool calls, or both")

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "tool_calls": [c.to_dict() for c in self.tool_calls],
            "usage": self.usage.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> ModelTurn:
        return cls(
            text=d.get("text"),
            tool_calls=tuple(ToolInvocation.from_dict(c) for c in d.get("tool_calls") or ()),
            usage=TokenUsage.from_dict(d.get("usage")),
        )


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str
    tool_call_id: str | None = None
    # assistant messages keep the invocations they issued so live backends
    # can pair tool results with their calls
    tool_calls: tuple[ToolInvocation, ...] = ()

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if (self.role == "tool") != (self.tool_call_id is not None):
            raise ValueError("tool_call_id is required for, and only for, tool messages")


@dataclass(frozen=True)
class ToolParameter:
    name: str
    type: str = "string"
    required: bool = True
    description: str = ""


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    parameters: tuple[ToolParameter, ...] = ()

    def json_schema(self) -> dict:
        props = {}
        for p in self.parameters:
            props[p.name] = {"type": p.type}
            if p.description:
                props[p.name]["description"] = p.description
        return {
            "type": "object",
            "properties": props,
            "required": [p.name for p in self.parameters if p.required],
        }


class Provider(Protocol):
    def complete(
        self, history: Sequence[ChatMessage], tool_schemas: Sequence[ToolSchema], model: str
    ) -> ModelTurn: ...


def _check_history(history: Sequence[ChatMessage]) -> None:
    if not history:
        raise ValueError("history must not be empty")
    if history[0].role != "system":
        raise ValueError("history must start with a system message")


@dataclass
class TurnScript:
    turns: list[ModelTurn]
    exhaustion: str = "error"

    def __post_init__(self):
        if self.exhaustion not in ("error", "final_message"):
            raise ValueError(f"unknown exhaustion policy {self.exhaustion!r}")

    @classmethod
    def from_dict(cls, d: dict) -> TurnScript:
        return cls([ModelTurn.from_dict(t) for t in d.get("turns", [])], d.get("exhaustion", "error"))


class ScriptedProvider:
    """Replays a fixed list of turns, in order, regardless of the history."""

    def __init__(self, script: TurnScript):
        self._script = script
        self._cursor = 0
        self._lock = threading.Lock()
        self.calls: list[tuple[int, str]] = []  # (history length, model)

    @property
    def remaining(self) -> int:
        return len(self._script.turns) - self._cursor

    def complete(self, history, tool_schemas, model) -> ModelTurn:
        _check_history(history)
        with self._lock:
            self.calls.append((len(history), model))
            if self._cursor < len(self._script.turns):
                turn = self._script.turns[self._cursor]
                self._cursor += 1
                return turn
        if self._script.exhaustion == "final_message":
            return ModelTurn(text=FINAL_SCRIPT_MESSAGE)
        raise ScriptExhausted("script exhausted")


def make_scripted(script: TurnScript | Sequence[ModelTurn], exhaustion: str = "error") -> ScriptedProvider:
    if not isinstance(script, TurnScript):
        script = TurnScript(list(script), exhaustion)
    return ScriptedProvider(script)


class HttpChatProvider:
    """Client for a chat-completions style endpoint.

    The wire contract is the common ``POST {base_url}/chat/completions`` shape:
    ``messages`` with ``tool_calls``/``tool_call_id`` pairing, ``tools`` as
    function schemas, and a ``usage`` block with ``prompt_tokens`` and
    ``completion_tokens``. Vendor differences are expressed through
    ``extra_body`` and ``headers`` only.
    """

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        *,
        timeout: float = 120.0,
        extra_body: dict | None = None,
        headers: dict | None = None,
    ):
        base_url = base_url or os.environ.get("PROVIDER_BASE_URL")
        if not base_url:
            raise ProviderError("PROVIDER_BASE_URL is not configured")
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get("PROVIDER_API_KEY", "")
        self.timeout = timeout
        self.extra_body = dict(extra_body or {})
        self.headers = dict(headers or {})
        self.sent_parameters: dict = dict(self.extra_body)

    @staticmethod
    def encode_messages(history: Sequence[ChatMessage]) -> list[dict]:
        out = []
        for m in history:
            msg: dict[str, Any] = {"role": m.role, "content": m.content}
            if m.role == "tool":
                msg["tool_call_id"] = m.tool_call_id
            if m.tool_calls:
                msg["tool_calls"] = [
                    {
                        "id": c.id,
                        "type": "function",
                        "function": {"name": c.tool_name, "arguments": json.dumps(c.arguments)},
                    }
                    for c in m.tool_calls
                ]
            out.append(msg)
        return out

    @staticmethod
    def decode_turn(payload: Any) -> ModelTurn:
        try:
            message = payload["choices"][0]["message"]
            usage = payload.get("usage") or {}
            calls = []
            for c in message.get("tool_calls") or []:
                args = c["function"].get("arguments") or "{}"
                calls.append(
                    ToolInvocation(
                        c["id"], c["function"]["name"], json.loads(args) if isinstance(args, str) else args
                    )
                )
            text = message.get("content")
            return ModelTurn(
                text=text if text else (None if calls else ""),
                tool_calls=tuple(calls),
                usage=TokenUsage(int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))),
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise MalformedResponse(f"malformed response: {exc}") from exc

    def complete(self, history, tool_schemas, model) -> ModelTurn:
        _check_history(history)
        body: dict[str, Any] = {"model": model, "messages": self.encode_messages(history), **self.extra_body}
        if tool_schemas:
            body["tools"] = [
                {
                    "type": "function",
                    "function": {"name": s.name, "description": s.description, "parameters": s.json_schema()},
                }
                for s in tool_schemas
            ]
        headers = {"Content-Type": "application/json", **self.headers}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        req = urllib.request.Request(
            f"{self.base_url}/chat/completions", data=json.dumps(body).encode(), headers=headers, method="POST"
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                raw = resp.read()
        except urllib.error.HTTPError as exc:
            detail = exc.read().decode("utf-8", "replace")
            if exc.code == 400 and ("context" in detail.lower() and "length" in detail.lower()):
                raise ContextLimitExceeded(detail) from exc
            if exc.code == 413:
                raise ContextLimitExceeded(detail) from exc
            raise BackendUnreachable(f"HTTP {exc.code}: {detail[:500]}") from exc
        except (urllib.error.URLError, OSError) as exc:
            raise BackendUnreachable(str(exc)) from exc
        try:
            payload = json.loads(raw)
        except ValueError as exc:
            raise MalformedResponse("response body is not JSON") from exc
        return self.decode_turn(payload)


# -- pricing ---------------------------------------------------------------

@dataclass(frozen=True)
class ModelPrice:
    input_price: Decimal  # USD per million tokens
    output_price: Decimal

    def __post_init__(self):
        if self.input_price < 0 or self.output_price < 0:
            raise ValueError("prices must be non-negative")


class PricingTable(dict):
    """Mapping of model name to :class:`ModelPrice`."""

    @classmethod
    def from_mapping(cls, data: dict) -> PricingTable:
        table = cls()
        for model, entry in data.items():
            table[model] = ModelPrice(Decimal(str(entry["input_price"])), Decimal(str(entry["output_price"])))
        return table

    @classmethod
    def load(cls, path: str | Path) -> PricingTable:
        """Read a JSON pricing file: ``{"model": {"input_price": .., "output_price": ..}}``."""
        return cls.from_mapping(json.loads(Path(path).read_text()))


_MILLION = Decimal(1_000_000)


def compute_cost(usage: TokenUsage, model: str, pricing: PricingTable) -> Decimal:
    """Exact USD cost of ``usage``; round only when displaying."""
    try:
        price = pricing[model]
    except KeyError:
        raise UnknownModel(model) from None
    return (usage.input_tokens * price.input_price + usage.output_tokens * price.output_price) / _MILLION
