"""Classification of individual tool-call outcomes.

The labels are the eleven categories used when analysing curl-driven agent
traces. Several patterns can co-occur in one output (a shell error that
mentions curl, a truncated error envelope, ...), so the checks run in a fixed
order and the first match wins.
"""

from __future__ import annotations

import json
import re
from enum import Enum

from .sandbox import NO_OUTPUT, TRUNCATION_MARKER, ExecResult


class OutcomeCategory(str, Enum):
    SUCCESS = "Success"
    SUCCESS_TRUNCATED = "Success (trunc.)"
    NON_JSON_SUCCESS = "Non-JSON success"
    API_ERROR = "API error"
    SHELL_ERROR = "Shell error"
    EMPTY_RESPONSE = "Empty response"
    CURL_ERROR = "Curl error"
    JSON_PARSE_ERROR = "JSON parse error"
    PYTHON_ERROR = "Python error"
    TIMEOUT = "Timeout"
    HTML_REDIRECT = "HTML redirect"

    def __str__(self) -> str:
        return self.value

    @property
    def is_success(self) -> bool:
        return self in SUCCESS_CATEGORIES


SUCCESS_CATEGORIES = frozenset(
    {OutcomeCategory.SUCCESS, OutcomeCategory.SUCCESS_TRUNCATED, OutcomeCategory.NON_JSON_SUCCESS}
)

_EXIT_TRAILER = re.compile(r"\n?\[exit code: (-?\d+)\]\s*$")
_TIMEOUT = re.compile(r"\[error\] Command timed out after [\d.]+s\.")
_SHELL_DIAGNOSTIC = re.compile(
    r"(^|\n)\S*\b(sh|bash|dash|zsh): "
    r"|Syntax error|syntax error|command not found|unexpected EOF|unterminated quoted|bad substitution",
)
_CURL = re.compile(r"curl: \(\d+\)")
_META_REFRESH = re.compile(r"<meta[^>]*http-equiv\s*=\s*[\"']?refresh", re.IGNORECASE)
_ERROR_ENVELOPE = re.compile(r'^\s*\{\s*"error"\s*:|"status"\s*:\s*"failure"')
_JQ_PARSE = re.compile(r"(^|\n)(jq: error.*\n)?parse error: |jq: error \(at")
_PYTHON = re.compile(
    r"Traceback \(most recent call last\)|(^|\n)[A-Za-z_][\w.]*(Error|Exception): |JSONDecodeError"
)


def _split_exit(observation: str, exec_result: ExecResult | None) -> tuple[str, int]:
    m = _EXIT_TRAILER.search(observation)
    body = observation[: m.start()] if m else observation
    if exec_result is not None:
        return body, exec_result.exit_code
    return body, int(m.group(1)) if m else 0


def _is_json(text: str) -> bool:
    try:
        value = json.loads(text)
    except ValueError:
        return False
    return isinstance(value, (dict, list))


def classify_outcome(observation: str, exec_result: ExecResult | None = None) -> OutcomeCategory:
    """Map one tool observation to exactly one :class:`OutcomeCategory`.

    ``exec_result`` supplies the timeout flag and exit status for terminal
    calls; without it the exit status is read from the ``[exit code: N]``
    trailer of the rendered observation (absent means zero).
    """
    body, exit_code = _split_exit(observation, exec_result)
    text = body.strip()

    if (exec_result is not None and exec_result.timed_out) or _TIMEOUT.search(text):
        return OutcomeCategory.TIMEOUT
    if exit_code != 0 and _SHELL_DIAGNOSTIC.search(text):
        return OutcomeCategory.SHELL_ERROR
    if _CURL.search(text):
        return OutcomeCategory.CURL_ERROR
    if "<html" in text.lower() and _META_REFRESH.search(text):
        return OutcomeCategory.HTML_REDIRECT
    if _ERROR_ENVELOPE.search(text):
        return OutcomeCategory.API_ERROR
    if _JQ_PARSE.search(text):
        return OutcomeCategory.JSON_PARSE_ERROR
    if _PYTHON.search(text):
        return OutcomeCategory.PYTHON_ERROR
    if exit_code == 0 and (not text or text == NO_OUTPUT):
        return OutcomeCategory.EMPTY_RESPONSE
    if exit_code == 0:
        if text.endswith(TRUNCATION_MARKER) and text[:1] in "{[":
            return OutcomeCategory.SUCCESS_TRUNCATED
        if _is_json(text):
            return OutcomeCategory.SUCCESS
        return OutcomeCategory.NON_JSON_SUCCESS
    return OutcomeCategory.SHELL_ERROR
