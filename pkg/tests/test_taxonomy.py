from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from taxonomy_cases import ROWS, _exec
from termbench.taxonomy import SUCCESS_CATEGORIES, OutcomeCategory, classify_outcome


@pytest.mark.parametrize("observation, exec_result, expected", ROWS, ids=[r[2].value for r in ROWS])
def test_example_rows(observation, exec_result, expected):
    assert classify_outcome(observation, exec_result) is expected


def test_labels_are_verbatim_and_complete():
    assert {c.value for c in OutcomeCategory} == {r[2].value for r in ROWS}
    assert {c for c in OutcomeCategory if c.is_success} == SUCCESS_CATEGORIES
    assert str(OutcomeCategory.SUCCESS_TRUNCATED) == "Success (trunc.)"


def test_exit_trailer_is_read_without_exec_result():
    assert classify_outcome('/bin/sh: Syntax error: "}" unexpected\n[exit code: 2]') is OutcomeCategory.SHELL_ERROR


def test_shell_diagnostic_with_zero_exit_is_not_shell_error():
    assert classify_outcome('sh: 1: foo: not here', _exec(0)) is OutcomeCategory.NON_JSON_SUCCESS


def test_shell_error_wins_over_curl_mention():
    out = "bash: -c: line 1: unexpected EOF while looking for matching `''\ncurl: (3) URL rejected"
    assert classify_outcome(out, _exec(2)) is OutcomeCategory.SHELL_ERROR


def test_timeout_flag_wins():
    assert classify_outcome("curl: (28) whatever", _exec(124, timed_out=True)) is OutcomeCategory.TIMEOUT


def test_nonzero_exit_without_pattern_falls_back_to_shell_error():
    assert classify_outcome("grep found nothing", _exec(1)) is OutcomeCategory.SHELL_ERROR


def test_error_envelope_inside_truncated_output():
    out = '{"error": {"message": "x"}, "status": "failure"} [OUTPUT TRUNCATED]'
    assert classify_outcome(out) is OutcomeCategory.API_ERROR


def test_python_traceback():
    out = 'Traceback (most recent call last):\n  File "<string>", line 1\nKeyError: \'result\''
    assert classify_outcome(out, _exec(1)) is OutcomeCategory.PYTHON_ERROR


@given(st.text(max_size=200), st.integers(-2, 255), st.booleans())
def test_total_and_deterministic(text, code, timed_out):
    ex = _exec(code, timed_out)
    a = classify_outcome(text, ex)
    assert isinstance(a, OutcomeCategory)
    assert classify_outcome(text, ex) is a
    assert isinstance(classify_outcome(text), OutcomeCategory)


@given(st.text(max_size=200), st.integers(1, 255))
def test_nonzero_exit_never_success(text, code):
    assert not classify_outcome(text, _exec(code)).is_success
