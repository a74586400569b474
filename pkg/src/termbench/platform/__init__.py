"""Embedded mock enterprise platform."""

from .query import (
    MalformedToken,
    OrderBy,
    Predicate,
    QueryError,
    QueryPlan,
    UnknownOrderField,
    evaluate_query,
    parse_query,
)
from .service import PROFILES, Platform, PlatformProfile, Response, get_profile
from .store import FixtureError, PlatformState, SchemaEntry, Snapshot, load_fixture, validate_fixture

__all__ = [
    "FixtureError",
    "MalformedToken",
    "OrderBy",
    "PROFILES",
    "Platform",
    "PlatformProfile",
    "PlatformState",
    "Predicate",
    "QueryError",
    "QueryPlan",
    "Response",
    "SchemaEntry",
    "Snapshot",
    "UnknownOrderField",
    "evaluate_query",
    "get_profile",
    "load_fixture",
    "parse_query",
    "validate_fixture",
]
