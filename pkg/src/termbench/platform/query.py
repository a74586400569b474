"""The ``sysparm_query`` subset: ``^``-joined EQ/NEQ/LIKE predicates plus one
ORDERBY/ORDERBYDESC clause."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

OPS = ("EQ", "NEQ", "LIKE")
_SYMBOL = {"EQ": "=", "NEQ": "!=", "LIKE": "LIKE"}
_PREDICATE = re.compile(r"^([A-Za-z_][A-Za-z0-9_.]*?)(!=|=|LIKE)(.*)$", re.DOTALL)
_FIELD = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")
NUMERIC_TYPES = frozenset({"integer", "int", "decimal", "float", "number", "currency"})


class QueryError(ValueError):
    pass


class MalformedToken(QueryError):
    def __init__(self, token: str, why: str = "no recognizable operator"):
        super().__init__(f"malformed query token {token!r}: {why}")
        self.token = token


class UnknownOrderField(QueryError):
    pass


@dataclass(frozen=True)
class Predicate:
    field: str
    op: str
    value: str

    def matches(self, value: str | None) -> bool:
        if value is None:
            return False
        if self.op == "EQ":
            return value == self.value
        if self.op == "NEQ":
            return value != self.value
        return self.value.casefold() in value.casefold()


@dataclass(frozen=True)
class OrderBy:
    field: str
    direction: str = "ASC"


@dataclass(frozen=True)
class QueryPlan:
    conjuncts: tuple[Predicate, ...] = ()
    order: OrderBy | None = None

    def render(self) -> str:
        tokens = [f"{p.field}{_SYMBOL[p.op]}{p.value}" for p in self.conjuncts]
        if self.order is not None:
            prefix = "ORDERBYDESC" if self.order.direction == "DESC" else "ORDERBY"
            tokens.append(prefix + self.order.field)
        return "^".join(tokens)


def parse_query(q: str) -> QueryPlan:
    conjuncts: list[Predicate] = []
    order: OrderBy | None = None
    for token in q.split("^") if q else ():
        if not token:
            continue
        if token.startswith("ORDERBY"):
            if order is not None:
                raise MalformedToken(token, "only one ORDERBY clause is supported")
            desc = token.startswith("ORDERBYDESC")
            field = token[len("ORDERBYDESC"):] if desc else token[len("ORDERBY"):]
            if not _FIELD.match(field):
                raise MalformedToken(token, "missing order field")
            order = OrderBy(field, "DESC" if desc else "ASC")
            continue
        if token.startswith(("OR", "NQ")):
            raise MalformedToken(token, "OR/NQ disjunctions are not supported")
        m = _PREDICATE.match(token)
        if m is None:
            raise MalformedToken(token)
        field, symbol, value = m.groups()
        op = {"=": "EQ", "!=": "NEQ", "LIKE": "LIKE"}[symbol]
        conjuncts.append(Predicate(field, op, value))
    return QueryPlan(tuple(conjuncts), order)


def sort_key_for(type_tag: str | None) -> Callable[[str | None], tuple]:
    if type_tag in NUMERIC_TYPES:
        def numeric(v):
            try:
                return (0, float(v), "")
            except (TypeError, ValueError):
                return (1, 0.0, v or "")
        return numeric
    return lambda v: (0, 0.0, v or "")


def evaluate_query(
    plan: QueryPlan,
    records: Iterable[Mapping[str, str]],
    known_fields: Mapping[str, str | None],
    fields: Sequence[str] | None = None,
    limit: int | None = None,
    offset: int = 0,
) -> list[dict[str, str]]:
    """Filter, order, slice and project ``records`` (in insertion order).

    ``known_fields`` maps field name to its type tag. Predicates on fields
    outside it match nothing; ordering on such a field is an error.
    """
    rows = [r for r in records if all(p.field in known_fields and p.matches(r.get(p.field, "")) for p in plan.conjuncts)]
    if plan.order is not None:
        f = plan.order.field
        if f not in known_fields:
            raise UnknownOrderField(f"cannot order by unknown field {f!r}")
        rows.sort(key=lambda r: r["sys_id"])
        rows.sort(key=lambda r: sort_key_for(known_fields[f])(r.get(f, "")), reverse=plan.order.direction == "DESC")
    rows = rows[offset:]
    if limit is not None:
        rows = rows[:limit]
    if fields:
        wanted = ["sys_id", *[f for f in fields if f != "sys_id"]]
        return [{f: r[f] for f in wanted if f in r} for r in rows]
    return [dict(r) for r in rows]
