"""In-memory table store with fixture seeding, snapshots and state digests."""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Any

from .query import QueryPlan, evaluate_query

SYSTEM_FIELDS = {"sys_id": "sys_id", "sys_created_on": "datetime"}
_EPOCH = datetime(2024, 1, 1)


class FixtureError(ValueError):
    """A fixture file or mapping does not describe a valid platform state."""


class UnknownTable(KeyError):
    pass


class RecordNotFound(KeyError):
    pass


def created_on(ordinal: int) -> str:
    """Render the creation counter as a sortable timestamp."""
    return (_EPOCH + timedelta(seconds=ordinal)).strftime("%Y-%m-%d %H:%M:%S")


@dataclass
class FieldSpec:
    name: str
    label: str
    type: str = "string"


@dataclass
class SchemaEntry:
    table: str
    label: str
    fields: list[FieldSpec]

    def field_types(self) -> dict[str, str]:
        types = {f.name: f.type for f in self.fields}
        types.update({k: v for k, v in SYSTEM_FIELDS.items() if k not in types})
        return types

    def to_dict(self) -> dict:
        return {
            "name": self.table,
            "label": self.label,
            "fields": [{"name": f.name, "label": f.label, "type": f.type} for f in self.fields],
        }


@dataclass(frozen=True)
class Snapshot:
    fixture_name: str
    state: str  # canonical JSON of the full state

    @property
    def digest(self) -> str:
        return digest_tables(json.loads(self.state)["tables"])


def _canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest_tables(tables: dict) -> str:
    return hashlib.sha256(_canonical(tables).encode("utf-8")).hexdigest()


def load_fixture(path: str | Path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise FixtureError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise FixtureError(f"{path}: {exc.strerror}") from exc
    validate_fixture(data, str(path))
    return data


def validate_fixture(data: Any, where: str = "fixture") -> None:
    if not isinstance(data, dict):
        raise FixtureError(f"{where}: top level must be an object")
    if not isinstance(data.get("name"), str) or not data["name"]:
        raise FixtureError(f"{where}: missing 'name'")
    tables = data.get("tables")
    if not isinstance(tables, dict) or not tables:
        raise FixtureError(f"{where}: 'tables' must be a non-empty object")
    for tname, t in tables.items():
        loc = f"{where}: tables.{tname}"
        if not isinstance(t, dict):
            raise FixtureError(f"{loc}: must be an object")
        fields = t.get("fields")
        if not isinstance(fields, list) or not fields:
            raise FixtureError(f"{loc}.fields: schema must list at least one field")
        names = set()
        for i, f in enumerate(fields):
            if not isinstance(f, dict) or not isinstance(f.get("name"), str):
                raise FixtureError(f"{loc}.fields[{i}]: needs a 'name'")
            if f["name"] in names:
                raise FixtureError(f"{loc}.fields[{i}]: duplicate field {f['name']!r}")
            names.add(f["name"])
        auto = t.get("autonumber")
        if auto is not None and (not isinstance(auto, dict) or auto.get("field") not in names):
            raise FixtureError(f"{loc}.autonumber: must name a declared field")
        seen_ids = set()
        for i, rec in enumerate(t.get("records", [])):
            if not isinstance(rec, dict):
                raise FixtureError(f"{loc}.records[{i}]: must be an object")
            for k, v in rec.items():
                if k not in names and k not in SYSTEM_FIELDS:
                    raise FixtureError(f"{loc}.records[{i}]: unknown field {k!r}")
                if not isinstance(v, (str, int, float, bool)):
                    raise FixtureError(f"{loc}.records[{i}].{k}: values must be scalars")
            sid = rec.get("sys_id")
            if sid is not None:
                if not (isinstance(sid, str) and len(sid) == 32 and all(c in "0123456789abcdef" for c in sid)):
                    raise FixtureError(f"{loc}.records[{i}].sys_id: must be 32 lowercase hex characters")
                if sid in seen_ids:
                    raise FixtureError(f"{loc}.records[{i}].sys_id: duplicate")
                seen_ids.add(sid)


def _stringify(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


class PlatformState:
    """Tables, schemas and id/number counters for one platform instance.

    Mutations hold a single lock; snapshot/reset assume no request in flight.
    """

    def __init__(self):
        self.fixture_name = ""
        self.schemas: dict[str, SchemaEntry] = {}
        self.tables: dict[str, list[dict[str, str]]] = {}
        self.autonumber: dict[str, dict] = {}
        self.counter = 0
        self.lock = threading.RLock()

    # -- lifecycle ----------------------------------------------------------

    def seed(self, fixture: dict) -> Snapshot:
        validate_fixture(fixture)
        with self.lock:
            self.fixture_name = fixture["name"]
            self.schemas, self.tables, self.autonumber = {}, {}, {}
            self.counter = 0
            for tname, t in fixture["tables"].items():
                self.schemas[tname] = SchemaEntry(
                    tname,
                    t.get("label", tname),
                    [FieldSpec(f["name"], f.get("label", f["name"]), f.get("type", "string")) for f in t["fields"]],
                )
                self.tables[tname] = []
                if t.get("autonumber"):
                    a = t["autonumber"]
                    self.autonumber[tname] = {
                        "field": a["field"], "prefix": a.get("prefix", ""),
                        "digits": int(a.get("digits", 7)), "next": int(a.get("next", 1)),
                    }
                for rec in t.get("records", []):
                    self._insert(tname, {k: _stringify(v) for k, v in rec.items()})
            return self.snapshot()

    def snapshot(self) -> Snapshot:
        with self.lock:
            state = {
                "fixture_name": self.fixture_name,
                "schemas": {k: v.to_dict() for k, v in self.schemas.items()},
                "tables": self.tables,
                "autonumber": self.autonumber,
                "counter": self.counter,
            }
            return Snapshot(self.fixture_name, _canonical(state))

    def reset(self, snapshot: Snapshot) -> None:
        state = json.loads(snapshot.state)
        with self.lock:
            self.fixture_name = state["fixture_name"]
            self.schemas = {
                k: SchemaEntry(v["name"], v["label"], [FieldSpec(**f) for f in v["fields"]])
                for k, v in state["schemas"].items()
            }
            self.tables = state["tables"]
            self.autonumber = state["autonumber"]
            self.counter = state["counter"]

    def state_digest(self) -> str:
        with self.lock:
            return digest_tables(self.tables)

    # -- CRUD ---------------------------------------------------------------

    def _next_sys_id(self) -> str:
        return hashlib.sha256(f"{self.fixture_name}:{self.counter}".encode()).hexdigest()[:32]

    def _insert(self, table: str, values: dict[str, str]) -> dict[str, str]:
        self.counter += 1
        rec = {"sys_id": values.get("sys_id") or self._next_sys_id()}
        known = self.schemas[table].field_types()
        for k, v in values.items():
            if k in known and k not in SYSTEM_FIELDS:
                rec[k] = v
        auto = self.autonumber.get(table)
        if auto and not rec.get(auto["field"]):
            rec[auto["field"]] = f"{auto['prefix']}{auto['next']:0{auto['digits']}d}"
            auto["next"] += 1
        rec["sys_created_on"] = values.get("sys_created_on") or created_on(self.counter)
        self.tables[table].append(rec)
        return rec

    def _table(self, table: str) -> list[dict[str, str]]:
        try:
            return self.tables[table]
        except KeyError:
            raise UnknownTable(table) from None

    def find(self, table: str, key: str) -> dict[str, str]:
        """Look a record up by sys_id, falling back to the autonumber/name field."""
        rows = self._table(table)
        for r in rows:
            if r["sys_id"] == key:
                return r
        alt = self.autonumber.get(table, {}).get("field") or ("name" if "name" in self.schemas[table].field_types() else None)
        if alt:
            for r in rows:
                if r.get(alt) == key:
                    return r
        raise RecordNotFound(key)

    def create(self, table: str, values: dict[str, Any]) -> dict[str, str]:
        with self.lock:
            self._table(table)
            values = {k: _stringify(v) for k, v in values.items() if k not in SYSTEM_FIELDS}
            return dict(self._insert(table, values))

    def update(self, table: str, key: str, values: dict[str, Any]) -> dict[str, str]:
        with self.lock:
            rec = self.find(table, key)
            known = self.schemas[table].field_types()
            for k, v in values.items():
                if k in known and k not in SYSTEM_FIELDS:
                    rec[k] = _stringify(v)
            return dict(rec)

    def delete(self, table: str, key: str) -> dict[str, str]:
        with self.lock:
            rec = self.find(table, key)
            self.tables[table].remove(rec)
            return dict(rec)

    def query(self, table: str, plan: QueryPlan, fields=None, limit=None, offset: int = 0) -> list[dict[str, str]]:
        with self.lock:
            rows = self._table(table)
            return evaluate_query(plan, rows, self.schemas[table].field_types(), fields, limit, offset)

    def dictionary_rows(self) -> list[dict[str, str]]:
        """Schema rows in the shape of a ``sys_dictionary`` table (read-only, derived)."""
        rows = []
        for tname, schema in self.schemas.items():
            for f in schema.fields:
                sid = hashlib.sha256(f"dict:{tname}:{f.name}".encode()).hexdigest()[:32]
                rows.append({
                    "sys_id": sid, "name": tname, "element": f.name,
                    "column_label": f.label, "internal_type": f.type,
                })
        return rows

    def clone(self) -> PlatformState:
        other = PlatformState()
        other.reset(self.snapshot())
        return other


DICTIONARY_TABLE = "sys_dictionary"
DICTIONARY_FIELDS = {"sys_id": "sys_id", "name": "string", "element": "string", "column_label": "string", "internal_type": "string"}

