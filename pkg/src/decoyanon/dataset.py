"""Schema-tagged tabular datasets: loading, direct-identifier stripping, sampling."""

from __future__ import annotations

import csv
import io
import os
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from decoyanon._util import atomic_write_text, read_json
from decoyanon.errors import ValidationError

ROLES = ("direct", "quasi", "sensitive")
KINDS = ("categorical", "integer", "fixed-length-code")


@dataclass(frozen=True)
class AttributeSchema:
    name: str
    role: str
    kind: str = "categorical"
    length: int | None = None  # required for fixed-length-code
    hierarchy: str | None = None  # hierarchy name, quasi attributes only

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValidationError(f"attribute {self.name!r}: unknown role {self.role!r}")
        if self.kind not in KINDS:
            raise ValidationError(f"attribute {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "fixed-length-code" and not (self.length and self.length > 0):
            raise ValidationError(f"attribute {self.name!r}: fixed-length-code needs a positive length")

    def parse(self, raw: str):
        """Convert one cell to its typed value, raising ValueError on bad input."""
        if raw == "":
            raise ValueError("missing value")
        if self.kind == "integer":
            return int(raw)
        if self.kind == "fixed-length-code" and len(raw) != self.length:
            raise ValueError(f"expected a code of length {self.length}, got {raw!r}")
        return raw


def validate_schema(schema: Sequence[AttributeSchema]) -> tuple[AttributeSchema, ...]:
    names = [a.name for a in schema]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ValidationError(f"duplicate attribute names: {dupes}")
    return tuple(schema)


def load_schema(path: str | os.PathLike) -> tuple[AttributeSchema, ...]:
    """Read a JSON schema document: ``{"attributes": [{name, role, kind, ...}, ...]}``."""
    doc = read_json(path)
    try:
        attrs = [AttributeSchema(**a) for a in doc["attributes"]]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed schema ({exc})") from exc
    return validate_schema(attrs)


def schema_to_doc(schema: Sequence[AttributeSchema]) -> dict:
    out = []
    for a in schema:
        entry = {"name": a.name, "role": a.role, "kind": a.kind}
        if a.length is not None:
            entry["length"] = a.length
        if a.hierarchy is not None:
            entry["hierarchy"] = a.hierarchy
        out.append(entry)
    return {"attributes": out}


@dataclass(frozen=True)
class Dataset:
    """An immutable table of typed records with stable integer ids."""

    schema: tuple[AttributeSchema, ...]
    records: tuple[tuple, ...]
    record_ids: tuple[int, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "schema", validate_schema(self.schema))
        object.__setattr__(self, "records", tuple(tuple(r) for r in self.records))
        if self.record_ids is None:
            object.__setattr__(self, "record_ids", tuple(range(len(self.records))))
        else:
            object.__setattr__(self, "record_ids", tuple(self.record_ids))
        if len(self.record_ids) != len(self.records):
            raise ValidationError("record_ids and records differ in length")
        if len(set(self.record_ids)) != len(self.record_ids):
            raise ValidationError("record_ids are not unique")
        width = len(self.schema)
        for rid, rec in zip(self.record_ids, self.records):
            if len(rec) != width:
                raise ValidationError(f"record {rid} has {len(rec)} values, schema has {width}")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.schema]

    def attrs(self, role: str) -> list[AttributeSchema]:
        return [a for a in self.schema if a.role == role]

    @property
    def quasi_names(self) -> list[str]:
        return [a.name for a in self.schema if a.role == "quasi"]

    @property
    def sensitive_names(self) -> list[str]:
        return [a.name for a in self.schema if a.role == "sensitive"]

    def index_of(self, name: str) -> int:
        for i, a in enumerate(self.schema):
            if a.name == name:
                return i
        raise KeyError(name)

    def column(self, name: str) -> list:
        i = self.index_of(name)
        return [r[i] for r in self.records]

    def project(self, names: Sequence[str]) -> list[tuple]:
        idx = [self.index_of(n) for n in names]
        return [tuple(r[i] for i in idx) for r in self.records]

    def select(self, keep: Iterable[int]) -> "Dataset":
        """Subset by record id, preserving the original row order."""
        keep = set(keep)
        pairs = [(rid, r) for rid, r in zip(self.record_ids, self.records) if rid in keep]
        return Dataset(self.schema, [r for _, r in pairs], [rid for rid, _ in pairs])

    def by_id(self) -> dict[int, tuple]:
        return dict(zip(self.record_ids, self.records))


def parse_rows(header: Sequence[str], rows: Iterable[Sequence[str]],
               schema: Sequence[AttributeSchema], source: str = "<data>") -> Dataset:
    schema = validate_schema(schema)
    expected = [a.name for a in schema]
    if list(header) != expected:
        raise ValidationError(f"{source}: header {list(header)} does not match schema {expected}")
    records = []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(schema):
            raise ValidationError(f"{source}: row {lineno} has {len(row)} fields, expected {len(schema)}")
        values = []
        for attr, raw in zip(schema, row):
            try:
                values.append(attr.parse(raw))
            except ValueError as exc:
                raise ValidationError(
                    f"{source}: row {lineno}, attribute {attr.name!r}: {exc}") from None
        records.append(tuple(values))
    return Dataset(schema, records)


def load_dataset(path: str | os.PathLike, schema: Sequence[AttributeSchema]) -> Dataset:
    """Load a UTF-8 CSV whose header row lists exactly the schema's attribute names.

    Record ids are the 0-based data row numbers.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file, no header") from None
        return parse_rows(header, reader, schema, source=str(path))


def dataset_to_csv(d: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(d.names)
    w.writerows(d.records)
    return buf.getvalue()


def save_dataset(d: Dataset, path: str | os.PathLike) -> None:
    atomic_write_text(path, dataset_to_csv(d))


def strip_direct(d: Dataset) -> Dataset:
    keep = [i for i, a in enumerate(d.schema) if a.role != "direct"]
    if len(keep) == len(d.schema):
        return d
    schema = tuple(d.schema[i] for i in keep)
    records = [tuple(r[i] for i in keep) for r in d.records]
    return Dataset(schema, records, d.record_ids)


def sample_uniform(d: Dataset, n: int, seed: int) -> Dataset:
    """Draw ``n`` records without replacement; row order of ``d`` is kept."""
    if not 0 <= n <= len(d):
        raise ValidationError(f"cannot sample {n} records from a dataset of {len(d)}")
    picked = random.Random(seed).sample(range(len(d)), n)
    picked.sort()
    return Dataset(d.schema, [d.records[i] for i in picked], [d.record_ids[i] for i in picked])


@dataclass(frozen=True)
class Table:
    """A plain string table, used for generalized views and recipient releases."""

    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(tuple(str(v) for v in r) for r in self.rows))

    def __len__(self) -> int:
        return len(self.rows)

    def project(self, names: Sequence[str]) -> list[tuple[str, ...]]:
        try:
            idx = [self.columns.index(n) for n in names]
        except ValueError as exc:
            raise ValidationError(f"table lacks column: {exc}") from None
        return [tuple(r[i] for i in idx) for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerows(self.rows)
        return buf.getvalue()


def read_table(path: str | os.PathLike) -> Table:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file, no header") from None
        return Table(header, list(reader))


def write_table(t: Table, path: str | os.PathLike) -> None:
    atomic_write_text(path, t.to_csv())
