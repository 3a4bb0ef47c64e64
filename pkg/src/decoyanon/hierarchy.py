"""Generalization hierarchies for quasi-identifiers.

Three kinds are supported:

``mapping-table``
    An enumerated tree: every leaf lists its ancestor at each level above 0.
``interval``
    Integers grouped into nested, equally wide intervals anchored at an origin
    (e.g. year of birth in 2-, 4- and 8-year bins), topped by ``*``.
``suffix-mask``
    Fixed-length codes whose trailing characters are replaced by ``*`` one
    level at a time (e.g. ZIP ``55555`` -> ``5555*`` -> ... -> ``*****``).

Generalized values are always strings. Level 0 is the raw value.
"""

from __future__ import annotations

import math
import os
import re
from typing import Iterable, Mapping, Sequence

from decoyanon._util import read_json
from decoyanon.dataset import AttributeSchema
from decoyanon.errors import ValidationError

ROOT = "*"


class GeneralizationHierarchy:
    kind: str = ""

    def __init__(self, name: str, level_count: int):
        if level_count < 1:
            raise ValidationError(f"hierarchy {name!r}: level_count must be >= 1")
        self.name = name
        self.level_count = level_count
        self._cache: dict[tuple, str] = {}

    @property
    def top(self) -> int:
        return self.level_count - 1

    def _check_level(self, level: int) -> None:
        if not 0 <= level < self.level_count:
            raise ValidationError(
                f"hierarchy {self.name!r}: level {level} outside [0, {self.level_count})")

    def generalize(self, value, level: int) -> str:
        """Return the level-``level`` ancestor of the raw value ``value``."""
        key = (value, level)
        try:
            return self._cache[key]
        except KeyError:
            pass
        self._check_level(level)
        out = self._generalize(value, level)
        self._cache[key] = out
        return out

    def levels_of(self, value: str) -> list[int]:
        """Levels at which ``value`` is a valid (possibly generalized) value."""
        levels = self._levels_of(str(value))
        if not levels:
            raise ValidationError(f"hierarchy {self.name!r}: {value!r} is not a value at any level")
        return levels

    def lift(self, value: str, from_level: int, to_level: int) -> str:
        """Generalize a value already sitting at ``from_level`` up to ``to_level``."""
        if to_level < from_level:
            raise ValueError("lift only moves up the hierarchy")
        self._check_level(to_level)
        return self._lift(str(value), from_level, to_level)

    def is_ancestor(self, a, b) -> bool:
        """True iff lifting ``b`` to ``a``'s level yields ``a`` (so ``a == b`` counts)."""
        a, b = str(a), str(b)
        for i in self.levels_of(a):
            for j in self.levels_of(b):
                if i >= j and self._lift(b, j, i) == a:
                    return True
        return False

    def related(self, a, b, strict: bool = False) -> bool:
        """Ancestor-or-descendant test used by the same-origin check.

        ``strict`` drops the equal-value case, leaving proper parents/children only.
        """
        if strict and str(a) == str(b):
            return False
        return self.is_ancestor(a, b) or self.is_ancestor(b, a)

    def to_doc(self) -> dict:
        raise NotImplementedError

    def _generalize(self, value, level: int) -> str:
        raise NotImplementedError

    def _levels_of(self, value: str) -> list[int]:
        raise NotImplementedError

    def _lift(self, value: str, from_level: int, to_level: int) -> str:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r}, levels={self.level_count})"


class MappingHierarchy(GeneralizationHierarchy):
    kind = "mapping-table"

    def __init__(self, name: str, table: Mapping[str, Sequence[str]]):
        if not table:
            raise ValidationError(f"hierarchy {name!r}: empty mapping table")
        depths = {len(v) for v in table.values()}
        if len(depths) != 1:
            raise ValidationError(f"hierarchy {name!r}: leaves list different numbers of ancestors")
        super().__init__(name, depths.pop() + 1)
        self.table = {str(k): [str(x) for x in v] for k, v in table.items()}
        # nodes[level] = values present at that level; parent[level][v] = value at level + 1
        self.nodes: list[set[str]] = [set(self.table)]
        self.parent: list[dict[str, str]] = []
        for level in range(self.top):
            self.nodes.append(set())
            self.parent.append({})
        for leaf, chain in self.table.items():
            path = [leaf, *chain]
            for level in range(self.top):
                child, up = path[level], path[level + 1]
                known = self.parent[level].setdefault(child, up)
                if known != up:
                    raise ValidationError(
                        f"hierarchy {name!r}: {child!r} has two parents ({known!r}, {up!r})")
                self.nodes[level + 1].add(up)
        if len(self.nodes[self.top]) != 1:
            raise ValidationError(f"hierarchy {name!r}: top level must hold a single root value")

    def _generalize(self, value, level):
        v = str(value)
        if v not in self.table:
            raise ValidationError(f"hierarchy {self.name!r}: {v!r} outside the domain")
        return v if level == 0 else self.table[v][level - 1]

    def _levels_of(self, value):
        return [lvl for lvl, vals in enumerate(self.nodes) if value in vals]

    def _lift(self, value, from_level, to_level):
        for level in range(from_level, to_level):
            value = self.parent[level][value]
        return value

    def to_doc(self):
        return {"kind": self.kind, "map": {k: list(v) for k, v in self.table.items()}}


class IntervalHierarchy(GeneralizationHierarchy):
    """Nested integer intervals.

    Level ``i`` (1 <= i <= len(widths)) groups values into intervals of width
    ``widths[i-1]`` starting at ``origin + m * width``. Labels are ``lo-hi``
    where ``hi = lo + width`` for ``half-open`` labels (1981 at width 2 from
    1976 -> ``1980-1982``) or ``hi = lo + width - 1`` for ``closed`` labels
    (ages 18..20 at width 3 -> ``18-20``).
    """

    kind = "interval"
    _INT = re.compile(r"^-?\d+$")
    _RANGE = re.compile(r"^(-?\d+)-(-?\d+)$")

    def __init__(self, name: str, widths: Sequence[int], origin: int = 0,
                 labels: str = "half-open", minimum: int | None = None,
                 maximum: int | None = None):
        widths = [int(w) for w in widths]
        super().__init__(name, len(widths) + 2)
        if any(w < 1 for w in widths):
            raise ValidationError(f"hierarchy {name!r}: interval widths must be positive")
        for small, big in zip(widths, widths[1:]):
            if big <= small or big % small:
                raise ValidationError(
                    f"hierarchy {name!r}: widths must increase and nest ({small} -> {big})")
        if labels not in ("half-open", "closed"):
            raise ValidationError(f"hierarchy {name!r}: labels must be 'half-open' or 'closed'")
        self.widths = widths
        self.origin = int(origin)
        self.labels = labels
        self.minimum = minimum
        self.maximum = maximum

    def _to_int(self, value) -> int:
        if isinstance(value, int):
            v = value
        elif isinstance(value, str) and self._INT.match(value):
            v = int(value)
        else:
            raise ValidationError(f"hierarchy {self.name!r}: {value!r} is not an integer")
        if (self.minimum is not None and v < self.minimum) or (
                self.maximum is not None and v > self.maximum):
            raise ValidationError(f"hierarchy {self.name!r}: {v} outside the domain")
        return v

    def _label(self, lo: int, width: int) -> str:
        hi = lo + width if self.labels == "half-open" else lo + width - 1
        return f"{lo}-{hi}"

    def _generalize(self, value, level):
        v = self._to_int(value)
        if level == 0:
            return str(v)
        if level == self.top:
            return ROOT
        w = self.widths[level - 1]
        return self._label(self.origin + ((v - self.origin) // w) * w, w)

    def _levels_of(self, value):
        if value == ROOT:
            return [self.top]
        if self._INT.match(value):
            try:
                self._to_int(value)
            except ValidationError:
                return []
            return [0]
        m = self._RANGE.match(value)
        if not m:
            return []
        lo, hi = int(m.group(1)), int(m.group(2))
        width = hi - lo if self.labels == "half-open" else hi - lo + 1
        return [i + 1 for i, w in enumerate(self.widths)
                if w == width and (lo - self.origin) % w == 0]

    def _lift(self, value, from_level, to_level):
        if from_level == to_level:
            return value
        if from_level == self.top:
            return value
        lo = int(value) if from_level == 0 else int(self._RANGE.match(value).group(1))
        return self._generalize(lo, to_level)

    def to_doc(self):
        doc = {"kind": self.kind, "origin": self.origin, "widths": list(self.widths),
               "labels": self.labels}
        if self.minimum is not None:
            doc["min"] = self.minimum
        if self.maximum is not None:
            doc["max"] = self.maximum
        return doc


class SuffixMaskHierarchy(GeneralizationHierarchy):
    """Level ``l`` replaces the last ``l`` characters with ``*``."""

    kind = "suffix-mask"

    def __init__(self, name: str, length: int):
        if length < 1:
            raise ValidationError(f"hierarchy {name!r}: code length must be positive")
        super().__init__(name, length + 1)
        self.length = length

    def _generalize(self, value, level):
        v = str(value)
        if len(v) != self.length or "*" in v:
            raise ValidationError(f"hierarchy {self.name!r}: {v!r} is not a {self.length}-character code")
        return v[: self.length - level] + "*" * level

    def _levels_of(self, value):
        if len(value) != self.length:
            return []
        stem = value.rstrip("*")
        if "*" in stem:
            return []
        return [self.length - len(stem)]

    def _lift(self, value, from_level, to_level):
        return value[: self.length - to_level] + "*" * to_level

    def to_doc(self):
        return {"kind": self.kind, "length": self.length}


def hierarchy_from_doc(name: str, doc: Mapping) -> GeneralizationHierarchy:
    kind = doc.get("kind")
    try:
        if kind == "mapping-table":
            return MappingHierarchy(name, doc["map"])
        if kind == "interval":
            return IntervalHierarchy(name, doc["widths"], origin=doc.get("origin", 0),
                                     labels=doc.get("labels", "half-open"),
                                     minimum=doc.get("min"), maximum=doc.get("max"))
        if kind == "suffix-mask":
            return SuffixMaskHierarchy(name, int(doc["length"]))
    except KeyError as exc:
        raise ValidationError(f"hierarchy {name!r}: missing field {exc}") from None
    raise ValidationError(f"hierarchy {name!r}: unknown kind {kind!r}")


def load_hierarchies(path: str | os.PathLike) -> dict[str, GeneralizationHierarchy]:
    """Read ``{"hierarchies": {name: {"kind": ..., ...}}}``."""
    doc = read_json(path)
    defs = doc.get("hierarchies", doc) if isinstance(doc, dict) else None
    if not isinstance(defs, dict):
        raise ValidationError(f"{path}: expected a mapping of hierarchy definitions")
    return {name: hierarchy_from_doc(name, d) for name, d in defs.items()}


def hierarchies_to_doc(hs: Mapping[str, GeneralizationHierarchy]) -> dict:
    return {"hierarchies": {name: h.to_doc() for name, h in hs.items()}}


def bind_hierarchies(schema: Iterable[AttributeSchema],
                     defs: Mapping[str, GeneralizationHierarchy]) -> dict[str, GeneralizationHierarchy]:
    """Map each quasi attribute to its hierarchy (by reference, else by attribute name)."""
    bound = {}
    for attr in schema:
        if attr.role != "quasi":
            continue
        ref = attr.hierarchy or attr.name
        if ref not in defs:
            raise ValidationError(f"quasi attribute {attr.name!r} has no hierarchy (looked for {ref!r})")
        bound[attr.name] = defs[ref]
    return bound


def anchor_origin(years: Iterable[int], multiple: int = 8) -> int:
    """Smallest value, rounded down to a multiple of ``multiple``."""
    years = list(years)
    if not years:
        raise ValidationError("cannot anchor intervals on an empty column")
    return (min(years) // multiple) * multiple


def standard_hierarchies(yob_origin: int, zip_length: int = 5,
                         genders: Sequence[str] = ("Male", "Female", "Other"),
                         races: Sequence[str] = ()) -> dict[str, GeneralizationHierarchy]:
    """Gender / race / year-of-birth / ZIP hierarchies with 2, 2, 5 and 6 levels."""
    hs: dict[str, GeneralizationHierarchy] = {
        "gender": MappingHierarchy("gender", {g: ["Person"] for g in genders}),
        "yob": IntervalHierarchy("yob", [2, 4, 8], origin=yob_origin),
        "zip": SuffixMaskHierarchy("zip", zip_length),
    }
    if races:
        hs["race"] = MappingHierarchy("race", {r: [ROOT] for r in races})
    return hs


def lattice_size(hs: Sequence[GeneralizationHierarchy]) -> int:
    return math.prod(h.level_count for h in hs)
