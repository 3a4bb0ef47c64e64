"""Global-recoding k-anonymization over the generalization lattice.

A lattice node is a level vector: one generalization level per quasi
attribute, in the dataset's schema order. ``ola_search`` walks the lattice
bottom-up by level sum, tags every node above a k-satisfying node as
satisfying without re-checking it (k-anonymity with suppression is monotone
in the lattice) and returns the node of least information loss, breaking
ties by the lexicographically smallest level vector.
"""

from __future__ import annotations

import itertools
import math
import os
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from decoyanon._util import write_json
from decoyanon.dataset import Dataset, Table, write_table
from decoyanon.errors import InfeasibleError, ValidationError
from decoyanon.hierarchy import GeneralizationHierarchy

LevelVector = tuple[int, ...]
LOSS_METRICS = ("precision", "discernibility", "avg_class_size")


@dataclass(frozen=True)
class EquivalenceClass:
    tuple: tuple[str, ...]
    members: frozenset[int]

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class KCheck:
    satisfies: bool
    suppressed: frozenset[int]


def ordered_hierarchies(quasi: Sequence[str],
                        hierarchies: Mapping[str, GeneralizationHierarchy]) -> list[GeneralizationHierarchy]:
    missing = [q for q in quasi if q not in hierarchies]
    if missing:
        raise ValidationError(f"no hierarchy for quasi attributes {missing}")
    return [hierarchies[q] for q in quasi]


def check_levels(lv: Sequence[int], hs: Sequence[GeneralizationHierarchy]) -> LevelVector:
    lv = tuple(int(x) for x in lv)
    if len(lv) != len(hs):
        raise ValidationError(f"level vector {lv} has {len(lv)} entries, expected {len(hs)}")
    for level, h in zip(lv, hs):
        if not 0 <= level < h.level_count:
            raise ValidationError(f"level {level} out of range for hierarchy {h.name!r}")
    return lv


def tuple_generalizer(hs: Sequence[GeneralizationHierarchy],
                      lv: Sequence[int]) -> Callable[[tuple], tuple[str, ...]]:
    """Return a function mapping a raw quasi tuple to its generalized tuple under ``lv``."""
    caches: list[dict] = [{} for _ in hs]
    pairs = list(zip(hs, lv, caches))

    def gen(values: tuple) -> tuple[str, ...]:
        out = []
        for (h, level, cache), v in zip(pairs, values):
            g = cache.get(v)
            if g is None:
                g = cache[v] = h.generalize(v, level)
            out.append(g)
        return tuple(out)

    return gen


def generalize_dataset(d: Dataset, lv: Sequence[int],
                       hierarchies: Mapping[str, GeneralizationHierarchy]) -> list[tuple[str, ...]]:
    """Generalized quasi tuple of every record, in row order."""
    hs = ordered_hierarchies(d.quasi_names, hierarchies)
    gen = tuple_generalizer(hs, check_levels(lv, hs))
    return [gen(t) for t in d.project(d.quasi_names)]


def compute_classes(d: Dataset, lv: Sequence[int],
                    hierarchies: Mapping[str, GeneralizationHierarchy]) -> list[EquivalenceClass]:
    """Group records by generalized quasi tuple; classes come in first-occurrence order."""
    groups: dict[tuple, list[int]] = {}
    for rid, t in zip(d.record_ids, generalize_dataset(d, lv, hierarchies)):
        groups.setdefault(t, []).append(rid)
    return [EquivalenceClass(t, frozenset(m)) for t, m in groups.items()]


def check_k(classes: Sequence[EquivalenceClass], k: int, suppression_limit: float,
            total: int) -> KCheck:
    if k < 1:
        raise ValidationError("k must be >= 1")
    suppressed = frozenset(rid for c in classes if c.size < k for rid in c.members)
    ok = len(suppressed) <= suppression_limit * total if total else True
    return KCheck(ok, suppressed)


@dataclass(frozen=True)
class AnonymizedView:
    source: Dataset
    level_vector: LevelVector
    classes: tuple[EquivalenceClass, ...]
    suppressed: frozenset[int]
    k: int
    suppression_limit: float
    hierarchies: Mapping[str, GeneralizationHierarchy]

    @property
    def quasi(self) -> list[str]:
        return self.source.quasi_names

    @property
    def sensitive(self) -> list[str]:
        return self.source.sensitive_names

    @property
    def columns(self) -> list[str]:
        return self.quasi + self.sensitive

    @property
    def retained_count(self) -> int:
        return len(self.source) - len(self.suppressed)

    def hierarchy_list(self) -> list[GeneralizationHierarchy]:
        return ordered_hierarchies(self.quasi, self.hierarchies)

    def class_sizes(self) -> list[int]:
        return [c.size for c in self.classes]

    def sensitive_rows(self) -> list[tuple[str, ...]]:
        """Sensitive values of the retained records, in row order."""
        rows = self.source.project(self.sensitive)
        return [tuple(str(v) for v in r) for rid, r in zip(self.source.record_ids, rows)
                if rid not in self.suppressed]

    def to_table(self) -> Table:
        """The releasable table: generalized quasi values plus sensitive values."""
        gen = tuple_generalizer(self.hierarchy_list(), self.level_vector)
        q = self.source.project(self.quasi)
        s = self.source.project(self.sensitive)
        rows = [gen(qt) + st for rid, qt, st in zip(self.source.record_ids, q, s)
                if rid not in self.suppressed]
        return Table(self.columns, rows)

    def manifest(self) -> dict:
        sizes = Counter(self.class_sizes())
        return {
            "quasi": self.quasi,
            "sensitive": self.sensitive,
            "level_vector": dict(zip(self.quasi, self.level_vector)),
            "k": self.k,
            "suppression_limit": self.suppression_limit,
            "records": len(self.source),
            "retained": self.retained_count,
            "suppressed": len(self.suppressed),
            "classes": len(self.classes),
            "class_census": {str(s): n for s, n in sorted(sizes.items())},
            "loss": loss_metrics(self),
        }


def build_view(d: Dataset, lv: Sequence[int], k: int, suppression_limit: float,
               hierarchies: Mapping[str, GeneralizationHierarchy],
               require: bool = True) -> AnonymizedView:
    """Apply one lattice node, suppressing the records of undersized classes."""
    hs = ordered_hierarchies(d.quasi_names, hierarchies)
    lv = check_levels(lv, hs)
    classes = compute_classes(d, lv, hierarchies)
    chk = check_k(classes, k, suppression_limit, len(d))
    if require and not chk.satisfies:
        raise InfeasibleError(f"level vector {lv} does not reach k={k} within "
                              f"suppression limit {suppression_limit}")
    kept = tuple(c for c in classes if c.size >= k)
    return AnonymizedView(d, lv, kept, chk.suppressed, k, suppression_limit, dict(hierarchies))


def exact_loss(metric: str, lv: Sequence[int], level_counts: Sequence[int],
               retained_sizes: Sequence[int], n_suppressed: int, total: int):
    """Loss as an exact rational (or ``math.inf``) so ties compare reliably."""
    if metric == "precision":
        if not lv:
            return Fraction(0)
        if not retained_sizes:
            return Fraction(1)
        return sum((Fraction(l, c - 1) for l, c in zip(lv, level_counts) if c > 1),
                   Fraction(0)) / len(lv)
    if metric == "discernibility":
        return sum(s * s for s in retained_sizes) + n_suppressed * total
    if metric == "avg_class_size":
        if not retained_sizes:
            return math.inf
        return Fraction(sum(retained_sizes), len(retained_sizes))
    raise ValidationError(f"unknown loss metric {metric!r}; choose from {LOSS_METRICS}")


def loss_metrics(view: AnonymizedView) -> dict[str, float]:
    counts = [h.level_count for h in view.hierarchy_list()]
    sizes = view.class_sizes()
    args = (view.level_vector, counts, sizes, len(view.suppressed), len(view.source))
    return {m: float(exact_loss(m, *args)) for m in LOSS_METRICS}


def lattice(hs: Sequence[GeneralizationHierarchy]) -> list[LevelVector]:
    """All level vectors, ordered by level sum and then lexicographically."""
    nodes = list(itertools.product(*(range(h.level_count) for h in hs)))
    nodes.sort(key=lambda lv: (sum(lv), lv))
    return nodes


def ola_search(d: Dataset, k: int, suppression_limit: float, loss: str = "precision",
               hierarchies: Mapping[str, GeneralizationHierarchy] | None = None) -> AnonymizedView:
    if hierarchies is None:
        raise ValidationError("ola_search needs hierarchies for the quasi attributes")
    if loss not in LOSS_METRICS:
        raise ValidationError(f"unknown loss metric {loss!r}; choose from {LOSS_METRICS}")
    if not 0 <= suppression_limit <= 1:
        raise ValidationError("suppression limit must lie in [0, 1]")
    hs = ordered_hierarchies(d.quasi_names, hierarchies)
    counts = [h.level_count for h in hs]
    total = len(d)

    # node -> retained-record count lower bound, for satisfying nodes only
    satisfied: dict[LevelVector, int] = {}
    evaluated: dict[LevelVector, list[EquivalenceClass]] = {}
    best = None

    def classes_at(lv):
        if lv not in evaluated:
            evaluated[lv] = compute_classes(d, lv, hierarchies)
        return evaluated[lv]

    for lv in lattice(hs):
        preds = [lv[:i] + (lv[i] - 1,) + lv[i + 1:] for i in range(len(lv)) if lv[i] > 0]
        tagged = [satisfied[p] for p in preds if p in satisfied]
        if tagged:
            satisfied[lv] = max(tagged)
        else:
            chk = check_k(classes_at(lv), k, suppression_limit, total)
            if not chk.satisfies:
                continue
            satisfied[lv] = total - len(chk.suppressed)

        if loss == "precision" and satisfied[lv] > 0:
            value = exact_loss("precision", lv, counts, [1], 0, total)
        else:
            cls = classes_at(lv)
            sizes = [c.size for c in cls if c.size >= k]
            value = exact_loss(loss, lv, counts, sizes, total - sum(sizes), total)
        if best is None or (value, lv) < best:
            best = (value, lv)

    if best is None:
        raise InfeasibleError(f"no generalization reaches k={k} within suppression "
                              f"limit {suppression_limit} ({total} records)")
    return build_view(d, best[1], k, suppression_limit, hierarchies)


def write_view(view: AnonymizedView, out_dir: str | os.PathLike, **extra) -> dict:
    """Write ``view.csv`` and the ``view.json`` sidecar manifest; return the manifest."""
    out_dir = os.fspath(out_dir)
    write_table(view.to_table(), os.path.join(out_dir, "view.csv"))
    manifest = view.manifest()
    manifest.update(extra)
    write_json(os.path.join(out_dir, "view.json"), manifest)
    return manifest
