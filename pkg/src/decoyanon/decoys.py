"""Decoy selection, injection into per-recipient releases, and collusion hardening.

Every recipient receives the same anonymized view plus its own decoy classes:
small population classes (drawn from the linkage candidate pool) that no
other recipient gets. Hardening then picks, for each recipient, some genuine
classes and deletes them from every other recipient's copy, so colluders who
diff their releases see those classes as unmatched too and cannot tell them
apart from the decoys.
"""

from __future__ import annotations

import math
import os
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from decoyanon._util import derive_seed, read_json, write_json
from decoyanon.anonymizer import AnonymizedView, ordered_hierarchies, tuple_generalizer
from decoyanon.dataset import Dataset, Table, write_table
from decoyanon.errors import BudgetError, CapacityError, ValidationError
from decoyanon.hierarchy import GeneralizationHierarchy
from decoyanon.linkage import DecoyCandidate, discover_candidates, link_classes

Signature = tuple[str, ...]
STRATEGIES = ("none", "random", "size-based", "risk-based")


def fraction_capacity(f: float) -> int:
    """Recipients supportable when each takes a fraction ``f`` of the pool: floor(1/f)."""
    if not 0 < f <= 1:
        raise ValidationError("pool fraction must lie in (0, 1]")
    return math.floor(1 / Fraction(str(f)))


def size_based_capacity(eligible: int, per_recipient: int) -> int:
    """Recipients supportable by size-based removal: floor(K / d)."""
    if per_recipient < 1:
        raise ValidationError("classes protected per recipient must be >= 1")
    return eligible // per_recipient


def removal_budget(b: float, available: int, recipients: int) -> int:
    """Most non-decoy classes removable on behalf of one recipient: floor(b * E_d / N_r)."""
    if not 0 < b <= 1:
        raise ValidationError("removal budget must lie in (0, 1]")
    if recipients < 1:
        raise ValidationError("need at least one recipient")
    return math.floor(Fraction(str(b)) * available / recipients)


def close_to_k_bounds(k: int) -> tuple[int, int]:
    """Inclusive class-size band [k, floor(1.1 k)]."""
    return k, (11 * k) // 10


def decoy_guess_probability(n_d: int, n_e: int) -> float:
    if n_d < 0 or n_e < 0:
        raise ValidationError("class counts must be non-negative")
    if n_d + n_e == 0:
        raise ValidationError("n_d + n_e must be positive")
    return n_d / (n_d + n_e)


@dataclass(frozen=True)
class DecoyPolicy:
    n_d: int | None = 1
    records_per_class: int | None = None  # None means k
    risk_range: tuple[float, float] = (1.0, math.inf)
    pool_fraction: float | None = None
    seed: int = 0

    def per_class(self, k: int) -> int:
        rpc = k if self.records_per_class is None else self.records_per_class
        if rpc < k:
            raise ValidationError(f"records_per_class={rpc} is below k={k}")
        return rpc

    def validate(self, k: int) -> None:
        lo, hi = self.risk_range
        if lo < 1 or hi < lo:
            raise ValidationError(f"risk range {self.risk_range} must satisfy 1 <= lo <= hi")
        if self.n_d is None and self.pool_fraction is None:
            raise ValidationError("set n_d, pool_fraction, or both")
        if self.n_d is not None and self.n_d < 1:
            raise ValidationError("n_d must be >= 1")
        if self.pool_fraction is not None:
            fraction_capacity(self.pool_fraction)
        self.per_class(k)


@dataclass(frozen=True)
class HardeningPolicy:
    strategy: str = "random"
    n_e: int = 1
    budget: float = 1.0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValidationError(f"unknown hardening strategy {self.strategy!r}")
        if self.n_e < 0:
            raise ValidationError("n_e must be >= 0")
        if not 0 < self.budget <= 1:
            raise ValidationError("removal budget must lie in (0, 1]")


@dataclass(frozen=True)
class InjectedDecoy:
    signature: Signature
    rows: tuple[tuple[str, ...], ...]
    source_record_ids: tuple[int, ...]
    risk_factor: float


@dataclass
class RecipientRelease:
    recipient_id: str
    table: Table
    decoys: list[InjectedDecoy] = field(default_factory=list)
    removed_signatures: list[Signature] = field(default_factory=list)
    protected_signatures: list[Signature] = field(default_factory=list)

    @property
    def decoy_signatures(self) -> list[Signature]:
        return [d.signature for d in self.decoys]


def recipient_ids(recipients: int | Sequence[str]) -> list[str]:
    if isinstance(recipients, int):
        return [f"R{i}" for i in range(1, recipients + 1)]
    ids = [str(r) for r in recipients]
    if len(set(ids)) != len(ids):
        raise ValidationError("recipient ids must be unique")
    return ids


def select_decoys(pool: Sequence[DecoyCandidate], policy: DecoyPolicy,
                  recipients: int | Sequence[str], k: int | None = None,
                  ) -> dict[str, list[DecoyCandidate]]:
    """Deal disjoint sets of in-range candidate classes to the recipients."""
    ids = recipient_ids(recipients)
    rpc = policy.records_per_class if k is None else policy.per_class(k)
    if k is not None:
        policy.validate(k)
    lo, hi = policy.risk_range
    usable = [c for c in pool if lo <= c.risk_factor <= hi and (rpc is None or c.size >= rpc)]
    usable.sort(key=lambda c: (c.risk_factor, c.tuple))
    n_pool = len(usable)

    if policy.pool_fraction is not None:
        cap = fraction_capacity(policy.pool_fraction)
        if len(ids) > cap:
            raise CapacityError(f"pool fraction f={policy.pool_fraction} supports at most "
                                f"1/f = {cap} recipients, {len(ids)} requested")
        per_fraction = math.floor(Fraction(str(policy.pool_fraction)) * n_pool)
        n_d = policy.n_d if policy.n_d is not None else per_fraction
        if n_d > per_fraction or n_d < 1:
            raise CapacityError(f"a fraction f={policy.pool_fraction} of {n_pool} usable "
                                f"classes is {per_fraction} per recipient, need {n_d}")
    else:
        n_d = policy.n_d
    if len(ids) * n_d > n_pool:
        raise CapacityError(f"{len(ids)} recipients x {n_d} decoy classes exceeds the "
                            f"{n_pool} candidates in risk range [{lo}, {hi}]")

    random.Random(derive_seed(policy.seed, "select")).shuffle(usable)
    return {rid: usable[i * n_d:(i + 1) * n_d] for i, rid in enumerate(ids)}


def materialize_decoys(assignment: Mapping[str, Sequence[DecoyCandidate]], population: Dataset,
                       view: AnonymizedView, k: int, policy: DecoyPolicy,
                       ) -> dict[str, list[InjectedDecoy]]:
    """Turn assigned candidate classes into generalized decoy rows.

    Quasi values come from real population members generalized under the
    view's level vector; sensitive values are drawn from the view's own
    retained rows so decoys follow the release's sensitive distribution.
    """
    rpc = policy.per_class(k)
    gen = tuple_generalizer(view.hierarchy_list(), view.level_vector)
    qidx = [population.index_of(q) for q in view.quasi]
    by_id = population.by_id()
    sensitive_pool = view.sensitive_rows()
    if view.sensitive and not sensitive_pool:
        raise ValidationError("view has no retained rows to draw sensitive values from")

    out: dict[str, list[InjectedDecoy]] = {}
    for rid, classes in assignment.items():
        injected = []
        for i, cand in enumerate(classes):
            if cand.size < rpc:
                raise ValidationError(f"candidate class {cand.tuple} has {cand.size} members, "
                                      f"fewer than records_per_class={rpc}")
            rng = random.Random(derive_seed(policy.seed, f"materialize:{rid}:{i}"))
            members = rng.sample(sorted(cand.eq_class.members), rpc)
            rows = []
            for m in members:
                q = gen(tuple(by_id[m][j] for j in qidx))
                if q != cand.tuple:
                    raise ValidationError(f"population record {m} does not generalize to {cand.tuple}")
                s = rng.choice(sensitive_pool) if view.sensitive else ()
                rows.append(q + s)
            injected.append(InjectedDecoy(cand.tuple, tuple(rows), tuple(members), cand.risk_factor))
        out[rid] = injected
    return out


def build_releases(view: AnonymizedView, decoys: Mapping[str, Sequence[InjectedDecoy]],
                   seed: int) -> list[RecipientRelease]:
    """Each recipient's table is the view plus its decoy rows, row order shuffled."""
    base = view.to_table()
    releases = []
    for rid, injected in decoys.items():
        rows = list(base.rows)
        for d in injected:
            rows.extend(d.rows)
        random.Random(derive_seed(seed, f"shuffle:{rid}")).shuffle(rows)
        releases.append(RecipientRelease(rid, Table(base.columns, rows), list(injected)))
    return releases


class SameOriginIndex:
    """Answers "does this table hold a class same-origin with q?" without an all-pairs scan.

    Two values at the same level are related only when equal, so when the
    query and every indexed tuple share one level signature the answer is an
    exact lookup. Anything else falls back to a scan.
    """

    def __init__(self, tuples, hs: Sequence[GeneralizationHierarchy], strict: bool = False):
        self.hs = list(hs)
        self.strict = strict
        self.tuples = list(dict.fromkeys(tuple(t) for t in tuples))
        self.exact = set(self.tuples)
        self._levels: dict[tuple[int, str], frozenset[int]] = {}
        sigs = {self.signature(t) for t in self.tuples}
        self.uniform = sigs.pop() if len(sigs) == 1 else None

    def signature(self, t) -> tuple[frozenset[int], ...] | None:
        out = []
        for i, (h, v) in enumerate(zip(self.hs, t)):
            key = (i, v)
            lv = self._levels.get(key)
            if lv is None:
                lv = self._levels[key] = frozenset(h.levels_of(v))
            out.append(lv)
        if any(len(x) != 1 for x in out):
            return None
        return tuple(out)

    def matches(self, q) -> list[Signature]:
        q = tuple(q)
        if self.uniform is not None and self.signature(q) == self.uniform:
            return [] if self.strict or q not in self.exact else [q]
        return [t for t in self.tuples if same_origin(q, t, self.hs, self.strict)]

    def has_match(self, q) -> bool:
        q = tuple(q)
        if not self.strict and q in self.exact:
            return True
        return bool(self.matches(q))


def same_origin(e1: Sequence[str], e2: Sequence[str], hs: Sequence[GeneralizationHierarchy],
                strict: bool = False) -> bool:
    """Per attribute, each value must be an ancestor or descendant of the other.

    With ``strict`` the equal-value case does not count.
    """
    if not (len(e1) == len(e2) == len(hs)):
        raise ValidationError("class tuples and hierarchies differ in length")
    return all(h.related(a, b, strict) for h, a, b in zip(hs, e1, e2))


def _drop_classes(table: Table, quasi: Sequence[str], drop: set[Signature]) -> tuple[Table, int]:
    keys = table.project(quasi)
    rows = [r for r, key in zip(table.rows, keys) if key not in drop]
    return Table(table.columns, rows), len(table.rows) - len(rows)


def harden(releases: Sequence[RecipientRelease], view: AnonymizedView, policy: HardeningPolicy,
           seed: int) -> list[RecipientRelease]:
    """Protect each recipient's n_e genuine classes by deleting them from all peers."""
    if policy.strategy == "none" or policy.n_e == 0:
        return list(releases)
    if policy.strategy == "risk-based":
        raise NotImplementedError("risk-based removal is not implemented")
    n_p = len(releases)
    if n_p < 2:
        raise ValidationError("hardening needs at least two recipients")

    classes = sorted(view.classes, key=lambda c: c.tuple)
    if policy.strategy == "size-based":
        lo, hi = close_to_k_bounds(view.k)
        classes = [c for c in classes if lo <= c.size <= hi]
    available = len(classes)
    limit = removal_budget(policy.budget, available, n_p)
    if policy.n_e > limit:
        msg = (f"protecting {policy.n_e} classes per recipient exceeds the removal budget "
               f"floor(b*E_d/N_r) = floor({policy.budget}*{available}/{n_p}) = {limit}")
        if policy.strategy == "size-based":
            msg += (f"; size-based removal with K={available} supports at most "
                    f"{size_based_capacity(available, policy.n_e)} recipients")
        raise BudgetError(msg)

    random.Random(derive_seed(seed, f"harden:{policy.strategy}")).shuffle(classes)
    protected = {r.recipient_id: [c.tuple for c in classes[i * policy.n_e:(i + 1) * policy.n_e]]
                 for i, r in enumerate(releases)}

    hs = view.hierarchy_list()
    hardened = []
    for rel in releases:
        decoy_sigs = set(rel.decoy_signatures)
        index = SameOriginIndex(rel.table.project(view.quasi), hs)
        drop: set[Signature] = set()
        for other, sigs in protected.items():
            if other == rel.recipient_id:
                continue
            for sig in sigs:
                drop.update(t for t in index.matches(sig) if t not in decoy_sigs)
        table, _ = _drop_classes(rel.table, view.quasi, drop)
        hardened.append(RecipientRelease(rel.recipient_id, table, list(rel.decoys),
                                         sorted(drop), protected[rel.recipient_id]))
    return hardened


@dataclass
class RegistryEntry:
    decoys: list[InjectedDecoy]
    meta: dict = field(default_factory=dict)

    @property
    def signatures(self) -> list[Signature]:
        return [d.signature for d in self.decoys]


@dataclass
class DecoyRegistry:
    """The data owner's secret record of which decoy classes went to whom."""

    quasi: list[str]
    columns: list[str]
    level_vector: tuple[int, ...]
    k: int
    entries: dict[str, RegistryEntry]

    def __post_init__(self):
        seen: dict[Signature, str] = {}
        for rid, entry in self.entries.items():
            for sig in entry.signatures:
                if sig in seen:
                    raise ValidationError(f"decoy signature {sig} registered to both "
                                          f"{seen[sig]} and {rid}")
                seen[sig] = rid
        self._owner = seen

    def owner(self, sig: Signature) -> str | None:
        return self._owner.get(tuple(sig))

    def signatures(self) -> dict[Signature, str]:
        return dict(self._owner)

    def to_doc(self) -> dict:
        return {
            "quasi": self.quasi,
            "columns": self.columns,
            "level_vector": list(self.level_vector),
            "k": self.k,
            "recipients": {
                rid: {
                    "decoys": [{"signature": list(d.signature),
                                "rows": [list(r) for r in d.rows],
                                "source_record_ids": list(d.source_record_ids),
                                "risk_factor": d.risk_factor} for d in e.decoys],
                    "meta": e.meta,
                } for rid, e in self.entries.items()
            },
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "DecoyRegistry":
        try:
            entries = {
                rid: RegistryEntry(
                    [InjectedDecoy(tuple(d["signature"]), tuple(tuple(r) for r in d["rows"]),
                                   tuple(d["source_record_ids"]), float(d["risk_factor"]))
                     for d in e["decoys"]],
                    dict(e.get("meta", {})))
                for rid, e in doc["recipients"].items()
            }
            return cls(list(doc["quasi"]), list(doc["columns"]), tuple(doc["level_vector"]),
                       int(doc["k"]), entries)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed registry document ({exc})") from None

    def save(self, path: str | os.PathLike) -> None:
        write_json(path, self.to_doc())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "DecoyRegistry":
        return cls.from_doc(read_json(path))


def registry_from_releases(releases: Sequence[RecipientRelease], view: AnonymizedView,
                           meta: Mapping | None = None) -> DecoyRegistry:
    entries = {r.recipient_id: RegistryEntry(list(r.decoys), dict(meta or {}))
               for r in releases}
    return DecoyRegistry(view.quasi, view.columns, view.level_vector, view.k, entries)


@dataclass
class ReleasePlan:
    releases: list[RecipientRelease]
    registry: DecoyRegistry
    min_link: int
    pool_size: int


def make_releases(view: AnonymizedView, population: Dataset, recipients: int | Sequence[str],
                  decoy_policy: DecoyPolicy, hardening: HardeningPolicy | None = None,
                  seed: int | None = None,
                  hierarchies: Mapping[str, GeneralizationHierarchy] | None = None) -> ReleasePlan:
    """Link, mine candidates, select, inject and (optionally) harden, in one call."""
    seed = decoy_policy.seed if seed is None else seed
    hierarchies = hierarchies if hierarchies is not None else view.hierarchies
    ordered_hierarchies(view.quasi, hierarchies)
    report = link_classes(view, population, hierarchies)
    pool = discover_candidates(population, view, view.k, report.min_link, hierarchies)
    assignment = select_decoys(pool, decoy_policy, recipients, view.k)
    injected = materialize_decoys(assignment, population, view, view.k, decoy_policy)
    releases = build_releases(view, injected, derive_seed(seed, "build"))
    if hardening is not None:
        releases = harden(releases, view, hardening, derive_seed(seed, "harden"))
    meta = {"seed": seed, "min_link": report.min_link, "pool_size": len(pool),
            "n_d": len(next(iter(assignment.values()), [])),
            "records_per_class": decoy_policy.per_class(view.k)}
    registry = registry_from_releases(releases, view, meta)
    return ReleasePlan(releases, registry, report.min_link, len(pool))


def release_manifest(releases: Sequence[RecipientRelease], view: AnonymizedView) -> dict:
    """Owner-side summary. Carries counts only, never decoy signatures."""
    base_rows = view.retained_count
    out = []
    for r in releases:
        out.append({
            "recipient_id": r.recipient_id,
            "file": f"{r.recipient_id}.csv",
            "rows": len(r.table),
            "classes": len(set(r.table.project(view.quasi))),
            "removed_classes": len(r.removed_signatures),
            "row_delta": len(r.table) - base_rows,
        })
    return {"k": view.k, "suppression_limit": view.suppression_limit,
            "level_vector": dict(zip(view.quasi, view.level_vector)),
            "recipients": out}


def write_releases(releases: Sequence[RecipientRelease], view: AnonymizedView,
                   out_dir: str | os.PathLike) -> dict:
    for r in releases:
        write_table(r.table, os.path.join(out_dir, f"{r.recipient_id}.csv"))
    manifest = release_manifest(releases, view)
    write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest
