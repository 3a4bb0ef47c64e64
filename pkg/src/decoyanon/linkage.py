"""Linking an anonymized view to a population and mining high-risk residual classes.

The attacker links on the quasi attributes: a population record links to a
view class when its quasi tuple, generalized under the view's level vector,
equals the class tuple. ``min_link`` is the smallest link count over the
view's classes, so ``1 / min_link`` is the view's maximum re-identification
risk. Population classes left over once every linked record is removed, and
whose size lies in ``[k, min_link)``, are riskier than anything in the view
and make decoy candidates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from decoyanon.anonymizer import (AnonymizedView, EquivalenceClass, ordered_hierarchies,
                                  tuple_generalizer)
from decoyanon.dataset import Dataset
from decoyanon.errors import ValidationError
from decoyanon.hierarchy import GeneralizationHierarchy


@dataclass(frozen=True)
class LinkageReport:
    per_class_links: dict[tuple[str, ...], int]
    min_link: int

    @property
    def max_risk(self) -> float:
        return 1 / self.min_link

    def to_doc(self) -> dict:
        return {
            "min_link": self.min_link,
            "max_risk": self.max_risk,
            "per_class_links": [{"tuple": list(t), "links": n}
                                for t, n in self.per_class_links.items()],
        }


@dataclass(frozen=True)
class DecoyCandidate:
    eq_class: EquivalenceClass
    min_link: int

    @property
    def tuple(self) -> tuple[str, ...]:
        return self.eq_class.tuple

    @property
    def size(self) -> int:
        return self.eq_class.size

    @property
    def risk_factor(self) -> float:
        return self.min_link / self.size

    def to_doc(self) -> dict:
        return {"tuple": list(self.tuple), "size": self.size,
                "risk_factor": self.risk_factor, "members": sorted(self.eq_class.members)}


def _generalized_population(view: AnonymizedView, population: Dataset,
                            hierarchies: Mapping[str, GeneralizationHierarchy] | None):
    hierarchies = hierarchies if hierarchies is not None else view.hierarchies
    missing = [q for q in view.quasi if q not in population.names]
    if missing:
        raise ValidationError(f"population lacks quasi attributes {missing}")
    gen = tuple_generalizer(ordered_hierarchies(view.quasi, hierarchies), view.level_vector)
    return [(rid, gen(t)) for rid, t in zip(population.record_ids, population.project(view.quasi))]


def link_classes(view: AnonymizedView, population: Dataset,
                 hierarchies: Mapping[str, GeneralizationHierarchy] | None = None) -> LinkageReport:
    if not view.classes:
        raise ValidationError("view has no retained classes to link")
    counts: dict[tuple, int] = {}
    for _, t in _generalized_population(view, population, hierarchies):
        counts[t] = counts.get(t, 0) + 1
    links = {c.tuple: counts.get(c.tuple, 0) for c in view.classes}
    unlinked = [t for t, n in links.items() if n == 0]
    if unlinked:
        raise ValidationError(f"{len(unlinked)} view classes link to no population record, "
                              f"e.g. {unlinked[0]}; the population must cover the sample")
    return LinkageReport(links, min(links.values()))


def discover_candidates(population: Dataset, view: AnonymizedView, k: int, min_link: int,
                        hierarchies: Mapping[str, GeneralizationHierarchy] | None = None,
                        ) -> list[DecoyCandidate]:
    """Population classes of size in ``[k, min_link)`` after removing every linked record."""
    generalized = _generalized_population(view, population, hierarchies)
    by_tuple: dict[tuple, list[int]] = {}
    for rid, t in generalized:
        by_tuple.setdefault(t, []).append(rid)

    residual = set(population.record_ids)
    for cls in view.classes:
        residual.difference_update(by_tuple.get(cls.tuple, ()))

    groups: dict[tuple, list[int]] = {}
    for rid, t in generalized:
        if rid in residual:
            groups.setdefault(t, []).append(rid)

    return [DecoyCandidate(EquivalenceClass(t, frozenset(m)), min_link)
            for t, m in groups.items() if k <= len(m) < min_link]


def risk_profile(candidates: Sequence[DecoyCandidate]) -> list[float]:
    """Risk multiplication factors in ascending order."""
    return sorted(c.risk_factor for c in candidates)


def feasibility_summary(report: LinkageReport, candidates: Sequence[DecoyCandidate]) -> dict:
    """The minLink / "<minLink EQ" / "<minLink Records" triple."""
    return {"min_link": report.min_link,
            "below_min_link_classes": len(candidates),
            "below_min_link_records": sum(c.size for c in candidates)}
