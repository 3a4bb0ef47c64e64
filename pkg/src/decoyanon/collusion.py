"""The attacker's side: colluding recipients diffing their releases, plus blend-in statistics.

Everything here works from what recipients hold (their tables and the public
hierarchies), never from the registry or the original dataset.
"""

from __future__ import annotations

import random
import statistics
from collections import Counter
from fractions import Fraction
from typing import Mapping, Sequence

from decoyanon.anonymizer import ordered_hierarchies, tuple_generalizer
from decoyanon.dataset import Dataset, Table
from decoyanon.decoys import SameOriginIndex, Signature, close_to_k_bounds
from decoyanon.errors import ValidationError
from decoyanon.hierarchy import GeneralizationHierarchy


def _table(x) -> Table:
    return x.table if hasattr(x, "table") else x


def class_sizes(table: Table, quasi: Sequence[str]) -> Counter:
    """Class tuple -> size, in first-occurrence order."""
    return Counter(_table(table).project(quasi))


def collude(releases: Sequence, quasi: Sequence[str],
            hierarchies: Mapping[str, GeneralizationHierarchy],
            mode: str = "any", strict: bool = False) -> list[list[Signature]]:
    """Per release, the classes lacking a same-origin class in a peer release.

    ``mode="any"`` flags a class when at least one peer lacks a match (the
    strongest attacker); ``mode="all"`` only when every peer does.
    """
    if len(releases) < 2:
        raise ValidationError("collusion needs at least two releases")
    if mode not in ("any", "all"):
        raise ValidationError("mode must be 'any' or 'all'")
    hs = ordered_hierarchies(quasi, hierarchies)
    class_lists = [list(class_sizes(r, quasi)) for r in releases]
    indexes = [SameOriginIndex(cl, hs, strict) for cl in class_lists]
    combine = any if mode == "any" else all

    suspects = []
    for i, cl in enumerate(class_lists):
        peers = [idx for j, idx in enumerate(indexes) if j != i]
        suspects.append([t for t in cl if combine(not p.has_match(t) for p in peers)])
    return suspects


def close_to_k_census(sizes, k: int) -> int:
    """Number of classes with size in [k, floor(1.1 k)]."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    lo, hi = close_to_k_bounds(k)
    return sum(1 for s in _sizes(sizes) if lo <= s <= hi)


def _sizes(x) -> list[int]:
    if isinstance(x, Mapping):
        return list(x.values())
    if hasattr(x, "class_sizes"):
        return x.class_sizes()
    return [int(s) for s in x]


def size_histogram(sizes, bin_width: int = 1) -> list[tuple[int, int, int]]:
    """``(lo, hi, count)`` bins over class sizes, half-open ``[lo, hi)``, empty bins omitted."""
    if bin_width < 1:
        raise ValidationError("bin width must be >= 1")
    counts = Counter((s // bin_width) * bin_width for s in _sizes(sizes))
    return [(lo, lo + bin_width, n) for lo, n in sorted(counts.items())]


def bin_count(histogram: Sequence[tuple[int, int, int]], size: int) -> int:
    for lo, hi, n in histogram:
        if lo <= size < hi:
            return n
    return 0


def infer_levels(table: Table, quasi: Sequence[str], hs: Sequence[GeneralizationHierarchy],
                 ) -> tuple[int, ...]:
    """The single generalization level each quasi column sits at."""
    rows = _table(table).project(quasi)
    levels = []
    for i, h in enumerate(hs):
        common = None
        for v in {r[i] for r in rows}:
            lv = set(h.levels_of(v))
            common = lv if common is None else common & lv
        if not common:
            raise ValidationError(f"column {quasi[i]!r} mixes generalization levels")
        levels.append(min(common))
    return tuple(levels)


def link_counts(table: Table, population: Dataset, quasi: Sequence[str],
                hierarchies: Mapping[str, GeneralizationHierarchy]) -> dict[Signature, int]:
    """Population records linking to each class of a release."""
    hs = ordered_hierarchies(quasi, hierarchies)
    gen = tuple_generalizer(hs, infer_levels(table, quasi, hs))
    pop = Counter(gen(t) for t in population.project(quasi))
    return {t: pop.get(t, 0) for t in class_sizes(table, quasi)}


def risk_outlier_screen(release, population: Dataset, quasi: Sequence[str],
                        hierarchies: Mapping[str, GeneralizationHierarchy],
                        threshold: float, reference: str = "max") -> list[dict]:
    """Classes whose linkage risk (1 / links) stands out from the rest.

    With ``reference="max"`` a class is flagged when its risk exceeds
    ``threshold`` times the highest risk among the *other* classes, i.e. it
    sticks out above the riskiest remaining class. ``reference="median"``
    compares against the median class risk instead.
    """
    if reference not in ("max", "median"):
        raise ValidationError("reference must be 'max' or 'median'")
    links = link_counts(_table(release), population, quasi, hierarchies)
    if any(n == 0 for n in links.values()):
        raise ValidationError("release holds classes absent from the population")
    if len(links) < 2:
        return []
    # exact rationals: a factor of exactly `threshold` must not be flagged by rounding
    risks = {t: Fraction(1, n) for t, n in links.items()}
    ordered = sorted(risks.values(), reverse=True)
    median = statistics.median(ordered)
    factor = Fraction(str(threshold))
    flagged = []
    for t, r in risks.items():
        if reference == "median":
            ref = median
        else:
            ref = ordered[1] if r == ordered[0] else ordered[0]
        if r > factor * ref:
            flagged.append({"tuple": t, "links": links[t], "risk": float(r)})
    return flagged


def guess_success_rate(suspects: Sequence[Signature], decoys, trials: int, seed: int) -> float:
    """Frequency with which a uniformly random suspect turns out to be a decoy."""
    if not suspects:
        raise ValidationError("no suspects to guess from")
    decoys = set(map(tuple, decoys))
    rng = random.Random(seed)
    suspects = list(suspects)
    hits = sum(1 for _ in range(trials) if rng.choice(suspects) in decoys)
    return hits / trials


def attack_report(releases: Sequence, names: Sequence[str], quasi: Sequence[str],
                  hierarchies: Mapping[str, GeneralizationHierarchy], k: int,
                  mode: str = "any", strict: bool = False, bin_width: int = 1) -> dict:
    suspects = collude(releases, quasi, hierarchies, mode=mode, strict=strict)
    out = []
    for name, rel, sus in zip(names, releases, suspects):
        sizes = class_sizes(rel, quasi)
        out.append({
            "release": name,
            "classes": len(sizes),
            "suspects": [{"tuple": list(t), "size": sizes[t]} for t in sus],
            "close_to_k": close_to_k_census(sizes, k),
            "size_histogram": [list(b) for b in size_histogram(sizes, bin_width)],
        })
    return {"mode": mode, "strict": strict, "k": k, "releases": out}
