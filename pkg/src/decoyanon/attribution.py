"""Tracing leaked material back to a recipient through its decoy signatures."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from decoyanon.dataset import Table, read_table
from decoyanon.decoys import DecoyRegistry, Signature
from decoyanon.errors import ValidationError

DEFAULT_DELIMITERS = r"[,;\t|\s]+"


@dataclass(frozen=True)
class Match:
    line: int  # 1-based data row (table mode) or text line
    recipient: str
    signature: Signature


@dataclass(frozen=True)
class Verdict:
    status: str  # "attributed", "inconclusive" or "no evidence"
    recipient: str | None
    ranking: list[dict]

    def to_doc(self) -> dict:
        return {"status": self.status, "recipient": self.recipient, "ranking": self.ranking}

    def summary(self) -> str:
        if self.status == "no evidence":
            return "no evidence: the leak holds no registered decoy signatures"
        top = self.ranking[0]
        head = (f"leak attributed to {self.recipient}" if self.status == "attributed"
                else "inconclusive")
        return (f"{head}: {top['recipient']} matched {top['matched']}/{top['total']} "
                f"decoy signatures ({top['fraction']:.2f})")


def scan_records(leak: Table | Iterable[str], registry: DecoyRegistry, text: bool = False,
                 delimiters: str = DEFAULT_DELIMITERS) -> list[Match]:
    """Find every registered decoy signature in a leaked table or in raw text lines.

    Table mode projects the registry's quasi columns and matches exact
    tuples. Text mode splits each line on ``delimiters`` and matches a
    signature when all of its values occur in that line, in any order.
    """
    owners = registry.signatures()
    matches = []
    if not text:
        if not isinstance(leak, Table):
            raise ValidationError("table-mode scanning needs a Table; pass text=True for raw lines")
        for i, key in enumerate(leak.project(registry.quasi), start=1):
            rid = owners.get(key)
            if rid is not None:
                matches.append(Match(i, rid, key))
        return matches

    splitter = re.compile(delimiters)
    wanted = [(sig, set(sig), rid) for sig, rid in owners.items()]
    lines = leak.to_csv().splitlines() if isinstance(leak, Table) else leak
    for i, line in enumerate(lines, start=1):
        tokens = set(t for t in splitter.split(line.strip()) if t)
        if not tokens:
            continue
        for sig, values, rid in wanted:
            if values <= tokens:
                matches.append(Match(i, rid, sig))
    return matches


def scan_file(path: str | os.PathLike, registry: DecoyRegistry, text: bool = False,
              delimiters: str = DEFAULT_DELIMITERS) -> list[Match]:
    if text:
        with open(path, encoding="utf-8", errors="replace") as fh:
            return scan_records(fh, registry, text=True, delimiters=delimiters)
    return scan_records(read_table(path), registry)


def attribute(matches: Sequence[Match], registry: DecoyRegistry, floor: float = 0.5) -> Verdict:
    """Rank recipients by the fraction of their decoy signatures seen in the leak.

    The top recipient is named only if its fraction reaches ``floor`` and
    strictly beats the runner-up.
    """
    if not matches:
        return Verdict("no evidence", None, [])
    seen: dict[str, set] = {}
    for m in matches:
        seen.setdefault(m.recipient, set()).add(m.signature)
    ranking = []
    for rid, entry in registry.entries.items():
        total = len(entry.signatures)
        hit = len(seen.get(rid, ()))
        if hit:
            ranking.append({"recipient": rid, "matched": hit, "total": total,
                            "fraction": hit / total})
    ranking.sort(key=lambda r: (-r["fraction"], -r["matched"], r["recipient"]))
    top = ranking[0]
    runner_up = ranking[1]["fraction"] if len(ranking) > 1 else 0.0
    if top["fraction"] >= floor and top["fraction"] > runner_up:
        return Verdict("attributed", top["recipient"], ranking)
    return Verdict("inconclusive", None, ranking)
