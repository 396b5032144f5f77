"""Resume ingestion, the directed job-transition graph, and parent/child pairs.

Resumes arrive as JSON-lines (one record per line). Per person, records are
ordered by start date and every consecutive move contributes one transition:
the earlier title is the child, the later title the parent. Edge weights are
globally normalized transition frequencies.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, NamedTuple, Optional

from .errors import DataError, DegenerateInputError, FormatError

_WS_RE = re.compile(r"\s+")

RECORD_FIELDS = ("person_id", "title", "company_id", "start", "end")


@dataclass
class JobRecord:
    """One resume line: a person held a title at a company for a date range."""

    person_id: str
    title: str
    company_id: str
    start: date
    end: Optional[date]  # None = still employed

    def __post_init__(self):
        if self.end is not None and self.start > self.end:
            raise DataError(
                f"job record for person {self.person_id!r}: start {self.start} is after end {self.end}"
            )
        canonicalize_title(self.title)  # raises on titles that normalize to nothing


class ParentChildPair(NamedTuple):
    parent: str  # the later job
    child: str  # the earlier job


@dataclass
class TransitionGraph:
    """Directed multigraph over canonical titles, with globally normalized weights."""

    nodes: set[str] = field(default_factory=set)
    edge_counts: dict[tuple[str, str], int] = field(default_factory=dict)

    @property
    def total_transitions(self) -> int:
        return sum(self.edge_counts.values())

    @property
    def weights(self) -> dict[tuple[str, str], float]:
        total = self.total_transitions
        return {e: c / total for e, c in self.edge_counts.items()}

    def edges(self) -> list[tuple[str, str]]:
        """Edges in a deterministic (sorted) order."""
        return sorted(self.edge_counts)

    def summary(self) -> dict:
        return {
            "nodes": len(self.nodes),
            "edges": len(self.edge_counts),
            "transitions": self.total_transitions,
        }


def canonicalize_title(raw: str) -> str:
    """Lowercase, strip control characters, collapse whitespace. Idempotent."""
    cleaned = "".join(
        ch for ch in raw if unicodedata.category(ch) not in ("Cc", "Cf")
    )
    canonical = _WS_RE.sub(" ", cleaned).strip().lower()
    if not canonical:
        raise DegenerateInputError(f"title {raw!r} is empty after normalization")
    return canonical


def _person_sequences(records: Iterable[JobRecord]) -> list[list[str]]:
    """Canonical title sequences per person, ordered by start date.

    Ties on start date break by end date (open-ended jobs last), then by
    input order.
    """
    by_person: dict[str, list[tuple[date, date, int, str]]] = {}
    for idx, rec in enumerate(records):
        end_key = rec.end if rec.end is not None else date.max
        by_person.setdefault(rec.person_id, []).append(
            (rec.start, end_key, idx, canonicalize_title(rec.title))
        )
    sequences = []
    for person in by_person.values():
        person.sort()
        sequences.append([title for _, _, _, title in person])
    return sequences


def build_transition_graph(records: Iterable[JobRecord]) -> TransitionGraph:
    """Count every consecutive per-person transition, including self-loops."""
    graph = TransitionGraph()
    for seq in _person_sequences(records):
        graph.nodes.update(seq)
        for earlier, later in zip(seq, seq[1:]):
            key = (earlier, later)
            graph.edge_counts[key] = graph.edge_counts.get(key, 0) + 1
    return graph


def extract_parent_child_pairs(records: Iterable[JobRecord]) -> list[ParentChildPair]:
    """One pair per transition, parent = later title. Self-transitions drop out.

    Duplicates are preserved: pair frequency drives hyperbolic sampling.
    """
    pairs = []
    for seq in _person_sequences(records):
        for earlier, later in zip(seq, seq[1:]):
            if earlier != later:
                pairs.append(ParentChildPair(parent=later, child=earlier))
    return pairs


# ---------------------------------------------------------------------------
# File formats

def load_records(path) -> list[JobRecord]:
    """Read resume JSONL. Field names must be exactly the documented five."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"{path}:{lineno}: invalid JSON ({e.msg})") from None
            if not isinstance(obj, dict) or set(obj) != set(RECORD_FIELDS):
                raise FormatError(
                    f"{path}:{lineno}: expected fields {list(RECORD_FIELDS)}, got {sorted(obj) if isinstance(obj, dict) else type(obj).__name__}"
                )
            try:
                start = date.fromisoformat(obj["start"])
                end = None if obj["end"] is None else date.fromisoformat(obj["end"])
            except (TypeError, ValueError) as e:
                raise FormatError(f"{path}:{lineno}: bad date ({e})") from None
            try:
                records.append(
                    JobRecord(
                        person_id=str(obj["person_id"]),
                        title=str(obj["title"]),
                        company_id=str(obj["company_id"]),
                        start=start,
                        end=end,
                    )
                )
            except DataError as e:
                raise DataError(f"{path}:{lineno}: {e}") from None
    return records


def write_records(path, records: Iterable[JobRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "person_id": rec.person_id,
                        "title": rec.title,
                        "company_id": rec.company_id,
                        "start": rec.start.isoformat(),
                        "end": rec.end.isoformat() if rec.end else None,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


PAIRS_HEADER = "#pairs\tchild\tparent"


def write_pairs(path, pairs: Iterable[ParentChildPair]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(PAIRS_HEADER + "\n")
        for pair in pairs:
            fh.write(f"{pair.child}\t{pair.parent}\n")


def load_pairs(path) -> list[ParentChildPair]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != PAIRS_HEADER:
            raise FormatError(f"{path}:1: expected header {PAIRS_HEADER!r}")
        pairs = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 tab-separated fields")
            child, parent = parts
            pairs.append(ParentChildPair(parent=parent, child=child))
    return pairs
