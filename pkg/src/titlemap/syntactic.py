"""Character-level string similarity against the taxonomy.

The syntactic view of a title is a |Y|-vector: entry k is the set-cosine of
padded character 3-grams between the title and standard title k. Taxonomy
order is fixed and versioned because that index is meaningful everywhere
downstream (it is the class index of the mapper).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError, DegenerateInputError, FormatError
from .graph import canonicalize_title


@lru_cache(maxsize=131072)
def gram_set(text: str, n: int = 3, pad: bool = True) -> frozenset:
    """Set of character n-grams of `text`, padded with '^'/'$' runs.

    "abcd" -> {^^a, ^ab, abc, bcd, cd$, d$$} for n=3.
    """
    if pad:
        text = "^" * (n - 1) + text + "$" * (n - 1)
    if len(text) < n:
        return frozenset((text,))
    return frozenset(text[i : i + n] for i in range(len(text) - n + 1))


def string_cosine(a: str, b: str, n: int = 3, pad: bool = True) -> float:
    """|A & B| / sqrt(|A| * |B|) over n-gram sets. Symmetric, in [0, 1]."""
    ga = gram_set(canonicalize_title(a), n, pad)
    gb = gram_set(canonicalize_title(b), n, pad)
    return len(ga & gb) / float(np.sqrt(len(ga) * len(gb)))


@dataclass
class Taxonomy:
    """Ordered standard titles; row order defines the class indices."""

    titles: list[str]
    groups: Optional[list[str]] = None

    def __post_init__(self):
        self.titles = [canonicalize_title(t) for t in self.titles]
        if len(set(self.titles)) != len(self.titles):
            raise DataError("taxonomy titles must be unique after canonicalization")
        if self.groups is not None and len(self.groups) != len(self.titles):
            raise DataError("taxonomy group list length must match title count")
        self._index = {t: i for i, t in enumerate(self.titles)}

    def __len__(self) -> int:
        return len(self.titles)

    def __contains__(self, title: str) -> bool:
        return canonicalize_title(title) in self._index

    def index(self, title: str) -> int:
        key = canonicalize_title(title)
        if key not in self._index:
            raise DataError(f"title {title!r} is not in the taxonomy")
        return self._index[key]

    @property
    def version_id(self) -> str:
        joined = "\x1f".join(self.titles)
        return hashlib.sha256(joined.encode("utf-8")).hexdigest()[:16]

    def write_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for i, title in enumerate(self.titles):
                group = self.groups[i] if self.groups else ""
                fh.write(f"{title}\t{group}\n")

    @classmethod
    def load_tsv(cls, path) -> "Taxonomy":
        titles, groups = [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 2:
                    raise FormatError(
                        f"{path}:{lineno}: expected standard_title<TAB>group"
                    )
                titles.append(parts[0])
                groups.append(parts[1])
        if not titles:
            raise DataError(f"{path}: taxonomy file is empty")
        return cls(titles=titles, groups=groups)


@dataclass
class SyntacticVector:
    values: np.ndarray  # one score in [0, 1] per standard title
    taxonomy_version: str


def build_syntactic_vector(
    title: str, taxonomy: Taxonomy, n: int = 3, pad: bool = True
) -> SyntacticVector:
    """Similarities of `title` against every standard title, in taxonomy order."""
    if len(taxonomy) == 0:
        raise DegenerateInputError("build_syntactic_vector: empty taxonomy")
    values = np.array(
        [string_cosine(title, v, n, pad) for v in taxonomy.titles], dtype=np.float64
    )
    return SyntacticVector(values=values, taxonomy_version=taxonomy.version_id)


def syntactic_matrix(
    titles: Sequence[str], taxonomy: Taxonomy, n: int = 3, pad: bool = True
) -> np.ndarray:
    """Stacked syntactic vectors for a list of titles, shape (len(titles), |Y|)."""
    return np.stack(
        [build_syntactic_vector(t, taxonomy, n, pad).values for t in titles]
    ) if titles else np.zeros((0, len(taxonomy)))
