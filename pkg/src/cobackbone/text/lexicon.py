"""Lexicon attribute frequencies and the statistics used to rank attributes across communities."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import chi2, rankdata

from cobackbone.errors import InputError
from cobackbone.text.tfidf import WORD_RE


@dataclass
class Lexicon:
    """Attribute name -> word patterns. A trailing ``*`` makes a pattern match by prefix."""

    attributes: dict[str, frozenset[str]]

    def __post_init__(self):
        if not self.attributes:
            raise ValueError("lexicon has no attributes")
        self._exact: dict[str, set[str]] = {}
        self._prefix: dict[str, tuple[str, ...]] = {}
        for name, patterns in self.attributes.items():
            if not patterns:
                raise ValueError(f"attribute {name!r} has no patterns")
            self._exact[name] = {p for p in patterns if not p.endswith("*")}
            self._prefix[name] = tuple(sorted(p[:-1] for p in patterns if p.endswith("*")))

    @property
    def names(self) -> list[str]:
        return sorted(self.attributes)

    def matches(self, name: str, token: str) -> bool:
        return token in self._exact[name] or token.startswith(self._prefix[name])


def load_lexicon(fp: IO[str]) -> Lexicon:
    """Read ``attribute<TAB>pattern`` lines; blank lines and '#' comments are skipped."""
    attributes: dict[str, set[str]] = defaultdict(set)
    for lineno, line in enumerate(fp, start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise InputError(f"lexicon line {lineno}: expected 'attribute<TAB>pattern'")
        attributes[parts[0]].add(parts[1].strip().lower())
    return Lexicon({k: frozenset(v) for k, v in attributes.items()})


def tokenize_words(text: str | None) -> list[str]:
    return WORD_RE.findall((text or "").lower())


def attribute_samples(comments: Iterable[str | None], lexicon: Lexicon) -> dict[str, list[float]]:
    """Per attribute, the fraction of each comment's words that match it. Wordless comments are skipped."""
    out: dict[str, list[float]] = {name: [] for name in lexicon.names}
    for text in comments:
        tokens = tokenize_words(text)
        if not tokens:
            continue
        for name in lexicon.names:
            out[name].append(sum(lexicon.matches(name, t) for t in tokens) / len(tokens))
    return out


def lexicon_frequencies(comments: Iterable[str | None], lexicon: Lexicon) -> dict[str, float]:
    """Mean per-comment word fraction of every attribute."""
    samples = attribute_samples(comments, lexicon)
    return {name: (float(np.mean(v)) if v else 0.0) for name, v in samples.items()}


def kruskal_h(groups: Sequence[Sequence[float]]) -> tuple[float, float]:
    """Kruskal-Wallis H with tie correction, and its chi-square p-value.

    Returns ``(0.0, 1.0)`` when every observation is identical.
    """
    arrays = [np.asarray(g, dtype=float) for g in groups]
    pooled = np.concatenate(arrays)
    n = len(pooled)
    ranks = rankdata(pooled)
    h = 0.0
    start = 0
    for g in arrays:
        r = ranks[start : start + len(g)]
        h += r.sum() ** 2 / len(g)
        start += len(g)
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    _, tie_counts = np.unique(pooled, return_counts=True)
    correction = 1.0 - (tie_counts**3 - tie_counts).sum() / (n**3 - n)
    if correction <= 0:
        return 0.0, 1.0
    h /= correction
    return float(h), float(chi2.sf(h, len(arrays) - 1))


def kruskal_filter(samples: Mapping[str, Sequence[Sequence[float]]], p_threshold: float = 0.01) -> set[str]:
    """Attributes whose per-comment samples differ across communities at ``p < p_threshold``.

    ``samples`` maps attribute -> one sample list per community.
    """
    keep = set()
    for name, groups in samples.items():
        groups = [g for g in groups if len(g)]
        if len(groups) < 2:
            continue
        h, p = kruskal_h(groups)
        if h > 0 and p < p_threshold:
            keep.add(name)
    return keep


def gini(values: Sequence[float]) -> float:
    """Mean absolute difference over twice the mean; 0 when the mean is 0."""
    x = np.asarray(values, dtype=float)
    mean = x.mean()
    if mean == 0:
        return 0.0
    return float(np.abs(x[:, None] - x[None, :]).sum() / (2.0 * len(x) ** 2 * mean))


def gini_rank(means: Mapping[str, Sequence[float]], k: int = 5) -> list[str]:
    """The ``k`` attributes with the largest Gini coefficient across communities; ties by name."""
    scored = sorted(means, key=lambda name: (-gini(means[name]), name))
    return scored[:k]


def zscore_matrix(values, columns: Sequence[str]) -> np.ndarray:
    """Column-wise z-scores using the population standard deviation."""
    x = np.asarray(values, dtype=float)
    std = x.std(axis=0)
    for j in np.flatnonzero(std == 0):
        raise ValueError(f"attribute {columns[j]!r} has zero spread; z-score undefined")
    return (x - x.mean(axis=0)) / std
