"""Tokenisation, per-community documents, probabilistic TF-IDF and cosine similarity."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import regex

from cobackbone.community import CommunityAssignment
from cobackbone.ingest import InteractionRecord, Snapshot

# Extended_Pictographic rather than Emoji: the latter also covers ASCII digits, '#' and '*'.
EMOJI_RE = regex.compile(r"[\p{Extended_Pictographic}\p{Regional_Indicator}]")
_EMOJI_JOINERS_RE = regex.compile(r"[\p{Emoji_Modifier}‍︎️]")
WORD_RE = regex.compile(r"\w+")


def _identity(term: str) -> str:
    return term


@dataclass
class TextConfig:
    stopwords: frozenset[str] = frozenset()
    min_count: int = 10  # terms seen fewer times in the whole corpus are dropped
    top_fraction: float = 0.01  # share of the vocabulary dropped as too popular
    top_n: int = 100  # non-zero TF-IDF entries kept per document
    stemmer: Callable[[str], str] = field(default=_identity, repr=False)


def load_stopwords(lines: Iterable[str]) -> frozenset[str]:
    return frozenset(w.strip().lower() for w in lines if w.strip())


def count_emojis(text: str) -> int:
    return len(EMOJI_RE.findall(text))


def preprocess(text: str | None, config: TextConfig = TextConfig()) -> list[str]:
    """Lowercased word terms with mentions, hashtags, emojis, punctuation and stopwords removed."""
    if not text:
        return []
    terms = []
    for chunk in text.split():
        if chunk.startswith(("#", "@")):
            continue
        chunk = _EMOJI_JOINERS_RE.sub("", EMOJI_RE.sub(" ", chunk))
        for word in WORD_RE.findall(chunk.lower()):
            if word in config.stopwords:
                continue
            term = config.stemmer(word)
            if term:
                terms.append(term)
    return terms


@dataclass
class CommunityDocument:
    community: object
    term_counts: Counter
    tfidf: dict[str, float] = field(default_factory=dict)

    @property
    def total_terms(self) -> int:
        return sum(self.term_counts.values())


def community_comments(snapshot: Snapshot, assignment: CommunityAssignment) -> dict[int, list[InteractionRecord]]:
    """Comments of each community's members in the window, keyed by community id."""
    out: dict[int, list[InteractionRecord]] = defaultdict(list)
    for r in snapshot.comments:
        label = assignment.labels.get(r.commenter_id)
        if label is not None:
            out[label].append(r)
    return out


def vocabulary_filter(totals: Counter, min_count: int, top_fraction: float) -> set[str]:
    """Terms to drop: the most frequent ``top_fraction`` of the vocabulary and rare terms."""
    ranked = sorted(totals, key=lambda t: (-totals[t], t))
    n_top = math.floor(top_fraction * len(ranked) + 1e-9)
    dropped = set(ranked[:n_top])
    dropped.update(t for t, n in totals.items() if n < min_count)
    return dropped


def build_corpus(
    snapshot: Snapshot, assignment: CommunityAssignment, config: TextConfig = TextConfig()
) -> list[CommunityDocument]:
    """One document per community: the term multiset of all its members' comments.

    Corpus-wide, the most popular terms and the rare terms are removed from
    every document.
    """
    grouped = community_comments(snapshot, assignment)
    counts = {}
    for label in range(assignment.community_count):
        c: Counter = Counter()
        for r in grouped.get(label, ()):
            c.update(preprocess(r.text, config))
        counts[label] = c
    totals: Counter = Counter()
    for c in counts.values():
        totals.update(c)
    dropped = vocabulary_filter(totals, config.min_count, config.top_fraction)
    return [
        CommunityDocument(label, Counter({t: n for t, n in c.items() if t not in dropped}))
        for label, c in counts.items()
    ]


def idf(n_docs: int, doc_freq: int) -> float:
    """Probabilistic IDF ``ln((N - n) / n)``, clamped at zero."""
    if doc_freq <= 0 or doc_freq >= n_docs:
        return 0.0
    return max(0.0, math.log((n_docs - doc_freq) / doc_freq))


def _sparsify(weights: Mapping[str, float], top_n: int) -> dict[str, float]:
    ranked = sorted(((w, t) for t, w in weights.items() if w > 0), key=lambda x: (-x[0], x[1]))
    return {t: w for w, t in ranked[:top_n]}


def document_frequencies(docs: Iterable[CommunityDocument]) -> Counter:
    df: Counter = Counter()
    for d in docs:
        df.update(t for t, n in d.term_counts.items() if n > 0)
    return df


def tfidf(docs: list[CommunityDocument], top_n: int = 100) -> list[dict[str, float]]:
    """Raw-count TF times probabilistic IDF, keeping the ``top_n`` largest entries per document.

    Also stores each vector on its document's ``tfidf`` attribute.
    """
    if len(docs) < 2:
        raise ValueError("TF-IDF needs at least two documents")
    n = len(docs)
    df = document_frequencies(docs)
    out = []
    for d in docs:
        weights = {t: tf * idf(n, df[t]) for t, tf in d.term_counts.items()}
        d.tfidf = _sparsify(weights, top_n)
        out.append(d.tfidf)
    return out


def baseline_document(
    snapshot: Snapshot, docs: list[CommunityDocument], config: TextConfig = TextConfig()
) -> dict[str, float]:
    """TF-IDF vector of the window's average community.

    Term counts come from every comment in the window, restricted to the
    corpus vocabulary; IDF values come from the per-community documents.
    Sparsified like the community vectors.
    """
    vocab = set()
    for d in docs:
        vocab.update(d.term_counts)
    tf: Counter = Counter()
    for r in snapshot.comments:
        tf.update(t for t in preprocess(r.text, config) if t in vocab)
    n = len(docs)
    df = document_frequencies(docs)
    return _sparsify({t: c * idf(n, df[t]) for t, c in tf.items()}, config.top_n)


def cosine_similarity(a: Mapping[str, float], b: Mapping[str, float]) -> float:
    """Cosine of two sparse non-negative vectors; 0 when either is all zeros."""
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0 or nb == 0:
        return 0.0
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    dot = sum(v * large.get(t, 0.0) for t, v in small.items())
    return min(1.0, max(0.0, dot / (na * nb)))


def top_words(docs: list[CommunityDocument], k: int = 10) -> dict[str, list[list]]:
    """The ``k`` highest-weighted terms of each document, ties by term."""
    return {
        str(d.community): [[t, w] for t, w in sorted(d.tfidf.items(), key=lambda x: (-x[1], x[0]))[:k]]
        for d in docs
    }
