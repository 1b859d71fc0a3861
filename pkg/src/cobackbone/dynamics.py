"""Membership dynamics across consecutive windows."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from cobackbone.community import CommunityAssignment
from cobackbone.ingest import Snapshot
from cobackbone.projection import CoCommentGraph
from cobackbone.text.tfidf import cosine_similarity

COHORTS = {"all": 1.0, "top1pct": 0.01, "top5pct": 0.05}


def _members(backbone) -> set[str]:
    if isinstance(backbone, CoCommentGraph):
        return set(backbone.nodes)
    return set(backbone)


def persistence(backbone_w, backbone_next) -> float:
    """Fraction of window-w backbone members still present in the next window's backbone."""
    current = _members(backbone_w)
    if not current:
        raise ValueError("persistence is undefined for an empty backbone")
    return len(current & _members(backbone_next)) / len(current)


def _entropy(counts: Iterable[int], n: int) -> float:
    return -sum(c / n * math.log(c / n) for c in counts)


def membership_nmi(labels_w: Mapping[str, object], labels_next: Mapping[str, object], persisted: Iterable[str]) -> float:
    """Normalised mutual information of two labellings restricted to ``persisted``.

    Natural logarithms; normalised by the geometric mean of the entropies.
    When both labellings put everyone in a single community the value is 1;
    when exactly one does, it is 0.
    """
    nodes = sorted(set(persisted))
    if not nodes:
        raise ValueError("NMI needs at least one persisted vertex")
    n = len(nodes)
    xs = [labels_w[c] for c in nodes]
    ys = [labels_next[c] for c in nodes]
    px, py, pxy = Counter(xs), Counter(ys), Counter(zip(xs, ys))
    hx, hy = _entropy(px.values(), n), _entropy(py.values(), n)
    if len(px) == 1 and len(py) == 1:
        return 1.0
    if len(px) == 1 or len(py) == 1:
        return 0.0
    mi = sum(
        nxy / n * math.log(nxy * n / (px[x] * py[y])) for (x, y), nxy in pxy.items()
    )
    return min(1.0, max(0.0, mi / math.sqrt(hx * hy)))


def top_k_commenters(snapshot: Snapshot, backbone, fraction: float) -> set[str]:
    """The ``ceil(fraction * |members|)`` backbone members with most comments; ties by id."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    members = _members(backbone)
    counts = Counter(r.commenter_id for r in snapshot.comments if r.commenter_id in members)
    k = math.ceil(fraction * len(members))
    ranked = sorted(members, key=lambda c: (-counts[c], c))
    return set(ranked[:k])


def match_communities(
    docs_w: Mapping[object, Mapping[str, float]],
    docs_next: Mapping[object, Mapping[str, float]],
    baseline_next: Mapping[str, float],
) -> dict[object, tuple[object, float] | None]:
    """Map each window-w community to its most similar next-window community.

    A match needs a similarity strictly above the similarity to the
    next window's average-community document; otherwise the value is None.
    Several communities may map to the same target. Ties go to the target
    that sorts first.
    """
    out: dict[object, tuple[object, float] | None] = {}
    for j in sorted(docs_w, key=str):
        doc = docs_w[j]
        best, best_sim = None, -1.0
        for k in sorted(docs_next, key=str):
            sim = cosine_similarity(doc, docs_next[k])
            if sim > best_sim:
                best, best_sim = k, sim
        threshold = cosine_similarity(doc, baseline_next)
        out[j] = (best, best_sim) if best is not None and best_sim > threshold else None
    return out


@dataclass
class WindowState:
    """Everything the temporal report needs about one window."""

    window: int
    snapshot: Snapshot
    backbone: CoCommentGraph
    assignment: CommunityAssignment
    docs: Mapping[object, Mapping[str, float]] | None = None
    baseline: Mapping[str, float] | None = None


def temporal_report(states: list[WindowState]) -> list[dict]:
    """Per-transition persistence and NMI for each cohort, plus topic matches."""
    out = []
    for cur, nxt in zip(states, states[1:]):
        matches = None
        if cur.docs is not None and nxt.docs is not None and nxt.baseline is not None:
            raw = match_communities(cur.docs, nxt.docs, nxt.baseline)
            matches = [
                {"from": j, "to": m[0], "similarity": m[1]} if m else {"from": j, "to": None, "similarity": None}
                for j, m in raw.items()
            ]
        next_members = set(nxt.backbone.nodes)
        for cohort, fraction in COHORTS.items():
            if not cur.backbone.n_nodes:
                continue
            selected = top_k_commenters(cur.snapshot, cur.backbone, fraction)
            persisted = selected & next_members
            nmi = (
                membership_nmi(cur.assignment.labels, nxt.assignment.labels, persisted)
                if persisted
                else None
            )
            out.append(
                {
                    "window_from": cur.window,
                    "window_to": nxt.window,
                    "cohort": cohort,
                    "persistence": persistence(selected, next_members),
                    "nmi": nmi,
                    "matches": matches if cohort == "all" else None,
                }
            )
    return out
