"""Community activity profiles: where members comment, how they write, and with what sentiment."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import astuple, dataclass, fields

import numpy as np
import regex

from cobackbone.community import CommunityAssignment
from cobackbone.ingest import Snapshot
from cobackbone.text.tfidf import community_comments, count_emojis

_LETTER_RUN_RE = regex.compile(r"\p{L}+")


@dataclass
class LabelledMatrix:
    rows: list
    columns: list
    values: np.ndarray

    def to_dict(self) -> dict:
        return {"rows": self.rows, "columns": self.columns, "values": self.values.tolist()}


def _share_matrix(assignment: CommunityAssignment, snapshot: Snapshot, key) -> LabelledMatrix:
    counts: dict[int, Counter] = defaultdict(Counter)
    for r in snapshot.comments:
        label = assignment.labels.get(r.commenter_id)
        if label is not None:
            counts[label][key(r)] += 1
    rows = sorted(counts)
    columns = sorted({col for c in counts.values() for col in c})
    values = np.zeros((len(rows), len(columns)))
    col_index = {c: j for j, c in enumerate(columns)}
    for i, label in enumerate(rows):
        total = sum(counts[label].values())
        for col, n in counts[label].items():
            values[i, col_index[col]] = n / total
    return LabelledMatrix(rows, columns, values)


def interest_index(assignment: CommunityAssignment, snapshot: Snapshot) -> LabelledMatrix:
    """Community x post matrix: share of each community's comments that went to each post.

    Communities without comments in the window get no row.
    """
    return _share_matrix(assignment, snapshot, lambda r: r.post_id)


def post_interest_leaders(matrix: LabelledMatrix) -> list[dict]:
    """Per post, the two highest interest indices and their ratio (None when the runner-up is 0)."""
    out = []
    for j, post in enumerate(matrix.columns):
        col = matrix.values[:, j]
        order = sorted(range(len(col)), key=lambda i: (-col[i], matrix.rows[i]))
        top1 = float(col[order[0]]) if order else 0.0
        top2 = float(col[order[1]]) if len(order) > 1 else 0.0
        out.append(
            {
                "post": post,
                "top1_community": matrix.rows[order[0]] if order else None,
                "top1": top1,
                "top2": top2,
                "ratio": top1 / top2 if top2 > 0 else None,
            }
        )
    return out


def community_influencer_matrix(assignment: CommunityAssignment, snapshot: Snapshot) -> LabelledMatrix:
    """Community x influencer matrix: share of each community's comments per influencer."""
    return _share_matrix(assignment, snapshot, lambda r: r.influencer_id)


def _pearson_distance(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    return 1.0 - float(a @ b / np.sqrt((a @ a) * (b @ b)))


def influencer_dendrogram(matrix: LabelledMatrix) -> list[dict]:
    """Average-linkage clustering of influencer columns under ``1 - Pearson`` distance.

    Returns merges in order. Leaves are numbered by sorted influencer id and
    merged clusters continue from ``n``, the same numbering as scipy's linkage
    matrices. Equal distances are broken by the smallest influencer id in
    each cluster.
    """
    order = sorted(range(len(matrix.columns)), key=lambda j: str(matrix.columns[j]))
    names = [matrix.columns[j] for j in order]
    cols = matrix.values[:, order]
    n = len(names)
    if n < 2:
        raise ValueError("a dendrogram needs at least two influencers")
    for j, name in enumerate(names):
        if np.ptp(cols[:, j]) == 0:
            raise ValueError(f"influencer {name!r} has a constant activity column; correlation undefined")

    dist = np.array([[_pearson_distance(cols[:, a], cols[:, b]) for b in range(n)] for a in range(n)])
    clusters = {k: [k] for k in range(n)}
    merges = []
    next_id = n
    while len(clusters) > 1:
        best = None
        ids = sorted(clusters, key=lambda c: min(clusters[c]))
        for x_pos, x in enumerate(ids):
            for y in ids[x_pos + 1 :]:
                d = float(dist[np.ix_(clusters[x], clusters[y])].mean())
                key = (d, min(clusters[x]), min(clusters[y]))
                if best is None or key < best[0]:
                    best = (key, x, y)
        (height, _, _), x, y = best
        members = sorted(clusters.pop(x) + clusters.pop(y))
        clusters[next_id] = members
        merges.append(
            {
                "left": x,
                "right": y,
                "height": height,
                "size": len(members),
                "members": [names[m] for m in members],
            }
        )
        next_id += 1
    return merges


def sentiment_classify(score: int) -> str:
    if score < 0:
        return "negative"
    if score > 0:
        return "positive"
    return "neutral"


def sentiment_fractions(scores) -> dict[str, float]:
    counts = Counter(sentiment_classify(s) for s in scores)
    total = sum(counts.values())
    if total == 0:
        return {"positive": 0.0, "neutral": 0.0, "negative": 0.0}
    return {k: counts[k] / total for k in ("positive", "neutral", "negative")}


def contrastive_score(
    assignment: CommunityAssignment,
    snapshot: Snapshot,
    community: int,
    influencer: str,
    min_comments: int = 100,
) -> float | None:
    """Share of positive minus share of negative comments by a community on one influencer.

    Only sentiment-scored comments count. Returns None ("insufficient") when
    fewer than ``min_comments`` of them exist.
    """
    scores = [
        r.sentiment
        for r in snapshot.comments
        if r.influencer_id == influencer
        and r.sentiment is not None
        and assignment.labels.get(r.commenter_id) == community
    ]
    if len(scores) < min_comments:
        return None
    frac = sentiment_fractions(scores)
    return frac["positive"] - frac["negative"]


def contrastive_matrix(
    assignment: CommunityAssignment, snapshot: Snapshot, min_comments: int = 100
) -> dict:
    influencers = sorted(snapshot.posts_by_influencer)
    rows = list(range(assignment.community_count))
    values = [
        [
            ("insufficient" if s is None else s)
            for s in (contrastive_score(assignment, snapshot, g, i, min_comments) for i in influencers)
        ]
        for g in rows
    ]
    return {"rows": rows, "columns": influencers, "values": values}


@dataclass
class FeatureVector:
    avg_comment_length: float
    frac_with_mention: float
    avg_hashtags_per_comment: float
    frac_with_uppercase_word: float
    avg_comments_per_commenter: float
    avg_emojis_per_comment: float
    frac_replies: float

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


def has_uppercase_word(text: str) -> bool:
    return any(len(w) >= 2 and w.isupper() for w in _LETTER_RUN_RE.findall(text))


def feature_vector(assignment: CommunityAssignment, snapshot: Snapshot, community: int) -> FeatureVector:
    """Seven writing-style metrics over all comments of one community in the window."""
    comments = community_comments(snapshot, assignment).get(community, [])
    if not comments:
        raise ValueError(f"community {community} has no comments in this window")
    n = len(comments)
    texts = [r.text or "" for r in comments]
    tokens = [t.split() for t in texts]
    return FeatureVector(
        avg_comment_length=sum(len(t) for t in texts) / n,
        frac_with_mention=sum(any(w.startswith("@") for w in ws) for ws in tokens) / n,
        avg_hashtags_per_comment=sum(sum(w.startswith("#") for w in ws) for ws in tokens) / n,
        frac_with_uppercase_word=sum(has_uppercase_word(t) for t in texts) / n,
        avg_comments_per_commenter=n / len({r.commenter_id for r in comments}),
        avg_emojis_per_comment=sum(count_emojis(t) for t in texts) / n,
        frac_replies=sum(bool(r.is_reply) for r in comments) / n,
    )


@dataclass
class PCAResult:
    coordinates: np.ndarray  # rows x 2
    loadings: np.ndarray  # metrics x 2
    eigenvalues: np.ndarray  # all, descending
    metric_names: list[str]

    @property
    def explained_ratio(self) -> np.ndarray:
        return self.eigenvalues[:2] / self.eigenvalues.sum()


def pca_2d(rows, metric_names: list[str] | None = None) -> PCAResult:
    """Two-component PCA of z-scored metric rows.

    Each loading vector is signed so that its largest-magnitude entry is
    positive.
    """
    x = np.asarray(rows, dtype=float)
    names = metric_names or [f"metric{j}" for j in range(x.shape[1])]
    if x.shape[0] < 3:
        raise ValueError("PCA needs at least three rows")
    std = x.std(axis=0)
    for j in np.flatnonzero(std == 0):
        raise ValueError(f"metric {names[j]!r} is constant across rows")
    z = (x - x.mean(axis=0)) / std
    cov = z.T @ z / len(z)
    eigenvalues, vectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues, vectors = eigenvalues[order], vectors[:, order]
    loadings = vectors[:, :2].copy()
    for k in range(2):
        if loadings[np.argmax(np.abs(loadings[:, k])), k] < 0:
            loadings[:, k] *= -1
    return PCAResult(z @ loadings, loadings, np.clip(eigenvalues, 0.0, None), names)
