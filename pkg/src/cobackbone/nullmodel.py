"""Independent-behaviour null model for co-comment edge weights.

Under the null, every post of influencer ``i`` fills its ``|C_p|`` commenter
slots by independent draws from the influencer's engagement profile
``f_i``. A commenter lands on post ``p`` with probability
``1 - (1 - f_i(c)) ** |C_p|`` and a pair with the product of the two, so the
weight of an edge is a Poisson-Binomial sum over posts. Edges whose observed
weight exceeds the ``1 - alpha`` percentile of that sum form the backbone.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from cobackbone.errors import ConfigError
from cobackbone.ingest import Snapshot
from cobackbone.projection import CoCommentGraph

logger = logging.getLogger(__name__)

EXACT_CAP = 2048
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
# below this variance an edge's null weight is treated as deterministic
_DEGENERATE_VAR = 1e-12


@dataclass
class EngagementTable:
    raw: dict[tuple[str, str], int]  # (influencer, commenter) -> posts commented
    relative: dict[tuple[str, str], float]
    post_sizes: dict[str, int]
    totals: dict[str, int] = field(default_factory=dict)  # influencer -> sum of |C_p|

    def profile(self, influencer: str) -> dict[str, float]:
        return {c: f for (i, c), f in self.relative.items() if i == influencer}


def engagement_table(snapshot: Snapshot) -> EngagementTable:
    """Per-influencer commenter engagement counts and their relative shares."""
    raw: dict[tuple[str, str], int] = {}
    relative: dict[tuple[str, str], float] = {}
    post_sizes = {p: len(m) for p, m in snapshot.commenters_per_post.items()}
    totals: dict[str, int] = {}
    for influencer in sorted(snapshot.posts_by_influencer):
        posts = snapshot.posts_by_influencer[influencer]
        total = sum(post_sizes.get(p, 0) for p in posts)
        if total == 0:
            logger.warning("influencer %r has no comments in window; excluded", influencer)
            continue
        counts: Counter = Counter()
        for p in posts:
            counts.update(snapshot.commenters_per_post.get(p, ()))
        totals[influencer] = total
        for c in sorted(counts):
            raw[(influencer, c)] = counts[c]
            relative[(influencer, c)] = counts[c] / total
    return EngagementTable(raw, relative, post_sizes, totals)


def post_inclusion_prob(f, n):
    """Probability that a commenter with engagement ``f`` fills at least one of ``n`` slots."""
    f = np.asarray(f, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(f >= 1.0, 1.0, -np.expm1(n * np.log1p(-np.minimum(f, 1.0))))
    return float(out) if out.ndim == 0 else out


def edge_null_params(snapshot: Snapshot, engagement: EngagementTable, c: str, d: str) -> list[float]:
    """Bernoulli parameters of the null weight of edge ``(c, d)``.

    One entry per post of each influencer both commenters engage with,
    ordered by influencer id then post id. Posts of other influencers have
    parameter zero and are left out.
    """
    if c == d:
        raise ValueError("edge endpoints must differ")
    params = []
    for influencer in sorted(engagement.totals):
        fc = engagement.relative.get((influencer, c), 0.0)
        fd = engagement.relative.get((influencer, d), 0.0)
        if fc == 0.0 or fd == 0.0:
            continue
        for post in sorted(snapshot.posts_by_influencer[influencer]):
            n = engagement.post_sizes[post]
            params.append(post_inclusion_prob(fc, n) * post_inclusion_prob(fd, n))
    return params


@dataclass
class EdgeNullSummary:
    mu: float
    var: float
    m3: float
    n_posts: int
    percentile: int | None = None

    @classmethod
    def from_params(cls, params) -> "EdgeNullSummary":
        p = np.asarray(params, dtype=float)
        q = p * (1.0 - p)
        return cls(float(p.sum()), float(q.sum()), float((q * (1.0 - 2.0 * p)).sum()), len(p))


# --- Poisson-Binomial distribution ---------------------------------------


def pb_pmf_exact(params, cap: int = EXACT_CAP) -> np.ndarray:
    """Exact probability mass function by sequential convolution."""
    p = np.asarray(params, dtype=float)
    if len(p) > cap:
        raise ValueError(f"exact Poisson-Binomial limited to {cap} parameters, got {len(p)}")
    pmf = np.zeros(len(p) + 1)
    pmf[0] = 1.0
    for j, pj in enumerate(p, start=1):
        pmf[1 : j + 1] = pmf[1 : j + 1] * (1.0 - pj) + pmf[:j] * pj
        pmf[0] *= 1.0 - pj
    return pmf


def pb_cdf_exact(params, k: int, cap: int = EXACT_CAP) -> float:
    """Exact ``P(X <= k)``; the test oracle for the approximation below."""
    pmf = pb_pmf_exact(params, cap)
    if k < 0:
        return 0.0
    if k >= len(pmf) - 1:
        return 1.0
    return float(min(1.0, pmf[: k + 1].sum()))


def _rna_raw(k, mu, sigma, skew):
    x = (k + 0.5 - mu) / sigma
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return np.clip(ndtr(x) + skew * (1.0 - x * x) * pdf / 6.0, 0.0, 1.0)


def pb_cdf_rna(mu: float, var: float, m3: float, k):
    """Refined normal approximation of ``P(X <= k)``.

    Skew-corrected normal CDF with continuity correction, clamped to [0, 1]
    and made non-decreasing in ``k`` by a running maximum from 0. A zero
    variance means the sum is the constant ``mu``.
    """
    ks = np.atleast_1d(np.asarray(k))
    if var <= _DEGENERATE_VAR:
        out = (ks >= round(mu)).astype(float)
    else:
        top = int(max(ks.max(), 0))
        sigma = math.sqrt(var)
        grid = _rna_raw(np.arange(top + 1, dtype=float), mu, sigma, m3 / sigma**3)
        grid = np.maximum.accumulate(grid)
        out = np.where(ks < 0, 0.0, grid[np.clip(ks, 0, top)])
    return float(out[0]) if np.ndim(k) == 0 else out


def rna_percentiles(mu, var, m3, n_posts, q: float) -> np.ndarray:
    """Vectorised smallest ``k`` with RNA ``CDF(k) >= q``.

    The search starts at the normal quantile guess and walks up until the
    CDF reaches ``q``, then down while the previous value still does.
    ``k`` never exceeds the number of contributing posts, where the true CDF
    is 1.
    """
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie strictly between 0 and 1")
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    m3 = np.asarray(m3, dtype=float)
    n = np.asarray(n_posts, dtype=np.int64)
    out = np.zeros(mu.shape, dtype=np.int64)

    degenerate = var <= _DEGENERATE_VAR
    out[degenerate] = np.rint(mu[degenerate]).astype(np.int64)

    idx = np.flatnonzero(~degenerate)
    if len(idx) == 0:
        return out
    mu_s, n_s = mu[idx], n[idx]
    sigma = np.sqrt(var[idx])
    skew = m3[idx] / sigma**3
    k = np.clip(np.ceil(mu_s + sigma * ndtri(q)), 0, n_s).astype(np.int64)

    def cdf(kk, sel):
        return np.where(kk >= n_s[sel], 1.0, _rna_raw(kk.astype(float), mu_s[sel], sigma[sel], skew[sel]))

    active = np.arange(len(idx))
    while len(active):
        below = cdf(k[active], active) < q
        active = active[below]
        k[active] += 1
    active = np.flatnonzero(k > 0)
    while len(active):
        ok = cdf(k[active] - 1, active) >= q
        active = active[ok]
        k[active] -= 1
        active = active[k[active] > 0]
    out[idx] = k
    return out


def pb_percentile(source, q: float, exact: bool = False) -> int:
    """Smallest integer ``k`` with ``CDF(k) >= q``.

    ``source`` is either an :class:`EdgeNullSummary` or a sequence of
    Bernoulli parameters. ``exact=True`` uses the convolution oracle and
    needs the parameters.
    """
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie strictly between 0 and 1")
    if exact:
        if isinstance(source, EdgeNullSummary):
            raise ValueError("the exact percentile needs the parameter vector")
        cdf = np.cumsum(pb_pmf_exact(source))
        return int(np.argmax(cdf >= q)) if cdf[-1] >= q else len(cdf) - 1
    summary = source if isinstance(source, EdgeNullSummary) else EdgeNullSummary.from_params(source)
    return int(rna_percentiles([summary.mu], [summary.var], [summary.m3], [summary.n_posts], q)[0])


# --- backbone extraction ---------------------------------------------------


def _influencer_moments(graph, snapshot, engagement, influencer):
    """Moment contributions of one influencer's posts to the edges it supports."""
    index = graph.index
    members = [
        (index[c], f)
        for (i, c), f in engagement.relative.items()
        if i == influencer and c in index
    ]
    if len(members) < 2:
        return None
    rows = np.array([m[0] for m in members], dtype=np.int64)
    fvals = np.array([m[1] for m in members], dtype=float)
    engaged = np.zeros(graph.n_nodes, dtype=bool)
    engaged[rows] = True
    sel = np.flatnonzero(engaged[graph.src] & engaged[graph.dst])
    if len(sel) == 0:
        return None

    with np.errstate(divide="ignore"):
        log_miss = np.log1p(-np.minimum(fvals, 1.0))
    full = np.zeros(graph.n_nodes)
    src, dst = graph.src[sel], graph.dst[sel]
    mu = np.zeros(len(sel))
    var = np.zeros(len(sel))
    m3 = np.zeros(len(sel))
    sizes = Counter(engagement.post_sizes[p] for p in snapshot.posts_by_influencer[influencer])
    for size in sorted(sizes):
        count = sizes[size]
        full[rows] = np.where(fvals >= 1.0, 1.0, -np.expm1(size * log_miss))
        r = full[src] * full[dst]
        rq = r * (1.0 - r)
        mu += count * r
        var += count * rq
        m3 += count * (rq * (1.0 - 2.0 * r))
    n_posts = sum(sizes.values())
    return sel, mu, var, m3, n_posts


def edge_null_summaries(
    graph: CoCommentGraph, snapshot: Snapshot, engagement: EngagementTable, threads: int = 1
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Moment sums (mean, variance, third central moment) and post counts per edge.

    Each influencer only touches edges whose endpoints both engage with it.
    Contributions are added in sorted influencer order, so the result does
    not depend on ``threads``.
    """
    mu = np.zeros(graph.n_edges)
    var = np.zeros(graph.n_edges)
    m3 = np.zeros(graph.n_edges)
    n_posts = np.zeros(graph.n_edges, dtype=np.int64)
    influencers = sorted(engagement.totals)

    def merge(part):
        if part is None:
            return
        sel, p_mu, p_var, p_m3, count = part
        mu[sel] += p_mu
        var[sel] += p_var
        m3[sel] += p_m3
        n_posts[sel] += count

    # group member lists once instead of rescanning the table per influencer
    by_influencer: dict[str, dict] = defaultdict(dict)
    for (i, c), f in engagement.relative.items():
        by_influencer[i][(i, c)] = f

    def work(influencer):
        sub = EngagementTable({}, by_influencer[influencer], engagement.post_sizes)
        return _influencer_moments(graph, snapshot, sub, influencer)

    if threads <= 1:
        for influencer in influencers:
            merge(work(influencer))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for start in range(0, len(influencers), threads):
                batch = influencers[start : start + threads]
                for part in pool.map(work, batch):
                    merge(part)
    return mu, var, m3, n_posts


@dataclass
class Backbone:
    graph: CoCommentGraph
    alpha: float
    strict: bool
    source: CoCommentGraph
    kept: np.ndarray  # mask over source edges
    mu: np.ndarray
    var: np.ndarray
    m3: np.ndarray
    n_posts: np.ndarray
    percentile: np.ndarray

    def summary(self, c: str, d: str) -> EdgeNullSummary:
        idx = self.source.index
        a, b = sorted((idx[c], idx[d]))
        pos = int(np.flatnonzero((self.source.src == a) & (self.source.dst == b))[0])
        return EdgeNullSummary(
            float(self.mu[pos]), float(self.var[pos]), float(self.m3[pos]),
            int(self.n_posts[pos]), int(self.percentile[pos]),
        )

    def retention_report(self) -> dict:
        w = self.source.weight
        per_weight = {}
        for value in np.unique(w).tolist():
            at = w == value
            per_weight[str(value)] = float(self.kept[at].mean())
        return {
            "total_edges": int(self.source.n_edges),
            "kept_edges": int(self.kept.sum()),
            "per_weight": per_weight,
        }

    def header(self) -> str:
        return (
            f"#backbone v1 window={self.graph.window_index} alpha={self.alpha:g} "
            f"strict={'true' if self.strict else 'false'}"
        )


def extract_backbone(
    graph: CoCommentGraph,
    snapshot: Snapshot,
    engagement: EngagementTable | None = None,
    alpha: float = 0.05,
    strict: bool = True,
    threads: int = 1,
) -> Backbone:
    """Keep edges whose weight exceeds their null ``1 - alpha`` percentile.

    ``strict`` keeps ``weight > percentile``; otherwise ``weight >= percentile``.
    Vertices left without edges are dropped.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    if engagement is None:
        engagement = engagement_table(snapshot)
    mu, var, m3, n_posts = edge_null_summaries(graph, snapshot, engagement, threads)
    percentile = rna_percentiles(mu, var, m3, n_posts, 1.0 - alpha)
    kept = graph.weight > percentile if strict else graph.weight >= percentile
    return Backbone(
        graph=graph.subgraph_edges(kept),
        alpha=alpha,
        strict=strict,
        source=graph,
        kept=kept,
        mu=mu,
        var=var,
        m3=m3,
        n_posts=n_posts,
        percentile=percentile,
    )
