"""Weighted co-commenter graph: the superposition of one clique per post."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

import numpy as np

from cobackbone.errors import InputError, ResourceError
from cobackbone.ingest import Snapshot

# pair keys are accumulated in chunks of about this many entries before merging
_CHUNK_PAIRS = 4_000_000


@dataclass
class CoCommentGraph:
    """Undirected weighted graph over commenter ids.

    ``nodes`` is sorted; ``src``/``dst`` index into it with ``src < dst`` and
    edges are sorted by ``(src, dst)``, so the arrays are canonical.
    """

    nodes: list[str]
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    window_index: int = 1

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64)
        self.dst = np.asarray(self.dst, dtype=np.int64)
        self.weight = np.asarray(self.weight, dtype=np.int64)
        self._index: dict[str, int] | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    @property
    def index(self) -> dict[str, int]:
        if self._index is None:
            self._index = {c: i for i, c in enumerate(self.nodes)}
        return self._index

    def edges(self) -> Iterator[tuple[str, str, int]]:
        nodes = self.nodes
        for s, d, w in zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist()):
            yield nodes[s], nodes[d], w

    def edge_dict(self) -> dict[tuple[str, str], int]:
        return {(a, b): w for a, b, w in self.edges()}

    def weight_of(self, c: str, d: str) -> int:
        idx = self.index
        if c not in idx or d not in idx or c == d:
            return 0
        a, b = sorted((idx[c], idx[d]))
        pos = np.searchsorted(self._keys(), a * self.n_nodes + b)
        if pos < self.n_edges and self.src[pos] == a and self.dst[pos] == b:
            return int(self.weight[pos])
        return 0

    def _keys(self) -> np.ndarray:
        return self.src * self.n_nodes + self.dst

    def degrees(self) -> np.ndarray:
        """Weighted degree per node."""
        k = np.zeros(self.n_nodes, dtype=np.int64)
        np.add.at(k, self.src, self.weight)
        np.add.at(k, self.dst, self.weight)
        return k

    def subgraph_edges(self, keep: np.ndarray, window_index: int | None = None) -> "CoCommentGraph":
        """Graph with only the edges selected by boolean mask ``keep``; isolated vertices go."""
        src, dst, w = self.src[keep], self.dst[keep], self.weight[keep]
        used = np.unique(np.concatenate([src, dst]))
        remap = np.full(self.n_nodes, -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        return CoCommentGraph(
            nodes=[self.nodes[i] for i in used.tolist()],
            src=remap[src],
            dst=remap[dst],
            weight=w,
            window_index=self.window_index if window_index is None else window_index,
        )

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str, int]], window_index: int = 1) -> "CoCommentGraph":
        """Build from ``(c, d, weight)`` triples; duplicate pairs have their weights summed."""
        acc: Counter = Counter()
        for c, d, w in edges:
            if c == d:
                raise ValueError(f"self-loop on {c!r}")
            if w <= 0:
                raise ValueError(f"non-positive weight on ({c!r}, {d!r})")
            acc[(c, d) if c < d else (d, c)] += int(w)
        nodes = sorted({x for pair in acc for x in pair})
        index = {c: i for i, c in enumerate(nodes)}
        items = sorted((index[a], index[b], w) for (a, b), w in acc.items())
        arr = np.array(items, dtype=np.int64).reshape(-1, 3)
        return cls(nodes, arr[:, 0], arr[:, 1], arr[:, 2], window_index)


def _merge(keys: list[np.ndarray], counts: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    all_keys = np.concatenate(keys)
    all_counts = np.concatenate(counts)
    uniq, inverse = np.unique(all_keys, return_inverse=True)
    summed = np.bincount(inverse, weights=all_counts, minlength=len(uniq)).astype(np.int64)
    return uniq, summed


def build_graph(snapshot: Snapshot, max_clique: int | None = None) -> CoCommentGraph:
    """Project a snapshot onto commenters: each post adds +1 to every pair in its commenter set.

    ``max_clique`` caps the commenter-set size of any single post; a post over
    the cap raises :class:`ResourceError` rather than being truncated.
    """
    nodes = sorted(snapshot.commenters)
    index = {c: i for i, c in enumerate(nodes)}
    n = len(nodes)

    keys: list[np.ndarray] = []
    counts: list[np.ndarray] = []
    pending: list[np.ndarray] = []
    pending_size = 0
    tri_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    for post in sorted(snapshot.commenters_per_post):
        members = snapshot.commenters_per_post[post]
        size = len(members)
        if max_clique is not None and size > max_clique:
            raise ResourceError(
                f"post {post!r} has {size} commenters, above the clique cap of {max_clique}"
            )
        if size < 2:
            continue
        ids = np.sort(np.fromiter((index[c] for c in members), dtype=np.int64, count=size))
        if size not in tri_cache:
            tri_cache[size] = np.triu_indices(size, k=1)
        a, b = tri_cache[size]
        pending.append(ids[a] * n + ids[b])
        pending_size += len(a)
        if pending_size >= _CHUNK_PAIRS:
            k, c = np.unique(np.concatenate(pending), return_counts=True)
            keys.append(k)
            counts.append(c)
            pending, pending_size = [], 0
    if pending:
        k, c = np.unique(np.concatenate(pending), return_counts=True)
        keys.append(k)
        counts.append(c)

    if keys:
        uniq, weight = _merge(keys, counts) if len(keys) > 1 else (keys[0], counts[0].astype(np.int64))
    else:
        uniq, weight = np.empty(0, np.int64), np.empty(0, np.int64)
    src, dst = np.divmod(uniq, max(n, 1))
    # commenters alone on every post they touched have no edges and are not vertices
    graph = CoCommentGraph(nodes, src, dst, weight, snapshot.window_index)
    if n and len(np.unique(np.concatenate([src, dst]))) < n:
        graph = graph.subgraph_edges(np.ones(len(src), dtype=bool))
    return graph


def graph_stats(graph: CoCommentGraph) -> dict:
    """Vertex and edge counts plus the exact edge-weight histogram."""
    if graph.n_edges == 0:
        return {"vertices": graph.n_nodes, "edges": 0, "weight_histogram": {}, "weight_fractions": {}}
    weights, freq = np.unique(graph.weight, return_counts=True)
    total = int(freq.sum())
    return {
        "vertices": graph.n_nodes,
        "edges": graph.n_edges,
        "weight_histogram": {int(w): int(f) for w, f in zip(weights, freq)},
        "weight_fractions": {int(w): f / total for w, f in zip(weights.tolist(), freq.tolist())},
    }


def write_edgelist(graph: CoCommentGraph, fp: IO[str], header: str | None = None) -> None:
    """Write the TSV edge list; lines are sorted because the arrays are canonical."""
    fp.write((header or f"#cocomment-graph v1 window={graph.window_index}") + "\n")
    nodes = graph.nodes
    lines = [
        f"{nodes[s]}\t{nodes[d]}\t{w}\n"
        for s, d, w in zip(graph.src.tolist(), graph.dst.tolist(), graph.weight.tolist())
    ]
    fp.writelines(lines)


def read_edgelist(fp: IO[str]) -> CoCommentGraph:
    header = fp.readline().rstrip("\n")
    if not header.startswith("#"):
        raise InputError("edge list lacks its '#' header line")
    window = 1
    for token in header.split():
        if token.startswith("window="):
            window = int(token.split("=", 1)[1])
    triples = []
    for lineno, line in enumerate(fp, start=2):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise InputError(f"edge list line {lineno}: expected 3 tab-separated fields")
        triples.append((parts[0], parts[1], int(parts[2])))
    return CoCommentGraph.from_edges(triples, window_index=window)
