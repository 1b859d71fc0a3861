"""Weighted modularity and Louvain community detection."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import IO, Mapping

import numpy as np

from cobackbone.projection import CoCommentGraph


@dataclass
class CommunityAssignment:
    labels: dict[str, int]
    modularity: float
    seed: int
    community_count: int
    history: list[float] = field(default_factory=list)  # modularity after each level

    def communities(self) -> list[list[str]]:
        groups: list[list[str]] = [[] for _ in range(self.community_count)]
        for node, label in self.labels.items():
            groups[label].append(node)
        return [sorted(g) for g in groups]

    def to_dict(self, window: int | None = None) -> dict:
        return {
            "window": window,
            "seed": self.seed,
            "modularity": self.modularity,
            "communities": [
                {"id": k, "size": len(members), "members": members}
                for k, members in enumerate(self.communities())
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CommunityAssignment":
        labels = {m: int(c["id"]) for c in obj["communities"] for m in c["members"]}
        return cls(labels, float(obj["modularity"]), int(obj["seed"]), len(obj["communities"]))


def dump_assignment(assignment: CommunityAssignment, fp: IO[str], window: int | None = None) -> None:
    json.dump(assignment.to_dict(window), fp, indent=1, sort_keys=True)
    fp.write("\n")


def load_assignment(fp: IO[str]) -> tuple[CommunityAssignment, int | None]:
    obj = json.load(fp)
    return CommunityAssignment.from_dict(obj), obj.get("window")


def modularity(graph: CoCommentGraph, labels: Mapping[str, object]) -> float:
    """Newman modularity of a labelling, with weighted degrees and resolution 1."""
    total = float(graph.weight.sum())
    if total == 0:
        raise ValueError("modularity is undefined for a graph without edge weight")
    missing = [c for c in graph.nodes if c not in labels]
    if missing:
        raise ValueError(f"labels do not cover vertex {missing[0]!r}")
    _, lab = np.unique(np.array([str(labels[c]) for c in graph.nodes], dtype=object), return_inverse=True)
    w = graph.weight.astype(float)
    same = lab[graph.src] == lab[graph.dst]
    internal = np.bincount(lab[graph.src][same], weights=w[same], minlength=lab.max() + 1)
    tot = np.bincount(lab, weights=graph.degrees().astype(float), minlength=lab.max() + 1)
    return float(np.sum(internal / total - (tot / (2.0 * total)) ** 2))


def _one_level(adj, degree, m2, rng):
    """Greedy local moves until no vertex improves. Returns the community per vertex."""
    n = len(adj)
    comm = list(range(n))
    tot = list(degree)
    order = rng.permutation(n).tolist()
    moved_any = False
    improved = True
    while improved:
        improved = False
        for i in order:
            ci = comm[i]
            ki = degree[i]
            links: dict[int, float] = defaultdict(float)
            for j, w in adj[i].items():
                links[comm[j]] += w
            tot[ci] -= ki
            best, best_gain = ci, links.get(ci, 0.0) - tot[ci] * ki / m2
            for c in sorted(links):
                gain = links[c] - tot[c] * ki / m2
                if gain > best_gain or (gain == best_gain and c < best):
                    best, best_gain = c, gain
            tot[best] += ki
            if best != ci:
                comm[i] = best
                improved = moved_any = True
    return comm, moved_any


def louvain(graph: CoCommentGraph, seed: int = 0) -> CommunityAssignment:
    """Louvain modularity optimisation.

    Each level visits vertices in an order shuffled by ``seed``; a vertex
    joins the neighbouring community of highest gain, ties going to the
    lowest community id. Levels aggregate communities into meta-vertices
    until a level moves nothing. Labels are renumbered by descending
    community size, ties by smallest member id.
    """
    if graph.n_nodes == 0:
        raise ValueError("louvain needs a non-empty graph")
    rng = np.random.default_rng(seed)
    adj: list[dict[int, float]] = [dict() for _ in range(graph.n_nodes)]
    for s, d, w in zip(graph.src.tolist(), graph.dst.tolist(), graph.weight.tolist()):
        adj[s][d] = adj[s].get(d, 0.0) + w
        adj[d][s] = adj[d].get(s, 0.0) + w
    self_w = [0.0] * graph.n_nodes
    membership = list(range(graph.n_nodes))  # original vertex -> current meta-vertex
    history: list[float] = []

    while True:
        degree = [sum(a.values()) + 2.0 * sw for a, sw in zip(adj, self_w)]
        m2 = sum(degree)
        if m2 == 0:
            break
        comm, moved = _one_level(adj, degree, m2, rng)
        if not moved:
            break
        renum = {c: k for k, c in enumerate(sorted(set(comm)))}
        comm = [renum[c] for c in comm]
        membership = [comm[m] for m in membership]
        size = len(renum)
        new_adj: list[dict[int, float]] = [dict() for _ in range(size)]
        new_self = [0.0] * size
        for i, neighbours in enumerate(adj):
            ci = comm[i]
            new_self[ci] += self_w[i]
            for j, w in neighbours.items():
                cj = comm[j]
                if ci == cj:
                    if i < j:
                        new_self[ci] += w
                else:
                    new_adj[ci][cj] = new_adj[ci].get(cj, 0.0) + w
        adj, self_w = new_adj, new_self
        history.append(modularity(graph, dict(zip(graph.nodes, membership))))
        if size == 1:
            break

    labels = _canonical_labels(graph.nodes, membership)
    q = modularity(graph, labels) if graph.n_edges else 0.0
    return CommunityAssignment(labels, q, seed, max(labels.values()) + 1, history)


def _canonical_labels(nodes: list[str], membership: list[int]) -> dict[str, int]:
    groups: dict[int, list[str]] = defaultdict(list)
    for node, m in zip(nodes, membership):
        groups[m].append(node)
    ordered = sorted(groups.values(), key=lambda g: (-len(g), min(g)))
    return {node: k for k, g in enumerate(ordered) for node in g}
