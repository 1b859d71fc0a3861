"""Synthetic interaction traces drawn from the null model, optionally with planted groups.

Randomness comes from numpy's PCG64 generator. The integer seed feeds a
``SeedSequence`` that is spawned into three independent child streams, used
in a fixed order: engagement profiles, post filling, and group planting.
Equal seeds give bit-identical traces on every platform numpy supports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import IO

import numpy as np

from cobackbone.ingest import InteractionRecord

DEFAULT_START = datetime(2018, 9, 3, tzinfo=timezone.utc)  # a Monday


@dataclass(frozen=True)
class PostSizes:
    """Slot-count distribution: constant ``k`` or Zipf(``s``) truncated to ``1..max``."""

    kind: str = "zipf"
    k: int = 10
    s: float = 1.0
    max: int = 50

    def __post_init__(self):
        if self.kind not in ("constant", "zipf"):
            raise ValueError(f"unknown post size distribution {self.kind!r}")
        if self.kind == "constant" and self.k < 1:
            raise ValueError("constant post size must be >= 1")
        if self.kind == "zipf" and (self.max < 1 or self.s < 0):
            raise ValueError("zipf post sizes need max >= 1 and s >= 0")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(n, self.k, dtype=np.int64)
        support = np.arange(1, self.max + 1)
        p = support ** -float(self.s)
        return rng.choice(support, size=n, p=p / p.sum())


@dataclass(frozen=True)
class SynthSpec:
    n_commenters: int
    n_influencers: int
    n_posts: int
    engagement_skew: float = 1.0
    post_sizes: PostSizes = PostSizes()
    planted_groups: tuple[tuple[int, int], ...] = ()  # (size, n_shared_posts)
    seed: int = 0
    start: datetime = DEFAULT_START

    def __post_init__(self):
        for name in ("n_commenters", "n_influencers", "n_posts"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.engagement_skew < 0:
            raise ValueError("engagement_skew must be >= 0")
        for size, shared in self.planted_groups:
            if size < 2 or shared < 1:
                raise ValueError("planted groups need size >= 2 and at least one shared post")
        if sum(size for size, _ in self.planted_groups) > self.n_commenters:
            raise ValueError("planted groups together exceed n_commenters")


@dataclass
class SynthTrace:
    records: list[InteractionRecord]
    ground_truth: dict[str, str] = field(default_factory=dict)


def commenter_id(k: int) -> str:
    return f"c{k:06d}"


def _streams(seed: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(3)]


def engagement_profiles(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """One Zipf-shaped categorical profile per influencer over a random commenter ranking."""
    n = spec.n_commenters
    base = np.arange(1, n + 1, dtype=float) ** -spec.engagement_skew
    base /= base.sum()
    profiles = np.empty((spec.n_influencers, n))
    for i in range(spec.n_influencers):
        profiles[i, rng.permutation(n)] = base
    return profiles


def _timestamp(spec: SynthSpec, offset: int) -> datetime:
    return spec.start + timedelta(seconds=int(offset))


def sample_null_trace(spec: SynthSpec) -> list[InteractionRecord]:
    """Draw a trace in which every commenter acts independently.

    Posts go round-robin to influencers. Each post draws its slot count from
    ``spec.post_sizes`` and fills every slot with a commenter sampled from
    the influencer's profile, with replacement; one record per slot, so
    repeated draws become repeated comments by the same commenter.
    """
    profile_rng, post_rng, _ = _streams(spec.seed)
    profiles = engagement_profiles(spec, profile_rng)
    cumulative = np.cumsum(profiles, axis=1)
    cumulative[:, -1] = 1.0
    slots = spec.post_sizes.draw(post_rng, spec.n_posts)
    window = int(timedelta(days=7).total_seconds())

    records = []
    for p in range(spec.n_posts):
        i = p % spec.n_influencers
        draws = np.searchsorted(cumulative[i], post_rng.random(int(slots[p])), side="right")
        offsets = post_rng.integers(0, window, size=len(draws))
        for c, off in zip(draws.tolist(), offsets.tolist()):
            records.append(
                InteractionRecord(
                    commenter_id=commenter_id(c),
                    influencer_id=f"i{i:04d}",
                    post_id=f"p{p:07d}",
                    timestamp=_timestamp(spec, off),
                )
            )
    return records


def plant_groups(trace: list[InteractionRecord], spec: SynthSpec) -> SynthTrace:
    """Append coordinated groups: each gets fresh posts commented on by exactly its members.

    Members are disjoint, drawn from the background population. Each group's
    posts belong to a dedicated influencer, so background profiles stay as
    sampled. Ground truth maps every commenter to ``group<k>`` or ``background``.
    """
    if not spec.planted_groups:
        raise ValueError("no planted groups to add")
    _, _, plant_rng = _streams(spec.seed)
    order = plant_rng.permutation(spec.n_commenters)
    window = int(timedelta(days=7).total_seconds())

    truth = {commenter_id(c): "background" for c in range(spec.n_commenters)}
    records = list(trace)
    used = 0
    for g, (size, shared) in enumerate(spec.planted_groups):
        members = sorted(order[used : used + size].tolist())
        used += size
        for c in members:
            truth[commenter_id(c)] = f"group{g}"
        for j in range(shared):
            offsets = plant_rng.integers(0, window, size=size)
            for c, off in zip(members, offsets.tolist()):
                records.append(
                    InteractionRecord(
                        commenter_id=commenter_id(c),
                        influencer_id=f"planted{g:02d}",
                        post_id=f"g{g:02d}p{j:05d}",
                        timestamp=_timestamp(spec, off),
                    )
                )
    return SynthTrace(records, truth)


def generate(spec: SynthSpec) -> SynthTrace:
    """Null trace, plus planted groups when any are requested."""
    trace = sample_null_trace(spec)
    if spec.planted_groups:
        return plant_groups(trace, spec)
    return SynthTrace(trace, {commenter_id(c): "background" for c in range(spec.n_commenters)})


def dump_ground_truth(truth: dict[str, str], fp: IO[str]) -> None:
    json.dump(dict(sorted(truth.items())), fp, indent=1, sort_keys=True)
    fp.write("\n")
