from __future__ import annotations

import re
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import settings

from cobackbone.ingest import InteractionRecord, snapshot_from_records

settings.register_profile("repo", derandomize=True, deadline=None)
settings.load_profile("repo")

T0 = datetime(2018, 9, 3, 10, 0, tzinfo=timezone.utc)  # a Monday


def rec(commenter, influencer, post, ts=T0, **kw):
    return InteractionRecord(commenter, influencer, post, ts, **kw)


# Toy network: influencer i with posts p1..p4 (3, 2, 3, 3 unique commenters),
# influencer j with p5..p7 (2, 2, 3). Commenters c, d, e plus one-off fillers.
TOY_MEMBERS = {
    "p1": ("i", ["c", "d", "x1"]),
    "p2": ("i", ["d", "x2"]),
    "p3": ("i", ["c", "e", "x3"]),
    "p4": ("i", ["c", "x4", "x5"]),
    "p5": ("j", ["d", "x6"]),
    "p6": ("j", ["x7", "x8"]),
    "p7": ("j", ["c", "e", "x9"]),
}


def toy_records():
    out = []
    for k, (post, (influencer, members)) in enumerate(sorted(TOY_MEMBERS.items())):
        for m in members:
            out.append(rec(m, influencer, post, T0 + timedelta(minutes=k)))
    return out


@pytest.fixture
def toy_snapshot():
    return snapshot_from_records(toy_records())


COMMON_WORDS = ["hoje", "muito", "lindo", "parabens", "amei", "verdade", "sempre", "nunca"]
TOPIC_WORDS = [
    ["gol", "jogo", "time", "campeonato", "juiz", "torcida"],
    ["voto", "urna", "debate", "candidato", "eleicao", "governo"],
    ["receita", "bolo", "forno", "chocolate", "massa", "sabor"],
]


def text_trace_records(seed: int = 0, weeks: int = 2):
    """Planted-group synthetic trace over several weeks, with topical comment text.

    Members of planted group ``k`` draw half their words from topic ``k``;
    everybody else writes from a shared vocabulary. Some comments carry
    uppercase words, mentions, hashtags, emojis, reply flags and sentiment.
    """
    from dataclasses import replace

    from cobackbone.synth import PostSizes, SynthSpec, generate

    rng = np.random.default_rng(seed)
    out = []
    for week in range(weeks):
        spec = SynthSpec(
            n_commenters=300,
            n_influencers=6,
            n_posts=80,
            engagement_skew=1.0,
            post_sizes=PostSizes("zipf", s=1.0, max=40),
            planted_groups=((15, 12),) * 3,
            seed=seed * 100 + week,
            start=T0 + timedelta(days=7 * week),
        )
        trace = generate(spec)
        for r in trace.records:
            label = trace.ground_truth[r.commenter_id]
            pool = COMMON_WORDS
            if label.startswith("group"):
                pool = COMMON_WORDS + TOPIC_WORDS[int(label[5:])] * 2
            words = [str(w) for w in rng.choice(pool, size=6)]
            roll = rng.random()
            if roll < 0.1:
                words.append("@amigo")
            elif roll < 0.2:
                words.append("#top")
            elif roll < 0.3:
                words[0] = words[0].upper()
            elif roll < 0.35:
                words.append("\U0001F600")
            out.append(
                replace(
                    r,
                    text=" ".join(words),
                    is_reply=bool(rng.random() < 0.2),
                    sentiment=int(rng.integers(-4, 5)),
                )
            )
    return out


def write_text_trace(path, seed: int = 0, weeks: int = 2):
    from cobackbone.ingest import write_records_jsonl

    with open(path, "w", encoding="utf-8") as fp:
        write_records_jsonl(text_trace_records(seed, weeks), fp)
    return path


# ---------------------------------------------------------------- acceptance summary

_CRITERION_RE = re.compile(r"test_criterion_(\d+)")
_outcomes: dict[int, list[str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    m = _CRITERION_RE.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes.setdefault(n, []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        results = _outcomes[n]
        verdict = "PASS" if all(r == "passed" for r in results) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {verdict}")
