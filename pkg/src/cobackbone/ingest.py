"""Parsing of interaction traces and partitioning into time-window snapshots."""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import IO, Iterable

from cobackbone.errors import InputError, ParseError

logger = logging.getLogger(__name__)

CSV_FIELDS = ("commenter", "influencer", "post", "ts", "text", "is_reply", "sentiment")

# 1970-01-05 was a Monday; window grids are aligned to this instant.
_GRID_ORIGIN = datetime(1970, 1, 5, tzinfo=timezone.utc)


@dataclass(frozen=True)
class InteractionRecord:
    """One comment event."""

    commenter_id: str
    influencer_id: str
    post_id: str
    timestamp: datetime
    text: str | None = None
    is_reply: bool | None = None
    sentiment: int | None = None

    def __post_init__(self):
        for name in ("commenter_id", "influencer_id", "post_id"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise ValueError(f"{name} must be a non-empty string")
        if self.sentiment is not None and not -4 <= self.sentiment <= 4:
            raise ValueError(f"sentiment {self.sentiment} outside [-4, 4]")
        if self.timestamp.tzinfo is None:
            raise ValueError("timestamp must be timezone-aware")

    def to_dict(self) -> dict:
        out = {
            "commenter": self.commenter_id,
            "influencer": self.influencer_id,
            "post": self.post_id,
            "ts": format_timestamp(self.timestamp),
        }
        if self.text is not None:
            out["text"] = self.text
        if self.is_reply is not None:
            out["is_reply"] = self.is_reply
        if self.sentiment is not None:
            out["sentiment"] = self.sentiment
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "InteractionRecord":
        return cls(
            commenter_id=_require_str(obj, "commenter"),
            influencer_id=_require_str(obj, "influencer"),
            post_id=_require_str(obj, "post"),
            timestamp=parse_timestamp(_require_str(obj, "ts")),
            text=_optional_text(obj.get("text")),
            is_reply=_parse_bool(obj.get("is_reply")),
            sentiment=_parse_sentiment(obj.get("sentiment")),
        )


@dataclass(frozen=True)
class WindowSpec:
    window_length: timedelta = timedelta(days=7)
    anchor: int = 0  # weekday, Monday == 0
    utc_offset: timedelta = timedelta(0)

    def __post_init__(self):
        if self.window_length <= timedelta(0):
            raise ValueError("window_length must be positive")
        if not 0 <= self.anchor <= 6:
            raise ValueError("anchor must be a weekday number in 0..6")

    def slot(self, ts: datetime) -> int:
        """Absolute index of the window containing ``ts`` on the anchored grid."""
        origin = _GRID_ORIGIN + timedelta(days=self.anchor) - self.utc_offset
        return (ts - origin) // self.window_length

    def slot_start(self, slot: int) -> datetime:
        origin = _GRID_ORIGIN + timedelta(days=self.anchor) - self.utc_offset
        return origin + slot * self.window_length


@dataclass
class Snapshot:
    """All posts and unique-commenter sets observed in one time window."""

    window_index: int
    posts: dict[str, str]  # post_id -> influencer_id
    commenters_per_post: dict[str, frozenset[str]]
    posts_by_influencer: dict[str, frozenset[str]]
    comments: list[InteractionRecord] = field(default_factory=list)
    start: datetime | None = None

    @property
    def commenters(self) -> set[str]:
        out: set[str] = set()
        for members in self.commenters_per_post.values():
            out.update(members)
        return out

    def post_size(self, post_id: str) -> int:
        return len(self.commenters_per_post[post_id])

    def to_dict(self) -> dict:
        return {
            "window_index": self.window_index,
            "start": format_timestamp(self.start) if self.start else None,
            "posts": [
                {"post_id": p, "influencer_id": self.posts[p]} for p in sorted(self.posts)
            ],
            "commenters_per_post": {
                p: sorted(self.commenters_per_post[p]) for p in sorted(self.commenters_per_post)
            },
            "posts_by_influencer": {
                i: sorted(self.posts_by_influencer[i]) for i in sorted(self.posts_by_influencer)
            },
            "comments": [r.to_dict() for r in self.comments],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Snapshot":
        start = obj.get("start")
        return cls(
            window_index=int(obj["window_index"]),
            posts={p["post_id"]: p["influencer_id"] for p in obj["posts"]},
            commenters_per_post={
                p: frozenset(members) for p, members in obj["commenters_per_post"].items()
            },
            posts_by_influencer={
                i: frozenset(posts) for i, posts in obj["posts_by_influencer"].items()
            },
            comments=[InteractionRecord.from_dict(r) for r in obj["comments"]],
            start=parse_timestamp(start) if start else None,
        )


def dump_snapshot(snapshot: Snapshot, fp: IO[str]) -> None:
    json.dump(snapshot.to_dict(), fp, sort_keys=True, ensure_ascii=False, indent=1)
    fp.write("\n")


def load_snapshot(fp: IO[str]) -> Snapshot:
    try:
        return Snapshot.from_dict(json.load(fp))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"not a valid snapshot file: {exc}") from exc


@dataclass
class ParseResult:
    records: list[InteractionRecord]
    malformed: list[int]  # 1-based line numbers

    @property
    def malformed_count(self) -> int:
        return len(self.malformed)


def parse_timestamp(value: str) -> datetime:
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _require_str(obj: dict, key: str) -> str:
    value = obj.get(key)
    if not isinstance(value, str) or not value:
        raise ValueError(f"missing or empty field {key!r}")
    return value


def _optional_text(value) -> str | None:
    if value is None:
        return None
    if not isinstance(value, str):
        raise ValueError("text must be a string")
    return value


def _parse_bool(value) -> bool | None:
    if value is None or value == "":
        return None
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
    raise ValueError(f"cannot read {value!r} as a boolean")


def _parse_sentiment(value) -> int | None:
    if value is None or value == "":
        return None
    if isinstance(value, bool):
        raise ValueError("sentiment must be an integer")
    if isinstance(value, float) and not value.is_integer():
        raise ValueError("sentiment must be an integer")
    score = int(value)
    if not -4 <= score <= 4:
        raise ValueError(f"sentiment {score} outside [-4, 4]")
    return score


def _iter_jsonl(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("line is not a JSON object")
            yield lineno, InteractionRecord.from_dict(obj), None
        except ValueError as exc:
            yield lineno, None, exc


def _iter_csv(text: str):
    reader = csv.DictReader(io.StringIO(text, newline=""))
    if reader.fieldnames is None:
        return
    missing = {"commenter", "influencer", "post", "ts"} - set(reader.fieldnames)
    if missing:
        raise ParseError(f"csv header lacks columns {sorted(missing)}", 1)
    for row in reader:
        lineno = reader.line_num
        try:
            if None in row or any(v is None for v in row.values()):
                raise ValueError("wrong number of columns")
            cleaned = {k: (v if v != "" else None) for k, v in row.items()}
            yield lineno, InteractionRecord.from_dict(cleaned), None
        except ValueError as exc:
            yield lineno, None, exc


def parse_records(stream: IO[bytes] | bytes, fmt: str = "jsonl", strict: bool = False) -> ParseResult:
    """Parse a JSONL or CSV byte stream into records, keeping input order.

    Malformed lines are collected in ``ParseResult.malformed``. With
    ``strict=True`` the first one raises :class:`ParseError` instead.
    """
    try:
        raw = stream if isinstance(stream, (bytes, bytearray)) else stream.read()
    except OSError as exc:
        raise InputError(f"cannot read input: {exc}") from exc
    try:
        text = bytes(raw).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(f"input is not valid UTF-8: {exc}") from exc
    if fmt == "jsonl":
        rows = _iter_jsonl(text)
    elif fmt == "csv":
        rows = _iter_csv(text)
    else:
        raise ValueError(f"unknown format {fmt!r}")

    records: list[InteractionRecord] = []
    malformed: list[int] = []
    for lineno, record, exc in rows:
        if record is None:
            if strict:
                raise ParseError(f"malformed record on line {lineno}: {exc}", lineno)
            malformed.append(lineno)
            continue
        records.append(record)
    if malformed:
        logger.warning("skipped %d malformed line(s), first at line %d", len(malformed), malformed[0])
    return ParseResult(records, malformed)


def write_records_jsonl(records: Iterable[InteractionRecord], fp: IO[str]) -> None:
    for record in records:
        fp.write(json.dumps(record.to_dict(), sort_keys=True, ensure_ascii=False))
        fp.write("\n")


def snapshot_from_records(
    records: Iterable[InteractionRecord], window_index: int = 1, start: datetime | None = None
) -> Snapshot:
    """Group records into one snapshot without any time partitioning."""
    posts: dict[str, str] = {}
    members: dict[str, set[str]] = defaultdict(set)
    comments = []
    for r in records:
        owner = posts.setdefault(r.post_id, r.influencer_id)
        if owner != r.influencer_id:
            raise InputError(
                f"post {r.post_id!r} attributed to both {owner!r} and {r.influencer_id!r}"
            )
        members[r.post_id].add(r.commenter_id)
        comments.append(r)
    by_influencer: dict[str, set[str]] = defaultdict(set)
    for post, influencer in posts.items():
        by_influencer[influencer].add(post)
    return Snapshot(
        window_index=window_index,
        posts=posts,
        commenters_per_post={p: frozenset(m) for p, m in members.items()},
        posts_by_influencer={i: frozenset(p) for i, p in by_influencer.items()},
        comments=comments,
        start=start,
    )


def window_partition(records: Iterable[InteractionRecord], spec: WindowSpec = WindowSpec()) -> list[Snapshot]:
    """Split records into fixed-length windows on the anchored weekly grid.

    Window indices count from 1 at the earliest non-empty window. Empty
    windows are omitted, so indices can skip when the trace has gaps.
    """
    by_slot: dict[int, list[InteractionRecord]] = defaultdict(list)
    for r in records:
        by_slot[spec.slot(r.timestamp)].append(r)
    if not by_slot:
        return []
    first = min(by_slot)
    return [
        snapshot_from_records(by_slot[slot], window_index=slot - first + 1, start=spec.slot_start(slot))
        for slot in sorted(by_slot)
    ]


def filter_single_post_commenters(snapshot: Snapshot) -> Snapshot:
    """Drop commenters who appear in only one post's commenter set.

    Applied once; a commenter left with a single post after other removals
    is kept. Posts whose commenter set becomes empty are dropped.
    """
    counts = Counter()
    for members in snapshot.commenters_per_post.values():
        counts.update(members)
    keep = {c for c, n in counts.items() if n >= 2}

    commenters_per_post = {}
    for post, members in snapshot.commenters_per_post.items():
        kept = members & keep
        if kept:
            commenters_per_post[post] = frozenset(kept)
    posts = {p: i for p, i in snapshot.posts.items() if p in commenters_per_post}
    by_influencer: dict[str, set[str]] = defaultdict(set)
    for post, influencer in posts.items():
        by_influencer[influencer].add(post)
    return Snapshot(
        window_index=snapshot.window_index,
        posts=posts,
        commenters_per_post=commenters_per_post,
        posts_by_influencer={i: frozenset(p) for i, p in by_influencer.items()},
        comments=[r for r in snapshot.comments if r.commenter_id in keep and r.post_id in posts],
        start=snapshot.start,
    )
