"""Command-line entry point: file-based pipeline stages plus the synthetic generator.

Every subcommand writes its artifacts into a hidden staging directory under
the output directory and moves them into place only once the whole command
succeeded, so a failed run leaves nothing half-written behind. Each run also
writes ``<command>.manifest.json`` listing the resolved parameters and the
sha256 digest of every input and output.

Config files are plain ``key = value`` lines (``#`` starts a comment). Keys
are the field names of :class:`PipelineConfig`; command-line flags win over
the file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import asdict, dataclass
from datetime import timedelta
from pathlib import Path

import numpy as np

from cobackbone import __version__
from cobackbone.community import CommunityAssignment, dump_assignment, load_assignment, louvain
from cobackbone.dynamics import WindowState, temporal_report
from cobackbone.errors import CobackboneError, ConfigError, InputError, ResourceError
from cobackbone.ingest import (
    WindowSpec,
    dump_snapshot,
    filter_single_post_commenters,
    load_snapshot,
    parse_records,
    window_partition,
    write_records_jsonl,
)
from cobackbone.nullmodel import extract_backbone
from cobackbone.projection import CoCommentGraph, build_graph, graph_stats, read_edgelist, write_edgelist
from cobackbone.synth import PostSizes, SynthSpec, dump_ground_truth, generate
from cobackbone.text.lexicon import (
    attribute_samples,
    gini_rank,
    kruskal_filter,
    load_lexicon,
    zscore_matrix,
)
from cobackbone.text.profiles import (
    FeatureVector,
    community_influencer_matrix,
    contrastive_matrix,
    feature_vector,
    influencer_dendrogram,
    interest_index,
    pca_2d,
    post_interest_leaders,
)
from cobackbone.text.tfidf import (
    TextConfig,
    baseline_document,
    build_corpus,
    community_comments,
    load_stopwords,
    tfidf,
    top_words,
)

log = logging.getLogger("cobackbone")

WEEKDAYS = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]
MANIFEST_FORMAT = "cobackbone-manifest v1"


@dataclass
class PipelineConfig:
    input: str | None = None
    format: str = "jsonl"
    strict_parse: bool = False
    window_days: float = 7.0
    anchor: str = "monday"
    utc_offset_hours: float = 0.0
    max_clique: int | None = None
    alpha: float = 0.05
    strict: bool = True
    seed: int = 0
    threads: int = 1
    stopwords: str | None = None
    lexicon: str | None = None
    min_count: int = 10
    top_fraction: float = 0.01
    top_n: int = 100
    min_comments: int = 100
    p_threshold: float = 0.01
    gini_k: int = 5
    output: str = "out"

    def validate(self) -> None:
        if self.format not in ("jsonl", "csv"):
            raise ConfigError(f"format must be jsonl or csv, got {self.format!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.window_days <= 0:
            raise ConfigError("window_days must be positive")
        if self.anchor.lower() not in WEEKDAYS:
            raise ConfigError(f"anchor must be a weekday name, got {self.anchor!r}")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.max_clique is not None and self.max_clique < 2:
            raise ConfigError("max_clique must be at least 2")
        if not 0.0 <= self.top_fraction < 1.0:
            raise ConfigError("top_fraction must lie in [0, 1)")
        if self.top_n < 1 or self.min_count < 0 or self.min_comments < 1 or self.gini_k < 1:
            raise ConfigError("top_n, min_comments and gini_k must be positive; min_count non-negative")
        if not 0.0 < self.p_threshold < 1.0:
            raise ConfigError("p_threshold must lie in (0, 1)")

    def window_spec(self) -> WindowSpec:
        return WindowSpec(
            window_length=timedelta(days=self.window_days),
            anchor=WEEKDAYS.index(self.anchor.lower()),
            utc_offset=timedelta(hours=self.utc_offset_hours),
        )

    def text_config(self) -> TextConfig:
        stopwords = frozenset()
        if self.stopwords:
            with open_input(self.stopwords) as fp:
                stopwords = load_stopwords(fp)
        return TextConfig(stopwords, self.min_count, self.top_fraction, self.top_n)


_FIELD_TYPES = {
    "input": str, "format": str, "strict_parse": bool, "window_days": float, "anchor": str,
    "utc_offset_hours": float, "max_clique": int, "alpha": float, "strict": bool, "seed": int,
    "threads": int, "stopwords": str, "lexicon": str, "min_count": int, "top_fraction": float,
    "top_n": int, "min_comments": int, "p_threshold": float, "gini_k": int, "output": str,
}
_OPTIONAL = {"input", "max_clique", "stopwords", "lexicon"}


def _convert(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    value = raw.strip()
    if key in _OPTIONAL and value.lower() in ("", "none"):
        return None
    if kind is bool:
        lowered = value.lower()
        if lowered in ("true", "yes", "on", "1"):
            return True
        if lowered in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        return kind(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind.__name__}") from exc


def load_config(path: str | None, overrides: dict | None = None) -> PipelineConfig:
    """Defaults, then the ``key = value`` file, then ``overrides``."""
    values: dict = {}
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _convert(key, raw)
    values.update(overrides or {})
    config = PipelineConfig(**values)
    config.validate()
    return config


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fp:
        for block in iter(lambda: fp.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def open_input(path: str, mode: str = "r"):
    try:
        if "b" in mode:
            return open(path, mode)
        return open(path, mode, encoding="utf-8", newline="" if path.endswith(".csv") else None)
    except FileNotFoundError as exc:
        raise InputError(f"input file not found: {path}") from exc
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc


class Run:
    """Stage outputs under a temporary directory and move them into the output directory on success."""

    def __init__(self, output: str, command: str):
        self.root = Path(output)
        self.command = command
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            self.staging = Path(tempfile.mkdtemp(prefix=f".staging-{command}-", dir=self.root))
        except OSError as exc:
            raise ConfigError(f"output directory {output} is not writable: {exc.strerror}") from exc
        self.outputs: list[str] = []
        self.inputs: dict[str, str] = {}

    def path(self, rel: str) -> Path:
        target = self.staging / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        if rel not in self.outputs:
            self.outputs.append(rel)
        return target

    def open(self, rel: str):
        return open(self.path(rel), "w", encoding="utf-8", newline="\n")

    def staged(self, rel: str) -> Path:
        return self.staging / rel

    def add_input(self, path: str | None) -> None:
        if path and path not in self.inputs:
            p = Path(path)
            if not p.is_file():
                raise InputError(f"input file not found: {path}")
            self.inputs[path] = sha256_file(p)

    def write_json(self, rel: str, obj) -> None:
        with self.open(rel) as fp:
            json.dump(obj, fp, indent=1, sort_keys=True, ensure_ascii=False)
            fp.write("\n")

    def commit(self, parameters: dict) -> None:
        manifest = {
            "format": MANIFEST_FORMAT,
            "tool": "cobackbone",
            "version": __version__,
            "command": self.command,
            "parameters": parameters,
            "inputs": [{"path": p, "sha256": d} for p, d in sorted(self.inputs.items())],
            "outputs": [
                {"path": rel, "sha256": sha256_file(self.staging / rel)} for rel in sorted(self.outputs)
            ],
        }
        self.write_json(f"{self.command}.manifest.json", manifest)
        for rel in sorted(self.outputs):
            dest = self.root / rel
            dest.parent.mkdir(parents=True, exist_ok=True)
            os.replace(self.staging / rel, dest)
        shutil.rmtree(self.staging, ignore_errors=True)

    def abort(self) -> None:
        shutil.rmtree(self.staging, ignore_errors=True)


def _window_name(window: int) -> str:
    return f"window-{window:04d}"


# ---------------------------------------------------------------- stages


def stage_ingest(config: PipelineConfig, run: Run) -> list[str]:
    if not config.input:
        raise ConfigError("no input trace given (use --input or 'input =' in the config file)")
    run.add_input(config.input)
    with open_input(config.input, "rb") as fp:
        parsed = parse_records(fp, config.format, strict=config.strict_parse)
    if parsed.malformed:
        log.warning("%d malformed lines skipped (first at line %d)", parsed.malformed_count, parsed.malformed[0])
    if not parsed.records:
        raise InputError(f"{config.input} contains no well-formed records")
    snapshots = window_partition(parsed.records, config.window_spec())
    written, per_window = [], []
    for snap in snapshots:
        filtered = filter_single_post_commenters(snap)
        rel = f"snapshots/{_window_name(snap.window_index)}.json"
        with run.open(rel) as fp:
            dump_snapshot(filtered, fp)
        written.append(rel)
        per_window.append(
            {
                "window": snap.window_index,
                "start": snap.start.isoformat() if snap.start else None,
                "records": len(snap.comments),
                "commenters": len(snap.commenters),
                "commenters_after_filter": len(filtered.commenters),
                "posts": len(snap.posts),
                "posts_after_filter": len(filtered.posts),
            }
        )
    run.write_json(
        "ingest_report.json",
        {"records": len(parsed.records), "malformed": parsed.malformed, "windows": per_window},
    )
    return written


def _load_snapshots(paths, run: Run) -> dict:
    out = {}
    for path in paths:
        run.add_input(str(path))
        with open_input(str(path)) as fp:
            snap = load_snapshot(fp)
        if snap.window_index in out:
            raise InputError(f"two snapshots for window {snap.window_index}")
        out[snap.window_index] = snap
    return out


def _load_graphs(paths, run: Run) -> dict[int, CoCommentGraph]:
    out = {}
    for path in paths:
        run.add_input(str(path))
        with open_input(str(path)) as fp:
            try:
                graph = read_edgelist(fp)
            except InputError:
                raise
            except ValueError as exc:
                raise InputError(f"{path}: malformed edge list ({exc})") from exc
        if graph.window_index in out:
            raise InputError(f"two edge lists for window {graph.window_index}")
        out[graph.window_index] = graph
    return out


def _load_assignments(paths, run: Run) -> dict[int, CommunityAssignment]:
    out = {}
    for path in paths:
        run.add_input(str(path))
        with open_input(str(path)) as fp:
            try:
                assignment, window = load_assignment(fp)
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"{path}: not a community assignment file ({exc})") from exc
        if window is None:
            raise InputError(f"{path}: assignment has no window index")
        out[int(window)] = assignment
    return out


def _require_window(table: dict, window: int, what: str):
    if window not in table:
        raise InputError(f"no {what} for window {window}")
    return table[window]


def stage_graph(config: PipelineConfig, run: Run, snapshot_paths) -> list[str]:
    snapshots = _load_snapshots(snapshot_paths, run)
    written = []
    for window, snap in sorted(snapshots.items()):
        graph = build_graph(snap, max_clique=config.max_clique)
        rel = f"graphs/{_window_name(window)}.tsv"
        with run.open(rel) as fp:
            write_edgelist(graph, fp)
        run.write_json(f"graphs/{_window_name(window)}.stats.json", graph_stats(graph))
        written.append(rel)
    return written


def stage_backbone(config: PipelineConfig, run: Run, snapshot_paths, graph_paths) -> list[str]:
    snapshots = _load_snapshots(snapshot_paths, run)
    graphs = _load_graphs(graph_paths, run)
    written = []
    for window, graph in sorted(graphs.items()):
        snap = _require_window(snapshots, window, "snapshot")
        backbone = extract_backbone(graph, snap, alpha=config.alpha, strict=config.strict, threads=config.threads)
        rel = f"backbones/{_window_name(window)}.tsv"
        with run.open(rel) as fp:
            write_edgelist(backbone.graph, fp, header=backbone.header())
        run.write_json(f"backbones/{_window_name(window)}.retention.json", backbone.retention_report())
        log.info("window %d: kept %d of %d edges", window, int(backbone.kept.sum()), graph.n_edges)
        written.append(rel)
    return written


def stage_communities(config: PipelineConfig, run: Run, backbone_paths) -> list[str]:
    backbones = _load_graphs(backbone_paths, run)
    written = []
    for window, graph in sorted(backbones.items()):
        if graph.n_edges == 0:
            log.warning("window %d: empty backbone, no communities written", window)
            continue
        assignment = louvain(graph, seed=config.seed)
        rel = f"communities/{_window_name(window)}.json"
        with run.open(rel) as fp:
            dump_assignment(assignment, fp, window=window)
        written.append(rel)
    return written


def _window_documents(snapshot, assignment, text_config):
    """Sparse TF-IDF vectors per community and the average-community baseline, or None."""
    if assignment.community_count < 2:
        return None, None, None
    docs = build_corpus(snapshot, assignment, text_config)
    vectors = tfidf(docs, text_config.top_n)
    baseline = baseline_document(snapshot, docs, text_config)
    return docs, {d.community: v for d, v in zip(docs, vectors)}, baseline


def _lexicon_report(assignment, snapshot, lexicon_path, config: PipelineConfig) -> dict:
    with open_input(lexicon_path) as fp:
        lexicon = load_lexicon(fp)
    grouped = community_comments(snapshot, assignment)
    labels = sorted(grouped)
    per_community = {g: attribute_samples((r.text for r in grouped[g]), lexicon) for g in labels}
    samples = {name: [per_community[g][name] for g in labels] for name in lexicon.names}
    selected = sorted(kruskal_filter(samples, config.p_threshold))
    means = {name: [float(np.mean(s)) if s else 0.0 for s in samples[name]] for name in lexicon.names}
    ranked = gini_rank({name: means[name] for name in selected}, config.gini_k) if selected else []
    report = {
        "communities": labels,
        "frequencies": {name: means[name] for name in lexicon.names},
        "kruskal_selected": selected,
        "gini_top": ranked,
        "zscores": None,
    }
    if ranked and len(labels) >= 2:
        matrix = np.array([[means[name][k] for name in ranked] for k in range(len(labels))])
        try:
            report["zscores"] = {"rows": labels, "columns": ranked, "values": zscore_matrix(matrix, ranked).tolist()}
        except ValueError as exc:
            report["zscores_error"] = str(exc)
    return report


def text_report(snapshot, assignment: CommunityAssignment, config: PipelineConfig, text_config: TextConfig) -> dict:
    notes = []
    report: dict = {"window": snapshot.window_index}
    docs, _, _ = _window_documents(snapshot, assignment, text_config)
    if docs is None:
        notes.append("fewer than two communities: no TF-IDF report")
        report["top_words"] = None
    else:
        report["top_words"] = top_words(docs, 10)
    interest = interest_index(assignment, snapshot)
    report["interest_index"] = interest.to_dict()
    report["post_leaders"] = post_interest_leaders(interest)
    influencers = community_influencer_matrix(assignment, snapshot)
    report["community_influencer"] = influencers.to_dict()
    try:
        report["dendrogram"] = influencer_dendrogram(influencers)
    except ValueError as exc:
        report["dendrogram"] = None
        notes.append(f"dendrogram skipped: {exc}")
    report["contrastive"] = contrastive_matrix(assignment, snapshot, config.min_comments)

    grouped = community_comments(snapshot, assignment)
    rows = [g for g in range(assignment.community_count) if grouped.get(g)]
    vectors = [feature_vector(assignment, snapshot, g).as_array() for g in rows]
    report["features"] = {
        "rows": rows,
        "columns": FeatureVector.names(),
        "values": [v.tolist() for v in vectors],
    }
    try:
        pca = pca_2d(vectors, FeatureVector.names())
        report["pca"] = {
            "rows": rows,
            "coordinates": pca.coordinates.tolist(),
            "loadings": {"rows": pca.metric_names, "columns": ["pc1", "pc2"], "values": pca.loadings.tolist()},
            "explained_ratio": pca.explained_ratio.tolist(),
        }
    except ValueError as exc:
        report["pca"] = None
        notes.append(f"PCA skipped: {exc}")
    report["lexicon"] = (
        _lexicon_report(assignment, snapshot, config.lexicon, config) if config.lexicon else None
    )
    report["notes"] = notes
    return report


def stage_text(config: PipelineConfig, run: Run, snapshot_paths, community_paths) -> list[str]:
    snapshots = _load_snapshots(snapshot_paths, run)
    assignments = _load_assignments(community_paths, run)
    run.add_input(config.stopwords)
    run.add_input(config.lexicon)
    text_config = config.text_config()
    written = []
    for window, assignment in sorted(assignments.items()):
        snap = _require_window(snapshots, window, "snapshot")
        rel = f"text/{_window_name(window)}.json"
        run.write_json(rel, text_report(snap, assignment, config, text_config))
        written.append(rel)
    return written


def stage_dynamics(config: PipelineConfig, run: Run, snapshot_paths, backbone_paths, community_paths) -> list[str]:
    snapshots = _load_snapshots(snapshot_paths, run)
    backbones = _load_graphs(backbone_paths, run)
    assignments = _load_assignments(community_paths, run)
    run.add_input(config.stopwords)
    text_config = config.text_config()
    states = []
    for window, assignment in sorted(assignments.items()):
        snap = _require_window(snapshots, window, "snapshot")
        _, docs, baseline = _window_documents(snap, assignment, text_config)
        states.append(WindowState(window, snap, _require_window(backbones, window, "backbone"), assignment, docs, baseline))
    run.write_json("dynamics.json", temporal_report(states))
    return ["dynamics.json"]


def stage_synth(spec: SynthSpec, run: Run) -> list[str]:
    trace = generate(spec)
    with run.open("trace.jsonl") as fp:
        write_records_jsonl(trace.records, fp)
    with run.open("ground_truth.json") as fp:
        dump_ground_truth(trace.ground_truth, fp)
    return ["trace.jsonl", "ground_truth.json"]


def stage_pipeline(config: PipelineConfig, run: Run) -> None:
    snapshots = [run.staged(rel) for rel in stage_ingest(config, run)]
    graphs = [run.staged(rel) for rel in stage_graph(config, run, snapshots)]
    backbones = [run.staged(rel) for rel in stage_backbone(config, run, snapshots, graphs)]
    communities = [run.staged(rel) for rel in stage_communities(config, run, backbones)]
    stage_text(config, run, snapshots, communities)
    stage_dynamics(config, run, snapshots, backbones, communities)
    # intermediate files are outputs of this run, not inputs
    staged_root = str(run.staging)
    run.inputs = {p: d for p, d in run.inputs.items() if not p.startswith(staged_root)}


# ---------------------------------------------------------------- argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("-o", "--output", default=argparse.SUPPRESS, help="output directory")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    p.add_argument("-v", "--verbose", action="store_true")


def _add_ingest_opts(p):
    p.add_argument("--input", default=argparse.SUPPRESS, help="interaction trace (JSONL or CSV)")
    p.add_argument("--format", choices=["jsonl", "csv"], default=argparse.SUPPRESS)
    p.add_argument("--strict-parse", dest="strict_parse", action="store_true", default=argparse.SUPPRESS)
    p.add_argument("--window-days", dest="window_days", type=float, default=argparse.SUPPRESS)
    p.add_argument("--anchor", default=argparse.SUPPRESS, help="weekday on which windows start")
    p.add_argument("--utc-offset-hours", dest="utc_offset_hours", type=float, default=argparse.SUPPRESS)


def _add_backbone_opts(p):
    p.add_argument("--alpha", type=float, default=argparse.SUPPRESS)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--strict", dest="strict", action="store_true", default=argparse.SUPPRESS,
                       help="keep edges with weight > percentile (default)")
    group.add_argument("--lenient", dest="strict", action="store_false", default=argparse.SUPPRESS,
                       help="keep edges with weight >= percentile")


def _add_text_opts(p, lexicon=True):
    p.add_argument("--stopwords", default=argparse.SUPPRESS)
    p.add_argument("--min-count", dest="min_count", type=int, default=argparse.SUPPRESS)
    p.add_argument("--top-fraction", dest="top_fraction", type=float, default=argparse.SUPPRESS)
    p.add_argument("--top-n", dest="top_n", type=int, default=argparse.SUPPRESS)
    if lexicon:
        p.add_argument("--lexicon", default=argparse.SUPPRESS)
        p.add_argument("--min-comments", dest="min_comments", type=int, default=argparse.SUPPRESS)
        p.add_argument("--p-threshold", dest="p_threshold", type=float, default=argparse.SUPPRESS)
        p.add_argument("--gini-k", dest="gini_k", type=int, default=argparse.SUPPRESS)


def _plant(value: str) -> tuple[int, int]:
    try:
        size, shared = value.split(":")
        return int(size), int(shared)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected SIZE:SHARED_POSTS, got {value!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cobackbone", description="Co-commenter backbone extraction and community analysis.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a trace into filtered per-window snapshots")
    _add_common(p)
    _add_ingest_opts(p)

    p = sub.add_parser("graph", help="project snapshots onto co-commenter graphs")
    _add_common(p)
    p.add_argument("--snapshot", nargs="+", required=True)
    p.add_argument("--max-clique", dest="max_clique", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("backbone", help="filter graphs down to their backbones")
    _add_common(p)
    p.add_argument("--snapshot", nargs="+", required=True)
    p.add_argument("--graph", nargs="+", required=True)
    _add_backbone_opts(p)

    p = sub.add_parser("communities", help="Louvain communities of backbones")
    _add_common(p)
    p.add_argument("--backbone", nargs="+", required=True)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("text", help="content and activity reports per community")
    _add_common(p)
    p.add_argument("--snapshot", nargs="+", required=True)
    p.add_argument("--communities", nargs="+", required=True)
    _add_text_opts(p)

    p = sub.add_parser("dynamics", help="persistence, NMI and topic matching across windows")
    _add_common(p)
    p.add_argument("--snapshot", nargs="+", required=True)
    p.add_argument("--backbone", nargs="+", required=True)
    p.add_argument("--communities", nargs="+", required=True)
    _add_text_opts(p, lexicon=False)

    p = sub.add_parser("synth", help="generate a synthetic null trace, optionally with planted groups")
    _add_common(p)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--commenters", type=int, default=500)
    p.add_argument("--influencers", type=int, default=20)
    p.add_argument("--posts", type=int, default=200)
    p.add_argument("--skew", type=float, default=1.0, help="Zipf exponent of engagement profiles")
    p.add_argument("--post-sizes", dest="post_sizes", choices=["zipf", "constant"], default="zipf")
    p.add_argument("--post-size-k", dest="post_size_k", type=int, default=10)
    p.add_argument("--post-size-s", dest="post_size_s", type=float, default=1.0)
    p.add_argument("--post-size-max", dest="post_size_max", type=int, default=50)
    p.add_argument("--plant", action="append", type=_plant, default=[], metavar="SIZE:SHARED")

    p = sub.add_parser("pipeline", help="run every stage from a trace")
    _add_common(p)
    _add_ingest_opts(p)
    p.add_argument("--max-clique", dest="max_clique", type=int, default=argparse.SUPPRESS)
    _add_backbone_opts(p)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    _add_text_opts(p)
    return parser


_STAGE_ARGS = {"snapshot", "graph", "backbone", "communities"}
_SYNTH_ARGS = {"commenters", "influencers", "posts", "skew", "post_sizes", "post_size_k", "post_size_s", "post_size_max", "plant"}


def _synth_spec(args: dict, config: PipelineConfig) -> SynthSpec:
    try:
        sizes = PostSizes(args["post_sizes"], args["post_size_k"], args["post_size_s"], args["post_size_max"])
        return SynthSpec(
            n_commenters=args["commenters"],
            n_influencers=args["influencers"],
            n_posts=args["posts"],
            engagement_skew=args["skew"],
            post_sizes=sizes,
            planted_groups=tuple(args["plant"]),
            seed=config.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    args = vars(ns)
    logging.basicConfig(
        level=logging.INFO if args.pop("verbose") else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    command = args.pop("command")
    config_path = args.pop("config")
    stage_args = {k: args.pop(k) for k in list(args) if k in _STAGE_ARGS}
    synth_args = {k: args.pop(k) for k in list(args) if k in _SYNTH_ARGS}

    out: Run | None = None
    try:
        config = load_config(config_path, args)
        out = Run(config.output, command)
        if config_path:
            out.add_input(config_path)
        parameters = asdict(config)
        if command == "ingest":
            stage_ingest(config, out)
        elif command == "graph":
            stage_graph(config, out, stage_args["snapshot"])
        elif command == "backbone":
            stage_backbone(config, out, stage_args["snapshot"], stage_args["graph"])
        elif command == "communities":
            stage_communities(config, out, stage_args["backbone"])
        elif command == "text":
            stage_text(config, out, stage_args["snapshot"], stage_args["communities"])
        elif command == "dynamics":
            stage_dynamics(config, out, stage_args["snapshot"], stage_args["backbone"], stage_args["communities"])
        elif command == "synth":
            spec = _synth_spec(synth_args, config)
            parameters = {"seed": config.seed, **{k: v for k, v in synth_args.items()}}
            parameters["plant"] = [list(g) for g in spec.planted_groups]
            stage_synth(spec, out)
        elif command == "pipeline":
            stage_pipeline(config, out)
        parameters.update({k: [str(p) for p in v] for k, v in stage_args.items()})
        parameters.pop("output", None)
        out.commit(parameters)
    except CobackboneError as exc:
        if out is not None:
            out.abort()
        print(f"cobackbone {command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except MemoryError:
        if out is not None:
            out.abort()
        print(f"cobackbone {command}: error: out of memory", file=sys.stderr)
        return ResourceError.exit_code
    except BaseException:
        if out is not None:
            out.abort()
        raise
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
