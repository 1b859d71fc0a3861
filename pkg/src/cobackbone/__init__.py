"""Backbone extraction and community analysis for co-commenter networks."""

from cobackbone.community import CommunityAssignment, louvain, modularity
from cobackbone.ingest import (
    InteractionRecord,
    Snapshot,
    WindowSpec,
    filter_single_post_commenters,
    parse_records,
    window_partition,
)
from cobackbone.nullmodel import Backbone, engagement_table, extract_backbone
from cobackbone.projection import CoCommentGraph, build_graph

__version__ = "0.1.0"

__all__ = [
    "Backbone",
    "CoCommentGraph",
    "CommunityAssignment",
    "InteractionRecord",
    "Snapshot",
    "WindowSpec",
    "build_graph",
    "engagement_table",
    "extract_backbone",
    "filter_single_post_commenters",
    "louvain",
    "modularity",
    "parse_records",
    "window_partition",
]
