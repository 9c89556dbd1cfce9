"""Architectural debt analysis over a design structure matrix and revision history."""

__version__ = "0.1.0"

from .coupling import CouplingReport, VisibilityMatrix, propagation_cost, transitive_closure
from .drh import DlReport, DrhModule, DrhStructure, build_drh, decoupling_level, score_partition
from .flaws import FlawInstance, FlawKind, FlawReport, Thresholds, flaw_report
from .history import churn_stats, compare_snapshots, issue_stats, release_overlap
from .ingest import LinkRule, link_commits, parse_deps, parse_gitlog, parse_issues
from .model import (
    CoChangeMatrix,
    Commit,
    DependencyEdge,
    DependencyGraph,
    DepKind,
    FileNode,
    Issue,
    IssueKind,
    IssueStatus,
    Release,
    Snapshot,
    build_snapshot,
    cochange_matrix,
)
from .roots import bug_weights, detect_roots, drspace
from .stats import mann_whitney_u

__all__ = [
    "CoChangeMatrix", "Commit", "CouplingReport", "DepKind", "DependencyEdge", "DependencyGraph",
    "DlReport", "DrhModule", "DrhStructure", "FileNode", "FlawInstance", "FlawKind", "FlawReport",
    "Issue", "IssueKind", "IssueStatus", "LinkRule", "Release", "Snapshot", "Thresholds",
    "VisibilityMatrix", "bug_weights", "build_drh", "build_snapshot", "churn_stats", "cochange_matrix",
    "compare_snapshots", "decoupling_level", "detect_roots", "drspace", "flaw_report", "issue_stats",
    "link_commits", "mann_whitney_u", "parse_deps", "parse_gitlog", "parse_issues", "propagation_cost",
    "release_overlap", "score_partition", "transitive_closure",
]
