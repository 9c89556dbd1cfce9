"""Revision-history statistics and before/after comparison."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from statistics import fmean
from typing import Callable, Iterable

from .coupling import propagation_cost, transitive_closure
from .drh import decoupling_level
from .errors import AdxError, EmptyHistory, EmptySample, InsufficientReleases
from .flaws import FlawKind, Thresholds, flaw_report
from .model import IssueKind, Snapshot, cochange_matrix
from .roots import detect_roots
from .stats import UTestResult, mann_whitney_u

CURVE_POINTS = tuple(k / 100 for k in range(1, 101))


@dataclass(frozen=True)
class ChurnStats:
    n: int
    per_file_churn: tuple[int, ...]
    per_commit_churn: tuple[int, ...]
    commit_files: tuple[frozenset[int], ...]
    ranking: tuple[int, ...]  # commit indices, highest churn first
    never_changed_fraction: float
    single_contributor_fraction: float

    def concentration(self, p: float) -> float:
        """Fraction of all files touched by the top ``p`` share of commits by churn."""
        if not 0 <= p <= 1:
            raise ValueError("p must lie in [0, 1]")
        k = math.ceil(p * len(self.ranking) - 1e-9)
        touched: set[int] = set()
        for ci in self.ranking[:k]:
            touched |= self.commit_files[ci]
        return len(touched) / self.n

    @property
    def curve(self) -> tuple[tuple[float, float], ...]:
        touched: set[int] = set()
        out = []
        done = 0
        for p in CURVE_POINTS:
            k = math.ceil(p * len(self.ranking) - 1e-9)
            for ci in self.ranking[done:k]:
                touched |= self.commit_files[ci]
            done = max(done, k)
            out.append((p, len(touched) / self.n))
        return tuple(out)

    @property
    def touched_fraction(self) -> float:
        return self.concentration(1.0)


def churn_stats(snapshot: Snapshot) -> ChurnStats:
    """Churn distribution, churn concentration and contributor statistics.

    A file counts as never changed when at most one commit touched it. Its
    contributors are the authors of the commits that touched it plus its
    declared creator; a file with exactly one contributor is single-contributor.
    """
    if not snapshot.commits:
        raise EmptyHistory("snapshot has no commits")
    n = snapshot.n
    per_file = [0] * n
    touches = [0] * n
    authors: list[set[str]] = [set() for _ in range(n)]
    for f in snapshot.files:
        if f.creator:
            authors[f.id].add(f.creator)
    for c in snapshot.commits:
        for ch in c.changes:
            per_file[ch.file] += ch.churn
            touches[ch.file] += 1
            authors[ch.file].add(c.author)
    per_commit = tuple(c.churn for c in snapshot.commits)
    ranking = tuple(sorted(range(len(per_commit)), key=lambda i: (-per_commit[i], i)))
    return ChurnStats(
        n=n,
        per_file_churn=tuple(per_file),
        per_commit_churn=per_commit,
        commit_files=tuple(c.files for c in snapshot.commits),
        ranking=ranking,
        never_changed_fraction=sum(1 for t in touches if t <= 1) / n,
        single_contributor_fraction=sum(1 for a in authors if len(a) == 1) / n,
    )


@dataclass(frozen=True)
class OverlapMatrix:
    windows: tuple[tuple[str, str], ...]  # (from release, to release)
    window_files: tuple[frozenset[int], ...]
    jaccard: tuple[tuple[float, ...], ...]
    min_normalized: tuple[tuple[float, ...], ...]

    def _mean(self, matrix, consecutive: bool) -> float | None:
        vals = [
            matrix[i][j]
            for i in range(len(matrix))
            for j in range(i + 1, len(matrix))
            if consecutive or j - i >= 2
        ]
        return fmean(vals) if vals else None

    @property
    def mean_nonconsecutive(self) -> float | None:
        return self._mean(self.jaccard, consecutive=False)

    @property
    def mean_all(self) -> float | None:
        return self._mean(self.jaccard, consecutive=True)

    @property
    def min_mean_nonconsecutive(self) -> float | None:
        return self._mean(self.min_normalized, consecutive=False)

    @property
    def min_mean_all(self) -> float | None:
        return self._mean(self.min_normalized, consecutive=True)


def release_overlap(snapshot: Snapshot) -> OverlapMatrix:
    """Jaccard overlap between the file sets changed in each release window.

    Window ``i`` holds commits with ``release[i] < timestamp <= release[i+1]``.
    """
    rels = snapshot.releases
    if len(rels) < 2:
        raise InsufficientReleases("release overlap needs at least two releases")
    windows = []
    for lo, hi in zip(rels, rels[1:]):
        files: set[int] = set()
        for c in snapshot.commits:
            if lo.timestamp < c.timestamp <= hi.timestamp:
                files |= c.files
        windows.append(frozenset(files))

    def jac(a, b):
        union = len(a | b)
        return len(a & b) / union if union else 0.0

    def mino(a, b):
        low = min(len(a), len(b))
        return len(a & b) / low if low else 0.0

    return OverlapMatrix(
        windows=tuple((lo.name, hi.name) for lo, hi in zip(rels, rels[1:])),
        window_files=tuple(windows),
        jaccard=tuple(tuple(jac(a, b) for b in windows) for a in windows),
        min_normalized=tuple(tuple(mino(a, b) for b in windows) for a in windows),
    )


@dataclass(frozen=True)
class IssueStats:
    opened: int
    fixed: int
    churn: dict[str, int]  # issues with at least one linked commit
    duration_days: dict[str, float]  # fixed issues
    files: dict[str, int]  # distinct files touched, issues with linked commits

    @property
    def changed_code(self) -> int:
        return len(self.churn)

    @property
    def mean_churn(self) -> float | None:
        return fmean(self.churn.values()) if self.churn else None

    @property
    def mean_duration(self) -> float | None:
        return fmean(self.duration_days.values()) if self.duration_days else None


def _in_window(ts: int | None, window: tuple[int | None, int | None] | None) -> bool:
    if ts is None:
        return False
    if window is None:
        return True
    lo, hi = window
    return (lo is None or ts >= lo) and (hi is None or ts < hi)


def issue_stats(
    snapshot: Snapshot,
    window: tuple[int | None, int | None] | None = None,
    kinds: Iterable[IssueKind] | None = None,
) -> IssueStats:
    """Counts, churn and durations for issues opened or fixed in ``window``.

    ``window`` is a half-open ``[start, end)`` range of UTC seconds; either
    bound may be None. Issues without linked commits count towards opened
    and fixed only.
    """
    kinds = set(kinds) if kinds is not None else None
    selected = [i for i in snapshot.issues if kinds is None or i.kind in kinds]
    churn: dict[str, int] = defaultdict(int)
    files: dict[str, set[int]] = defaultdict(set)
    wanted = {i.key for i in selected}
    for c in snapshot.commits:
        for key in c.linked_issues & wanted:
            churn[key] += c.churn
            files[key] |= c.files
    opened = fixed = 0
    out_churn, out_dur, out_files = {}, {}, {}
    for issue in selected:
        was_opened = _in_window(issue.opened_at, window)
        was_fixed = issue.is_fixed and _in_window(issue.closed_at, window)
        opened += was_opened
        fixed += was_fixed
        if not (was_opened or was_fixed):
            continue
        if issue.key in churn:
            out_churn[issue.key] = churn[issue.key]
            out_files[issue.key] = len(files[issue.key])
        if was_fixed and issue.duration_days is not None:
            out_dur[issue.key] = issue.duration_days
    return IssueStats(opened, fixed, out_churn, out_dur, out_files)


@dataclass(frozen=True)
class MetricDelta:
    metric: str
    before: float | None
    after: float | None
    test: UTestResult | None = None

    @property
    def delta(self) -> float | None:
        if self.before is None or self.after is None:
            return None
        return self.after - self.before

    @property
    def percent(self) -> float | None:
        """Relative change in percent, None when ``before`` is zero or missing."""
        if self.delta is None or not self.before:
            return None
        return 100.0 * self.delta / self.before


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[MetricDelta, ...]

    def __getitem__(self, metric: str) -> MetricDelta:
        for row in self.rows:
            if row.metric == metric:
                return row
        raise KeyError(metric)


def snapshot_measures(snapshot: Snapshot, thresholds: Thresholds | None = None) -> tuple[dict, dict]:
    """Scalar measures of one snapshot plus the per-issue samples behind them."""
    values: dict[str, float | None] = {"files": snapshot.n}
    all_issues = issue_stats(snapshot)
    bugs = issue_stats(snapshot, kinds=[IssueKind.BUG])
    values.update(
        issues_opened=all_issues.opened,
        issues_fixed=all_issues.fixed,
        bugs_opened=bugs.opened,
        bugs_fixed=bugs.fixed,
        bugs_changing_code=bugs.changed_code,
        churn_per_bug=bugs.mean_churn,
        churn_per_issue=all_issues.mean_churn,
        bug_fix_days=bugs.mean_duration,
        issue_days=all_issues.mean_duration,
    )
    samples = {
        "churn_per_bug": list(bugs.churn.values()),
        "churn_per_issue": list(all_issues.churn.values()),
        "bug_fix_days": list(bugs.duration_days.values()),
        "issue_days": list(all_issues.duration_days.values()),
    }

    def guarded(fn: Callable[[], float]) -> float | None:
        try:
            return fn()
        except AdxError:
            return None

    graph = snapshot.graph
    vis = transitive_closure(graph)
    values["pc"] = guarded(lambda: propagation_cost(graph, vis).pc)
    values["dl"] = guarded(lambda: decoupling_level(graph, visibility=vis).dl)
    report = flaw_report(snapshot, thresholds, cochange_matrix(snapshot), vis)
    for kind in FlawKind:
        values[f"{kind.value}_count"] = report.count(kind)
        values[f"{kind.value}_files"] = report.influenced_count(kind)
    try:
        roots = detect_roots(snapshot, visibility=vis)
        values.update(roots=len(roots.picks), root_files=len(roots.files), root_file_fraction=roots.file_fraction)
    except AdxError:
        values.update(roots=None, root_files=None, root_file_fraction=None)
    return values, samples


def compare_snapshots(before: Snapshot, after: Snapshot, thresholds: Thresholds | None = None) -> ComparisonReport:
    b_vals, b_samples = snapshot_measures(before, thresholds)
    a_vals, a_samples = snapshot_measures(after, thresholds)
    rows = []
    for metric, bv in b_vals.items():
        test = None
        if metric in b_samples:
            try:
                test = mann_whitney_u(b_samples[metric], a_samples[metric])
            except EmptySample:
                test = None
        rows.append(MetricDelta(metric, _num(bv), _num(a_vals[metric]), test))
    return ComparisonReport(tuple(rows))


def _num(v):
    return None if v is None else float(v)
