"""Architecture roots: DRSpaces led by error-prone files, picked greedily by bug coverage."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Literal

from .coupling import VisibilityMatrix, transitive_closure
from .errors import NoBugData, UnknownFile
from .graphs import bits
from .model import IssueKind, Snapshot

Direction = Literal["up", "down"]


def bug_weights(snapshot: Snapshot) -> dict[int, int]:
    """Distinct Bug issues whose linked commits touched each file."""
    bugs = {i.key for i in snapshot.issues if i.kind is IssueKind.BUG}
    touched: dict[int, set[str]] = defaultdict(set)
    for c in snapshot.commits:
        keys = c.linked_issues & bugs
        if not keys:
            continue
        for f in c.files:
            touched[f].update(keys)
    if not touched:
        raise NoBugData("no Bug issue is linked to any commit")
    return {f: len(keys) for f, keys in sorted(touched.items())}


@dataclass(frozen=True)
class DrSpace:
    leader: int
    members: frozenset[int]


def drspace(visibility: VisibilityMatrix, leader: int, direction: Direction = "up") -> DrSpace:
    """The leader plus every file that transitively depends on it.

    ``direction="down"`` takes the files the leader depends on instead.
    """
    if not 0 <= leader < visibility.n:
        raise UnknownFile(f"unknown file id {leader}")
    mask = visibility.columns[leader] if direction == "up" else visibility.rows[leader]
    return DrSpace(leader, frozenset(bits(mask)))


@dataclass(frozen=True)
class RootPick:
    space: DrSpace
    marginal: int
    cumulative: int


@dataclass(frozen=True)
class RootSet:
    picks: tuple[RootPick, ...]
    covered: int
    total: int
    target: float
    n: int

    @property
    def coverage(self) -> float:
        return self.covered / self.total if self.total else 0.0

    @property
    def reached(self) -> bool:
        return self.coverage >= self.target

    @property
    def files(self) -> frozenset[int]:
        return frozenset().union(*(p.space.members for p in self.picks))

    @property
    def file_fraction(self) -> float:
        """Share of all files that sit inside the selected roots."""
        return len(self.files) / self.n if self.n else 0.0


def detect_roots(
    snapshot: Snapshot,
    target: float = 0.80,
    max_candidates: int = 100,
    direction: Direction = "up",
    visibility: VisibilityMatrix | None = None,
    weights: dict[int, int] | None = None,
) -> RootSet:
    """Greedy cover of bug weight by DRSpaces.

    Candidates are the ``max_candidates`` files with the most bugs. Each
    round takes the space adding the most uncovered bug weight (ties go to
    the smallest leader path) until ``target`` is met or nothing adds
    weight. Check ``reached`` for the partial case.
    """
    weights = weights if weights is not None else bug_weights(snapshot)
    if not weights:
        raise NoBugData("no bug weights")
    vis = visibility or transitive_closure(snapshot.graph)
    ranked = sorted(weights, key=lambda f: (-weights[f], snapshot.path(f)))[:max_candidates]
    candidates = [drspace(vis, f, direction) for f in ranked]
    total = sum(weights.values())

    covered_files: set[int] = set()
    covered = 0
    picks: list[RootPick] = []
    remaining = list(candidates)
    while remaining and covered / total < target:
        best, best_gain = None, 0
        for space in remaining:
            gain = sum(weights.get(f, 0) for f in space.members - covered_files)
            if gain > best_gain or (
                gain == best_gain and gain > 0 and snapshot.path(space.leader) < snapshot.path(best.leader)
            ):
                best, best_gain = space, gain
        if best is None:
            break
        covered_files |= best.members
        covered += best_gain
        picks.append(RootPick(best, best_gain, covered))
        remaining.remove(best)
    return RootSet(tuple(picks), covered, total, target, snapshot.n)
