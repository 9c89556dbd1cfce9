"""Shared immutable data model: files, dependency graph, history, snapshot."""

from __future__ import annotations

import json
import logging
import os
import posixpath
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from functools import cached_property
from itertools import combinations
from typing import Any, Iterable, Mapping

from .errors import (
    DanglingEdgeEndpoint,
    DuplicatePath,
    ParseError,
    SelfDependency,
    ValidationError,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1"


class DepKind(str, Enum):
    CALL = "Call"
    USE = "Use"
    CREATE = "Create"
    CAST = "Cast"
    THROW = "Throw"
    EXTEND = "Extend"
    IMPLEMENT = "Implement"
    OTHER = "Other"

    @classmethod
    def parse(cls, text: str | DepKind) -> DepKind:
        if isinstance(text, DepKind):
            return text
        for kind in cls:
            if kind.value.lower() == text.strip().lower():
                return kind
        log.warning("unknown dependency kind %r mapped to Other", text)
        return cls.OTHER

    @property
    def is_inheritance(self) -> bool:
        return self in (DepKind.EXTEND, DepKind.IMPLEMENT)


class IssueKind(str, Enum):
    BUG = "Bug"
    FEATURE = "Feature"
    TASK = "Task"
    IMPROVEMENT = "Improvement"
    OTHER = "Other"

    @classmethod
    def parse(cls, text: str | IssueKind) -> IssueKind:
        if isinstance(text, IssueKind):
            return text
        for kind in cls:
            if kind.value.lower() == text.strip().lower():
                return kind
        return cls.OTHER


class IssueStatus(str, Enum):
    OPEN = "Open"
    FIXED = "Fixed"
    CLOSED = "Closed"
    OTHER = "Other"

    @classmethod
    def parse(cls, text: str | IssueStatus) -> IssueStatus:
        if isinstance(text, IssueStatus):
            return text
        for status in cls:
            if status.value.lower() == text.strip().lower():
                return status
        return cls.OTHER


def parse_timestamp(text: str) -> int:
    """Parse an ISO-8601 string into UTC epoch seconds.

    Naive values are taken as UTC.
    """
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_timestamp(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def default_package(path: str) -> str:
    return posixpath.dirname(path) or "."


@dataclass(frozen=True)
class FileNode:
    id: int
    path: str
    package: str
    creator: str | None = None


@dataclass(frozen=True, order=True)
class DependencyEdge:
    source: int
    target: int
    kind: DepKind
    weight: int = 1


@dataclass(frozen=True)
class DependencyGraph:
    n: int
    edges: tuple[DependencyEdge, ...] = ()

    def __post_init__(self):
        for e in self.edges:
            if not (0 <= e.source < self.n and 0 <= e.target < self.n):
                raise DanglingEdgeEndpoint(f"edge {e.source}->{e.target} outside 0..{self.n - 1}")
            if e.source == e.target:
                raise SelfDependency(f"file {e.source} depends on itself")
            if e.weight < 1:
                raise ValidationError(f"edge {e.source}->{e.target} has weight {e.weight}")
        ordered = tuple(sorted(self.edges, key=_edge_key))
        keys = [_edge_key(e)[:3] for e in ordered]
        if len(set(keys)) != len(keys):
            raise ValidationError("duplicate (source, target, kind) edge")
        object.__setattr__(self, "edges", ordered)

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[tuple[int, int]], kind: DepKind = DepKind.CALL) -> DependencyGraph:
        """Graph with one edge of ``kind`` per distinct (source, target) pair."""
        uniq = {(s, t) for s, t in pairs}
        return cls(n, tuple(DependencyEdge(s, t, kind) for s, t in uniq))

    @cached_property
    def _succ(self) -> tuple[tuple[int, ...], ...]:
        out: list[set[int]] = [set() for _ in range(self.n)]
        for e in self.edges:
            out[e.source].add(e.target)
        return tuple(tuple(sorted(s)) for s in out)

    @cached_property
    def _pred(self) -> tuple[tuple[int, ...], ...]:
        inc: list[set[int]] = [set() for _ in range(self.n)]
        for e in self.edges:
            inc[e.target].add(e.source)
        return tuple(tuple(sorted(s)) for s in inc)

    @cached_property
    def _kinds(self) -> dict[tuple[int, int], frozenset[DepKind]]:
        acc: dict[tuple[int, int], set[DepKind]] = defaultdict(set)
        for e in self.edges:
            acc[(e.source, e.target)].add(e.kind)
        return {k: frozenset(v) for k, v in acc.items()}

    def successors(self, f: int) -> tuple[int, ...]:
        """Distinct files that ``f`` depends on directly."""
        return self._succ[f]

    def predecessors(self, f: int) -> tuple[int, ...]:
        """Distinct files that depend directly on ``f``."""
        return self._pred[f]

    def has_edge(self, f: int, g: int) -> bool:
        return (f, g) in self._kinds

    def kinds(self, f: int, g: int) -> frozenset[DepKind]:
        return self._kinds.get((f, g), frozenset())

    def fan_in(self, f: int) -> int:
        return len(self._pred[f])

    def fan_out(self, f: int) -> int:
        return len(self._succ[f])

    def permuted(self, perm: list[int]) -> DependencyGraph:
        """Relabel file ``i`` as ``perm[i]``."""
        return DependencyGraph(
            self.n,
            tuple(DependencyEdge(perm[e.source], perm[e.target], e.kind, e.weight) for e in self.edges),
        )


def _edge_key(e: DependencyEdge) -> tuple[int, int, str, int]:
    return (e.source, e.target, e.kind.value, e.weight)


@dataclass(frozen=True)
class FileChange:
    file: int
    added: int
    deleted: int
    binary: bool = False

    @property
    def churn(self) -> int:
        return self.added + self.deleted


@dataclass(frozen=True)
class Commit:
    id: str
    timestamp: int
    author: str
    message: str
    changes: tuple[FileChange, ...] = ()
    linked_issues: frozenset[str] = frozenset()

    @property
    def churn(self) -> int:
        return sum(c.churn for c in self.changes)

    @property
    def files(self) -> frozenset[int]:
        return frozenset(c.file for c in self.changes)


@dataclass(frozen=True)
class Issue:
    key: str
    kind: IssueKind = IssueKind.OTHER
    opened_at: int | None = None
    closed_at: int | None = None
    status: IssueStatus = IssueStatus.OPEN

    def __post_init__(self):
        if self.opened_at is not None and self.closed_at is not None and self.closed_at < self.opened_at:
            raise ValidationError(f"issue {self.key} closed before it was opened")

    @property
    def is_fixed(self) -> bool:
        return self.status in (IssueStatus.FIXED, IssueStatus.CLOSED) and self.closed_at is not None

    @property
    def duration_days(self) -> float | None:
        if self.opened_at is None or self.closed_at is None:
            return None
        return (self.closed_at - self.opened_at) / 86400.0


@dataclass(frozen=True)
class Release:
    name: str
    timestamp: int


@dataclass(frozen=True)
class SnapshotMetadata:
    label: str = ""
    created_at: int = 0
    schema_version: str = SCHEMA_VERSION


@dataclass(frozen=True)
class FileSpec:
    """A declared file, before id assignment."""

    path: str
    package: str | None = None
    creator: str | None = None


@dataclass(frozen=True)
class Snapshot:
    files: tuple[FileNode, ...]
    graph: DependencyGraph
    commits: tuple[Commit, ...] = ()
    issues: tuple[Issue, ...] = ()
    releases: tuple[Release, ...] = ()
    metadata: SnapshotMetadata = field(default_factory=SnapshotMetadata)

    def __post_init__(self):
        n = len(self.files)
        if self.graph.n != n:
            raise ValidationError(f"graph has n={self.graph.n} but snapshot has {n} files")
        paths = set()
        for i, f in enumerate(self.files):
            if f.id != i:
                raise ValidationError(f"file ids must be contiguous; got {f.id} at position {i}")
            if not f.package:
                raise ValidationError(f"file {f.path} has an empty package")
            if f.path in paths:
                raise DuplicatePath(f"duplicate path {f.path}")
            paths.add(f.path)
        for c in self.commits:
            for ch in c.changes:
                if not 0 <= ch.file < n:
                    raise ValidationError(f"commit {c.id} touches unknown file id {ch.file}")
                if ch.added < 0 or ch.deleted < 0:
                    raise ValidationError(f"commit {c.id} has negative line counts")
        keys = [i.key for i in self.issues]
        if len(set(keys)) != len(keys):
            raise ValidationError("duplicate issue key")
        names = [r.name for r in self.releases]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate release name")

    @property
    def n(self) -> int:
        return len(self.files)

    @cached_property
    def _path_index(self) -> dict[str, int]:
        return {f.path: f.id for f in self.files}

    def id_of(self, path: str) -> int:
        from .errors import UnknownFile

        try:
            return self._path_index[path]
        except KeyError:
            raise UnknownFile(f"unknown file {path}") from None

    def path(self, f: int) -> str:
        return self.files[f].path

    @cached_property
    def issues_by_key(self) -> dict[str, Issue]:
        return {i.key: i for i in self.issues}

    @property
    def total_churn(self) -> int:
        return sum(c.churn for c in self.commits)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": self.metadata.schema_version,
            "metadata": {
                "label": self.metadata.label,
                "created_at": format_timestamp(self.metadata.created_at),
                "schema_version": self.metadata.schema_version,
            },
            "files": [
                {"id": f.id, "path": f.path, "package": f.package, "creator": f.creator}
                for f in self.files
            ],
            "graph": {
                "n": self.graph.n,
                "edges": [
                    {"source": e.source, "target": e.target, "kind": e.kind.value, "weight": e.weight}
                    for e in self.graph.edges
                ],
            },
            "commits": [
                {
                    "id": c.id,
                    "timestamp": format_timestamp(c.timestamp),
                    "author": c.author,
                    "message": c.message,
                    "changes": [
                        {"file": ch.file, "added": ch.added, "deleted": ch.deleted, "binary": ch.binary}
                        for ch in c.changes
                    ],
                    "linked_issues": sorted(c.linked_issues),
                }
                for c in self.commits
            ],
            "issues": [
                {
                    "key": i.key,
                    "kind": i.kind.value,
                    "opened_at": None if i.opened_at is None else format_timestamp(i.opened_at),
                    "closed_at": None if i.closed_at is None else format_timestamp(i.closed_at),
                    "status": i.status.value,
                }
                for i in self.issues
            ],
            "releases": [{"name": r.name, "timestamp": format_timestamp(r.timestamp)} for r in self.releases],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> Snapshot:
        version = str(doc.get("schema_version", ""))
        if version != SCHEMA_VERSION:
            raise ParseError(f"unsupported snapshot schema_version {version!r}")
        try:
            meta = doc.get("metadata", {})
            files = tuple(
                FileNode(int(f["id"]), f["path"], f["package"], f.get("creator")) for f in doc["files"]
            )
            graph = DependencyGraph(
                int(doc["graph"]["n"]),
                tuple(
                    DependencyEdge(int(e["source"]), int(e["target"]), DepKind(e["kind"]), int(e["weight"]))
                    for e in doc["graph"]["edges"]
                ),
            )
            commits = tuple(
                Commit(
                    id=c["id"],
                    timestamp=parse_timestamp(c["timestamp"]),
                    author=c["author"],
                    message=c["message"],
                    changes=tuple(
                        FileChange(int(ch["file"]), int(ch["added"]), int(ch["deleted"]), bool(ch.get("binary", False)))
                        for ch in c["changes"]
                    ),
                    linked_issues=frozenset(c.get("linked_issues", ())),
                )
                for c in doc.get("commits", ())
            )
            issues = tuple(
                Issue(
                    key=i["key"],
                    kind=IssueKind(i["kind"]),
                    opened_at=None if i.get("opened_at") is None else parse_timestamp(i["opened_at"]),
                    closed_at=None if i.get("closed_at") is None else parse_timestamp(i["closed_at"]),
                    status=IssueStatus(i["status"]),
                )
                for i in doc.get("issues", ())
            )
            releases = tuple(Release(r["name"], parse_timestamp(r["timestamp"])) for r in doc.get("releases", ()))
            metadata = SnapshotMetadata(
                label=meta.get("label", ""),
                created_at=parse_timestamp(meta["created_at"]) if meta.get("created_at") else 0,
                schema_version=version,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed snapshot document: {exc}") from exc
        return cls(files, graph, commits, issues, releases, metadata)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def loads(cls, text: str) -> Snapshot:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno) from exc
        return cls.from_dict(doc)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path: str | os.PathLike) -> Snapshot:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        try:
            return cls.loads(text)
        except ParseError as exc:
            raise exc.with_source(str(path))


class _RenameUnion:
    """Union-find over paths; each class resolves to its newest name."""

    def __init__(self):
        self.parent: dict[str, str] = {}
        self.newest: dict[str, str] = {}

    def find(self, p: str) -> str:
        self.parent.setdefault(p, p)
        root = p
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[p] != root:
            self.parent[p], p = root, self.parent[p]
        return root

    def rename(self, old: str, new: str) -> None:
        a, b = self.find(old), self.find(new)
        if a != b:
            self.parent[a] = b
        self.newest[b] = new

    def canonical(self, p: str) -> str:
        if p not in self.parent:
            return p
        return self.newest.get(self.find(p), self.find(p))


def build_snapshot(
    files: Iterable[FileSpec | str] | None,
    edges: Iterable[Any],
    commits: Iterable[Any] = (),
    issues: Iterable[Issue] = (),
    releases: Iterable[Release] = (),
    label: str = "",
    created_at: int | None = None,
) -> Snapshot:
    """Validate parsed inputs and freeze them into a :class:`Snapshot`.

    ``edges`` are records with ``source``, ``target`` (paths), ``kind`` and
    ``weight``. ``commits`` are records with ``hash``, ``author``,
    ``timestamp``, ``message``, ``numstat`` entries (``path``, ``old_path``,
    ``added``, ``deleted``, ``binary``) and ``linked_issues``.

    When ``files`` is None the known paths are the edge endpoints; otherwise
    an edge naming an undeclared path raises :class:`DanglingEdgeEndpoint`.
    Paths seen only in history are registered as new files. Ids follow
    sorted path order.
    """
    commits = list(commits)
    edges = list(edges)

    renames = _RenameUnion()
    chronological = sorted(enumerate(commits), key=lambda ic: (ic[1].timestamp, ic[0]))
    for _, c in chronological:
        for entry in c.numstat:
            if entry.old_path is not None and entry.old_path != entry.path:
                renames.rename(entry.old_path, entry.path)

    declared: dict[str, FileSpec] = {}
    if files is not None:
        for spec in files:
            if isinstance(spec, str):
                spec = FileSpec(spec)
            if spec.path in declared:
                raise DuplicatePath(f"duplicate path {spec.path}")
            declared[spec.path] = spec
        merged: dict[str, FileSpec] = {}
        for path, spec in declared.items():
            merged.setdefault(renames.canonical(path), spec)
        declared = merged

    known = set(declared)
    if files is None:
        for rec in edges:
            known.add(renames.canonical(rec.source))
            known.add(renames.canonical(rec.target))

    first_author: dict[str, str] = {}
    for _, c in chronological:
        for entry in c.numstat:
            p = renames.canonical(entry.path)
            known.add(p)
            first_author.setdefault(p, c.author)

    paths = sorted(known)
    ids = {p: i for i, p in enumerate(paths)}
    nodes = []
    for i, p in enumerate(paths):
        spec = declared.get(p)
        package = (spec.package if spec and spec.package else None) or default_package(p)
        creator = spec.creator if spec and spec.creator else first_author.get(p)
        nodes.append(FileNode(i, p, package, creator))

    weights: dict[tuple[int, int, DepKind], int] = defaultdict(int)
    for rec in edges:
        src, dst = renames.canonical(rec.source), renames.canonical(rec.target)
        if src not in ids or dst not in ids:
            missing = src if src not in ids else dst
            raise DanglingEdgeEndpoint(f"edge {rec.source} -> {rec.target}: unknown file {missing}")
        if src == dst:
            raise SelfDependency(f"{rec.source} depends on itself")
        weights[(ids[src], ids[dst], DepKind.parse(rec.kind))] += int(rec.weight)
    graph = DependencyGraph(len(nodes), tuple(DependencyEdge(s, t, k, w) for (s, t, k), w in weights.items()))

    built = []
    for c in commits:
        per_file: dict[int, list[int]] = {}
        for entry in c.numstat:
            fid = ids[renames.canonical(entry.path)]
            acc = per_file.setdefault(fid, [0, 0, 0])
            acc[0] += entry.added
            acc[1] += entry.deleted
            acc[2] |= int(entry.binary)
        changes = tuple(FileChange(f, a, d, bool(b)) for f, (a, d, b) in sorted(per_file.items()))
        built.append(Commit(c.hash, c.timestamp, c.author, c.message, changes, frozenset(c.linked_issues)))
    built.sort(key=lambda c: (c.timestamp, c.id))

    meta = SnapshotMetadata(label=label, created_at=created_at if created_at is not None else _now())
    return Snapshot(
        files=tuple(nodes),
        graph=graph,
        commits=tuple(built),
        issues=tuple(sorted(issues, key=lambda i: i.key)),
        releases=tuple(sorted(releases, key=lambda r: (r.timestamp, r.name))),
        metadata=meta,
    )


def _now() -> int:
    return int(datetime.now(tz=timezone.utc).timestamp())


@dataclass(frozen=True)
class CoChangeMatrix:
    """Sparse symmetric co-change counts keyed by ``(low id, high id)``."""

    n: int
    counts: Mapping[tuple[int, int], int]

    def get(self, f: int, g: int) -> int:
        if f == g:
            return 0
        return self.counts.get((f, g) if f < g else (g, f), 0)

    def __len__(self) -> int:
        return len(self.counts)

    def pairs(self) -> list[tuple[int, int, int]]:
        return sorted((f, g, c) for (f, g), c in self.counts.items())

    @cached_property
    def _partners(self) -> dict[int, dict[int, int]]:
        out: dict[int, dict[int, int]] = defaultdict(dict)
        for (f, g), c in self.counts.items():
            out[f][g] = c
            out[g][f] = c
        return dict(out)

    def partners(self, f: int) -> dict[int, int]:
        return self._partners.get(f, {})


def cochange_matrix(snapshot: Snapshot, max_commit_size: int | None = None) -> CoChangeMatrix:
    """Count, for every file pair, the commits that touched both files."""
    if max_commit_size is not None and max_commit_size < 2:
        raise ValueError("max_commit_size must be at least 2")
    counts: dict[tuple[int, int], int] = defaultdict(int)
    for c in snapshot.commits:
        touched = sorted(c.files)
        if max_commit_size is not None and len(touched) > max_commit_size:
            continue
        for pair in combinations(touched, 2):
            counts[pair] += 1
    return CoChangeMatrix(snapshot.n, dict(counts))
