"""Detectors for the six architecture flaw kinds."""

from __future__ import annotations

import logging
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any

from .coupling import VisibilityMatrix, transitive_closure
from .graphs import strongly_connected_components
from .model import CoChangeMatrix, DependencyGraph, FileNode, Snapshot, cochange_matrix

log = logging.getLogger(__name__)


class FlawKind(str, Enum):
    CLIQUE = "Clique"
    PACKAGE_CYCLE = "PackageCycle"
    IMPROPER_INHERITANCE = "ImproperInheritance"
    MODULARITY_VIOLATION = "ModularityViolation"
    CROSSING = "Crossing"
    UNSTABLE_INTERFACE = "UnstableInterface"


@dataclass(frozen=True)
class Thresholds:
    cochange_min: int = 2
    unstable_partner_min: int = 5
    crossing_fanin_min: int = 4
    crossing_fanout_min: int = 4
    unstable_influence_min: int = 1

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 1:
                raise ValueError(f"threshold {f.name} must be >= 1")

    @classmethod
    def from_text(cls, text: str) -> Thresholds:
        """Read a flat ``key=value`` document; ``#`` starts a comment."""
        names = {f.name for f in fields(cls)}
        values: dict[str, int] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in names:
                raise ValueError(f"line {lineno}: unknown threshold entry {raw!r}")
            values[key] = int(value.strip())
        return cls(**values)

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> Thresholds:
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())


@dataclass(frozen=True)
class FlawInstance:
    kind: FlawKind
    anchor: tuple[Any, ...]
    scope: frozenset[int]
    evidence: dict[str, Any] = field(default_factory=dict, compare=False, hash=False)


def _order(instances: list[FlawInstance], files: list[FileNode] | None = None) -> list[FlawInstance]:
    def name(x):
        return files[x].path if files is not None and isinstance(x, int) else str(x)

    return sorted(instances, key=lambda i: (-len(i.scope), [name(a) for a in i.anchor]))


def detect_cliques(graph: DependencyGraph) -> list[FlawInstance]:
    found = []
    for comp in strongly_connected_components(graph.n, graph.successors):
        if len(comp) >= 2:
            found.append(FlawInstance(FlawKind.CLIQUE, tuple(comp), frozenset(comp), {"size": len(comp)}))
    return _order(found)


def detect_package_cycles(graph: DependencyGraph, files: list[FileNode] | tuple[FileNode, ...]) -> list[FlawInstance]:
    packages = sorted({f.package for f in files})
    pid = {p: i for i, p in enumerate(packages)}
    pkg_of = [pid[f.package] for f in files]
    crossing: dict[tuple[int, int], list[tuple[int, int]]] = defaultdict(list)
    for e in graph.edges:
        p, q = pkg_of[e.source], pkg_of[e.target]
        if p != q:
            crossing[(p, q)].append((e.source, e.target))
    succ: list[set[int]] = [set() for _ in packages]
    for p, q in crossing:
        succ[p].add(q)
    succ_sorted = [sorted(s) for s in succ]
    found = []
    for comp in strongly_connected_components(len(packages), lambda p: succ_sorted[p]):
        if len(comp) < 2:
            continue
        members = set(comp)
        scope: set[int] = set()
        edges = []
        for (p, q), pairs in sorted(crossing.items()):
            if p in members and q in members:
                for s, t in pairs:
                    scope.update((s, t))
                    if (s, t) not in edges:
                        edges.append((s, t))
        found.append(
            FlawInstance(
                FlawKind.PACKAGE_CYCLE,
                tuple(packages[p] for p in comp),
                frozenset(scope),
                {"edges": sorted(edges)},
            )
        )
    return _order(found)


def detect_improper_inheritance(graph: DependencyGraph) -> list[FlawInstance]:
    """Parents depending on a direct child, or outside clients using both.

    A client belongs to a hierarchy when it is linked to it through any
    chain of Extend/Implement edges; such files are never reported as
    case-2 clients.
    """
    children: dict[int, set[int]] = defaultdict(set)
    uses: dict[int, set[int]] = defaultdict(set)
    family = list(range(graph.n))

    def root(x: int) -> int:
        while family[x] != x:
            family[x] = family[family[x]]
            x = family[x]
        return x

    for e in graph.edges:
        if e.kind.is_inheritance:
            children[e.target].add(e.source)
            a, b = root(e.source), root(e.target)
            if a != b:
                family[max(a, b)] = min(a, b)
        else:
            uses[e.source].add(e.target)

    if not children:
        log.warning("MissingInheritanceEdges: no Extend/Implement edges; improper inheritance not checked")
        return []

    found: dict[tuple[int, int], FlawInstance] = {}
    for parent in sorted(children):
        kids = children[parent]
        for child in sorted(kids & uses.get(parent, set())):
            found[(parent, child)] = FlawInstance(
                FlawKind.IMPROPER_INHERITANCE,
                (parent, child),
                frozenset((parent, child)),
                {"case": 1, "parent": parent, "child": child},
            )
        clients = graph.predecessors(parent)
        for k in clients:
            if root(k) == root(parent) or parent not in uses.get(k, ()):
                continue
            hit = sorted(kids & uses[k])
            if hit:
                found[(parent, k)] = FlawInstance(
                    FlawKind.IMPROPER_INHERITANCE,
                    (parent, k),
                    frozenset([k, parent, *hit]),
                    {"case": 2, "parent": parent, "client": k, "children": hit},
                )
    return _order(list(found.values()))


def detect_modularity_violations(
    graph: DependencyGraph,
    cochange: CoChangeMatrix,
    thresholds: Thresholds | None = None,
    visibility: VisibilityMatrix | None = None,
) -> list[FlawInstance]:
    """Co-changing pairs with no structural link.

    With ``visibility`` given, transitive reachability in either direction
    also counts as a structural link.
    """
    t = thresholds or Thresholds()
    found = []
    for f, g, count in cochange.pairs():
        if count < t.cochange_min:
            continue
        if visibility is not None:
            linked = visibility.reaches(f, g) or visibility.reaches(g, f)
        else:
            linked = graph.has_edge(f, g) or graph.has_edge(g, f)
        if not linked:
            found.append(FlawInstance(FlawKind.MODULARITY_VIOLATION, (f, g), frozenset((f, g)), {"cochange": count}))
    return _order(found)


def detect_crossings(
    graph: DependencyGraph,
    cochange: CoChangeMatrix,
    thresholds: Thresholds | None = None,
) -> list[FlawInstance]:
    t = thresholds or Thresholds()
    found = []
    for f in range(graph.n):
        dependents = graph.predecessors(f)
        dependees = graph.successors(f)
        if len(dependents) < t.crossing_fanin_min or len(dependees) < t.crossing_fanout_min:
            continue
        partners = cochange.partners(f)
        up = [g for g in dependents if partners.get(g, 0) >= t.cochange_min]
        down = [g for g in dependees if partners.get(g, 0) >= t.cochange_min]
        if up and down:
            found.append(
                FlawInstance(
                    FlawKind.CROSSING,
                    (f,),
                    frozenset((f, *dependents, *dependees)),
                    {"fan_in": len(dependents), "fan_out": len(dependees), "cochanging_dependents": up,
                     "cochanging_dependees": down},
                )
            )
    return _order(found)


def detect_unstable_interfaces(
    graph: DependencyGraph,
    visibility: VisibilityMatrix,
    cochange: CoChangeMatrix,
    thresholds: Thresholds | None = None,
) -> list[FlawInstance]:
    t = thresholds or Thresholds()
    found = []
    cols = visibility.columns
    for f in range(graph.n):
        influence = cols[f].bit_count() - 1
        if influence < t.unstable_influence_min:
            continue
        partners = sorted(
            g for g, c in cochange.partners(f).items() if c >= t.cochange_min and cols[f] >> g & 1
        )
        if len(partners) >= t.unstable_partner_min:
            found.append(
                FlawInstance(
                    FlawKind.UNSTABLE_INTERFACE,
                    (f,),
                    frozenset((f, *partners)),
                    {"partners": partners, "dependents": influence},
                )
            )
    return _order(found)


@dataclass(frozen=True)
class FlawReport:
    instances: dict[FlawKind, list[FlawInstance]]

    def count(self, kind: FlawKind) -> int:
        return len(self.instances[kind])

    def influenced(self, kind: FlawKind) -> frozenset[int]:
        return frozenset().union(*(i.scope for i in self.instances[kind]))

    def influenced_count(self, kind: FlawKind) -> int:
        return len(self.influenced(kind))

    @property
    def all_influenced(self) -> frozenset[int]:
        return frozenset().union(*(self.influenced(k) for k in FlawKind))

    @property
    def participation(self) -> dict[int, int]:
        """Number of flaw instances each file belongs to, all kinds together."""
        counts: Counter[int] = Counter()
        for kind in FlawKind:
            for inst in self.instances[kind]:
                counts.update(inst.scope)
        return dict(sorted(counts.items()))


def flaw_report(
    snapshot: Snapshot,
    thresholds: Thresholds | None = None,
    cochange: CoChangeMatrix | None = None,
    visibility: VisibilityMatrix | None = None,
    transitive_mv: bool = False,
) -> FlawReport:
    t = thresholds or Thresholds()
    graph = snapshot.graph
    cc = cochange if cochange is not None else cochange_matrix(snapshot)
    vis = visibility or transitive_closure(graph)
    files = list(snapshot.files)
    instances = {
        FlawKind.CLIQUE: detect_cliques(graph),
        FlawKind.PACKAGE_CYCLE: detect_package_cycles(graph, files),
        FlawKind.IMPROPER_INHERITANCE: detect_improper_inheritance(graph),
        FlawKind.MODULARITY_VIOLATION: detect_modularity_violations(graph, cc, t, vis if transitive_mv else None),
        FlawKind.CROSSING: detect_crossings(graph, cc, t),
        FlawKind.UNSTABLE_INTERFACE: detect_unstable_interfaces(graph, vis, cc, t),
    }
    return FlawReport({k: _order(v, files) for k, v in instances.items()})
