"""Design Rule Hierarchy clustering and the Decoupling Level score.

Layers are numbered from 1 (top: depends on nothing). A file may only
depend on files in its own module or in a layer with a smaller index.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .coupling import VisibilityMatrix, transitive_closure
from .errors import EmptySystem
from .graphs import condense
from .model import DependencyGraph


@dataclass(frozen=True)
class DrhModule:
    id: int
    members: tuple[int, ...]
    layer: int

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class DrhStructure:
    layers: tuple[tuple[DrhModule, ...], ...]

    @property
    def modules(self) -> list[DrhModule]:
        return [m for layer in self.layers for m in layer]

    def layer_of(self) -> dict[int, int]:
        return {f: m.layer for m in self.modules for f in m.members}

    def module_of(self) -> dict[int, int]:
        return {f: m.id for m in self.modules for f in m.members}

    def order(self, key=None) -> list[int]:
        """Files in DRH order: by layer, then module, then ``key`` (default id)."""
        out = []
        for m in self.modules:
            out.extend(sorted(m.members, key=key))
        return out


def build_drh(graph: DependencyGraph) -> DrhStructure:
    """Longest-path layering of the SCC condensation; each SCC is one module."""
    cond = condense(graph.n, graph.successors)
    layer = [0] * len(cond.components)
    # components arrive sinks-first, so dependees are layered before dependents
    for ci in range(len(cond.components)):
        succ = cond.successors[ci]
        layer[ci] = 1 + max((layer[cj] for cj in succ), default=0)
    depth = max(layer, default=0)
    grouped: list[list[tuple[int, ...]]] = [[] for _ in range(depth)]
    for ci, comp in enumerate(cond.components):
        grouped[layer[ci] - 1].append(comp)
    layers = []
    next_id = 0
    for li, comps in enumerate(grouped, start=1):
        mods = []
        for comp in sorted(comps):
            mods.append(DrhModule(next_id, comp, li))
            next_id += 1
        layers.append(tuple(mods))
    return DrhStructure(tuple(layers))


@dataclass(frozen=True)
class ModuleScore:
    members: tuple[int, ...]
    size: int
    dependents: int
    contribution: Fraction


@dataclass(frozen=True)
class DlReport:
    n: int
    dl_exact: Fraction
    modules: tuple[ModuleScore, ...]

    @property
    def dl(self) -> float:
        return float(self.dl_exact)


def score_partition(visibility: VisibilityMatrix, partition: Sequence[Sequence[int]]) -> DlReport:
    """Decoupling level of an arbitrary partition of the files.

    Per module of size s with D outside files able to reach it:
    w = (s/n) * (1 - D/(n - s)) * (1 - (s - 1)/n), and the second factor is
    1 when the module spans the whole system.
    """
    n = visibility.n
    if n == 0:
        raise EmptySystem("decoupling level is undefined for an empty system")
    cols = visibility.columns
    scores = []
    for members in partition:
        members = tuple(sorted(members))
        s = len(members)
        mask = 0
        reach = 0
        for f in members:
            mask |= 1 << f
            reach |= cols[f]
        dependents = (reach & ~mask).bit_count()
        independence = Fraction(1) if s == n else 1 - Fraction(dependents, n - s)
        penalty = 1 - Fraction(s - 1, n)
        scores.append(ModuleScore(members, s, dependents, Fraction(s, n) * independence * penalty))
    covered = sum(m.size for m in scores)
    if covered != n or len({f for m in scores for f in m.members}) != n:
        raise ValueError("partition must cover every file exactly once")
    return DlReport(n, sum((m.contribution for m in scores), Fraction(0)), tuple(scores))


def decoupling_level(
    graph: DependencyGraph,
    drh: DrhStructure | None = None,
    visibility: VisibilityMatrix | None = None,
) -> DlReport:
    if graph.n == 0:
        raise EmptySystem("decoupling level is undefined for an empty system")
    drh = drh or build_drh(graph)
    vis = visibility or transitive_closure(graph)
    return score_partition(vis, [m.members for m in drh.modules])
