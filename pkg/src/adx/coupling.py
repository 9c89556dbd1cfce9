"""Visibility (transitive closure) matrix and Propagation Cost."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .errors import EmptySystem
from .graphs import bits, reach_masks
from .model import DependencyGraph


@dataclass(frozen=True)
class VisibilityMatrix:
    """Row ``f`` is the set of files ``f`` can reach, ``f`` included.

    Rows are stored as int bitmasks.
    """

    n: int
    rows: tuple[int, ...]

    def reaches(self, f: int, g: int) -> bool:
        return bool(self.rows[f] >> g & 1)

    def row(self, f: int) -> list[int]:
        return bits(self.rows[f])

    @cached_property
    def columns(self) -> tuple[int, ...]:
        """Column ``g`` is the set of files that can reach ``g``."""
        cols = [0] * self.n
        for f, mask in enumerate(self.rows):
            for g in bits(mask):
                cols[g] |= 1 << f
        return tuple(cols)

    def dependents(self, g: int) -> list[int]:
        """Files other than ``g`` that transitively depend on ``g``."""
        return [f for f in bits(self.columns[g]) if f != g]

    @property
    def nonempty(self) -> int:
        return sum(mask.bit_count() for mask in self.rows)


def transitive_closure(graph: DependencyGraph) -> VisibilityMatrix:
    """Exact reachability closure; edge kinds and weights are ignored."""
    return VisibilityMatrix(graph.n, tuple(reach_masks(graph.n, graph.successors)))


@dataclass(frozen=True)
class CouplingReport:
    n: int
    nonempty: int
    fan_in: tuple[int, ...]
    fan_out: tuple[int, ...]
    transitive_fan_in: tuple[int, ...]
    transitive_fan_out: tuple[int, ...]

    @property
    def cells(self) -> int:
        return self.n * self.n

    @property
    def pc(self) -> float:
        return self.nonempty / self.cells

    @property
    def pc_exact(self) -> Fraction:
        return Fraction(self.nonempty, self.cells)


def propagation_cost(graph: DependencyGraph, visibility: VisibilityMatrix | None = None) -> CouplingReport:
    """Share of nonempty cells in the closed matrix; the diagonal counts as nonempty."""
    if graph.n == 0:
        raise EmptySystem("propagation cost is undefined for an empty system")
    vis = visibility or transitive_closure(graph)
    cols = vis.columns
    return CouplingReport(
        n=graph.n,
        nonempty=vis.nonempty,
        fan_in=tuple(graph.fan_in(f) for f in range(graph.n)),
        fan_out=tuple(graph.fan_out(f) for f in range(graph.n)),
        transitive_fan_in=tuple(c.bit_count() - 1 for c in cols),
        transitive_fan_out=tuple(r.bit_count() - 1 for r in vis.rows),
    )
