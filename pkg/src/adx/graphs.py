"""Strongly connected components and condensation on integer digraphs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

Successors = Callable[[int], Sequence[int]]


def strongly_connected_components(n: int, successors: Successors) -> list[list[int]]:
    """Tarjan's algorithm, iterative.

    Components come out in reverse topological order of the condensation:
    a component is emitted only after every component it can reach.
    Members of each component are sorted.
    """
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0

    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, iter(successors(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, iter(successors(w))))
                    advanced = True
                    break
                if on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if low[v] < low[parent]:
                    low[parent] = low[v]
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                out.append(sorted(comp))
    return out


@dataclass(frozen=True)
class Condensation:
    components: tuple[tuple[int, ...], ...]  # reverse topological order
    component_of: tuple[int, ...]
    successors: tuple[tuple[int, ...], ...]  # component-level, deduplicated


def condense(n: int, successors: Successors) -> Condensation:
    comps = strongly_connected_components(n, successors)
    comp_of = [0] * n
    for ci, comp in enumerate(comps):
        for v in comp:
            comp_of[v] = ci
    succ = []
    for comp in comps:
        targets = set()
        ci = comp_of[comp[0]]
        for v in comp:
            for w in successors(v):
                cw = comp_of[w]
                if cw != ci:
                    targets.add(cw)
        succ.append(tuple(sorted(targets)))
    return Condensation(tuple(tuple(c) for c in comps), tuple(comp_of), tuple(succ))


def reach_masks(n: int, successors: Successors) -> list[int]:
    """Bitmask of every vertex reachable from each vertex, itself included."""
    cond = condense(n, successors)
    comp_mask = [0] * len(cond.components)
    # reverse topological order means successors are already final
    for ci, comp in enumerate(cond.components):
        mask = 0
        for v in comp:
            mask |= 1 << v
        for cj in cond.successors[ci]:
            mask |= comp_mask[cj]
        comp_mask[ci] = mask
    return [comp_mask[cond.component_of[v]] for v in range(n)]


def bits(mask: int) -> list[int]:
    """Indices of set bits, ascending."""
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out
