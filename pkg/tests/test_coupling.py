import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adx.coupling import propagation_cost, transitive_closure
from adx.errors import EmptySystem
from adx.graphs import condense, strongly_connected_components
from adx.model import DependencyGraph

from oracles import warshall
from synth import random_digraph


def pairs_of(graph):
    return [(e.source, e.target) for e in graph.edges]


def test_chain_example():
    g = DependencyGraph.from_pairs(4, [(0, 1), (1, 2), (2, 3)])
    vis = transitive_closure(g)
    assert vis.row(0) == [0, 1, 2, 3]
    assert vis.row(3) == [3]
    report = propagation_cost(g)
    assert report.nonempty == 10
    assert report.pc == 0.625
    assert report.pc_exact == Fraction(5, 8)


def test_edgeless_and_complete_bounds():
    assert propagation_cost(DependencyGraph(4, ())).pc == 0.25
    complete = DependencyGraph.from_pairs(5, [(s, t) for s in range(5) for t in range(5) if s != t])
    assert propagation_cost(complete).pc == 1.0


def test_empty_system_rejected():
    with pytest.raises(EmptySystem):
        propagation_cost(DependencyGraph(0, ()))


def test_pc_matches_warshall_on_random_graphs():
    rng = random.Random(17)
    for _ in range(100):
        n = rng.randint(1, 50)
        g = random_digraph(rng, n, rng.uniform(0, 0.5))
        oracle = warshall(n, pairs_of(g))
        vis = transitive_closure(g)
        for i in range(n):
            assert vis.row(i) == [j for j in range(n) if oracle[i][j]]
        nonempty = sum(map(sum, oracle))
        assert propagation_cost(g, vis).pc_exact == Fraction(nonempty, n * n)


def test_transitive_fans_sum_to_off_diagonal_cells():
    rng = random.Random(4)
    for _ in range(30):
        g = random_digraph(rng, rng.randint(1, 25), rng.uniform(0, 0.3))
        r = propagation_cost(g)
        off = r.nonempty - r.n
        assert sum(r.transitive_fan_in) == sum(r.transitive_fan_out) == off
        assert sum(r.fan_in) == sum(r.fan_out) == len({(e.source, e.target) for e in g.edges})


def test_dependents_are_column_minus_self():
    g = DependencyGraph.from_pairs(4, [(0, 1), (1, 2), (3, 2)])
    vis = transitive_closure(g)
    assert vis.dependents(2) == [0, 1, 3]
    assert vis.dependents(0) == []


graphs = st.integers(1, 12).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda p: p[0] != p[1]), max_size=40),
    )
)


@settings(max_examples=100, deadline=None)
@given(graphs, st.data())
def test_pc_bounds_monotone_and_permutation_invariant(spec, data):
    n, pairs = spec
    g = DependencyGraph.from_pairs(n, pairs)
    pc = propagation_cost(g).pc_exact
    assert Fraction(1, n) <= pc <= 1
    if n > 1:
        extra = data.draw(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda p: p[0] != p[1]))
        assert propagation_cost(DependencyGraph.from_pairs(n, [*pairs, extra])).pc_exact >= pc
    perm = data.draw(st.permutations(range(n)))
    assert propagation_cost(g.permuted(list(perm))).pc_exact == pc


def test_scc_order_is_reverse_topological():
    rng = random.Random(8)
    for _ in range(50):
        n = rng.randint(1, 20)
        g = random_digraph(rng, n, rng.uniform(0, 0.25))
        cond = condense(n, g.successors)
        for ci, succ in enumerate(cond.successors):
            assert all(cj < ci for cj in succ)
        comps = strongly_connected_components(n, g.successors)
        assert sorted(f for c in comps for f in c) == list(range(n))
        assert all(c == sorted(c) for c in comps)
