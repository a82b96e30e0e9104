from __future__ import annotations

import math
import random
from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, settings, strategies as st

from tridecomp.graphcore import (
    Graph,
    IntGraph,
    TriangleVec,
    boundary,
    density,
    derive_seed,
    is_bounded,
    is_matching,
    is_tridivisible,
    matching_edges,
    pair_typicality_deviation,
    read_graph,
    tri_edges,
    typicality_deviation,
    verify_decomposition,
    write_graph,
)
from tridecomp.hole import Octahedron


def fano_triples():
    # vertex v carries label v + 1; keep triples whose labels XOR to zero
    return [(x, y, z) for x, y, z in combinations(range(7), 3) if (x + 1) ^ (y + 1) ^ (z + 1) == 0]


def test_density_examples():
    assert density(Graph.complete(4)) == 1
    assert density(Graph(10)) == 0
    c5 = Graph(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)])
    assert density(c5) == Fraction(1, 2)


def test_tridivisibility_examples():
    assert is_tridivisible(Graph.complete(7))
    assert not is_tridivisible(Graph.complete(6))
    assert is_tridivisible(Graph.complete(9))


def test_tridivisible_complete_graphs_are_one_or_three_mod_six():
    for n in range(3, 60):
        assert is_tridivisible(Graph.complete(n)) == (n % 6 in (1, 3))


def test_typicality_of_complete_graph():
    for n in (8, 15, 20):
        rep = typicality_deviation(Graph.complete(n), 2)
        assert rep.deviation <= 2 / n
        assert not rep.sampled


def test_isolated_vertex_breaks_typicality():
    g = Graph.complete(10)
    for v in range(1, 10):
        g.remove_edge(0, v)
    assert typicality_deviation(g, 1).deviation == 1


def test_pair_typicality_collapses_when_gstar_is_g():
    g = Graph.gnp(40, 0.5, random.Random(3))
    a = pair_typicality_deviation(g, g, 2)
    b = typicality_deviation(g, 2)
    assert math.isclose(a.deviation, b.deviation)


def test_pair_typicality_with_empty_gstar_is_degenerate():
    g = Graph.complete(12)
    rep = pair_typicality_deviation(g, Graph(12), 1)
    assert rep.degenerate


def test_pair_typicality_rejects_non_subgraph():
    with pytest.raises(ValueError):
        pair_typicality_deviation(Graph(6), Graph.complete(6), 1)


def test_boundedness_examples():
    n = 20
    assert is_bounded(Graph(n), 0.01)
    c = 0.25
    star = Graph(n, [(0, v) for v in range(1, 1 + math.ceil(c * n))])
    assert not is_bounded(star, c)
    matching = Graph(n, [(2 * i, 2 * i + 1) for i in range(n // 2)])
    assert is_bounded(matching, 2 / n)


def test_boundary_examples():
    t = TriangleVec(5)
    t.add((0, 1, 2))
    assert dict(boundary(2, t).items()) == {(0, 1): 1, (0, 2): 1, (1, 2): 1}
    e = IntGraph(5)
    e.add((1, 3))
    assert dict(boundary(1, e).items()) == {(1,): 1, (3,): 1}
    om = Octahedron(((0, 1), (2, 3), (4, 5)))
    assert boundary(2, om.vector(6)).is_zero()


def test_decomposition_examples():
    fano = fano_triples()
    assert len(fano) == 7
    assert verify_decomposition(Graph.complete(7), fano)
    assert not verify_decomposition(Graph.complete(4), [(0, 1, 2), (0, 1, 3)])
    g = Graph(4, [(0, 1), (0, 2), (1, 2), (2, 3)])
    assert not verify_decomposition(g, [(0, 1, 2)])


def test_matching_edges_rejects_overlap():
    assert is_matching([(0, 1, 2), (2, 3, 4)])
    assert not is_matching([(0, 1, 2), (1, 2, 3)])
    with pytest.raises(ValueError):
        matching_edges([(0, 1, 2), (1, 2, 3)])


def test_graph_file_roundtrip(tmp_path):
    g = Graph.gnp(30, 0.3, random.Random(1))
    path = tmp_path / "g.txt"
    write_graph(g, str(path))
    assert read_graph(str(path)) == g


def test_derive_seed_is_stable_and_separates_labels():
    assert derive_seed(42, "hole", 0) == derive_seed(42, "hole", 0)
    seeds = {derive_seed(42, "hole", k) for k in range(50)} | {derive_seed(43, "hole", 0)}
    assert len(seeds) == 51
    assert all(0 <= s < 2**64 for s in seeds)


signed_triangles = st.lists(
    st.tuples(st.sampled_from(list(combinations(range(8), 3))), st.integers(-3, 3)), max_size=25
)


@given(signed_triangles)
def test_vertex_sums_of_triangle_boundary(items):
    # unsigned boundaries: each vertex collects twice the weight of its triangles
    t = TriangleVec(8)
    for tri, w in items:
        t.add(tri, w)
    vs = boundary(1, boundary(2, t))
    for v in range(8):
        assert vs[(v,)] == 2 * sum(w for tri, w in t.items() if v in tri)


@given(signed_triangles)
def test_boundary_of_triangles_is_tridivisible(items):
    t = TriangleVec(8)
    for tri, w in items:
        t.add(tri, w)
    assert is_tridivisible(boundary(2, t))


@settings(deadline=None, max_examples=30)
@given(st.integers(0, 2**32))
def test_disjoint_triangles_decompose_their_union(seed):
    rng = random.Random(seed)
    g = Graph(15)
    tris = []
    for _ in range(8):
        t = tuple(sorted(rng.sample(range(15), 3)))
        if all(not g.has_edge(*e) for e in tri_edges(t)):
            for e in tri_edges(t):
                g.add_edge(*e)
            tris.append(t)
    assert verify_decomposition(g, tris)
    assert is_tridivisible(g)
