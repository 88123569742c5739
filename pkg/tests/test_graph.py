import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swlab.graph import (
    arbitrary_graph,
    build_cube,
    connected_components,
    graph_dumps,
    graph_from_json,
    planar_dual,
)

import oracle


@pytest.mark.parametrize("d,side,nv,ne,nb", [(1, 1, 2, 1, 2), (2, 1, 4, 4, 4), (2, 3, 16, 24, 12), (3, 2, 27, 54, 26)])
def test_cube_counts(d, side, nv, ne, nb):
    g = build_cube(d, side)
    assert (g.n, g.m, len(g.boundary_vertices)) == (nv, ne, nb)


@pytest.mark.parametrize("d,side", [(0, 1), (1, 0), (-1, 2), (2, 1.5)])
def test_cube_rejects_bad_sizes(d, side):
    with pytest.raises(ValueError):
        build_cube(d, side)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4))
def test_cube_invariants(d, side):
    g = build_cube(d, side)
    assert g.n == (side + 1) ** d
    c = g.coords
    diff = np.abs(c[g.edges[:, 0]] - c[g.edges[:, 1]]).sum(axis=1)
    assert (diff == 1).all()
    assert (g.parity[g.edges[:, 0]] != g.parity[g.edges[:, 1]]).all()
    on_bd = ((c == 0) | (c == side)).any(axis=1)
    assert set(g.boundary_vertices) == set(np.flatnonzero(on_bd))
    ends = on_bd[g.edges].sum(axis=1)
    assert set(g.boundary_edges) == set(np.flatnonzero(ends >= 1))
    assert set(g.sticking_edges) == set(np.flatnonzero(ends == 1))
    for v in np.flatnonzero(~on_bd):
        assert g.degree(v) == 2 * d
    # ordering: coordinate sum, then lexicographic
    keys = [(sum(x), tuple(x)) for x in c.tolist()]
    assert keys == sorted(keys)


def test_components_examples():
    g = build_cube(2, 1)
    assert connected_components(g, np.zeros(4, bool)).count == 4
    assert connected_components(g, np.ones(4, bool)).count == 1
    v = {c: g.vertex(c) for c in [(0, 0), (0, 1), (1, 0), (1, 1)]}
    e1 = g.edge_index[tuple(sorted((v[(0, 0)], v[(0, 1)])))]
    e2 = g.edge_index[tuple(sorted((v[(1, 0)], v[(1, 1)])))]
    assert connected_components(g, [e1, e2]).count == 2


def test_components_out_of_range():
    g = build_cube(2, 1)
    with pytest.raises(ValueError):
        connected_components(g, [7])
    with pytest.raises(ValueError):
        connected_components(g, [], wirings=[[0, 9]])


def test_wirings_merge_blocks():
    g = build_cube(1, 3)
    lab = connected_components(g, np.zeros(3, bool), wirings=[[g.vertex((0,)), g.vertex((3,))]])
    assert lab.count == 3
    assert lab.same(g.vertex((0,)), g.vertex((3,)))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.data())
def test_components_match_reference_and_backends(side, data):
    g = build_cube(2, side)
    A = np.array(data.draw(st.lists(st.booleans(), min_size=g.m, max_size=g.m)), dtype=bool)
    uf = connected_components(g, A, method="unionfind")
    cs = connected_components(g, A, method="csgraph")
    assert np.array_equal(uf.labels, cs.labels) and np.array_equal(uf.representatives, cs.representatives)
    ref = oracle.components(g.n, [tuple(e) for e in g.edges[A]])
    assert uf.count == len(ref)
    for C in ref:
        assert len(set(uf.labels[C])) == 1
        # representative: smallest coordinate sum, lexicographic tie-break
        best = min(C, key=lambda v: (g.coords[v].sum(), tuple(g.coords[v])))
        assert uf.representatives[uf.labels[C[0]]] == best
    # adding an edge never increases the count
    if (~A).any():
        B = A.copy()
        B[np.flatnonzero(~A)[0]] = True
        assert connected_components(g, B).count <= uf.count
    for v in range(g.n):
        if uf.sizes()[uf.labels[v]] == 1:
            assert uf.representatives[uf.labels[v]] == v


def test_arbitrary_graph_validation():
    g = arbitrary_graph(3, [(0, 1), (1, 2)])
    assert g.is_bipartite and len(g.boundary_vertices) == 3
    assert not arbitrary_graph(3, [(0, 1), (1, 2), (0, 2)]).is_bipartite
    for bad in ([(0, 0)], [(0, 1), (1, 0)], [(0, 3)]):
        with pytest.raises(ValueError):
            arbitrary_graph(3, bad)


def test_json_round_trip():
    for g in (build_cube(2, 3), arbitrary_graph(4, [(0, 1), (2, 3)])):
        h = graph_from_json(g.to_json())
        assert h.n == g.n and np.array_equal(h.edges, g.edges)
        assert graph_dumps(h) == graph_dumps(g)


def test_dual_examples():
    D = planar_dual(build_cube(2, 1))
    assert D.wired.n == 2 and D.wired.m == 4
    assert set(map(tuple, np.sort(D.wired.edges, axis=1))) == {(0, 1)}
    assert D.dual_config(np.zeros(4, bool)).all()
    D3 = planar_dual(build_cube(2, 2))
    assert D3.wired.n == 5 and D3.wired.m == 12


def test_dual_rejects_other_dims():
    with pytest.raises(ValueError):
        planar_dual(build_cube(3, 1))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.data())
def test_dual_complementation(side, data):
    D = planar_dual(build_cube(2, side))
    m = D.base.m
    A = np.array(data.draw(st.lists(st.booleans(), min_size=m, max_size=m)), dtype=bool)
    Ad = D.dual_config(A)
    assert A.sum() + Ad.sum() == m
    assert np.array_equal(D.primal_config(Ad), A)
    assert len(D.edge_bijection) == m == D.wired.m == D.free.m


def test_dual_faces_border_their_edge():
    # every dual edge joins the faces on either side of its primal edge
    g = build_cube(2, 3)
    D = planar_dual(g)
    s = g.side_length
    for e, (u, v) in enumerate(g.edges):
        a, b = D.wired.edges[D.edge_bijection[e]]
        cu, cv = g.coords[u], g.coords[v]
        mid = (cu + cv) / 2
        faces = []
        for f in (a, b):
            if f == D.outer_vertex:
                faces.append(None)
            else:
                faces.append(tuple(D.face_coords[f]))
        # face centres sit half a unit from the midpoint of each bordering edge
        for fc in faces:
            if fc is not None:
                assert np.abs(np.array(fc) - mid).sum() == 0.5
        on_boundary_line = (cu == cv) & ((cu == 0) | (cu == s))
        assert (None in faces) == bool(on_boundary_line.any())
