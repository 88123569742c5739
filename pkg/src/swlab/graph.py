"""Finite lattice graphs, connectivity and planar duality.

Vertices of a :class:`LatticeGraph` are numbered in increasing order of
(coordinate sum, coordinate tuple).  With that numbering the representative
of a connected component -- the member with the smallest coordinate sum,
ties broken by ascending lexicographic order of the coordinates -- is simply
its lowest vertex id, which keeps the hot loops free of coordinate logic.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _csgraph_components

EVEN, ODD = 0, 1

# below this many edges the pure-Python union-find beats building a sparse matrix
_UNIONFIND_MAX_EDGES = 256


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected (multi)graph on vertices ``0..n-1``.

    ``edges`` is an ``(m, 2)`` integer array; edge ``k`` joins
    ``edges[k, 0]`` and ``edges[k, 1]``.  ``parity`` holds the bipartition
    label (``EVEN``/``ODD``) or ``-1`` everywhere when the graph is not
    bipartite.  ``boundary_vertices`` is the set on which boundary spins may
    be pinned.
    """

    n: int
    edges: np.ndarray
    parity: np.ndarray
    boundary_vertices: np.ndarray
    coords: np.ndarray | None = None
    multigraph: bool = False
    _inc_ptr: np.ndarray = field(init=False, repr=False)
    _inc_edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = len(self.edges)
        ends = self.edges.reshape(-1)
        order = np.argsort(ends, kind="stable")
        counts = np.bincount(ends, minlength=self.n)
        ptr = np.concatenate([[0], np.cumsum(counts)])
        object.__setattr__(self, "_inc_ptr", _frozen(ptr))
        object.__setattr__(self, "_inc_edges", _frozen(order // 2 if m else order))

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def has_geometry(self) -> bool:
        return self.coords is not None

    @property
    def is_bipartite(self) -> bool:
        return bool(self.n == 0 or self.parity[0] >= 0)

    def degree(self, v: int) -> int:
        return int(self._inc_ptr[v + 1] - self._inc_ptr[v])

    def incident_edges(self, v: int) -> np.ndarray:
        return self._inc_edges[self._inc_ptr[v]:self._inc_ptr[v + 1]]

    def side(self, which: int) -> np.ndarray:
        """Vertex ids on the ``EVEN`` or ``ODD`` side of the bipartition."""
        if not self.is_bipartite:
            raise ValueError("graph is not bipartite")
        return np.flatnonzero(self.parity == which)

    def to_json(self) -> dict:
        return {"n": self.n, "edges": self.edges.tolist()}


@dataclass(frozen=True, eq=False)
class LatticeGraph(Graph):
    """The cube ``{0,...,side}^dim`` of Z^d with nearest-neighbour edges."""

    dim: int = 1
    side_length: int = 1
    boundary_edges: np.ndarray = None
    sticking_edges: np.ndarray = None
    vertex_index: dict = None
    edge_index: dict = None

    @property
    def vertices(self) -> list[tuple[int, ...]]:
        return [tuple(int(c) for c in row) for row in self.coords]

    def boundary_distance(self) -> np.ndarray:
        """Per-vertex L-infinity distance to the boundary ``dV``."""
        return np.minimum(self.coords, self.side_length - self.coords).min(axis=1)

    def vertex(self, coord: Sequence[int]) -> int:
        return self.vertex_index[tuple(int(c) for c in coord)]

    def to_json(self) -> dict:
        return {"dim": self.dim, "side": self.side_length}


class ArbitraryGraph(Graph):
    """A small graph with no geometry, used for exact-oracle fixtures.

    Every vertex counts as a boundary vertex, so any vertex may be pinned.
    """


def build_cube(d: int, side: int) -> LatticeGraph:
    if int(d) != d or int(side) != side or d < 1 or side < 1:
        raise ValueError(f"dimension and side must be positive integers, got d={d}, side={side}")
    d, side = int(d), int(side)
    coords = sorted(itertools.product(range(side + 1), repeat=d), key=lambda c: (sum(c), c))
    vertex_index = {c: i for i, c in enumerate(coords)}
    edge_list = []
    for c in coords:
        u = vertex_index[c]
        for k in range(d):
            if c[k] < side:
                nb = c[:k] + (c[k] + 1,) + c[k + 1:]
                w = vertex_index[nb]
                edge_list.append((min(u, w), max(u, w)))
    edge_list.sort()
    edges = np.array(edge_list, dtype=np.int64).reshape(-1, 2)
    carr = np.array(coords, dtype=np.int64).reshape(-1, d)
    parity = (carr.sum(axis=1) % 2).astype(np.int8)
    on_bd = ((carr == 0) | (carr == side)).any(axis=1)
    n_bd_ends = on_bd[edges[:, 0]].astype(int) + on_bd[edges[:, 1]]
    return LatticeGraph(
        n=len(coords),
        edges=_frozen(edges),
        parity=_frozen(parity),
        boundary_vertices=_frozen(np.flatnonzero(on_bd)),
        coords=_frozen(carr),
        dim=d,
        side_length=side,
        boundary_edges=_frozen(np.flatnonzero(n_bd_ends >= 1)),
        sticking_edges=_frozen(np.flatnonzero(n_bd_ends == 1)),
        vertex_index=vertex_index,
        edge_index={(int(u), int(v)): k for k, (u, v) in enumerate(edges)},
    )


def _two_coloring(n: int, edges: np.ndarray) -> np.ndarray:
    color = np.full(n, -1, dtype=np.int8)
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    for s in range(n):
        if color[s] >= 0:
            continue
        color[s] = EVEN
        stack = [s]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if color[w] < 0:
                    color[w] = 1 - color[u]
                    stack.append(w)
                elif color[w] == color[u]:
                    return np.full(n, -1, dtype=np.int8)
    return color


def arbitrary_graph(n: int, edges: Iterable[Sequence[int]], parity: Sequence[int] | None = None) -> ArbitraryGraph:
    """Validate and build an :class:`ArbitraryGraph`.

    Self-loops, duplicate edges and out-of-range endpoints are rejected.  When
    ``parity`` is omitted a 2-colouring is searched for (vertex 0 of each
    connected piece is even).
    """
    if n < 1:
        raise ValueError("graph needs at least one vertex")
    seen = set()
    norm = []
    for e in edges:
        u, v = (int(x) for x in e)
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge {e} has an endpoint outside 0..{n - 1}")
        if u == v:
            raise ValueError(f"self-loop at vertex {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise ValueError(f"duplicate edge {key}")
        seen.add(key)
        norm.append(key)
    earr = np.array(norm, dtype=np.int64).reshape(-1, 2)
    if parity is None:
        par = _two_coloring(n, earr)
    else:
        par = np.asarray(parity, dtype=np.int8)
        if par.shape != (n,) or not np.isin(par, (EVEN, ODD)).all():
            raise ValueError("parity must give EVEN/ODD for every vertex")
        if len(earr) and (par[earr[:, 0]] == par[earr[:, 1]]).any():
            raise ValueError("parity labels are not a bipartition of the edges")
    return ArbitraryGraph(
        n=n,
        edges=_frozen(earr),
        parity=_frozen(par),
        boundary_vertices=_frozen(np.arange(n)),
    )


def graph_from_json(spec: dict) -> Graph:
    """Inverse of ``Graph.to_json``: ``{dim, side}`` or ``{n, edges}``."""
    if "dim" in spec:
        return build_cube(spec["dim"], spec["side"])
    if "n" in spec:
        return arbitrary_graph(spec["n"], spec.get("edges", []), spec.get("parity"))
    raise ValueError("graph description needs either {dim, side} or {n, edges}")


def graph_dumps(g: Graph) -> str:
    return json.dumps(g.to_json(), sort_keys=True)


# --------------------------------------------------------------------------
# connectivity


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


@dataclass(frozen=True, eq=False)
class ComponentLabeling:
    """Connected components, numbered in increasing order of representative.

    ``labels[v]`` is the component id of vertex ``v``; ``representatives[c]``
    is the lowest vertex id in component ``c`` (the smallest-coordinate-sum
    vertex on a lattice).
    """

    labels: np.ndarray
    count: int
    representatives: np.ndarray

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.count)

    def same(self, u: int, v: int) -> bool:
        return bool(self.labels[u] == self.labels[v])


def as_edge_mask(g: Graph, A) -> np.ndarray:
    """Normalise an edge configuration to a boolean mask of length ``g.m``."""
    arr = np.asarray(A)
    if arr.dtype == bool:
        if arr.shape != (g.m,):
            raise ValueError(f"edge mask has length {arr.shape}, graph has {g.m} edges")
        return arr
    ids = arr.astype(np.int64).reshape(-1)
    if ids.size and (ids.min() < 0 or ids.max() >= g.m):
        raise ValueError(f"edge id out of range 0..{g.m - 1}")
    mask = np.zeros(g.m, dtype=bool)
    mask[ids] = True
    return mask


def _labels_unionfind(n, ends, wirings):
    uf = UnionFind(n)
    for u, v in ends:
        uf.union(u, v)
    for block in wirings:
        block = list(block)
        for w in block[1:]:
            uf.union(block[0], w)
    labels = np.empty(n, dtype=np.int64)
    reps = []
    seen = {}
    for v in range(n):
        r = uf.find(v)
        c = seen.get(r)
        if c is None:
            c = seen[r] = len(reps)
            reps.append(v)
        labels[v] = c
    return labels, len(reps), np.array(reps, dtype=np.int64)


def _labels_csgraph(n, ends, wirings):
    rows = [ends[:, 0]]
    cols = [ends[:, 1]]
    for block in wirings:
        b = np.asarray(list(block), dtype=np.int64)
        if len(b) > 1:
            rows.append(np.full(len(b) - 1, b[0]))
            cols.append(b[1:])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    adj = coo_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(n, n)).tocsr()
    count, raw = _csgraph_components(adj, directed=False)
    _, first = np.unique(raw, return_index=True)
    order = np.argsort(first)
    relabel = np.empty(count, dtype=np.int64)
    relabel[order] = np.arange(count)
    return relabel[raw], int(count), first[order].astype(np.int64)


def connected_components(g: Graph, A, wirings: Sequence[Iterable[int]] = (), method: str = "auto") -> ComponentLabeling:
    """Components of ``(V, A)`` with each wiring block merged into one.

    ``method`` is ``"unionfind"``, ``"csgraph"`` or ``"auto"``; both
    back-ends produce the same canonical labelling.
    """
    mask = as_edge_mask(g, A)
    ends = g.edges[mask]
    for block in wirings:
        for w in block:
            if not 0 <= w < g.n:
                raise ValueError(f"wiring vertex {w} out of range")
    if method == "auto":
        method = "unionfind" if len(ends) + sum(len(list(b)) for b in wirings) <= _UNIONFIND_MAX_EDGES else "csgraph"
    if method == "unionfind":
        labels, count, reps = _labels_unionfind(g.n, ends.tolist(), wirings)
    elif method == "csgraph":
        labels, count, reps = _labels_csgraph(g.n, ends, wirings)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ComponentLabeling(labels=_frozen(labels), count=count, representatives=_frozen(reps))


# --------------------------------------------------------------------------
# planar duality


@dataclass(frozen=True, eq=False)
class DualGraph:
    """Planar dual of a 2-D square region.

    ``wired`` has one vertex per inner face plus a single outer vertex (the
    external face with every boundary dual vertex identified); random-cluster
    measures on it with no further boundary condition are dual to the free
    measure on ``base``.  ``free`` instead gives every boundary primal edge its
    own outer dual vertex, so it is dual to the wired measure on ``base``.
    Dual edge ``edge_bijection[e]`` crosses primal edge ``e`` in both graphs.
    """

    base: LatticeGraph
    wired: Graph
    free: Graph
    face_coords: np.ndarray
    edge_bijection: np.ndarray

    @property
    def outer_vertex(self) -> int:
        return len(self.face_coords)

    def dual_config(self, A) -> np.ndarray:
        """``A_d``: a dual edge is open iff the primal edge it crosses is closed."""
        mask = as_edge_mask(self.base, A)
        out = np.empty(self.base.m, dtype=bool)
        out[self.edge_bijection] = ~mask
        return out

    def primal_config(self, A_d) -> np.ndarray:
        mask = np.asarray(A_d, dtype=bool)
        if mask.shape != (self.base.m,):
            raise ValueError("dual configuration has the wrong length")
        return ~mask[self.edge_bijection]


def planar_dual(g: LatticeGraph) -> DualGraph:
    if not isinstance(g, LatticeGraph) or g.dim != 2:
        raise ValueError("planar dual is defined for 2-D lattice squares only")
    s = g.side_length
    n_faces = s * s
    outer = n_faces

    def face(x, y):
        if 0 <= x < s and 0 <= y < s:
            return x * s + y
        return outer

    face_coords = np.array([(x + 0.5, y + 0.5) for x in range(s) for y in range(s)])
    wired_edges = np.empty((g.m, 2), dtype=np.int64)
    for k, (u, v) in enumerate(g.edges):
        (x0, y0), (x1, y1) = g.coords[u], g.coords[v]
        if y0 == y1:  # horizontal edge: faces below and above
            a, b = face(min(x0, x1), y0 - 1), face(min(x0, x1), y0)
        else:  # vertical edge: faces left and right
            a, b = face(x0 - 1, min(y0, y1)), face(x0, min(y0, y1))
        wired_edges[k] = (min(a, b), max(a, b))

    free_edges = wired_edges.copy()
    next_id = n_faces
    for k in range(g.m):
        if free_edges[k, 1] == outer:
            free_edges[k, 1] = next_id
            next_id += 1

    no_parity = np.full(n_faces + 1, -1, dtype=np.int8)
    wired = Graph(
        n=n_faces + 1,
        edges=_frozen(wired_edges),
        parity=_frozen(no_parity),
        boundary_vertices=_frozen(np.array([outer])),
        multigraph=True,
    )
    free = Graph(
        n=next_id,
        edges=_frozen(free_edges),
        parity=_frozen(np.full(next_id, -1, dtype=np.int8)),
        boundary_vertices=_frozen(np.arange(n_faces, next_id)),
    )
    return DualGraph(
        base=g,
        wired=wired,
        free=free,
        face_coords=_frozen(face_coords),
        edge_bijection=_frozen(np.arange(g.m)),
    )
