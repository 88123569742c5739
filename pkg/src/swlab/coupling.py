"""The SW grand coupling, coupling times, shattering and disagreement fronts.

Two copies of the SW chain share every tape: edge ``e`` is kept in either
copy iff it is monochromatic there and ``r_e < p``, and every cluster takes
the colour draw of its representative vertex.  Identical clusters in the two
copies therefore always receive identical colours.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import _percolate, _recolor
from .graph import Graph, LatticeGraph, build_cube, connected_components
from .measures import BoundaryCondition, ModelParams
from .tape import RandomnessTape, seed_stream

CENSORED = -1

# tape slots, so that block sampling and shattering trials never reuse coupling draws
_SLOT_COUPLING = 0
_SLOT_BLOCKS = 11
_SLOT_SHATTER = 13
_SLOT_SAMPLE = 17


@dataclass(frozen=True, eq=False)
class CoupledPair:
    """Two SW chains on one graph driven by the same tapes.

    If ``mask`` is given, ``Y`` only recolours clusters lying entirely
    inside ``mask``; everything else in ``Y`` stays frozen.
    """

    g: Graph
    params: ModelParams
    bc: BoundaryCondition
    X: np.ndarray
    Y: np.ndarray
    seed: int = 0
    replica: int = 0
    t: int = 0
    mask: np.ndarray | None = None

    def tape(self, step: int | None = None) -> RandomnessTape:
        step = self.t if step is None else step
        return seed_stream(self.seed, self.replica, step, m=self.g.m, n=self.g.n, q=self.params.q,
                           slot=_SLOT_COUPLING)

    @property
    def coalesced(self) -> bool:
        return bool(np.array_equal(self.X, self.Y))


def _restricted_step(g: Graph, params: ModelParams, bc: BoundaryCondition, sigma: np.ndarray,
                     tape: RandomnessTape, mask: np.ndarray) -> np.ndarray:
    A = _percolate(g, params, bc, sigma, tape.edge_uniforms)
    comps = connected_components(g, A)
    outside = np.bincount(comps.labels, weights=~mask, minlength=comps.count) > 0
    new = _recolor(g, bc, A, tape.vertex_colors)
    keep = outside[comps.labels]
    new[keep] = sigma[keep]
    return new


def coupled_update(g: Graph, params: ModelParams, bc: BoundaryCondition, X, Y, tape: RandomnessTape,
                   mask: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """One grand-coupling step of ``(X, Y)`` from an explicit tape."""
    X, Y = np.asarray(X), np.asarray(Y)
    A_X = _percolate(g, params, bc, X, tape.edge_uniforms)
    X1 = _recolor(g, bc, A_X, tape.vertex_colors)
    if mask is None:
        Y1 = X1.copy() if np.array_equal(X, Y) else _recolor(g, bc, _percolate(g, params, bc, Y, tape.edge_uniforms),
                                                             tape.vertex_colors)
    else:
        Y1 = _restricted_step(g, params, bc, Y, tape, mask)
    return X1, Y1


def sw_coupled_step(pair: CoupledPair) -> CoupledPair:
    X1, Y1 = coupled_update(pair.g, pair.params, pair.bc, pair.X, pair.Y, pair.tape(), pair.mask)
    return replace(pair, X=X1, Y=Y1, t=pair.t + 1)


def _constant_start(g: Graph, bc: BoundaryCondition, color: int) -> np.ndarray:
    s = np.full(g.n, color, dtype=np.int64)
    if bc.pinned_spins:
        pv, pc = bc.spin_arrays()
        s[pv] = pc
    return s


def start_pair(g: Graph, params: ModelParams, bc: BoundaryCondition, starts="extremal",
               seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Initial ``(X0, Y0)``.

    ``"extremal"`` pits all-1 (every edge monochromatic) against the
    checkerboard 1/2 colouring (every edge bichromatic).  ``"monochromatic"``
    gives all-1 against all-2; note that the grand coupling merges that pair
    in one step, since both copies then see the same percolation.
    ``"random"`` draws both uniformly; a pair of arrays is used as given.
    Pinned spins are respected in every case.
    """
    if isinstance(starts, str):
        if starts == "monochromatic":
            return _constant_start(g, bc, 1), _constant_start(g, bc, 2)
        if starts == "extremal":
            if not g.is_bipartite:
                raise ValueError("the extremal start needs a bipartite graph")
            Y = g.parity.astype(np.int64) + 1
            if bc.pinned_spins:
                pv, pc = bc.spin_arrays()
                Y[pv] = pc
            return _constant_start(g, bc, 1), Y
        if starts == "random":
            rng = np.random.default_rng([seed, 0x5eed])
            X, Y = (rng.integers(1, params.q + 1, size=g.n) for _ in range(2))
            if bc.pinned_spins:
                pv, pc = bc.spin_arrays()
                X[pv] = pc
                Y[pv] = pc
            return X, Y
        raise ValueError(f"unknown start strategy {starts!r}")
    X, Y = starts
    return np.asarray(X, dtype=np.int64).copy(), np.asarray(Y, dtype=np.int64).copy()


def coupling_time(g: Graph, params: ModelParams, bc: BoundaryCondition, starts="extremal",
                  seed: int = 0, t_cap: int = 10_000, replica: int = 0) -> int:
    """First ``t`` with ``X_t == Y_t`` under the grand coupling, or ``CENSORED``."""
    X, Y = start_pair(g, params, bc, starts, seed)
    for t in range(t_cap + 1):
        if np.array_equal(X, Y):
            return t
        if t == t_cap:
            break
        tape = seed_stream(seed, replica, t, m=g.m, n=g.n, q=params.q, slot=_SLOT_COUPLING)
        X, Y = coupled_update(g, params, bc, X, Y, tape)
    return CENSORED


def sw_run(g: Graph, params: ModelParams, bc: BoundaryCondition, steps: int, seed: int = 0,
           start=None, replica: int = 0, slot: int = _SLOT_SAMPLE) -> np.ndarray:
    """Final state of ``steps`` SW updates, used to draw approximate samples."""
    s = _constant_start(g, bc, 1) if start is None else np.asarray(start, dtype=np.int64).copy()
    for t in range(steps):
        tape = seed_stream(seed, replica, t, m=g.m, n=g.n, q=params.q, slot=slot)
        A = _percolate(g, params, bc, s, tape.edge_uniforms)
        s = _recolor(g, bc, A, tape.vertex_colors)
    return s


# --------------------------------------------------------------------------
# shattering


@dataclass(frozen=True)
class ShatterReport:
    L: int
    trials: int
    failures: int
    n_deep: int

    @property
    def estimate(self) -> float:
        return self.failures / self.trials if self.trials else 0.0


def _require_lattice(g: Graph) -> LatticeGraph:
    if not isinstance(g, LatticeGraph):
        raise ValueError("this operation needs a lattice graph with coordinates")
    return g


def deep_vertices(g: LatticeGraph, L: int) -> np.ndarray:
    """Vertices at L-infinity distance at least ``2L`` from the boundary."""
    return np.flatnonzero(g.boundary_distance() >= 2 * L)


def _reach(g: LatticeGraph, labels: np.ndarray, count: int, v: np.ndarray) -> np.ndarray:
    """L-infinity distance from each ``v`` to the farthest vertex of its cluster."""
    lo = np.full((count, g.dim), np.iinfo(np.int64).max)
    hi = np.full((count, g.dim), np.iinfo(np.int64).min)
    np.minimum.at(lo, labels, g.coords)
    np.maximum.at(hi, labels, g.coords)
    c = labels[v]
    x = g.coords[v]
    return np.maximum(x - lo[c], hi[c] - x).max(axis=1)


def shattered_check(g: Graph, params: ModelParams, sigma, L: int, trials: int, seed: int = 0) -> ShatterReport:
    """Monte Carlo estimate of the chance that some deep cluster reaches its ``L``-box boundary.

    The box ``Lambda_v(L)`` holds the vertices within L-infinity distance
    ``L/2`` of ``v``; a cluster reaches its boundary once it contains a
    vertex at distance ``>= L/2``.  Trial ``k`` always uses the same edge
    uniforms, so reports for different ``L`` share random numbers.
    """
    g = _require_lattice(g)
    if L < 1:
        raise ValueError("L must be at least 1")
    sigma = np.asarray(sigma)
    deep = deep_vertices(g, L)
    free = BoundaryCondition.free()
    failures = 0
    if len(deep):
        for k in range(trials):
            tape = seed_stream(seed, k, 0, m=g.m, n=0, q=params.q, slot=_SLOT_SHATTER)
            A = _percolate(g, params, free, sigma, tape.edge_uniforms)
            comps = connected_components(g, A)
            if (2 * _reach(g, comps.labels, comps.count, deep) >= L).any():
                failures += 1
    return ShatterReport(L=int(L), trials=int(trials), failures=failures, n_deep=len(deep))


# --------------------------------------------------------------------------
# disagreement fronts inside blocks


@dataclass(frozen=True, eq=False)
class BlockLayout:
    """Cubes ``B_i`` of ``ell`` vertices per side, centred on multiples of ``ell + 3``."""

    ell: int
    centers: np.ndarray      # (N, d) coordinates
    block_of: np.ndarray     # per vertex, block id or -1
    depth: np.ndarray        # per vertex, L-inf distance to the block's outer layer (0 there and outside)

    @property
    def n_blocks(self) -> int:
        return len(self.centers)

    @property
    def interior(self) -> np.ndarray:
        return self.depth > 0

    @property
    def members(self) -> np.ndarray:
        return self.block_of >= 0


def block_layout(g: Graph, ell: int) -> BlockLayout:
    g = _require_lattice(g)
    if ell < 3 or ell % 2 == 0:
        raise ValueError("block side ell must be odd and at least 3")
    half = (ell - 1) // 2
    step = ell + 3
    s = g.side_length
    axis = [c for c in range(0, s + 1, step) if c - half >= 4 and c + half <= s - 4]
    if not axis:
        raise ValueError(f"no block of side {ell} fits at distance 4 from the boundary of a side-{s} cube")
    centers = np.array(np.meshgrid(*([axis] * g.dim), indexing="ij")).reshape(g.dim, -1).T
    block_of = np.full(g.n, -1, dtype=np.int64)
    depth = np.zeros(g.n, dtype=np.int64)
    for i, c in enumerate(centers):
        off = np.abs(g.coords - c).max(axis=1)
        inside = off <= half
        block_of[inside] = i
        depth[inside] = half - off[inside]
    return BlockLayout(ell=ell, centers=centers, block_of=block_of, depth=depth)


def _sample_block(params: ModelParams, ell: int, d: int, seed: int, block: int,
                  burn_in: int, max_tries: int) -> np.ndarray:
    """All-1-boundary Potts sample on one block, conditioned on its central edge agreeing."""
    cube = build_cube(d, ell - 1)
    bc = BoundaryCondition.wired(cube)
    half = (ell - 1) // 2
    v = cube.vertex([half] * d)
    u = cube.vertex([half + 1] + [half] * (d - 1))
    s = sw_run(cube, params, bc, burn_in, seed=seed, replica=block, slot=_SLOT_BLOCKS)
    for t in range(max_tries):
        if s[v] == s[u]:
            return cube, s
        tape = seed_stream(seed, block, burn_in + t, m=cube.m, n=cube.n, q=params.q, slot=_SLOT_BLOCKS)
        s = _recolor(cube, bc, _percolate(cube, params, bc, s, tape.edge_uniforms), tape.vertex_colors)
    raise RuntimeError("could not satisfy the central-edge condition on a block")


def block_start(g: Graph, params: ModelParams, layout: BlockLayout, seed: int = 0,
                burn_in: int = 50, max_tries: int = 10_000) -> np.ndarray:
    """All-1 outside the block interiors; each block drawn independently."""
    g = _require_lattice(g)
    s = np.ones(g.n, dtype=np.int64)
    half = (layout.ell - 1) // 2
    for i, c in enumerate(layout.centers):
        cube, loc = _sample_block(params, layout.ell, g.dim, seed, i, burn_in, max_tries)
        glob = [g.vertex(tuple(np.asarray(x) + c - half)) for x in cube.coords]
        s[glob] = loc
    return s


@dataclass(frozen=True)
class FrontReport:
    depths: np.ndarray     # depths[t] = deepest disagreement inside the blocks after t steps
    ell: int
    n_blocks: int

    def increments(self) -> np.ndarray:
        return np.diff(self.depths)

    def fraction_within(self, L: int) -> float:
        """Share of steps whose depth increment is at most ``2(L+1)``."""
        inc = self.increments()
        return float(np.mean(inc <= 2 * (L + 1))) if len(inc) else 1.0


def disagreement_front(g: Graph, params: ModelParams, ell: int, t_max: int, seed: int = 0,
                       burn_in: int = 50, bc: BoundaryCondition | None = None,
                       start: np.ndarray | None = None) -> FrontReport:
    """Track how far X/Y disagreements penetrate the blocks.

    ``X`` is the full SW chain, ``Y`` only updates clusters inside the block
    interiors, and ``X_0 = Y_0``.  Depth counts L-infinity steps inward from
    the block's outer layer, so ``0`` means no disagreement in any interior.
    """
    g = _require_lattice(g)
    bc = BoundaryCondition.free() if bc is None else bc
    layout = block_layout(g, ell)
    s0 = block_start(g, params, layout, seed, burn_in) if start is None else np.asarray(start)
    pair = CoupledPair(g, params, bc, s0.copy(), s0.copy(), seed=seed, mask=layout.interior)
    depths = [0]
    for _ in range(t_max):
        pair = sw_coupled_step(pair)
        dis = (pair.X != pair.Y) & layout.interior
        depths.append(int(layout.depth[dis].max(initial=0)))
    return FrontReport(depths=np.array(depths), ell=ell, n_blocks=layout.n_blocks)
