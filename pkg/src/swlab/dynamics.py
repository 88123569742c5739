"""One-step samplers for the spin, edge and joint-space chains.

Every step function is a pure function of ``(state, tape)``: the tape's
``edge_uniforms`` drive percolation, ``vertex_colors`` recolour clusters
(each cluster takes the draw of its representative vertex), and
``vertex_uniforms``/``aux`` drive heat-bath and site selection.

Composite joint chains are named the way the SW literature names them:
``JointKT`` resamples edges given spins (T) and then spins given edges (K),
so its spin projection is the SW spin chain; ``JointTK`` does K then T and
projects to the SW edge chain.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .graph import EVEN, ODD, Graph, as_edge_mask, connected_components
from .measures import BoundaryCondition, ModelParams, bichromatic
from .tape import RandomnessTape


class ChainKind(str, Enum):
    SW_SPIN = "SWSpin"
    SW_EDGE = "SWEdge"
    JOINT_K = "JointK"
    JOINT_T = "JointT"
    JOINT_KT = "JointKT"
    JOINT_TK = "JointTK"
    JOINT_HALF_KT = "JointHalfKT"
    JOINT_KTK = "JointKTK"
    JOINT_TKT = "JointTKT"
    JOINT_LOCAL = "JointLocal"
    RC_HEATBATH = "RCHeatBath"
    RC_SINGLE_BOND = "RCSingleBond"
    SCAN_EVEN = "ScanEven"
    SCAN_ODD = "ScanOdd"
    SCAN_EO = "ScanEO"
    SCAN_OE = "ScanOE"

    @property
    def state_type(self) -> str:
        if self in _SPIN_KINDS:
            return "spin"
        if self in _EDGE_KINDS:
            return "edge"
        return "joint"

    @property
    def reversible(self) -> bool:
        """Whether the chain satisfies detailed balance for its stationary measure."""
        return self not in _NONREVERSIBLE


_SPIN_KINDS = {ChainKind.SW_SPIN, ChainKind.SCAN_EVEN, ChainKind.SCAN_ODD, ChainKind.SCAN_EO, ChainKind.SCAN_OE}
_EDGE_KINDS = {ChainKind.SW_EDGE, ChainKind.RC_HEATBATH, ChainKind.RC_SINGLE_BOND}
_NONREVERSIBLE = {ChainKind.JOINT_KT, ChainKind.JOINT_TK, ChainKind.SCAN_EO, ChainKind.SCAN_OE}


@dataclass(frozen=True, eq=False)
class JointConfig:
    spins: np.ndarray
    edges: np.ndarray


# --------------------------------------------------------------------------
# shared building blocks


def _percolate(g: Graph, params: ModelParams, bc: BoundaryCondition, sigma: np.ndarray, r: np.ndarray) -> np.ndarray:
    # strict comparison: p = 0 keeps nothing and p = 1 keeps every monochromatic edge
    A = ~bichromatic(g, sigma) & (r < params.p)
    if bc.pinned_edges:
        pinned, opened = bc.edge_masks(g.m)
        A[pinned] = opened[pinned]
    return A


def _recolor(g: Graph, bc: BoundaryCondition, A: np.ndarray, colors: np.ndarray) -> np.ndarray:
    comps = connected_components(g, A)
    comp_col = np.asarray(colors)[comps.representatives].copy()
    if bc.pinned_spins:
        pv, pc = bc.spin_arrays()
        labs = comps.labels[pv]
        comp_col[labs] = pc
        if (comp_col[labs] != pc).any():
            raise ValueError("edge configuration connects vertices pinned to different spins")
    return comp_col[comps.labels]


def _check_joint(g: Graph, cfg: JointConfig) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(cfg.spins)
    A = as_edge_mask(g, cfg.edges)
    if (A & bichromatic(g, s)).any():
        raise ValueError("joint configuration has an occupied bichromatic edge")
    return s, A


def _pick(u: float, k: int) -> int:
    return min(int(u * k), k - 1)


def _free_edges(g: Graph, bc: BoundaryCondition) -> np.ndarray:
    if not bc.pinned_edges:
        return np.arange(g.m)
    pinned, _ = bc.edge_masks(g.m)
    return np.flatnonzero(~pinned)


def colour_wirings(bc: BoundaryCondition) -> list[list[int]]:
    """Pinned vertices grouped by colour: the wiring blocks they induce."""
    blocks: dict[int, list[int]] = {}
    for v, c in sorted(bc.pinned_spins.items()):
        blocks.setdefault(c, []).append(v)
    return list(blocks.values())


# --------------------------------------------------------------------------
# SW chains


def sw_spin_step(g: Graph, params: ModelParams, bc: BoundaryCondition, sigma, tape: RandomnessTape) -> np.ndarray:
    """Percolate monochromatic edges, then recolour every cluster."""
    s = np.asarray(sigma)
    A = _percolate(g, params, bc, s, tape.edge_uniforms)
    return _recolor(g, bc, A, tape.vertex_colors)


def sw_edge_step(g: Graph, params: ModelParams, bc: BoundaryCondition, A, tape: RandomnessTape) -> np.ndarray:
    """Colour the clusters of ``A`` uniformly, then percolate the monochromatic edges."""
    sigma = _recolor(g, bc, as_edge_mask(g, A), tape.vertex_colors)
    return _percolate(g, params, bc, sigma, tape.edge_uniforms)


def joint_K_step(g: Graph, params: ModelParams, bc: BoundaryCondition, cfg: JointConfig, tape: RandomnessTape) -> JointConfig:
    _, A = _check_joint(g, cfg)
    return JointConfig(_recolor(g, bc, A, tape.vertex_colors), A.copy())


def joint_T_step(g: Graph, params: ModelParams, bc: BoundaryCondition, cfg: JointConfig, tape: RandomnessTape) -> JointConfig:
    s, _ = _check_joint(g, cfg)
    return JointConfig(s.copy(), _percolate(g, params, bc, s, tape.edge_uniforms))


def joint_local_step(g: Graph, params: ModelParams, bc: BoundaryCondition, cfg: JointConfig, tape: RandomnessTape) -> JointConfig:
    """One heat-bath update of a uniformly chosen vertex or edge.

    ``aux[0]`` chooses vertex (< 1/2) or edge, ``aux[1]`` chooses which one.
    """
    s, A = _check_joint(g, cfg)
    s, A = s.copy(), A.copy()
    if g.m == 0 or tape.aux[0] < 0.5:
        v = _pick(tape.aux[1], g.n)
        if v not in bc.pinned_spins and not A[g.incident_edges(v)].any():
            s[v] = tape.vertex_colors[v]
    else:
        e = _pick(tape.aux[1], g.m)
        u, w = g.edges[e]
        if e not in bc.pinned_edges and s[u] == s[w]:
            A[e] = tape.edge_uniforms[e] < params.p
    return JointConfig(s, A)


# --------------------------------------------------------------------------
# random-cluster Glauber chains


def insertion_probability(g: Graph, params: ModelParams, bc: BoundaryCondition, A: np.ndarray, e: int) -> float:
    """Heat-bath probability that edge ``e`` is occupied given the rest of ``A``."""
    rest = A.copy()
    rest[e] = False
    comps = connected_components(g, rest, colour_wirings(bc))
    u, w = (int(x) for x in g.edges[e])
    lu, lw = comps.labels[u], comps.labels[w]
    if lu == lw:
        return params.p
    pinned_labels = {int(comps.labels[v]) for v in bc.pinned_spins}
    if lu in pinned_labels and lw in pinned_labels:
        return 0.0
    q, p = params.q, params.p
    return p / (q * (1.0 - p) + p)


def rc_heatbath_step(g: Graph, params: ModelParams, bc: BoundaryCondition, A, tape: RandomnessTape) -> np.ndarray:
    """Resample one uniformly chosen unpinned edge from its conditional law."""
    A = as_edge_mask(g, A).copy()
    free = _free_edges(g, bc)
    if len(free) == 0:
        return A
    e = int(free[_pick(tape.aux[0], len(free))])
    A[e] = tape.edge_uniforms[e] < insertion_probability(g, params, bc, A, e)
    return A


def rc_single_bond_step(g: Graph, params: ModelParams, bc: BoundaryCondition, A, tape: RandomnessTape) -> np.ndarray:
    """Colour clusters uniformly; a chosen monochromatic edge is resampled, a bichromatic one kept."""
    A = as_edge_mask(g, A).copy()
    sigma = _recolor(g, bc, A, tape.vertex_colors)
    free = _free_edges(g, bc)
    if len(free) == 0:
        return A
    e = int(free[_pick(tape.aux[0], len(free))])
    u, w = g.edges[e]
    if sigma[u] == sigma[w]:
        A[e] = tape.edge_uniforms[e] < params.p
    return A


# --------------------------------------------------------------------------
# alternating scan


def site_conditionals(g: Graph, params: ModelParams, bc: BoundaryCondition, sigma: np.ndarray) -> np.ndarray:
    """``(n, q)`` single-site Potts conditionals of every vertex given its neighbours."""
    q = params.q
    pinned, opened = bc.edge_masks(g.m)
    free = ~pinned
    hard = pinned & opened
    agree = np.zeros((g.n, q))
    deg = np.zeros(g.n)
    agree_hard = np.zeros((g.n, q))
    deg_hard = np.zeros(g.n)
    for a, b in ((0, 1), (1, 0)):
        us, ws = g.edges[:, a], g.edges[:, b]
        np.add.at(agree, (us[free], sigma[ws[free]] - 1), 1.0)
        np.add.at(deg, us[free], 1.0)
        np.add.at(agree_hard, (us[hard], sigma[ws[hard]] - 1), 1.0)
        np.add.at(deg_hard, us[hard], 1.0)
    dis = deg[:, None] - agree
    with np.errstate(invalid="ignore"):
        logw = np.where(dis > 0, -params.beta * dis, 0.0)
    logw[(deg_hard[:, None] - agree_hard) > 0] = -np.inf
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    return w / w.sum(axis=1, keepdims=True)


def scan_step(g: Graph, params: ModelParams, bc: BoundaryCondition, sigma, side: int, tape: RandomnessTape) -> np.ndarray:
    """Resample every unpinned vertex of one bipartition side given the other side."""
    s = np.asarray(sigma).copy()
    verts = g.side(side)
    if bc.pinned_spins:
        verts = verts[~np.isin(verts, list(bc.pinned_spins))]
    if len(verts) == 0:
        return s
    cond = site_conditionals(g, params, bc, s)[verts]
    cdf = np.cumsum(cond, axis=1)
    u = tape.vertex_uniforms[verts]
    s[verts] = 1 + np.minimum((u[:, None] >= cdf).sum(axis=1), params.q - 1)
    return s


# --------------------------------------------------------------------------
# dispatch


def step(kind: ChainKind, g: Graph, params: ModelParams, bc: BoundaryCondition, state, tape: RandomnessTape):
    """Advance ``state`` by one step of chain ``kind``."""
    kind = ChainKind(kind)
    K = joint_K_step
    T = joint_T_step
    if kind is ChainKind.SW_SPIN:
        return sw_spin_step(g, params, bc, state, tape)
    if kind is ChainKind.SW_EDGE:
        return sw_edge_step(g, params, bc, state, tape)
    if kind is ChainKind.JOINT_K:
        return K(g, params, bc, state, tape)
    if kind is ChainKind.JOINT_T:
        return T(g, params, bc, state, tape)
    if kind is ChainKind.JOINT_KT:
        return K(g, params, bc, T(g, params, bc, state, tape), tape)
    if kind is ChainKind.JOINT_TK:
        return T(g, params, bc, K(g, params, bc, state, tape), tape)
    if kind is ChainKind.JOINT_HALF_KT:
        return (K if tape.aux[0] < 0.5 else T)(g, params, bc, state, tape)
    if kind is ChainKind.JOINT_KTK:
        mid = T(g, params, bc, K(g, params, bc, state, tape), tape)
        return K(g, params, bc, mid, tape.derive(1))
    if kind is ChainKind.JOINT_TKT:
        mid = K(g, params, bc, T(g, params, bc, state, tape), tape)
        return T(g, params, bc, mid, tape.derive(1))
    if kind is ChainKind.JOINT_LOCAL:
        return joint_local_step(g, params, bc, state, tape)
    if kind is ChainKind.RC_HEATBATH:
        return rc_heatbath_step(g, params, bc, state, tape)
    if kind is ChainKind.RC_SINGLE_BOND:
        return rc_single_bond_step(g, params, bc, state, tape)
    if kind is ChainKind.SCAN_EVEN:
        return scan_step(g, params, bc, state, EVEN, tape)
    if kind is ChainKind.SCAN_ODD:
        return scan_step(g, params, bc, state, ODD, tape)
    if kind is ChainKind.SCAN_EO:
        return scan_step(g, params, bc, scan_step(g, params, bc, state, EVEN, tape), ODD, tape)
    if kind is ChainKind.SCAN_OE:
        return scan_step(g, params, bc, scan_step(g, params, bc, state, ODD, tape), EVEN, tape)
    raise ValueError(f"unknown chain kind {kind}")


def observables(g: Graph, q: int, sigma=None, A=None) -> dict:
    """Energy ``|D(sigma)|``, magnetisation histogram, ``|A|`` and ``c(A)``."""
    out = {}
    if sigma is not None:
        s = np.asarray(sigma)
        out["energy"] = int(bichromatic(g, s).sum())
        out["magnetization"] = np.bincount(s - 1, minlength=q).tolist()
    if A is not None:
        mask = as_edge_mask(g, A)
        out["n_edges"] = int(mask.sum())
        out["n_components"] = connected_components(g, mask).count
    return out
