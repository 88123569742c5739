"""Dense transition matrices built by exact summation over intermediate states.

Kernels are assembled from the joint weight table of a :class:`StateSpace`,
while the stationary vectors come from the weight functions in
:mod:`swlab.measures`; agreement between the two is what the stationarity
checks test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _scc

from ..dynamics import ChainKind
from ..graph import EVEN, ODD
from ..measures import BoundaryCondition, ModelParams
from .spaces import DEFAULT_STATE_CAP, CapExceeded, StateSpace, build_state_space

DEFAULT_DENSE_CAP = 4096


@dataclass(frozen=True, eq=False)
class DenseChain:
    kind: ChainKind
    space: StateSpace
    P: np.ndarray
    pi: np.ndarray

    @property
    def n_states(self) -> int:
        return len(self.pi)

    @property
    def state_type(self) -> str:
        return self.kind.state_type

    def stationarity_residual(self) -> float:
        return float(np.abs(self.pi @ self.P - self.pi).max())

    def detailed_balance_residual(self) -> float:
        flow = self.pi[:, None] * self.P
        return float(np.abs(flow - flow.T).max())

    def row_sum_residual(self) -> float:
        return float(np.abs(self.P.sum(axis=1) - 1.0).max())

    def is_ergodic(self) -> bool:
        return is_ergodic(self.P)

    def states(self):
        """Spin array, edge array, or ``(spins, edges)`` for joint chains."""
        ss = self.space
        if self.state_type == "spin":
            return ss.spins
        if self.state_type == "edge":
            return ss.edges
        return ss.joint_states()


def is_ergodic(P: np.ndarray, tol: float = 0.0) -> bool:
    """Irreducible and aperiodic, judged from the support of ``P``."""
    n = len(P)
    if n == 1:
        return True
    support = csr_matrix(P > tol)
    n_comp, _ = _scc(support, directed=True, connection="strong")
    if n_comp != 1:
        return False
    if (np.diag(P) > tol).any():
        return True
    # period = gcd of level differences along edges of a BFS layering
    level = np.full(n, -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for w in np.flatnonzero(P[u] > tol):
                if level[w] < 0:
                    level[w] = level[u] + 1
                    nxt.append(w)
        frontier = nxt
    period = 0
    us, ws = np.nonzero(P > tol)
    for d in level[us] + 1 - level[ws]:
        period = math.gcd(period, int(abs(d)))
    return period == 1


def _block_fill(P: np.ndarray, groups: np.ndarray, weights: np.ndarray) -> None:
    """For each group, every member transitions to members with prob ∝ weights."""
    order = np.argsort(groups, kind="stable")
    g_sorted = groups[order]
    cuts = np.flatnonzero(np.diff(g_sorted)) + 1
    for block in np.split(order, cuts):
        w = weights[block]
        P[np.ix_(block, block)] = w / w.sum()


def _joint_K(ss: StateSpace) -> np.ndarray:
    pairs = ss.joint_pairs
    w = ss.nu_from_J
    P = np.zeros((len(pairs), len(pairs)))
    _block_fill(P, pairs[:, 1], w)
    return P


def _joint_T(ss: StateSpace) -> np.ndarray:
    pairs = ss.joint_pairs
    w = ss.nu_from_J
    P = np.zeros((len(pairs), len(pairs)))
    _block_fill(P, pairs[:, 0], w)
    return P


def _joint_local(ss: StateSpace) -> np.ndarray:
    g, q = ss.g, ss.params.q
    pairs = ss.joint_pairs
    nj = len(pairs)
    w = ss.nu_from_J
    rows = np.arange(nj)
    spin_codes = ss.spin_codes[pairs[:, 0]]
    edge_codes = ss.edge_codes[pairs[:, 1]]
    spins = ss.spins[pairs[:, 0]]
    P = np.zeros((nj, nj))

    def heat_bath(targets: list[np.ndarray], share: float) -> None:
        tw = np.stack([np.where(t >= 0, w[np.maximum(t, 0)], 0.0) for t in targets], axis=1)
        tw /= tw.sum(axis=1, keepdims=True)
        for k, t in enumerate(targets):
            ok = t >= 0
            np.add.at(P, (rows[ok], t[ok]), share * tw[ok, k])

    n_share = 1.0 if g.m == 0 else 0.5
    for v in range(g.n):
        place = q ** v
        targets = []
        for c in range(1, q + 1):
            codes = spin_codes + (c - spins[:, v]) * place
            targets.append(ss.joint_index(ss.spin_index(codes), pairs[:, 1]))
        heat_bath(targets, n_share / g.n)
    for e in range(g.m):
        bit = np.int64(1) << e
        targets = [ss.joint_index(pairs[:, 0], ss.edge_index(edge_codes | bit)),
                   ss.joint_index(pairs[:, 0], ss.edge_index(edge_codes & ~bit))]
        heat_bath(targets, 0.5 / g.m)
    return P


def _free_edge_ids(ss: StateSpace) -> np.ndarray:
    pinned, _ = ss.bc.edge_masks(ss.g.m)
    return np.flatnonzero(~pinned)


def _rc_heatbath(ss: StateSpace) -> np.ndarray:
    ne = len(ss.edges)
    rho = ss.J.sum(axis=0)
    codes = ss.edge_codes
    rows = np.arange(ne)
    P = np.zeros((ne, ne))
    free = _free_edge_ids(ss)
    if len(free) == 0:
        return np.eye(ne)
    for e in free:
        bit = np.int64(1) << int(e)
        iw = ss.edge_index(codes | bit)
        io = ss.edge_index(codes & ~bit)
        ww = np.where(iw >= 0, rho[np.maximum(iw, 0)], 0.0)
        wo = np.where(io >= 0, rho[np.maximum(io, 0)], 0.0)
        pin = ww / (ww + wo)
        ok = iw >= 0
        np.add.at(P, (rows[ok], iw[ok]), pin[ok] / len(free))
        ok = io >= 0
        np.add.at(P, (rows[ok], io[ok]), (1.0 - pin[ok]) / len(free))
    return P


def _rc_single_bond(ss: StateSpace) -> np.ndarray:
    g, p = ss.g, ss.params.p
    ne = len(ss.edges)
    codes = ss.edge_codes
    rows = np.arange(ne)
    mono = (ss.spins[:, g.edges[:, 0]] == ss.spins[:, g.edges[:, 1]]).astype(float)
    mono_given_A = ss.spins_given_edges @ mono   # (Ne, m)
    free = _free_edge_ids(ss)
    if len(free) == 0:
        return np.eye(ne)
    k = len(free)
    P = np.zeros((ne, ne))
    for e in free:
        bit = np.int64(1) << int(e)
        iw = ss.edge_index(codes | bit)
        io = ss.edge_index(codes & ~bit)
        pm = mono_given_A[:, e]
        for idx, mass in ((iw, pm * p), (io, pm * (1.0 - p))):
            ok = idx >= 0
            if (mass[~ok] > 0).any():
                raise AssertionError("single-bond kernel moved mass to a forbidden state")
            np.add.at(P, (rows[ok], idx[ok]), mass[ok] / k)
        P[rows, rows] += (1.0 - pm) / k
    return P


def _scan(ss: StateSpace, side: int) -> np.ndarray:
    """Resample the ``side`` vertices given the spins on the other side."""
    g, q = ss.g, ss.params.q
    if not g.is_bipartite:
        raise ValueError("alternating scan needs a bipartite graph")
    other = g.side(1 - side)
    key = ((ss.spins[:, other] - 1) * (q ** np.arange(len(other), dtype=np.int64))).sum(axis=1)
    mu = ss.J.sum(axis=1)
    P = np.zeros((len(mu), len(mu)))
    _block_fill(P, key, mu)
    return P


def build_dense_chain(g, params: ModelParams, bc: BoundaryCondition, kind,
                      cap: int = DEFAULT_STATE_CAP, dense_cap: int = DEFAULT_DENSE_CAP,
                      space: StateSpace | None = None) -> DenseChain:
    """Exact transition matrix of chain ``kind`` on ``(g, bc)``."""
    kind = ChainKind(kind)
    ss = space if space is not None else build_state_space(g, params, bc, cap)
    n = {"spin": len(ss.spins), "edge": len(ss.edges), "joint": len(ss.joint_pairs)}[kind.state_type]
    if n > dense_cap:
        raise CapExceeded(f"{n} states exceed the dense-matrix cap {dense_cap}")

    TS, KS = ss.edges_given_spins, ss.spins_given_edges
    K = T = None
    if kind.state_type == "joint" and kind is not ChainKind.JOINT_LOCAL:
        K, T = _joint_K(ss), _joint_T(ss)

    builders = {
        ChainKind.SW_SPIN: lambda: TS @ KS,
        ChainKind.SW_EDGE: lambda: KS @ TS,
        ChainKind.JOINT_K: lambda: K,
        ChainKind.JOINT_T: lambda: T,
        ChainKind.JOINT_KT: lambda: T @ K,
        ChainKind.JOINT_TK: lambda: K @ T,
        ChainKind.JOINT_HALF_KT: lambda: 0.5 * (K + T),
        ChainKind.JOINT_KTK: lambda: K @ T @ K,
        ChainKind.JOINT_TKT: lambda: T @ K @ T,
        ChainKind.JOINT_LOCAL: lambda: _joint_local(ss),
        ChainKind.RC_HEATBATH: lambda: _rc_heatbath(ss),
        ChainKind.RC_SINGLE_BOND: lambda: _rc_single_bond(ss),
        ChainKind.SCAN_EVEN: lambda: _scan(ss, EVEN),
        ChainKind.SCAN_ODD: lambda: _scan(ss, ODD),
        ChainKind.SCAN_EO: lambda: _scan(ss, EVEN) @ _scan(ss, ODD),
        ChainKind.SCAN_OE: lambda: _scan(ss, ODD) @ _scan(ss, EVEN),
    }
    P = builders[kind]()
    pi = {"spin": ss.mu, "edge": ss.rho, "joint": ss.nu}[kind.state_type]
    return DenseChain(kind=kind, space=ss, P=P, pi=pi)
