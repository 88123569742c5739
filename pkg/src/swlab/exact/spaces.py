"""Enumeration of spin, edge and joint state spaces for tiny instances."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..graph import Graph
from ..measures import BoundaryCondition, ModelParams, joint_log_weight, potts_log_weight, rc_log_weight

DEFAULT_STATE_CAP = 2_000_000
_MAX_PAIR_ENTRIES = 50_000_000


class CapExceeded(RuntimeError):
    """The requested instance is too large for exhaustive enumeration."""


def _joint_state_count(g: Graph, bc: BoundaryCondition, spins: np.ndarray) -> int:
    pinned, opened = bc.edge_masks(g.m)
    mono = spins[:, g.edges[:, 0]] == spins[:, g.edges[:, 1]]
    ok = ~(opened & ~mono).any(axis=1)
    free_mono = (mono & ~pinned).sum(axis=1)
    return int(np.sum(np.where(ok, 2.0 ** free_mono, 0.0)))


@dataclass(frozen=True, eq=False)
class StateSpace:
    """All configurations of ``g`` compatible with ``bc`` that carry positive weight.

    ``J[i, j]`` is the unnormalised joint weight of spin state ``i`` with
    edge state ``j``.  Spin and edge states are kept only if their marginal
    weight is positive.
    """

    g: Graph
    params: ModelParams
    bc: BoundaryCondition
    spins: np.ndarray      # (Ns, n) int, values 1..q
    edges: np.ndarray      # (Ne, m) bool
    J: np.ndarray          # (Ns, Ne) float

    # ---- codes and lookups

    @cached_property
    def spin_codes(self) -> np.ndarray:
        q = self.params.q
        return ((self.spins - 1).astype(np.int64) * (q ** np.arange(self.g.n, dtype=np.int64))).sum(axis=1)

    @cached_property
    def edge_codes(self) -> np.ndarray:
        return (self.edges.astype(np.int64) << np.arange(self.g.m, dtype=np.int64)).sum(axis=1)

    @staticmethod
    def _lookup(codes: np.ndarray, query: np.ndarray) -> np.ndarray:
        """Index of each query code, ``-1`` where absent."""
        order = np.argsort(codes)
        srt = codes[order]
        pos = np.clip(np.searchsorted(srt, query), 0, len(srt) - 1)
        found = srt[pos] == query
        return np.where(found, order[pos], -1)

    def spin_index(self, codes: np.ndarray) -> np.ndarray:
        return self._lookup(self.spin_codes, np.asarray(codes, dtype=np.int64))

    def edge_index(self, codes: np.ndarray) -> np.ndarray:
        return self._lookup(self.edge_codes, np.asarray(codes, dtype=np.int64))

    @cached_property
    def joint_pairs(self) -> np.ndarray:
        """``(NJ, 2)`` array of (spin index, edge index) with positive joint weight."""
        i, j = np.nonzero(self.J > 0)
        return np.stack([i, j], axis=1)

    def joint_index(self, si: np.ndarray, ei: np.ndarray) -> np.ndarray:
        ne = len(self.edges)
        codes = self.joint_pairs[:, 0] * ne + self.joint_pairs[:, 1]
        si, ei = np.asarray(si), np.asarray(ei)
        q = np.where((si >= 0) & (ei >= 0), si * ne + ei, -1)
        return self._lookup(codes, q)

    # ---- kernels between spin and edge spaces

    @cached_property
    def edges_given_spins(self) -> np.ndarray:
        """``nu(A | sigma)`` as an ``(Ns, Ne)`` stochastic matrix."""
        return self.J / self.J.sum(axis=1, keepdims=True)

    @cached_property
    def spins_given_edges(self) -> np.ndarray:
        """``nu(sigma | A)`` as an ``(Ne, Ns)`` stochastic matrix."""
        Jt = self.J.T
        return Jt / Jt.sum(axis=1, keepdims=True)

    # ---- stationary measures from the weight functions

    @cached_property
    def mu(self) -> np.ndarray:
        lw = np.array([potts_log_weight(self.g, self.params, self.bc, s).log_weight for s in self.spins])
        return _normalise_log(lw)

    @cached_property
    def rho(self) -> np.ndarray:
        lw = np.array([rc_log_weight(self.g, self.params, self.bc, a).log_weight for a in self.edges])
        return _normalise_log(lw)

    @cached_property
    def nu(self) -> np.ndarray:
        sp, ed = self.spins, self.edges
        lw = np.array([joint_log_weight(self.g, self.params, self.bc, sp[i], ed[j]).log_weight
                       for i, j in self.joint_pairs])
        return _normalise_log(lw)

    @cached_property
    def nu_from_J(self) -> np.ndarray:
        w = self.J[self.joint_pairs[:, 0], self.joint_pairs[:, 1]]
        return w / w.sum()

    def joint_states(self) -> tuple[np.ndarray, np.ndarray]:
        return self.spins[self.joint_pairs[:, 0]], self.edges[self.joint_pairs[:, 1]]


def _normalise_log(lw: np.ndarray) -> np.ndarray:
    w = np.exp(lw - lw.max())
    return w / w.sum()


def _edge_weights(params: ModelParams, n_open: np.ndarray, m: int) -> np.ndarray:
    n_closed = m - n_open
    p = params.p
    with np.errstate(divide="ignore"):
        w = np.power(p, n_open) * np.power(1.0 - p, n_closed)
    return w


def enumerate_spins(g: Graph, q: int, bc: BoundaryCondition) -> np.ndarray:
    free = [v for v in range(g.n) if v not in bc.pinned_spins]
    base = np.ones(g.n, dtype=np.int64)
    for v, c in bc.pinned_spins.items():
        base[v] = c
    if not free:
        return base[None, :].copy()
    combos = np.array(list(itertools.product(range(1, q + 1), repeat=len(free))), dtype=np.int64)
    out = np.repeat(base[None, :], len(combos), axis=0)
    out[:, free] = combos
    return out


def enumerate_edges(g: Graph, bc: BoundaryCondition) -> np.ndarray:
    pinned, opened = bc.edge_masks(g.m)
    free = np.flatnonzero(~pinned)
    k = len(free)
    codes = np.arange(2 ** k, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(k)) & 1).astype(bool)
    out = np.repeat(opened[None, :], len(codes), axis=0)
    out[:, free] = bits
    return out


def build_state_space(g: Graph, params: ModelParams, bc: BoundaryCondition, cap: int = DEFAULT_STATE_CAP) -> StateSpace:
    """Enumerate ``Omega``, the random-cluster space and ``Omega_J`` for ``(g, bc)``.

    ``cap`` bounds the number of spin states, edge states and valid joint
    states; :class:`CapExceeded` is raised before any large allocation.
    """
    bc.validate(g, params.q)
    if g.m > 62:
        raise CapExceeded(f"{g.m} edges exceed the 62-edge bit-code limit")
    n_free_v = g.n - len(bc.pinned_spins)
    n_free_e = g.m - len(bc.pinned_edges)
    n_spin_raw = params.q ** n_free_v
    n_edge_raw = 2 ** n_free_e
    if n_spin_raw > cap or n_edge_raw > cap:
        raise CapExceeded(f"{n_spin_raw} spin / {n_edge_raw} edge configurations exceed cap {cap}")
    if n_spin_raw * n_edge_raw > _MAX_PAIR_ENTRIES:
        raise CapExceeded(f"{n_spin_raw} x {n_edge_raw} weight table is too large")
    spins = enumerate_spins(g, params.q, bc)
    n_joint = _joint_state_count(g, bc, spins)
    if n_joint > cap:
        raise CapExceeded(f"{n_joint} joint states exceed cap {cap}")
    edges = enumerate_edges(g, bc)

    m = g.m
    weight_bits = np.int64(1) << np.arange(m, dtype=np.int64)
    bi = spins[:, g.edges[:, 0]] != spins[:, g.edges[:, 1]]
    bi_code = (bi.astype(np.int64) * weight_bits).sum(axis=1)
    e_code = (edges.astype(np.int64) * weight_bits).sum(axis=1)
    compat = (bi_code[:, None] & e_code[None, :]) == 0
    J = compat * _edge_weights(params, edges.sum(axis=1), m)[None, :]

    keep_s = J.sum(axis=1) > 0
    keep_e = J.sum(axis=0) > 0
    J = J[keep_s][:, keep_e]
    return StateSpace(g=g, params=params, bc=bc, spins=spins[keep_s], edges=edges[keep_e], J=J)
