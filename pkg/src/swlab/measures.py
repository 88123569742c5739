"""Unnormalised Potts, random-cluster and Edwards-Sokal weights.

All weights are returned in log space together with a ``forbidden`` flag, so
zero-probability states never enter ``-inf`` arithmetic.  Boundary conditions
pin spins on ``V0`` (``psi``) and edge states on ``E0`` (``phi``); pinned
vertices stay ordinary members of ``V`` whose spin is frozen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from enum import Enum
from typing import Mapping

import numpy as np

from .graph import Graph, UnionFind, as_edge_mask, connected_components

CONSISTENCY_TOL = 1e-12


def _as_q(q) -> int:
    if int(q) != q:
        raise ValueError(f"q must be an integer >= 2, got {q}")
    return int(q)


@dataclass(frozen=True)
class ModelParams:
    """Spin count ``q``, inverse temperature ``beta`` and ``p = 1 - exp(-beta)``.

    Build with :meth:`from_beta` or :meth:`from_p`; the other parameter is
    derived so the relation holds to rounding.
    """

    q: int
    beta: float
    p: float

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise ValueError(f"q must be an integer >= 2, got {self.q}")
        if not (self.beta >= 0):
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not (0.0 <= self.p <= 1.0):
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        expected = -math.expm1(-self.beta)
        if abs(expected - self.p) > CONSISTENCY_TOL:
            raise ValueError(f"inconsistent beta={self.beta} and p={self.p}")

    @classmethod
    def from_beta(cls, q: int, beta: float) -> "ModelParams":
        return cls(_as_q(q), float(beta), -math.expm1(-float(beta)))

    @classmethod
    def from_p(cls, q: int, p: float) -> "ModelParams":
        p = float(p)
        beta = math.inf if p == 1.0 else -math.log1p(-p)
        return cls(_as_q(q), beta, p)

    @classmethod
    def from_mapping(cls, spec: Mapping) -> "ModelParams":
        """Accept ``{"q", "beta"}``, ``{"q", "p"}`` or both if they agree."""
        q = spec["q"]
        has_b, has_p = spec.get("beta") is not None, spec.get("p") is not None
        if has_b and has_p:
            params = cls.from_beta(q, spec["beta"])
            if abs(params.p - float(spec["p"])) > CONSISTENCY_TOL:
                raise ValueError(f"beta={spec['beta']} and p={spec['p']} disagree")
            return params
        if has_b:
            return cls.from_beta(q, spec["beta"])
        if has_p:
            return cls.from_p(q, spec["p"])
        raise ValueError("params need beta or p")

    @property
    def log_p(self) -> float:
        return math.log(self.p) if self.p > 0 else -math.inf

    @property
    def log_1mp(self) -> float:
        return -self.beta


class BCKind(str, Enum):
    FREE = "free"
    SPIN_ONLY = "spin_only"
    ADMISSIBLE = "admissible"
    RC_WIRED = "wired"
    RC_FREE = "rc_free"


@dataclass(frozen=True)
class BoundaryCondition:
    """Pinned spins ``psi: V0 -> [q]`` and pinned edges ``phi: E0 -> {0,1}``.

    The wired random-cluster condition is realised as the monochromatic
    condition ``psi = 1`` on all of ``dV``: its edge marginal is the wired
    measure, and its spin marginal is the "all 1" Potts measure.
    """

    pinned_spins: Mapping[int, int] = field(default_factory=dict)
    pinned_edges: Mapping[int, int] = field(default_factory=dict)
    kind: BCKind = BCKind.FREE

    @classmethod
    def free(cls) -> "BoundaryCondition":
        return cls()

    @classmethod
    def rc_free(cls) -> "BoundaryCondition":
        return cls(kind=BCKind.RC_FREE)

    @classmethod
    def spin_only(cls, psi: Mapping[int, int]) -> "BoundaryCondition":
        return cls(pinned_spins=dict(psi), kind=BCKind.SPIN_ONLY)

    @classmethod
    def admissible(cls, psi: Mapping[int, int], phi: Mapping[int, int]) -> "BoundaryCondition":
        return cls(pinned_spins=dict(psi), pinned_edges=dict(phi), kind=BCKind.ADMISSIBLE)

    @classmethod
    def wired(cls, g: Graph, color: int = 1) -> "BoundaryCondition":
        return cls(pinned_spins={int(v): color for v in g.boundary_vertices}, kind=BCKind.RC_WIRED)

    @property
    def is_free(self) -> bool:
        return not self.pinned_spins and not self.pinned_edges

    def validate(self, g: Graph, q: int) -> "BoundaryCondition":
        bd = set(int(v) for v in g.boundary_vertices)
        for v, c in self.pinned_spins.items():
            if v not in bd:
                raise ValueError(f"pinned vertex {v} is not a boundary vertex")
            if not 1 <= c <= q:
                raise ValueError(f"pinned spin {c} at vertex {v} outside 1..{q}")
        for e, s in self.pinned_edges.items():
            if not 0 <= e < g.m:
                raise ValueError(f"pinned edge {e} out of range")
            if s not in (0, 1):
                raise ValueError(f"pinned edge state must be 0 or 1, got {s}")
            u, w = (int(x) for x in g.edges[e])
            if u not in bd and w not in bd:
                raise ValueError(f"pinned edge {e} is not a boundary edge")
        if self.kind in (BCKind.FREE, BCKind.RC_FREE) and not self.is_free:
            raise ValueError("free boundary condition cannot pin anything")
        if self.kind in (BCKind.SPIN_ONLY, BCKind.RC_WIRED) and self.pinned_edges:
            raise ValueError(f"{self.kind.value} boundary condition cannot pin edges")
        if self.kind is BCKind.RC_WIRED and len(set(self.pinned_spins.values())) > 1:
            raise ValueError("wired boundary condition must be monochromatic")
        if self.kind is BCKind.ADMISSIBLE:
            for e in self.pinned_edges:
                u, w = (int(x) for x in g.edges[e])
                if u not in self.pinned_spins and w not in self.pinned_spins:
                    raise ValueError(f"pinned edge {e} has no endpoint with a pinned spin")
        # occupied pinned edges must not join two different pinned colours
        uf = UnionFind(g.n)
        for e, s in self.pinned_edges.items():
            if s == 1:
                uf.union(*(int(x) for x in g.edges[e]))
        colour_of_root: dict[int, int] = {}
        for v, c in self.pinned_spins.items():
            r = uf.find(v)
            if colour_of_root.setdefault(r, c) != c:
                raise ValueError("occupied pinned edges connect different pinned spins")
        return self

    # array views used by the samplers; cached since bcs are immutable
    @cached_property
    def _spin_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        vs = np.array(sorted(self.pinned_spins), dtype=np.int64)
        cs = np.array([self.pinned_spins[v] for v in vs], dtype=np.int64)
        vs.setflags(write=False)
        cs.setflags(write=False)
        return vs, cs

    def spin_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self._spin_arrays

    def edge_masks(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """``(pinned, pinned_open)`` boolean masks over edge ids."""
        cache = self.__dict__.setdefault("_edge_mask_cache", {})
        if m not in cache:
            pinned = np.zeros(m, dtype=bool)
            opened = np.zeros(m, dtype=bool)
            for e, s in self.pinned_edges.items():
                pinned[e] = True
                opened[e] = bool(s)
            pinned.setflags(write=False)
            opened.setflags(write=False)
            cache[m] = (pinned, opened)
        return cache[m]

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "pinned_spins": [[int(v), int(c)] for v, c in sorted(self.pinned_spins.items())],
            "pinned_edges": [[int(e), int(s)] for e, s in sorted(self.pinned_edges.items())],
        }

    @classmethod
    def from_json(cls, spec: Mapping | None, g: Graph, q: int) -> "BoundaryCondition":
        """Parse a bc description; vertices may be ids or lattice coordinates,
        edges may be ids or ``[u, v]`` endpoint pairs."""
        if spec is None:
            return cls.free()
        kind = BCKind(spec.get("kind", "free"))
        if kind is BCKind.RC_WIRED:
            return cls.wired(g, int(spec.get("color", 1))).validate(g, q)
        psi = {_vertex_ref(g, v): int(c) for v, c in spec.get("pinned_spins", [])}
        phi = {_edge_ref(g, e): int(s) for e, s in spec.get("pinned_edges", [])}
        return cls(pinned_spins=psi, pinned_edges=phi, kind=kind).validate(g, q)


def _vertex_ref(g: Graph, ref) -> int:
    if isinstance(ref, (list, tuple)):
        if not hasattr(g, "vertex_index"):
            raise ValueError("coordinate vertex references need a lattice graph")
        return g.vertex(ref)
    return int(ref)


def _edge_ref(g: Graph, ref) -> int:
    if isinstance(ref, (list, tuple)):
        u, v = (_vertex_ref(g, x) for x in ref)
        hits = np.flatnonzero(((g.edges[:, 0] == min(u, v)) & (g.edges[:, 1] == max(u, v))))
        if len(hits) != 1:
            raise ValueError(f"no unique edge between {ref[0]} and {ref[1]}")
        return int(hits[0])
    return int(ref)


@dataclass(frozen=True)
class WeightValue:
    log_weight: float
    forbidden: bool = False

    @property
    def weight(self) -> float:
        return 0.0 if self.forbidden else math.exp(self.log_weight)


FORBIDDEN = WeightValue(-math.inf, True)


def _check_spins(g: Graph, q: int, sigma) -> np.ndarray:
    s = np.asarray(sigma, dtype=np.int64)
    if s.shape != (g.n,):
        raise ValueError(f"spin configuration has shape {s.shape}, expected ({g.n},)")
    if s.min() < 1 or s.max() > q:
        raise ValueError(f"spins must lie in 1..{q}")
    return s


def _respects_psi(bc: BoundaryCondition, s: np.ndarray) -> bool:
    return all(s[v] == c for v, c in bc.pinned_spins.items())


def _respects_phi(bc: BoundaryCondition, mask: np.ndarray) -> bool:
    return all(mask[e] == bool(st) for e, st in bc.pinned_edges.items())


def _edge_term(params: ModelParams, n_open: int, n_closed: int) -> WeightValue:
    if (n_open and params.p == 0.0) or (n_closed and params.p == 1.0):
        return FORBIDDEN
    lw = (n_open * params.log_p if n_open else 0.0) + (n_closed * params.log_1mp if n_closed else 0.0)
    return WeightValue(lw)


def bichromatic(g: Graph, sigma: np.ndarray) -> np.ndarray:
    """Mask of the disagreement set ``D(sigma)``."""
    return sigma[g.edges[:, 0]] != sigma[g.edges[:, 1]]


def potts_log_weight(g: Graph, params: ModelParams, bc: BoundaryCondition, sigma) -> WeightValue:
    """``-beta |D(sigma)|`` over the unpinned edges.

    Pinned open edges must be monochromatic and pinned closed edges carry no
    interaction, which makes this the exact spin marginal of the joint
    measure under any admissible boundary condition.
    """
    s = _check_spins(g, params.q, sigma)
    if not _respects_psi(bc, s):
        return FORBIDDEN
    bi = bichromatic(g, s)
    if any(st == 1 and bi[e] for e, st in bc.pinned_edges.items()):
        return FORBIDDEN
    free = np.ones(g.m, dtype=bool)
    free[list(bc.pinned_edges)] = False
    n_bi = int((bi & free).sum())
    if n_bi == 0:
        return WeightValue(0.0)
    if math.isinf(params.beta):
        return FORBIDDEN
    return WeightValue(-params.beta * n_bi)


def rc_log_weight(g: Graph, params: ModelParams, bc: BoundaryCondition, A) -> WeightValue:
    """``|A| ln p + (|E|-|A|) ln(1-p) + (c(A) - c0(A)) ln q``.

    ``c0`` counts components meeting a pinned vertex; ``A`` is forbidden if it
    disagrees with ``phi`` or joins pinned vertices of different colours.
    """
    mask = as_edge_mask(g, A)
    if not _respects_phi(bc, mask):
        return FORBIDDEN
    comps = connected_components(g, mask)
    c0 = 0
    if bc.pinned_spins:
        colour: dict[int, int] = {}
        for v, c in bc.pinned_spins.items():
            lab = int(comps.labels[v])
            if colour.setdefault(lab, c) != c:
                return FORBIDDEN
        c0 = len(colour)
    n_open = int(mask.sum())
    edge = _edge_term(params, n_open, g.m - n_open)
    if edge.forbidden:
        return edge
    return WeightValue(edge.log_weight + (comps.count - c0) * math.log(params.q))


def joint_log_weight(g: Graph, params: ModelParams, bc: BoundaryCondition, spins, edges) -> WeightValue:
    """``|A| ln p + (|E|-|A|) ln(1-p)`` when ``sigma ~ A``, ``sigma ~ psi``, ``A ~ phi``."""
    s = _check_spins(g, params.q, spins)
    mask = as_edge_mask(g, edges)
    if (mask & bichromatic(g, s)).any() or not _respects_psi(bc, s) or not _respects_phi(bc, mask):
        return FORBIDDEN
    n_open = int(mask.sum())
    return _edge_term(params, n_open, g.m - n_open)


def dual_parameter(p: float, q: float) -> float:
    """Edge parameter of the planar-dual random-cluster model."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return q * (1.0 - p) / (q * (1.0 - p) + p)


def beta_critical(q: int) -> float:
    return math.log1p(math.sqrt(q))


def p_critical(q: int) -> float:
    """Self-dual point ``sqrt(q) / (1 + sqrt(q))``."""
    return math.sqrt(q) / (1.0 + math.sqrt(q))
