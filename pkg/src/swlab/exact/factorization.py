"""Empirical even/odd and spin/edge entropy factorization constants.

For a target with conditioning partitions ``G1, G2`` the ratio of a test
function ``f >= 0`` is

    Ent(f) / (pi[Ent(f | G1)] + pi[Ent(f | G2)])

and the probe maximises it over a family of ``f``.  Any maximum found is a
lower bound on the best constant, never the constant itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from ..graph import EVEN, ODD, Graph
from ..measures import BoundaryCondition, ModelParams
from .analysis import _xlogx_minus
from .spaces import DEFAULT_STATE_CAP, StateSpace, build_state_space

_ZERO = 1e-300


class Target(str, Enum):
    EVEN_ODD = "even_odd"
    SPIN_EDGE = "spin_edge"


def _group_ids(keys: np.ndarray) -> np.ndarray:
    if keys.ndim == 1:
        return np.unique(keys, return_inverse=True)[1]
    return np.unique(keys, axis=0, return_inverse=True)[1].ravel()


@dataclass(frozen=True, eq=False)
class FactorizationProblem:
    """Measure and the two conditioning partitions; ``groups[k][x]`` is the block of state ``x``."""

    target: Target
    pi: np.ndarray
    groups: tuple[np.ndarray, np.ndarray]

    @property
    def n_states(self) -> int:
        return len(self.pi)

    def _means(self, f: np.ndarray, grp: np.ndarray) -> np.ndarray:
        mass = np.bincount(grp, weights=self.pi)
        return (np.bincount(grp, weights=self.pi * f) / mass)[grp]

    def terms(self, f) -> tuple[float, float, float]:
        """``(Ent(f), pi[Ent(f|G1)], pi[Ent(f|G2)])``."""
        f = np.asarray(f, dtype=float)
        if f.shape != self.pi.shape:
            raise ValueError(f"f has {f.shape[0] if f.ndim else 0} entries, expected {self.n_states}")
        if (f < 0).any():
            raise ValueError("f must be non-negative")
        total = float(self.pi @ f)
        if total <= 0:
            raise ValueError("f must have positive mean")
        out = [total * float(self.pi @ _xlogx_minus(f / total))]
        for grp in self.groups:
            m = self._means(f, grp)
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(m > 0, f / np.where(m > 0, m, 1.0), 1.0)
            out.append(float(self.pi @ (m * _xlogx_minus(r))))
        return tuple(out)

    def ratio(self, f) -> float:
        lhs, a, b = self.terms(f)
        rhs = a + b
        if lhs <= _ZERO * 1e10 and rhs <= _ZERO * 1e10:
            return 0.0
        if rhs <= 0:
            raise ValueError("conditional entropies vanish while the entropy does not")
        return lhs / rhs

    def _ratio_and_grad(self, h: np.ndarray) -> tuple[float, np.ndarray]:
        """Ratio at ``f = exp(h)`` and its gradient in ``h``."""
        f = np.exp(h - h.max())
        pi = self.pi
        total = pi @ f
        lhs = total * (pi @ _xlogx_minus(f / total))
        g_lhs = pi * f * (np.log(f) - np.log(total))
        rhs, g_rhs = 0.0, np.zeros_like(f)
        for grp in self.groups:
            m = self._means(f, grp)
            rhs += pi @ (m * _xlogx_minus(f / m))
            g_rhs += pi * f * (np.log(f) - np.log(m))
        if rhs <= 0:
            return 0.0, np.zeros_like(h)
        return lhs / rhs, (g_lhs * rhs - lhs * g_rhs) / rhs ** 2

    def projection_operator(self) -> LinearOperator:
        """``(E[.|G1] + E[.|G2]) / 2`` in the symmetric ``sqrt(pi)`` frame, constants removed."""
        s = np.sqrt(self.pi)

        def mv(x):
            x = np.asarray(x, dtype=float).ravel()
            x = x - s * (s @ x)
            f = x / s
            y = 0.5 * (self._means(f, self.groups[0]) + self._means(f, self.groups[1])) * s
            return y - s * (s @ y)

        return LinearOperator((self.n_states, self.n_states), matvec=mv, dtype=float)


def factorization_problem(g: Graph, params: ModelParams, bc: BoundaryCondition, target,
                          cap: int = DEFAULT_STATE_CAP, space: StateSpace | None = None) -> FactorizationProblem:
    """Build the conditioning structure for ``target`` on ``(g, bc)``.

    Even/odd test functions live on the spin states of ``space.spins``;
    spin/edge test functions live on ``space.joint_pairs``.
    """
    target = Target(target)
    ss = space if space is not None else build_state_space(g, params, bc, cap)
    if target is Target.EVEN_ODD:
        if not g.is_bipartite:
            raise ValueError("even/odd factorization needs a bipartite graph")
        even, odd = g.side(EVEN), g.side(ODD)
        # conditioning on sigma_E groups states by their even spins, and vice versa
        groups = (_group_ids(ss.spins[:, even]) if len(even) else np.zeros(len(ss.spins), dtype=np.int64),
                  _group_ids(ss.spins[:, odd]) if len(odd) else np.zeros(len(ss.spins), dtype=np.int64))
        return FactorizationProblem(target, ss.mu, groups)
    pairs = ss.joint_pairs
    return FactorizationProblem(target, ss.nu, (pairs[:, 0].copy(), pairs[:, 1].copy()))


def factorization_ratio(g: Graph, params: ModelParams, bc: BoundaryCondition, target, f,
                        space: StateSpace | None = None) -> float:
    """Entropy divided by the sum of the two expected conditional entropies.

    A constant ``f`` gives ``0`` by convention.
    """
    return factorization_problem(g, params, bc, target, space=space).ratio(f)


@dataclass(frozen=True)
class ProbeResult:
    c_hat: float
    source: str       # which probe family produced the maximum
    n_evaluated: int
    spectral: float   # best ratio over the spectral family alone
    random: float     # best ratio over random functions alone
    lower_bound: bool = True


_T_GRID = (0.01, 0.1, 0.3, 0.6, 1.0, 1.5, 2.0, 3.0, 4.0)


def spectral_directions(prob: FactorizationProblem, k: int = 2) -> list[np.ndarray]:
    """Top non-constant eigenvectors of the averaged conditional expectation, as functions."""
    n = prob.n_states
    s = np.sqrt(prob.pi)
    if n <= 2:
        return []
    if n <= 600:
        op = prob.projection_operator()
        M = op.matmat(np.eye(n))
        w, V = np.linalg.eigh(0.5 * (M + M.T))
        vecs = V[:, np.argsort(w)[::-1][:k]]
    else:
        try:
            _, vecs = eigsh(prob.projection_operator(), k=min(k, n - 2), which="LA", tol=1e-10,
                            v0=s.copy(), maxiter=20 * n)
        except ArpackNoConvergence as err:
            vecs = err.eigenvectors
    out = []
    for v in vecs.T:
        f = v / s
        sd = np.sqrt(prob.pi @ f ** 2)
        if sd > 0:
            out.append(f / sd)
    return out


def _coordinate_ascent(prob: FactorizationProblem, h: np.ndarray, rounds: int) -> tuple[float, np.ndarray, int]:
    """Greedy coordinate ascent on ``log f``: move the steepest coordinate by a line search."""
    best, grad = prob._ratio_and_grad(h)
    evals = 1
    for _ in range(rounds):
        i = int(np.argmax(np.abs(grad)))
        if grad[i] == 0:
            break
        improved = False
        for step in (2.0, 1.0, 0.5, 0.25, 0.1, 0.03):
            trial = h.copy()
            trial[i] += np.sign(grad[i]) * step
            r, g2 = prob._ratio_and_grad(trial)
            evals += 1
            if r > best:
                best, h, grad, improved = r, trial, g2, True
                break
        if not improved:
            break
    return best, h, evals


def probe_factorization_constant(g: Graph, params: ModelParams, bc: BoundaryCondition, target,
                                 budget: int = 1000, seed: int = 0, refine_rounds: int = 200,
                                 space: StateSpace | None = None,
                                 problem: FactorizationProblem | None = None) -> ProbeResult:
    """Empirical lower bound ``C_hat`` on the factorization constant.

    Probes are ``budget`` random functions, the deterministic family
    ``exp(t g)`` along the slowest directions of the two conditional
    expectations, and a coordinate-ascent refinement from the best probe.
    """
    prob = problem if problem is not None else factorization_problem(g, params, bc, target, space=space)
    rng = np.random.default_rng(seed)
    n = prob.n_states
    evals = 0

    best_spec, h_spec = 0.0, None
    for d in spectral_directions(prob):
        for t in _T_GRID:
            for sgn in (1.0, -1.0):
                h = sgn * t * d
                r = prob.ratio(np.exp(h - h.max()))
                evals += 1
                if r > best_spec:
                    best_spec, h_spec = r, h

    best_rand, h_rand = 0.0, None
    for _ in range(budget):
        kind = rng.integers(3)
        if kind == 0:
            h = rng.normal(scale=np.exp(rng.uniform(np.log(0.05), np.log(3.0))), size=n)
        elif kind == 1:
            h = np.log(rng.dirichlet(np.full(n, np.exp(rng.uniform(np.log(0.1), np.log(10.0))))) + 1e-300)
        else:
            # indicator-like functions on a random subset
            h = np.where(rng.random(n) < rng.uniform(0.05, 0.95), rng.uniform(0.5, 5.0), 0.0)
        r = prob.ratio(np.exp(h - h.max()))
        evals += 1
        if r > best_rand:
            best_rand, h_rand = r, h

    if best_spec >= best_rand:
        best, h0, source = best_spec, h_spec, "spectral"
    else:
        best, h0, source = best_rand, h_rand, "random"
    if h0 is not None and refine_rounds:
        refined, _, k = _coordinate_ascent(prob, h0.copy(), refine_rounds)
        evals += k
        if refined > best:
            best, source = refined, source + "+ascent"
    return ProbeResult(float(best), source, evals, float(best_spec), float(best_rand))
