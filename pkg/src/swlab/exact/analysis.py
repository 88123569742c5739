"""Mixing times, spectra and entropy functionals of dense chains.

Logarithms are natural throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chains import DenseChain

PSD_TOL = 1e-10
REVERSIBLE_TOL = 1e-12


class MixingTimeError(RuntimeError):
    """TV distance never reached 1/4 within the iteration cap."""


def tv_distance(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"distributions have different lengths {a.shape} vs {b.shape}")
    return 0.5 * float(np.abs(a - b).sum())


def _worst_tv(M: np.ndarray, pi: np.ndarray) -> float:
    return 0.5 * float(np.abs(M - pi[None, :]).sum(axis=1).max())


def exact_mixing_time(chain: DenseChain, eps: float = 0.25, t_cap: int = 1 << 16) -> int:
    """Smallest ``t`` with ``max_x ||P^t(x, .) - pi||_TV <= eps``.

    The worst-start distance is non-increasing in ``t``, so powers are found
    by repeated squaring and the threshold is then located by bisection.
    """
    P, pi = chain.P, chain.pi
    if _worst_tv(np.eye(len(pi)), pi) <= eps:
        return 0
    powers = [P]  # powers[k] = P^(2^k)
    while _worst_tv(powers[-1], pi) > eps:
        if (1 << len(powers)) > t_cap:
            raise MixingTimeError(f"worst-start TV still above {eps} after {1 << (len(powers) - 1)} steps")
        powers.append(powers[-1] @ powers[-1])
    # answer lies in (2^(k-1), 2^k]; build it bit by bit from the largest failing time
    k = len(powers) - 1
    if k == 0:
        return 1
    t, M = 1 << (k - 1), powers[k - 1]
    for j in range(k - 2, -1, -1):
        cand = M @ powers[j]
        if _worst_tv(cand, pi) > eps:
            t, M = t + (1 << j), cand
    return t + 1


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray | None
    singular_values: np.ndarray
    gap: float | None
    psd: bool | None
    reversible: bool
    reversibility_residual: float


def _symmetrised(chain: DenseChain) -> np.ndarray:
    d = np.sqrt(chain.pi)
    S = d[:, None] * chain.P / d[None, :]
    return S


def spectral_report(chain: DenseChain, reversible_tol: float = REVERSIBLE_TOL) -> SpectralReport:
    """Eigenvalues of ``D^(1/2) P D^(-1/2)`` for reversible chains, singular values always."""
    resid = chain.detailed_balance_residual()
    reversible = resid <= reversible_tol
    S = _symmetrised(chain)
    if not reversible:
        return SpectralReport(None, np.linalg.svd(S, compute_uv=False), None, None, False, resid)
    ev = np.sort(np.linalg.eigvalsh(0.5 * (S + S.T)))[::-1]
    sv = np.sort(np.abs(ev))[::-1]  # S is symmetric here
    gap = float(1.0 - ev[1]) if len(ev) > 1 else None
    return SpectralReport(ev, sv, gap, bool(ev[-1] >= -PSD_TOL), True, resid)


# --------------------------------------------------------------------------
# entropy


def _xlogx_minus(x: np.ndarray) -> np.ndarray:
    """``x log x - x + 1`` (non-negative), accurate near ``x = 1``."""
    x = np.asarray(x, dtype=float)
    d = x - 1.0
    small = np.abs(d) < 1e-3
    with np.errstate(divide="ignore", invalid="ignore"):
        big = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0) - d
    series = d * d * (0.5 + d * (-1.0 / 6 + d * (1.0 / 12 + d * (-1.0 / 20 + d / 30))))
    return np.where(small, series, big)


def entropy(pi: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``Ent_pi(f) = pi[f log f] - pi[f] log pi[f]``; ``f`` may be ``(N,)`` or ``(N, k)``."""
    f = np.asarray(f, dtype=float)
    m = pi @ f
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(m > 0, f / np.where(m > 0, m, 1.0), 0.0)
    return (pi @ _xlogx_minus(ratio) if f.ndim == 1 else pi @ _xlogx_minus(ratio)) * m


def conditional_mean(pi: np.ndarray, f: np.ndarray, groups: np.ndarray) -> np.ndarray:
    """``pi[f | group]`` evaluated at every state."""
    f = np.asarray(f, dtype=float)
    _, inv = np.unique(groups, return_inverse=True)
    mass = np.bincount(inv, weights=pi)
    if f.ndim == 1:
        return (np.bincount(inv, weights=pi * f) / mass)[inv]
    out = np.empty_like(f)
    for k in range(f.shape[1]):
        out[:, k] = (np.bincount(inv, weights=pi * f[:, k]) / mass)[inv]
    return out


def expected_conditional_entropy(pi: np.ndarray, f: np.ndarray, groups: np.ndarray) -> np.ndarray:
    """``pi[Ent_pi(f | group)]``; groups label the conditioning variable's value."""
    f = np.asarray(f, dtype=float)
    m = conditional_mean(pi, f, groups)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(m > 0, f / np.where(m > 0, m, 1.0), 0.0)
    return pi @ (m * _xlogx_minus(ratio))


def variance(pi: np.ndarray, f: np.ndarray) -> np.ndarray:
    m = pi @ f
    return pi @ (f - m) ** 2


def relative_entropy(zeta, pi) -> float:
    """``H(zeta | pi) = sum zeta log(zeta / pi)`` with ``0 log 0 = 0``."""
    if isinstance(pi, DenseChain):
        pi = pi.pi
    zeta, pi = np.asarray(zeta, dtype=float), np.asarray(pi, dtype=float)
    if zeta.shape != pi.shape:
        raise ValueError("zeta and pi live on different state spaces")
    if ((pi == 0) & (zeta > 0)).any():
        raise ValueError("zeta is not absolutely continuous with respect to pi")
    pos = zeta > 0
    return float(np.sum(zeta[pos] * np.log(zeta[pos] / pi[pos])))


def _row_relative_entropies(Z: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """``H(Z[i] | pi)`` for each row, computed as ``pi[phi(Z/pi)]`` to avoid cancellation."""
    return _xlogx_minus(Z / pi[None, :]) @ pi


@dataclass(frozen=True)
class DecayEstimate:
    delta_hat: float
    worst_ratio: float
    worst_probe: str


def entropy_decay_rate(chain: DenseChain, n_random: int = 64, seed: int = 0) -> DecayEstimate:
    """``1 - max H(zeta P | pi) / H(zeta | pi)`` over Dirac and random probes.

    The result bounds the true contraction rate from above (a probe can only
    exhibit a ratio, not certify the worst one).
    """
    P, pi = chain.P, chain.pi
    n = len(pi)
    probes = [np.eye(n)]
    names = [f"dirac[{i}]" for i in range(n)]
    rng = np.random.default_rng(seed)
    if n_random and n > 1:
        conc = np.exp(rng.uniform(np.log(0.05), np.log(5.0), size=n_random))
        Z = np.stack([rng.dirichlet(np.full(n, c)) for c in conc])
        probes.append(Z)
        names += [f"dirichlet[{c:.3g}]" for c in conc]
    Z = np.vstack(probes)
    h0 = _row_relative_entropies(Z, pi)
    h1 = _row_relative_entropies(Z @ P, pi)
    valid = h0 > 1e-300
    if not valid.any():
        return DecayEstimate(1.0, 0.0, "none")
    ratios = np.where(valid, h1 / np.where(valid, h0, 1.0), -np.inf)
    k = int(np.argmax(ratios))
    return DecayEstimate(float(1.0 - ratios[k]), float(ratios[k]), names[k])


@dataclass(frozen=True)
class HSBoundReport:
    pi_B: float
    prob: np.ndarray               # Pr(X_t in B), t = 0..t_max
    margin_stationary: np.ndarray  # Pr(X_t in B) - pi(B), t = 0..t_max
    margin_bound: np.ndarray       # Pr(X_t in B) - bound_t, t = 1..t_max

    @property
    def min_margin(self) -> float:
        return float(min(self.margin_stationary.min(), self.margin_bound.min(initial=np.inf)))


def lemma_hs_bound_check(chain: DenseChain, event, t_max: int) -> HSBoundReport:
    """Check the completely-monotone decay bound for a start drawn from ``pi`` on ``event``.

    Requires a reversible chain with positive semidefinite transition matrix.
    """
    rep = spectral_report(chain)
    if not rep.reversible or not rep.psd:
        raise ValueError("bound requires a reversible chain with PSD transition matrix")
    B = np.asarray(event, dtype=bool)
    pi = chain.pi
    pi_B = float(pi[B].sum())
    if not 0 < pi_B:
        raise ValueError("event has zero stationary mass")
    dist = np.where(B, pi, 0.0) / pi_B
    prob = [float(dist[B].sum())]
    for _ in range(t_max):
        dist = dist @ chain.P
        prob.append(float(dist[B].sum()))
    prob = np.array(prob)
    t = np.arange(1, t_max + 1)
    excess = prob[1] - pi_B
    bound = pi_B + (1.0 - pi_B) ** (1 - t) * np.power(excess, t) if pi_B < 1 else np.full(t_max, pi_B)
    return HSBoundReport(pi_B, prob, prob - pi_B, prob[1:] - bound)
