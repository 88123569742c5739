"""Counter-based per-step randomness.

Every step of every chain reads its random numbers from one
:class:`RandomnessTape`, generated by a Philox stream whose key is
``(master_seed, replica)`` and whose counter block is ``(step, slot)``.
Tapes are therefore random-access: any step can be regenerated without
replaying the ones before it, and two coupled chains handed the same tape
share all of their randomness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_AUX = 4
_MASK64 = (1 << 64) - 1


def _philox(master_seed: int, replica: int, step: int, slot: int) -> np.random.Generator:
    for name, val in (("master_seed", master_seed), ("replica", replica), ("step", step), ("slot", slot)):
        if val < 0 or val > _MASK64:
            raise ValueError(f"{name} must be a non-negative 64-bit integer, got {val}")
    key = np.array([master_seed, replica], dtype=np.uint64)
    # word 0 is incremented by the generator itself; words 2-3 identify the step
    counter = np.array([0, 0, step, slot], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


@dataclass(frozen=True, eq=False)
class RandomnessTape:
    """Draws for one step.

    ``edge_uniforms[e]`` is the percolation variable ``r_e``;
    ``vertex_colors[v]`` is the colour proposal ``s_v`` in ``1..q``;
    ``vertex_uniforms`` serve heat-bath spin updates and ``aux`` the site/edge
    selection of local chains.
    """

    edge_uniforms: np.ndarray
    vertex_colors: np.ndarray
    vertex_uniforms: np.ndarray
    aux: np.ndarray
    key: tuple[int, int, int, int] | None = None
    q: int = 0

    def derive(self, slot: int) -> "RandomnessTape":
        """An independent tape for the same step, used by composite chains."""
        if self.key is None:
            raise ValueError("tape was not produced by seed_stream; cannot derive sub-slots")
        seed, replica, step, base = self.key
        return seed_stream(seed, replica, step, m=len(self.edge_uniforms), n=len(self.vertex_colors),
                           q=self.q, slot=base + slot)


def seed_stream(master_seed: int, replica: int, step: int, *, m: int, n: int, q: int, slot: int = 0) -> RandomnessTape:
    """Deterministic tape for ``(master_seed, replica, step, slot)``."""
    rng = _philox(int(master_seed), int(replica), int(step), int(slot))
    tape = RandomnessTape(
        edge_uniforms=rng.random(m),
        vertex_colors=rng.integers(1, q + 1, size=n),
        vertex_uniforms=rng.random(n),
        aux=rng.random(N_AUX),
        key=(int(master_seed), int(replica), int(step), int(slot)),
        q=int(q),
    )
    return tape


def make_tape(edge_uniforms, vertex_colors, vertex_uniforms=None, aux=None) -> RandomnessTape:
    """Hand-built tape, for tests and replays of recorded draws."""
    vc = np.asarray(vertex_colors, dtype=np.int64)
    return RandomnessTape(
        edge_uniforms=np.asarray(edge_uniforms, dtype=float),
        vertex_colors=vc,
        vertex_uniforms=np.zeros(len(vc)) if vertex_uniforms is None else np.asarray(vertex_uniforms, dtype=float),
        aux=np.zeros(N_AUX) if aux is None else np.asarray(aux, dtype=float),
        q=int(vc.max(initial=1)),
    )


def raw_draws(master_seed: int, replica: int, step: int, count: int, slot: int = 0) -> np.ndarray:
    """Raw 64-bit outputs of one stream; used for collision checks."""
    return _philox(master_seed, replica, step, slot).bit_generator.random_raw(count)
