"""Exhaustive enumeration oracles for tiny instances."""

from .spaces import DEFAULT_STATE_CAP, CapExceeded, StateSpace, build_state_space
from .chains import DEFAULT_DENSE_CAP, DenseChain, build_dense_chain, is_ergodic
from .analysis import (
    MixingTimeError,
    conditional_mean,
    entropy,
    entropy_decay_rate,
    exact_mixing_time,
    expected_conditional_entropy,
    lemma_hs_bound_check,
    relative_entropy,
    spectral_report,
    tv_distance,
    variance,
)
from .factorization import (
    FactorizationProblem,
    ProbeResult,
    Target,
    factorization_problem,
    factorization_ratio,
    probe_factorization_constant,
)
