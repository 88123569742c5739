"""Swendsen-Wang and related Markov chains on Potts / random-cluster models."""

from .graph import (
    ArbitraryGraph,
    ComponentLabeling,
    DualGraph,
    LatticeGraph,
    arbitrary_graph,
    build_cube,
    connected_components,
    planar_dual,
)
from .measures import (
    BoundaryCondition,
    ModelParams,
    beta_critical,
    dual_parameter,
    joint_log_weight,
    p_critical,
    potts_log_weight,
    rc_log_weight,
)
from .dynamics import ChainKind, JointConfig, step
from .tape import RandomnessTape, seed_stream

__version__ = "0.1.0"
