import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swlab.exact import build_state_space
from swlab.measures import (
    BoundaryCondition,
    ModelParams,
    beta_critical,
    dual_parameter,
    joint_log_weight,
    p_critical,
    potts_log_weight,
    rc_log_weight,
)

import oracle
from instances import LN2, oracle_instances, single_edge, square

FREE = BoundaryCondition.free()


def test_params_derivation():
    pr = ModelParams.from_beta(2, LN2)
    assert pr.p == pytest.approx(0.5, abs=1e-15)
    assert ModelParams.from_p(3, 0.5).beta == pytest.approx(LN2, abs=1e-15)
    assert ModelParams.from_p(2, 1.0).beta == math.inf
    assert ModelParams.from_mapping({"q": 2, "beta": LN2, "p": 0.5}).p == pytest.approx(0.5)
    with pytest.raises(ValueError):
        ModelParams.from_mapping({"q": 2, "beta": 1.0, "p": 0.5})
    with pytest.raises(ValueError):
        ModelParams.from_mapping({"q": 2})
    for bad in ({"q": 1, "beta": 1}, {"q": 2, "beta": -1}, {"q": 2, "p": 1.5}, {"q": 2.5, "beta": 1}):
        with pytest.raises(ValueError):
            ModelParams.from_mapping(bad)


def test_potts_examples():
    g, pr = single_edge(), ModelParams.from_beta(2, LN2)
    assert potts_log_weight(g, pr, FREE, [1, 1]).log_weight == 0
    assert potts_log_weight(g, pr, FREE, [1, 2]).log_weight == pytest.approx(-LN2, abs=1e-15)
    zero = ModelParams.from_beta(3, 0.0)
    h = square()
    for s in ([1, 2, 3, 1], [2, 2, 2, 2], [3, 1, 1, 2]):
        assert potts_log_weight(h, zero, FREE, s).log_weight == 0
    with pytest.raises(ValueError):
        potts_log_weight(g, pr, FREE, [0, 1])
    with pytest.raises(ValueError):
        potts_log_weight(g, pr, FREE, [1, 3])
    assert potts_log_weight(g, pr, BoundaryCondition.spin_only({0: 2}), [1, 1]).forbidden


def test_rc_examples():
    g, pr = single_edge(), ModelParams.from_p(2, 0.5)
    w0 = rc_log_weight(g, pr, FREE, []).weight
    w1 = rc_log_weight(g, pr, FREE, [0]).weight
    assert (w0, w1) == pytest.approx((2.0, 1.0), abs=1e-15)
    assert w0 / (w0 + w1) == pytest.approx(2 / 3, abs=1e-15)
    one = ModelParams.from_p(2, 1.0)
    h = square()
    assert not rc_log_weight(h, one, FREE, np.ones(4, bool)).forbidden
    assert rc_log_weight(h, one, FREE, np.array([1, 1, 1, 0], bool)).forbidden
    wired = BoundaryCondition.wired(h)
    # all four vertices touch V0, so c - c0 = 0 and the weight is the edge term alone
    assert rc_log_weight(h, pr, wired, []).log_weight == pytest.approx(4 * math.log(0.5), abs=1e-14)


def test_rc_forbids_linking_different_pins():
    g, pr = single_edge(), ModelParams.from_p(2, 0.5)
    bc = BoundaryCondition.spin_only({0: 1, 1: 2})
    assert rc_log_weight(g, pr, bc, [0]).forbidden
    assert not rc_log_weight(g, pr, bc, []).forbidden


def test_joint_examples():
    g, pr = single_edge(), ModelParams.from_p(2, 0.5)
    for s in ([1, 1], [2, 2]):
        for A in ([], [0]):
            assert joint_log_weight(g, pr, FREE, s, A).weight == pytest.approx(0.5, abs=1e-15)
    for s in ([1, 2], [2, 1]):
        assert joint_log_weight(g, pr, FREE, s, []).weight == pytest.approx(0.5, abs=1e-15)
        assert joint_log_weight(g, pr, FREE, s, [0]).forbidden
    h = square()
    pr3 = ModelParams.from_p(3, 0.3)
    assert joint_log_weight(h, pr3, FREE, [1, 2, 3, 1], []).weight == pytest.approx(0.7 ** 4)


def test_bc_validation():
    h = build = square()
    g3 = __import__("swlab").build_cube(2, 2)
    centre = g3.vertex((1, 1))
    with pytest.raises(ValueError):
        BoundaryCondition.spin_only({centre: 1}).validate(g3, 2)
    with pytest.raises(ValueError):
        BoundaryCondition.spin_only({0: 3}).validate(h, 2)
    with pytest.raises(ValueError):
        BoundaryCondition.admissible({}, {0: 1}).validate(h, 2)
    e = build.edge_index[(0, 1)]
    with pytest.raises(ValueError):
        BoundaryCondition.admissible({0: 1, 1: 2}, {e: 1}).validate(h, 2)
    BoundaryCondition.admissible({0: 1}, {e: 1}).validate(h, 2)
    # interior edges of the 3x3 grid cannot be pinned
    inner = [k for k, (u, v) in enumerate(g3.edges) if centre in (u, v)]
    assert all(k in set(g3.boundary_edges) for k in inner)  # every 3x3 edge touches the boundary
    g4 = __import__("swlab").build_cube(2, 4)
    deep = [k for k in range(g4.m) if k not in set(g4.boundary_edges)][0]
    with pytest.raises(ValueError):
        BoundaryCondition.admissible({0: 1}, {deep: 0}).validate(g4, 2)


def test_bc_json_round_trip():
    h = square()
    bc = BoundaryCondition.admissible({0: 1}, {h.edge_index[(0, 1)]: 1})
    again = BoundaryCondition.from_json(bc.to_json(), h, 2)
    assert again == bc
    by_coord = BoundaryCondition.from_json(
        {"kind": "admissible", "pinned_spins": [[[0, 0], 1]], "pinned_edges": [[[[0, 0], [0, 1]], 1]]}, h, 2)
    assert by_coord == bc


def test_critical_values():
    assert beta_critical(2) == pytest.approx(0.881373587019543, abs=1e-12)
    assert beta_critical(4) == pytest.approx(math.log(3), abs=1e-15)
    for q in (2, 3, 4, 10):
        assert p_critical(q) == pytest.approx(-math.expm1(-beta_critical(q)), abs=1e-14)
        assert dual_parameter(p_critical(q), q) == pytest.approx(p_critical(q), abs=1e-12)
    assert dual_parameter(0.0, 2) == 1.0 and dual_parameter(1.0, 2) == 0.0


@given(st.floats(0, 1), st.integers(2, 10))
def test_dual_parameter_involution(p, q):
    assert abs(dual_parameter(dual_parameter(p, q), q) - p) <= 1e-14


@pytest.mark.parametrize("name,g,bc", oracle_instances(), ids=lambda x: x if isinstance(x, str) else "")
def test_marginals_against_oracle(name, g, bc):
    pr = ModelParams.from_beta(2, LN2)
    ss = build_state_space(g, pr, bc)
    edges = [tuple(map(int, e)) for e in g.edges]
    mu_ref = oracle.potts(g.n, edges, 2, LN2, bc.pinned_spins, bc.pinned_edges)
    rho_ref = oracle.random_cluster(g.n, edges, 2, 0.5, bc.pinned_spins, bc.pinned_edges)
    mu = dict(zip(map(tuple, ss.spins.tolist()), ss.mu))
    rho = dict(zip((tuple(int(b) for b in a) for a in ss.edges), ss.rho))
    assert mu.keys() == mu_ref.keys() and rho.keys() == rho_ref.keys()
    assert max(abs(mu[k] - mu_ref[k]) for k in mu) <= 1e-12
    assert max(abs(rho[k] - rho_ref[k]) for k in rho) <= 1e-12
    # marginals of the joint table agree with the closed-form weights
    assert np.abs(ss.J.sum(axis=1) / ss.J.sum() - ss.mu).max() <= 1e-12
    assert np.abs(ss.J.sum(axis=0) / ss.J.sum() - ss.rho).max() <= 1e-12
    if not bc.pinned_edges:
        direct = oracle.potts_direct(g.n, edges, 2, LN2, bc.pinned_spins)
        assert max(abs(mu[k] - direct[k]) for k in mu) <= 1e-12
