"""Acceptance criteria 1-10.  Each test records a PASS/FAIL line that is
printed as it runs and again in the terminal summary.

Run on its own with ``pytest tests/test_acceptance.py -v -s``; ``-m "not slow"``
skips the three long simulation checks (6, 8, 9).
"""

import time

import numpy as np
import pytest

from swlab.coupling import coupled_update
from swlab.dynamics import ChainKind, sw_spin_step
from swlab.exact import (
    build_dense_chain,
    build_state_space,
    conditional_mean,
    entropy,
    entropy_decay_rate,
    exact_mixing_time,
    expected_conditional_entropy,
    lemma_hs_bound_check,
    probe_factorization_constant,
    spectral_report,
    variance,
)
from swlab.graph import arbitrary_graph, build_cube
from swlab.harness import config_from_mapping, run
from swlab.harness.run import duality_errors
from swlab.measures import BoundaryCondition, ModelParams, beta_critical, dual_parameter, p_critical
from swlab.tape import seed_stream

import oracle
from acceptance_log import record
from instances import LN2, ising_ln2, oracle_instances, single_edge

REVERSIBLE = {ChainKind.SW_SPIN, ChainKind.SW_EDGE, ChainKind.JOINT_K, ChainKind.JOINT_T, ChainKind.JOINT_HALF_KT,
              ChainKind.JOINT_KTK, ChainKind.JOINT_TKT, ChainKind.JOINT_LOCAL, ChainKind.RC_HEATBATH,
              ChainKind.RC_SINGLE_BOND}
BETA_SSM = 0.5 * beta_critical(2)


def _edges(g):
    return [tuple(map(int, e)) for e in g.edges]


def _random_functions(n, k, rng):
    """``k`` non-negative test functions on ``n`` states (columns), several shapes mixed."""
    cols = []
    for j in range(k):
        kind = j % 4
        if kind == 0:
            f = np.exp(rng.normal(scale=np.exp(rng.uniform(-3, 1.5)), size=n))
        elif kind == 1:
            f = rng.dirichlet(np.full(n, np.exp(rng.uniform(-2, 2)))) * n
        elif kind == 2:
            f = (rng.random(n) < rng.uniform(0.1, 0.9)) * rng.uniform(0.5, 5.0) + 1e-3
        else:
            f = rng.exponential(size=n) * (rng.random(n) < 0.7)
            f[rng.integers(n)] += 1.0
        cols.append(f)
    return np.stack(cols, axis=1)


# ---- 1


def _seo_residuals():
    out = {}
    for name, g, bc in oracle_instances():
        out[name] = build_dense_chain(g, ising_ln2(), bc, ChainKind.SCAN_EO).detailed_balance_residual()
    return out


def test_criterion_01_stationarity_and_reversibility():
    t0 = time.perf_counter()
    worst_stat = worst_db = 0.0
    for _, g, bc in oracle_instances():
        ss = build_state_space(g, ising_ln2(), bc)
        for kind in ChainKind:
            ch = build_dense_chain(g, ising_ln2(), bc, kind, space=ss)
            worst_stat = max(worst_stat, ch.stationarity_residual())
            if kind in REVERSIBLE:
                worst_db = max(worst_db, ch.detailed_balance_residual())
    seo = _seo_residuals()
    elapsed = time.perf_counter() - t0
    degenerate = sorted(k for k, v in seo.items() if v <= 1e-6)
    ok_core = worst_stat <= 1e-12 and worst_db <= 1e-12 and elapsed < 10
    record(1, ok_core and not degenerate,
           f"max|piP-pi|={worst_stat:.1e} max DB residual={worst_db:.1e} "
           f"S_EO DB residual min over non-degenerate={min(v for v in seo.values() if v > 1e-6):.2e}; "
           f"S_EO reversible on {degenerate} (one side fully pinned) time={elapsed:.2f}s")
    assert ok_core
    assert all(seo[k] > 1e-6 for k in seo if k not in ("edge/mono", "edge/wired-adm"))


@pytest.mark.xfail(strict=True, reason="on the single edge with vertex 0 pinned the even side is fixed, so "
                                       "S_EO is a single conditional-expectation projection and is reversible")
def test_criterion_01_seo_irreversible_on_every_instance():
    seo = _seo_residuals()
    assert all(v > 1e-6 for v in seo.values())


# ---- 2


def test_criterion_02_sw_is_psd():
    lo = min(float(spectral_report(build_dense_chain(g, ising_ln2(), bc, ChainKind.SW_SPIN)).eigenvalues.min())
             for _, g, bc in oracle_instances())
    record(2, lo >= -1e-10, f"min eigenvalue of P_SW over oracle instances = {lo:.2e}")
    assert lo >= -1e-10


# ---- 3


def _marginal_graphs():
    sq = build_cube(2, 1)
    return [
        ("edge", single_edge()),
        ("path3", arbitrary_graph(3, [(0, 1), (1, 2)])),
        ("triangle", arbitrary_graph(3, [(0, 1), (1, 2), (0, 2)])),
        ("square", sq),
        ("K4", arbitrary_graph(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])),
        ("grid2x3", arbitrary_graph(6, [(0, 1), (1, 2), (3, 4), (4, 5), (0, 3), (1, 4), (2, 5)])),
        ("K4+2", arbitrary_graph(6, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (3, 4), (4, 5)])),
    ]


def _marginal_error(g, params, bc):
    ss = build_state_space(g, params, bc)
    pairs = ss.joint_pairs
    mu_from_nu = np.bincount(pairs[:, 0], weights=ss.nu, minlength=len(ss.spins))
    rho_from_nu = np.bincount(pairs[:, 1], weights=ss.nu, minlength=len(ss.edges))
    mu_o = oracle.potts(g.n, _edges(g), params.q, params.beta, bc.pinned_spins, bc.pinned_edges)
    if not bc.pinned_edges:
        direct = oracle.potts_direct(g.n, _edges(g), params.q, params.beta, bc.pinned_spins)
        assert max(abs(mu_o[k] - direct[k]) for k in direct) < 1e-13
    rho_o = oracle.random_cluster(g.n, _edges(g), params.q, params.p, bc.pinned_spins, bc.pinned_edges)
    err = 0.0
    for i, s in enumerate(ss.spins):
        err = max(err, abs(mu_from_nu[i] - mu_o.get(tuple(map(int, s)), 0.0)), abs(ss.mu[i] - mu_from_nu[i]))
    for i, a in enumerate(ss.edges):
        err = max(err, abs(rho_from_nu[i] - rho_o.get(tuple(map(int, a)), 0.0)), abs(ss.rho[i] - rho_from_nu[i]))
    return err


def test_criterion_03_marginals_and_duality():
    marg = 0.0
    for name, g in _marginal_graphs():
        for q, beta in ((2, LN2), (3, 0.9)):
            pr = ModelParams.from_beta(q, beta)
            for bc in (BoundaryCondition.free(), BoundaryCondition.spin_only({0: 1}),
                       BoundaryCondition.admissible({0: 2}, {0: 1})):
                marg = max(marg, _marginal_error(g, pr, bc))
    for _, g, bc in oracle_instances():
        marg = max(marg, _marginal_error(g, ising_ln2(), bc))
    sq = build_cube(2, 1)
    dual = max(duality_errors(sq, ModelParams.from_p(2, p), cap=10 ** 6)["free"]["max_rel_weight_error"]
               for p in (0.3, 0.7, p_critical(2)))
    inv = max(abs(dual_parameter(dual_parameter(p, q), q) - p)
              for q in (2, 3, 4, 7.5) for p in np.linspace(0.0, 1.0, 101))
    selfdual = abs(dual_parameter(p_critical(2), 2) - p_critical(2))
    ok = marg <= 1e-12 and dual <= 1e-12 and inv <= 1e-14 and selfdual <= 1e-12
    record(3, ok, f"marginal err={marg:.1e} (graphs <= 8 edges) dual weight rel err={dual:.1e} "
                  f"involution err={inv:.1e} |p_d(p_c)-p_c|={selfdual:.1e}")
    assert ok


# ---- 4


def test_criterion_04_single_edge_fixtures():
    ch = build_dense_chain(single_edge(), ising_ln2(), BoundaryCondition.free(), ChainKind.SW_SPIN)
    mono, split = [3 / 8, 1 / 8, 1 / 8, 3 / 8], [1 / 4] * 4
    expect = np.array([mono, split, split, mono])
    states, P = oracle.sw_spin_matrix(2, [(0, 1)], 2, LN2)
    mine = [tuple(map(int, s)) for s in ch.states()]
    P_oracle = np.array([[P[s][t] for t in mine] for s in mine])
    err = max(np.abs(ch.P - expect).max(), np.abs(P_oracle - expect).max())
    t_mix, gap = exact_mixing_time(ch), spectral_report(ch).gap
    ok = err <= 1e-12 and t_mix == 1 and abs(gap - 0.75) <= 1e-12
    record(4, ok, f"row error={err:.1e} T_mix={t_mix} gap={gap:.12f}")
    assert ok


# ---- 5


def test_criterion_05_entropy_properties():
    rng = np.random.default_rng(5)
    dec = var_viol = contr_viol = 0.0
    deltas = []
    for _, g, bc in oracle_instances():
        pr = ising_ln2()
        ss = build_state_space(g, pr, bc)
        nu, pairs = ss.nu, ss.joint_pairs
        F = _random_functions(len(nu), 1000, rng)
        F /= nu @ F
        ent = entropy(nu, F)
        for grp in (pairs[:, 0], pairs[:, 1]):
            rhs = expected_conditional_entropy(nu, F, grp) + entropy(nu, conditional_mean(nu, F, grp))
            dec = max(dec, float(np.abs(ent - rhs).max()))
        var_viol = max(var_viol, float((variance(nu, np.sqrt(F)) - ent).max()))
        for kind in ChainKind:
            ch = build_dense_chain(g, pr, bc, kind, space=ss)
            G = _random_functions(ch.n_states, 1000, rng)
            contr_viol = max(contr_viol, float((entropy(ch.pi, ch.P @ G) - entropy(ch.pi, G)).max()))
        sw = build_dense_chain(g, pr, bc, ChainKind.SW_SPIN, space=ss)
        if sw.is_ergodic():
            deltas.append(entropy_decay_rate(sw).delta_hat)
    d0 = [entropy_decay_rate(build_dense_chain(g, ModelParams.from_beta(2, 0.0), bc, ChainKind.SW_SPIN)).delta_hat
          for _, g, bc in oracle_instances() if 1 not in bc.pinned_edges.values()]  # open pins need p > 0
    ok = (dec <= 1e-10 and var_viol <= 1e-12 and contr_viol <= 1e-12
          and all(0 < d <= 1 for d in deltas) and all(d == 1.0 for d in d0))
    record(5, ok, f"decomposition err={dec:.1e} max(Var sqrt f - Ent f)={var_viol:.1e} "
                  f"max(Ent Uf - Ent f)={contr_viol:.1e} delta_hat in [{min(deltas):.4f}, {max(deltas):.4f}] "
                  f"beta=0 delta_hat={sorted(set(d0))}")
    assert ok


# ---- 6


@pytest.mark.slow
def test_criterion_06_factorization_probes():
    t0 = time.perf_counter()
    g = build_cube(2, 2)
    free = BoundaryCondition.free()
    c0 = probe_factorization_constant(g, ModelParams.from_beta(2, 0.0), free, "even_odd", budget=10_000).c_hat
    pr = ModelParams.from_beta(2, BETA_SSM)
    ss = build_state_space(g, pr, free)
    spread, vals = {}, {}
    for target in ("even_odd", "spin_edge"):
        v = [probe_factorization_constant(g, pr, free, target, budget=1000, seed=s, space=ss).c_hat for s in range(3)]
        vals[target] = v
        spread[target] = (max(v) - min(v)) / max(v)
    elapsed = time.perf_counter() - t0
    finite = all(np.isfinite(v).all() and min(v) > 0 for v in vals.values())
    ok = c0 <= 1 + 1e-9 and finite and max(spread.values()) <= 0.05 and elapsed < 300
    record(6, ok, f"beta=0 C_hat={c0:.12f}; 3x3 C_hat even/odd={vals['even_odd'][0]:.6f} "
                  f"spin/edge={vals['spin_edge'][0]:.6f} spread={max(spread.values()):.1e} time={elapsed:.0f}s")
    assert ok


# ---- 7


def test_criterion_07_hs_bound():
    worst = np.inf
    for _, g, bc in oracle_instances():
        ch = build_dense_chain(g, ising_ln2(), bc, ChainKind.SW_SPIN)
        spins = ch.states()
        B = (spins == spins[:, :1]).all(axis=1)
        worst = min(worst, lemma_hs_bound_check(ch, B, t_max=20).min_margin)
    record(7, worst >= -1e-12, f"min margin over t<=20 = {worst:.2e}")
    assert worst >= -1e-12


# ---- 8


@pytest.mark.slow
def test_criterion_08_mixing_scaling():
    t0 = time.perf_counter()
    cfg = config_from_mapping({"experiment": "mix-scaling", "params": {"q": 2, "beta": BETA_SSM},
                               "sides": [8, 16, 32, 64], "replicas": 100, "seed": 0, "t_cap": 10_000})
    rec = run(cfg, persist=False)
    elapsed = time.perf_counter() - t0
    ladder = rec.summary["ladder"]
    med = {r["side"]: r["median"] for r in ladder}
    fits = rec.fits
    ratio = med[64] / med[8]
    checks = {"b>0": fits["log"]["b"] > 0,
              "linear worse": fits["linear"]["rms_residual"] > fits["log"]["rms_residual"],
              "ratio<=3": ratio <= 3,
              "time": elapsed < 1800,
              "uncensored": all(r["censored"] == 0 for r in ladder)}
    ok = all(checks.values())
    record(8, ok, f"medians={[med[s] for s in (8, 16, 32, 64)]} log fit a={fits['log']['a']:.2f} "
                  f"b={fits['log']['b']:.3f} rms={fits['log']['rms_residual']:.3f} "
                  f"linear rms={fits['linear']['rms_residual']:.3f} T(64)/T(8)={ratio:.3f} "
                  f"failed={[k for k, v in checks.items() if not v]} time={elapsed:.0f}s")
    assert ok, checks


# ---- 9


@pytest.mark.slow
def test_criterion_09_absorption_and_shattering():
    rng = np.random.default_rng(9)
    g = build_cube(2, 2)
    free = BoundaryCondition.free()
    broken = 0
    n_replays = 100_000
    for k in range(n_replays):
        pr = ModelParams.from_beta(int(rng.integers(2, 4)), float(rng.uniform(0, 2)))
        X = rng.integers(1, pr.q + 1, g.n)
        tape = seed_stream(9, k, 0, m=g.m, n=g.n, q=pr.q)
        # each copy steps through the plain kernel on its own regenerated tape
        X1 = sw_spin_step(g, pr, free, X, tape)
        Y1 = sw_spin_step(g, pr, free, X.copy(), seed_stream(9, k, 0, m=g.m, n=g.n, q=pr.q))
        if k % 10 == 0:
            A, B = coupled_update(g, pr, free, X, X.copy(), tape)
            broken += not np.array_equal(A, B)
        broken += not np.array_equal(X1, Y1)
    cfg = config_from_mapping({"experiment": "shatter", "params": {"q": 2, "beta": BETA_SSM},
                               "graph": {"dim": 2, "side": 32}, "L": 8, "trials": 1000, "burn_in": 300, "seed": 0})
    rep = run(cfg, persist=False).summary["reports"][0]
    ok = broken == 0 and rep["estimate"] <= 0.1
    record(9, ok, f"absorption violations={broken}/{n_replays}; shatter failure rate={rep['estimate']:.3f} "
                  f"({rep['failures']}/{rep['trials']}, {rep['n_deep']} deep vertices)")
    assert ok


# ---- 10


def test_criterion_10_low_temperature_rc():
    pr = ModelParams.from_p(2, 0.7)
    assert pr.p > p_critical(2)
    stat = db = 0.0
    lo = np.inf
    marg = dual = 0.0
    for side in (1, 2):
        g = build_cube(2, side)
        for bc in (BoundaryCondition.rc_free(), BoundaryCondition.wired(g)):
            ss = build_state_space(g, pr, bc)
            rho_o = oracle.random_cluster(g.n, _edges(g), 2, pr.p, bc.pinned_spins, bc.pinned_edges)
            rho_nu = np.bincount(ss.joint_pairs[:, 1], weights=ss.nu, minlength=len(ss.edges))
            for i, a in enumerate(ss.edges):
                key = tuple(map(int, a))
                marg = max(marg, abs(ss.rho[i] - rho_o.get(key, 0.0)), abs(rho_nu[i] - ss.rho[i]))
            for kind in (ChainKind.RC_HEATBATH, ChainKind.SW_EDGE):
                ch = build_dense_chain(g, pr, bc, kind, space=ss)
                rep = spectral_report(ch)
                stat = max(stat, ch.stationarity_residual())
                db = max(db, rep.reversibility_residual)
                lo = min(lo, float(rep.eigenvalues.min()))
        errs = duality_errors(g, pr, cap=10 ** 6)
        dual = max(dual, *(e["max_heatbath_error"] for e in errs.values()))
    ok = stat <= 1e-12 and db <= 1e-12 and lo >= -1e-10 and marg <= 1e-12 and dual <= 1e-12
    record(10, ok, f"p=0.7: max|piP-pi|={stat:.1e} DB={db:.1e} min eig={lo:.2e} marginal err={marg:.1e} "
                   f"|P_HB - P_HB^d|={dual:.1e}")
    assert ok
