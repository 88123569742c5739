"""Experiment orchestration and append-only persistence of run records."""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..coupling import coupling_time, shattered_check, sw_run
from ..dynamics import ChainKind, JointConfig, _recolor, observables, step
from ..exact import (
    CapExceeded,
    build_dense_chain,
    build_state_space,
    entropy_decay_rate,
    exact_mixing_time,
    factorization_problem,
    probe_factorization_constant,
    spectral_report,
)
from ..graph import build_cube, graph_from_json, planar_dual
from ..measures import BoundaryCondition, ModelParams, dual_parameter
from ..tape import seed_stream
from .config import ConfigError, RunConfig

WORKERS_ENV = "SWLAB_WORKERS"


@dataclass
class RunRecord:
    config: dict
    version: str
    wall_time: float
    replicas: list
    summary: dict
    fits: dict | None = None
    path: str | None = field(default=None, compare=False)

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("path")
        return _plain(d)

    def result_key(self) -> str:
        """Everything replay must reproduce bit-for-bit."""
        d = self.to_json()
        return json.dumps({"replicas": d["replicas"], "summary": d["summary"], "fits": d["fits"]}, sort_keys=True)


def _plain(obj):
    """numpy scalars and arrays to JSON-native types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError as err:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from err


def _fan_out(fn, jobs: list) -> list:
    n = worker_count()
    if n == 1 or len(jobs) < 2:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, *zip(*jobs)))


# --------------------------------------------------------------------------
# fits


def fit_scaling(n: np.ndarray, T: np.ndarray) -> dict:
    """Least-squares fits ``T = a + b ln n`` and ``T = a + b n`` with their RMS residuals."""
    n, T = np.asarray(n, dtype=float), np.asarray(T, dtype=float)
    out = {}
    for name, x in (("log", np.log(n)), ("linear", n)):
        X = np.stack([np.ones_like(x), x], axis=1)
        coef, *_ = np.linalg.lstsq(X, T, rcond=None)
        resid = T - X @ coef
        out[name] = {"a": float(coef[0]), "b": float(coef[1]), "rms_residual": float(np.sqrt(np.mean(resid ** 2)))}
    return out


# --------------------------------------------------------------------------
# experiments


def _initial_state(kind: ChainKind, g, bc):
    _, opened = bc.edge_masks(g.m)
    spins = _recolor(g, bc, opened, np.ones(g.n, dtype=np.int64))
    if kind.state_type == "spin":
        return spins
    if kind.state_type == "edge":
        return opened.copy()
    return JointConfig(spins, opened.copy())


def _simulate_replica(cfg_json: dict, replica: int) -> dict:
    from .config import config_from_mapping
    cfg = config_from_mapping(cfg_json)
    g, params = cfg.build_graph(), cfg.model()
    bc = cfg.boundary(g)
    kind = ChainKind(cfg.chain)
    state = _initial_state(kind, g, bc)
    series = []
    for t in range(int(cfg.steps)):
        tape = seed_stream(cfg.seed, replica, t, m=g.m, n=g.n, q=params.q)
        state = step(kind, g, params, bc, state, tape)
        if kind.state_type == "spin":
            obs = observables(g, params.q, sigma=state)
        elif kind.state_type == "edge":
            obs = observables(g, params.q, A=state)
        else:
            obs = observables(g, params.q, sigma=state.spins, A=state.edges)
        series.append({"step": t + 1, **{k: v for k, v in obs.items() if k in cfg.observables}})
    return {"replica": replica, "series": series}


def _summarise_series(replicas: list) -> dict:
    out = {}
    for key in ("energy", "n_edges", "n_components"):
        vals = [r[key] for rep in replicas for r in rep["series"][len(rep["series"]) // 2:] if key in r]
        if vals:
            out[f"mean_{key}"] = float(np.mean(vals))
    return out


def run_simulate(cfg: RunConfig):
    reps = _fan_out(_simulate_replica, [(cfg.to_json(), r) for r in range(cfg.replicas)])
    return reps, _summarise_series(reps), None


def exact_report(g, params: ModelParams, bc: BoundaryCondition, kind, cap: int, budget: int = 200,
                 n_random: int = 64, seed: int = 0) -> dict:
    kind = ChainKind(kind)
    ss = build_state_space(g, params, bc, cap)
    chain = build_dense_chain(g, params, bc, kind, cap=cap, space=ss)
    spec = spectral_report(chain)
    ergodic = chain.is_ergodic()
    t_mix = exact_mixing_time(chain) if ergodic else None
    delta = entropy_decay_rate(chain, n_random=n_random, seed=seed) if ergodic else None
    c_hat = None
    if kind.state_type == "spin" and g.is_bipartite:
        c_hat = probe_factorization_constant(g, params, bc, "even_odd", budget=budget, seed=seed, space=ss).c_hat
    elif kind.state_type == "joint":
        c_hat = probe_factorization_constant(g, params, bc, "spin_edge", budget=budget, seed=seed, space=ss).c_hat
    return {
        "chain": kind.value,
        "n_states": chain.n_states,
        "stationarity_residual": chain.stationarity_residual(),
        "reversible": spec.reversible,
        "detailed_balance_residual": spec.reversibility_residual,
        "psd": spec.psd,
        "gap": spec.gap,
        "ergodic": ergodic,
        "t_mix": t_mix,
        "delta_hat": None if delta is None else delta.delta_hat,
        "c_hat": c_hat,
    }


def run_exact(cfg: RunConfig):
    g, params = cfg.build_graph(), cfg.model()
    rep = exact_report(g, params, cfg.boundary(g), cfg.chain, cfg.cap, budget=int(cfg.option("budget", 200)),
                       n_random=int(cfg.option("n_random", 64)), seed=cfg.seed)
    return [rep], rep, None


def _couple_replica(cfg_json: dict, side: int | None, replica: int) -> int:
    from .config import config_from_mapping
    cfg = config_from_mapping(cfg_json)
    params = cfg.model()
    if side is None:
        g = cfg.build_graph()
    else:
        g = build_cube(int(cfg.option("dim", 2)), side)
    bc = cfg.boundary(g) if side is None else BoundaryCondition.free()
    return coupling_time(g, params, bc, starts=cfg.option("starts", "extremal"), seed=cfg.seed,
                         t_cap=cfg.t_cap, replica=replica)


def run_couple(cfg: RunConfig):
    times = _fan_out(_couple_replica, [(cfg.to_json(), None, r) for r in range(cfg.replicas)])
    reps = [{"seed": cfg.seed, "replica": r, "t_coalesce": t} for r, t in enumerate(times)]
    done = [t for t in times if t >= 0]
    summary = {"median": float(np.median(done)) if done else None, "censored": len(times) - len(done),
               "mean": float(np.mean(done)) if done else None}
    return reps, summary, None


def run_mix_scaling(cfg: RunConfig):
    sides = [int(s) for s in cfg.option("sides")]
    dim = int(cfg.option("dim", 2))
    reps, rows = [], []
    for side in sides:
        times = _fan_out(_couple_replica, [(cfg.to_json(), side, r) for r in range(cfg.replicas)])
        n = (side + 1) ** dim
        done = [t for t in times if t >= 0]
        med = float(np.median(done)) if done else None
        reps.append({"side": side, "n": n, "times": times})
        rows.append({"side": side, "n": n, "median": med, "censored": len(times) - len(done)})
    ok = [r for r in rows if r["median"] is not None]
    fits = fit_scaling([r["n"] for r in ok], [r["median"] for r in ok]) if len(ok) >= 2 else None
    return reps, {"ladder": rows}, fits


def run_shatter(cfg: RunConfig):
    g, params = cfg.build_graph(), cfg.model()
    burn_in = int(cfg.option("burn_in", 200))
    sigma = sw_run(g, params, BoundaryCondition.wired(g), burn_in, seed=cfg.seed)
    Ls = cfg.option("L")
    Ls = [Ls] if isinstance(Ls, int) else list(Ls)
    trials = int(cfg.option("trials", 1000))
    reports = [shattered_check(g, params, sigma, int(L), trials, seed=cfg.seed) for L in Ls]
    reps = [{"L": r.L, "trials": r.trials, "failures": r.failures, "n_deep": r.n_deep, "estimate": r.estimate}
            for r in reports]
    return reps, {"reports": reps, "burn_in": burn_in}, None


def duality_errors(g, params: ModelParams, cap: int) -> dict:
    """Max relative error of rho(A) vs dual rho(A_d), and of the heat-bath matrices, for each bc."""
    D = planar_dual(g)
    pd = ModelParams.from_p(params.q, dual_parameter(params.p, params.q))
    out = {}
    for name, bc, dg in (("free", BoundaryCondition.rc_free(), D.wired), ("wired", BoundaryCondition.wired(g), D.free)):
        c = build_dense_chain(g, params, bc, ChainKind.RC_HEATBATH, cap=cap)
        cd = build_dense_chain(dg, pd, BoundaryCondition.rc_free(), ChainKind.RC_HEATBATH, cap=cap)
        Ad = np.array([D.dual_config(a) for a in c.space.edges])
        idx = cd.space.edge_index((Ad.astype(np.int64) << np.arange(g.m, dtype=np.int64)).sum(axis=1))
        if (idx < 0).any() or len(idx) != cd.n_states:
            raise AssertionError("dual configurations do not biject onto the dual state space")
        rel = np.abs(c.pi - cd.pi[idx]) / c.pi
        out[name] = {"max_rel_weight_error": float(rel.max()),
                     "max_heatbath_error": float(np.abs(c.P - cd.P[np.ix_(idx, idx)]).max()),
                     "n_states": c.n_states}
    return out


def run_duality(cfg: RunConfig):
    g, params = cfg.build_graph(), cfg.model()
    if getattr(g, "dim", None) != 2:
        raise ConfigError("duality-check needs a 2-D lattice graph")
    errs = duality_errors(g, params, cfg.cap)
    summary = {"max_rel_weight_error": max(e["max_rel_weight_error"] for e in errs.values()),
               "max_heatbath_error": max(e["max_heatbath_error"] for e in errs.values()), "by_bc": errs}
    return [errs], summary, None


def run_factorization(cfg: RunConfig):
    g, params = cfg.build_graph(), cfg.model()
    bc = cfg.boundary(g)
    ss = build_state_space(g, params, bc, cfg.cap)
    budget = int(cfg.option("budget", 1000))
    seeds = [int(s) for s in cfg.option("probe_seeds", [cfg.seed, cfg.seed + 1, cfg.seed + 2])]
    reps, summary = [], {}
    for target in cfg.option("targets", ["even_odd", "spin_edge"]):
        prob = factorization_problem(g, params, bc, target, space=ss)
        vals = []
        for s in seeds:
            r = probe_factorization_constant(g, params, bc, target, budget=budget, seed=s, problem=prob,
                                             refine_rounds=int(cfg.option("refine_rounds", 200)))
            reps.append({"target": target, "seed": s, "c_hat": r.c_hat, "source": r.source,
                         "spectral": r.spectral, "random": r.random, "n_evaluated": r.n_evaluated})
            vals.append(r.c_hat)
        summary[target] = {"c_hat_min": min(vals), "c_hat_max": max(vals),
                           "spread": (max(vals) - min(vals)) / max(vals) if max(vals) > 0 else 0.0}
    return reps, summary, None


_RUNNERS = {
    "simulate": run_simulate,
    "exact": run_exact,
    "mix-scaling": run_mix_scaling,
    "couple": run_couple,
    "shatter": run_shatter,
    "duality-check": run_duality,
    "factorization-probe": run_factorization,
}


def run(cfg: RunConfig, persist: bool = True) -> RunRecord:
    """Execute ``cfg.experiment``; write the record under ``cfg.out`` when given."""
    t0 = time.perf_counter()
    reps, summary, fits = _RUNNERS[cfg.experiment](cfg)
    rec = RunRecord(config=cfg.to_json(), version=__version__, wall_time=time.perf_counter() - t0,
                    replicas=_plain(reps), summary=_plain(summary), fits=_plain(fits))
    if persist and cfg.out:
        save_record(rec, cfg)
    return rec


# --------------------------------------------------------------------------
# persistence


def run_directory(cfg: RunConfig, root=None) -> Path:
    return Path(root if root is not None else cfg.out) / cfg.content_hash()[:16]


def save_record(rec: RunRecord, cfg: RunConfig, root=None) -> Path:
    """Append a record to the config's run directory; existing files are never rewritten."""
    d = run_directory(cfg, root)
    try:
        d.mkdir(parents=True, exist_ok=True)
        cfg_path = d / "config.json"
        if not cfg_path.exists():
            cfg_path.write_text(json.dumps(cfg.to_json(), indent=2, sort_keys=True))
        k = len(list(d.glob("record-*.json")))
        while True:
            path = d / f"record-{k:04d}.json"
            try:
                with open(path, "x") as fh:
                    json.dump(rec.to_json(), fh, indent=1, sort_keys=True)
                break
            except FileExistsError:
                k += 1
        if cfg.experiment == "simulate" and cfg.series_csv:
            _write_series(d / f"series-{k:04d}.csv", rec.replicas)
        if cfg.experiment in ("couple", "mix-scaling"):
            _write_coupling_csv(d / f"coupling-{k:04d}.csv", cfg, rec.replicas)
    except OSError as err:
        raise ConfigError(f"cannot write to output directory {d}: {err}") from err
    rec.path = str(path)
    return path


def _write_series(path: Path, replicas: list) -> None:
    with open(path, "x", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replica", "step", "energy", "n_edges", "n_components", "magnetization"])
        for rep in replicas:
            for row in rep["series"]:
                mag = row.get("magnetization")
                w.writerow([rep["replica"], row["step"], row.get("energy", ""), row.get("n_edges", ""),
                            row.get("n_components", ""), "" if mag is None else " ".join(map(str, mag))])


def _write_coupling_csv(path: Path, cfg: RunConfig, replicas: list) -> None:
    with open(path, "x", newline="") as fh:
        w = csv.writer(fh)
        if cfg.experiment == "couple":
            w.writerow(["seed", "replica", "t_coalesce"])
            for r in replicas:
                w.writerow([r["seed"], r["replica"], r["t_coalesce"]])
        else:
            w.writerow(["side", "seed", "replica", "t_coalesce"])
            for r in replicas:
                for k, t in enumerate(r["times"]):
                    w.writerow([r["side"], cfg.seed, k, t])


def load_record(path) -> RunRecord:
    d = json.loads(Path(path).read_text())
    return RunRecord(path=str(path), **d)


def replay(path) -> tuple[bool, RunRecord]:
    """Re-run a persisted record from its config echo; ``True`` if results match exactly."""
    from .config import config_from_mapping
    old = load_record(path)
    new = run(config_from_mapping(old.config), persist=False)
    return old.result_key() == new.result_key(), new


__all__ = ["RunRecord", "run", "replay", "load_record", "save_record", "fit_scaling", "exact_report",
           "duality_errors", "CapExceeded", "graph_from_json"]
