"""Dispatch of experiment kinds, certificate derivation and suite orchestration.

Each kind has a ``_run_<kind>`` function that returns a JSON-ready result
dict (plus an optional per-iteration trace) and a ``_certify_<kind>``
function that derives the certificates from that result alone, so that a
stored record can be re-certified without re-running anything.
"""
from __future__ import annotations

import csv
import itertools
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone

import numpy as np
import scipy

from .. import __version__
from .. import banach_actions as ba
from .. import hilbert_actions as ha
from .. import jet_calculus as jc
from .. import rigidity_engine as re_
from ..errors import BootstrapStalled, ConfigError, LabError
from ..function_spaces import (CircleMap, NormSpec, PeriodicFunction, ck_norm, random_trig_polynomial,
                               sobolev_norm, standard_corpus)
from ..groups import build_group, convolve_power, named_density
from .config import ExperimentConfig, config_values_from_toml, load_toml, make_config
from .records import Certificate, RunRecord, canonical, jsonable, number

WORKERS_ENV = "RIGIDITY_LAB_WORKERS"


def versions() -> dict:
    return {"rigidity_lab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _density(cfg: ExperimentConfig, group, action=None):
    """h = f^{*m}; with m = "auto" the power comes from choose_m on the given action."""
    f = named_density(group, cfg.density)
    if cfg.m != "auto":
        return convolve_power(f, int(cfg.m))[0], int(cfg.m)
    action = action if action is not None else ha.regular_representation(group)
    D = ha.contraction_factor(action, f)
    eps = ha.kazhdan_epsilon(action, restarts=8, seed=cfg.seed).value
    m = ha.choose_m(D, cfg.C0, eps)
    return convolve_power(f, m)[0], m


# -- gap ------------------------------------------------------------------------------------

def _cyclic_gap_formula(n: int, density: str) -> float | None:
    if n < 3:
        return None
    j = np.arange(1, n)
    if density == "lazy-k":
        return float(np.abs((1 + 2 * np.cos(2 * np.pi * j / n)) / 3).max())
    if density == "uniform-k":
        return float(np.abs(np.cos(2 * np.pi * j / n)).max())
    return None


def _run_gap(cfg):
    g = build_group(cfg.group)
    f = named_density(g, cfg.density)
    reg = ha.regular_representation(g)
    D = ha.contraction_factor(reg, f)
    ke = ha.kazhdan_epsilon(reg, restarts=8, seed=cfg.seed)
    m = ha.choose_m(D, cfg.C0, ke.value) if D < 1 else None
    analytic = _cyclic_gap_formula(g.order, cfg.density) if g.kind == "cyclic" else None
    return {"order": g.order, "contraction_factor": D, "kazhdan_epsilon": ke.value,
            "kazhdan_lower_bound": ke.lower_bound, "m": m, "analytic": analytic,
            "in_U2": f.in_U2}, []


def _certify_gap(cfg, r):
    D = number(r["contraction_factor"])
    out = [Certificate("spectral_gap", D, 1.0, strict=True),
           Certificate("kazhdan_certificate", number(r["kazhdan_lower_bound"]), number(r["kazhdan_epsilon"]) + 1e-9)]
    if r.get("m") is not None:
        out.append(Certificate("choose_m", 2 * D ** int(r["m"]), cfg.C0 * number(r["kazhdan_epsilon"])))
    if r.get("analytic") is not None:
        out.append(Certificate("analytic_match", abs(D - number(r["analytic"])), 1e-10))
    return out


# -- fixed points ---------------------------------------------------------------------------

def _run_fixpoint(cfg):
    g = build_group(cfg.group)
    rows = []
    for t in range(cfg.trials):
        rng = cfg.rng(t)
        act = ha.random_unitary_action(g, rng)
        h, m = _density(cfg, g, act)
        x0 = rng.standard_normal(act.dim)
        y, rep = ha.iterate_to_fixed_point(act, h, x0, tol=cfg.tol, max_iters=max(cfg.max_iters, 500))
        oracle = ha.invariant_projection_oracle(act).project(x0)
        M_op, _ = act.averaged_operator(h)
        xs = rng.standard_normal((200, act.dim))
        contr, move = 0.0, 0.0
        for x in xs:
            d = ha.displacement(act, x)
            if d <= 1e-14:
                continue
            ax = M_op @ x
            contr = max(contr, ha.displacement(act, ax) / d)
            move = max(move, float(np.linalg.norm(ax - x)) / (h.radius * d))
        rows.append({"dim": act.dim, "m": m, "support_radius": h.radius, "steps": rep.steps,
                     "oracle_error": float(np.linalg.norm(y - oracle)),
                     "final_displacement": rep.displacements[-1],
                     "max_contraction_ratio": contr, "max_movement_ratio": move,
                     "distance_travelled": rep.distance_travelled, "stated_bound": rep.distance_bound,
                     "corrected_bound": rep.corrected_bound})
    stated_violations = sum(r["distance_travelled"] > r["stated_bound"] * (1 + 1e-9) + 1e-12 for r in rows)
    return {"trials": rows, "stated_bound_violations": stated_violations}, []


def _certify_fixpoint(cfg, r):
    rows = r["trials"]
    return [
        Certificate("oracle_limit", max(number(x["oracle_error"]) for x in rows), 1e-8),
        Certificate("converged", max(number(x["final_displacement"]) for x in rows), cfg.tol),
        Certificate("displacement_contraction", max(number(x["max_contraction_ratio"]) for x in rows), cfg.C0),
        Certificate("movement_bound", max(number(x["max_movement_ratio"]) for x in rows), 1 + 1e-9),
        Certificate("corrected_distance_bound",
                    max(number(x["distance_travelled"]) / max(number(x["corrected_bound"]), 1e-300)
                        for x in rows), 1 + 1e-9),
    ]


# -- banach ---------------------------------------------------------------------------------

def _run_banach(cfg):
    g = build_group(cfg.group)
    act = ha.regular_representation(g)
    space = ba.PNormSpace(act.dim, cfg.p)
    h, m = _density(cfg, g, act)
    v = cfg.rng(0).standard_normal(act.dim)
    rep = ba.banach_iterate(act, h, v, space, n_max=max(cfg.max_iters, 500), tol=cfg.tol)
    proj = ha.invariant_projection_oracle(act).project(v)
    return {"p": cfg.p, "m": m, "differences": rep.differences, "displacement0": rep.displacement0,
            "support_radius": rep.support_radius, "fitted_ratio": rep.fitted_ratio,
            "limit": rep.limit, "v_norm": space.norm(v), "projector_error": space.norm(rep.limit - proj),
            "invariance_residual": rep.invariance_residual}, []


def _certify_banach(cfg, r):
    diffs = [number(d) for d in r["differences"]]
    C, M, d0 = number(r["fitted_ratio"]), number(r["support_radius"]), number(r["displacement0"])
    floor = 1e-13 * max(1.0, number(r["v_norm"]))
    worst = 0.0
    for n, d in enumerate(diffs):
        if d > 1e3 * floor:
            worst = max(worst, d / (M * C ** n * d0))
    return [Certificate("difference_bound", worst, 1 + 1e-9),
            Certificate("contracting", C, 1.0, strict=True),
            Certificate("projector_limit", number(r["projector_error"]), 1e-6)]


# -- barycenters ----------------------------------------------------------------------------

def _near_isometry(rng, dim: int, eta: float):
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    s = np.exp(rng.uniform(-np.log1p(eta), np.log1p(eta), dim))
    U, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return Q @ np.diag(s) @ U.T, rng.standard_normal(dim)


def _run_barycenter(cfg):
    rng = cfg.rng(0)
    eta_max = min(cfg.amplitude, 0.1) if cfg.amplitude > 0 else 0.1
    worst, worst_exact = -np.inf, 0.0
    for _ in range(cfg.trials):
        dim = int(rng.integers(1, 6))
        n = int(rng.integers(1, 8))
        masses = rng.dirichlet(np.ones(n))
        mu = ha.DiscreteMeasure(rng.standard_normal((n, dim)) * rng.uniform(0.1, 10), masses)
        A, c = _near_isometry(rng, dim, rng.uniform(0, eta_max))
        chk = ha.verify_barycenter_stability((A, c), mu)
        worst = max(worst, chk.lhs - chk.bound)
        Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        exact = ha.verify_barycenter_stability((Q, c), mu, eta=0.0)
        worst_exact = max(worst_exact, exact.lhs)
    return {"trials": cfg.trials, "eta_max": eta_max, "worst_excess": worst, "worst_exact_gap": worst_exact}, []


def _certify_barycenter(cfg, r):
    return [Certificate("barycenter_stability", number(r["worst_excess"]), 1e-12),
            Certificate("exact_isometry", number(r["worst_exact_gap"]), 1e-12)]


# -- norms ----------------------------------------------------------------------------------

def _run_norms(cfg):
    rng = cfg.rng(0)
    corpus = standard_corpus(cfg.grid, cfg.band, seed=cfg.seed)
    kmax = min(cfg.k, 4)
    inv_err, sob_viol, ck_viol = 0.0, 0, 0
    for f in corpus:
        for alpha in rng.uniform(0, 2 * np.pi, 2):
            rot = PeriodicFunction.from_callable(lambda t, a=alpha: f(np.mod(t + a, 2 * np.pi)), cfg.grid, cfg.band)
            for k in range(kmax + 1):
                for p in (2.0, 3.0, 4.0):
                    a, b = sobolev_norm(rot, k, p), sobolev_norm(f, k, p)
                    inv_err = max(inv_err, abs(a - b) / max(b, 1e-300))
        for p in (2.0, 3.0, 4.0):
            vals = [sobolev_norm(f, k, p) for k in range(kmax + 1)]
            sob_viol += sum(b < a * (1 - 1e-12) for a, b in zip(vals, vals[1:]))
        cvals = [ck_norm(f, k) for k in range(kmax + 1)]
        ck_viol += sum(b < a * (1 - 1e-12) for a, b in zip(cvals, cvals[1:]))
    return {"corpus_size": len(corpus), "max_k": kmax, "isometry_error": inv_err,
            "sobolev_monotonicity_violations": sob_viol, "ck_monotonicity_violations": ck_viol}, []


def _certify_norms(cfg, r):
    return [Certificate("isometry_invariance", number(r["isometry_error"]), 1e-10),
            Certificate("sobolev_monotone", number(r["sobolev_monotonicity_violations"]), 0.0),
            Certificate("ck_monotone", number(r["ck_monotonicity_violations"]), 0.0)]


# -- composition bounds ---------------------------------------------------------------------

def random_circle_diffeo(rng, N: int, band: int, scale: float = 0.1) -> CircleMap:
    """Rotation composed with a small random trigonometric displacement (derivative > 0)."""
    alpha = rng.uniform(0, 2 * np.pi)
    top = int(rng.integers(1, 5))
    a = rng.standard_normal(top) * scale / np.arange(1, top + 1) ** 2
    b = rng.standard_normal(top) * scale / np.arange(1, top + 1) ** 2
    js = np.arange(1, top + 1)

    def eta(t):
        t = np.asarray(t)[..., None]
        return alpha + np.sum(a * np.sin(js * t) + b * np.cos(js * t), axis=-1)

    return CircleMap.from_displacement(eta, N, band)


def _run_compose(cfg):
    rng = cfg.rng(0)
    worst_block = 0.0
    for _ in range(cfg.trials):
        mats, btype = jc.random_block_matrices(rng)
        chk = jc.block_product_bound(mats, btype)
        worst_block = max(worst_block, chk.lhs / chk.rhs)
    chains = max(1, cfg.trials // 10)
    worst_chain = 0.0
    kmax = min(cfg.k, 5)
    for _ in range(chains):
        n = int(rng.integers(1, 51))
        k = int(rng.integers(1, kmax + 1)) if kmax >= 1 else 0
        maps = [random_circle_diffeo(rng, cfg.grid, cfg.band) for _ in range(n)]
        chk = jc.composition_norm_bound(maps, k)
        worst_chain = max(worst_chain, chk.lhs / chk.rhs)
    return {"block_trials": cfg.trials, "chain_trials": chains,
            "worst_block_ratio": worst_block, "worst_chain_ratio": worst_chain}, []


def _certify_compose(cfg, r):
    return [Certificate("block_product_bound", number(r["worst_block_ratio"]), 1.0 + 1e-12),
            Certificate("composition_bound", number(r["worst_chain_ratio"]), 1.0 + 1e-12)]


# -- interpolation --------------------------------------------------------------------------

def _run_interp(cfg):
    rng = cfg.rng(0)
    top_order = min(6, PeriodicFunction.constant(0.0, cfg.grid, cfg.band).k_max)
    worst = -np.inf
    for _ in range(cfg.trials):
        f = random_trig_polynomial(cfg.grid, int(rng.integers(1, cfg.band // 2 + 1)), rng, cfg.band)
        a, c, b = sorted(rng.choice(top_order + 1, 3, replace=False))
        chk = jc.interpolation_check(f, int(a), int(b), int(c), "spectral")
        if chk.rhs > 0:
            worst = max(worst, chk.lhs / chk.rhs - 1.0)
    single = 0.0
    for j in range(1, 9):
        f = PeriodicFunction.from_modes({j: 1.0}, cfg.grid, cfg.band)
        chk = jc.interpolation_check(f, 0, 4, 2, "spectral")
        single = max(single, abs(chk.lhs / chk.rhs - 1.0))
    return {"trials": cfg.trials, "worst_ratio_excess": worst, "single_frequency_gap": single}, []


def _certify_interp(cfg, r):
    return [Certificate("spectral_interpolation", number(r["worst_ratio_excess"]), 1e-10),
            Certificate("single_frequency_equality", number(r["single_frequency_gap"]), 1e-12)]


# -- rigidity pipelines ---------------------------------------------------------------------

def _instance(cfg, N=None, band=None):
    g = build_group(cfg.group)
    N = N or cfg.grid
    band = band or cfg.band
    rho = re_.reference_action(g, "S1", N, band)
    psi0 = re_.conjugating_map(cfg.amplitude, N, band, cfg.mode)
    rho_p = re_.perturb_by_conjugation(rho, psi0)
    dc = re_.auto_density(g, cfg.density, cfg.C0, "auto" if cfg.m == "auto" else int(cfg.m))
    density = {"base": dc.base, "m": dc.m, "M": dc.M, "D": dc.D, "eps": dc.eps, "C0": dc.C0}
    return g, rho, psi0, rho_p, dc, density


def _run_rigidity(cfg):
    g, rho, psi0, rho_p, dc, density = _instance(cfg)
    rep = re_.run_embedding_pipeline(rho, rho_p, dc.h, NormSpec(cfg.k, cfg.p), tol=cfg.tol,
                                     max_iters=cfg.max_iters, oracle=psi0.inverse(), timing=cfg.timing)
    out = rep.as_dict()
    out["density"] = density
    out["relation_residual"] = rho_p.relation_residual
    out["displacements"] = [row["displacement"] for row in rep.trace]
    return out, rep.trace


def _certify_rigidity(cfg, r):
    d = [number(x) for x in r["displacements"]]
    rows = [{"displacement": x} for x in d]
    floor = 1e3 * np.finfo(float).eps
    increases = sum(b > a * (1 + 1e-9) and b > floor for a, b in zip(d[5:], d[6:]))
    return [
        Certificate("converged", 0.0 if r["converged"] else 1.0, 0.0),
        Certificate("c0_residual", number(r["c0_residual"]), 1e-5),
        Certificate("conjugacy_equation", number(r["conjugation_gap"]), 10 * cfg.tol),
        Certificate("oracle_alignment", number(r["oracle_gap"]), 2e-3),
        Certificate("monotone_displacement", float(increases), 0.0),
        Certificate("geometric_tail", re_.tail_ratio(rows), cfg.C0 + 0.05),
    ]


def _run_metric(cfg):
    g, rho, psi0, rho_p, dc, density = _instance(cfg)
    mr = re_.invariant_metric_recovery(rho_p, dc.h, tol=cfg.tol, max_iters=max(cfg.max_iters, 500),
                                       psi0=psi0, rho=rho)
    trace = [{"iter": i, "displacement": d, "movement": None, "ratio": None, "c0_residual": None,
              "ck_residual": None, "wall_ms": None} for i, d in enumerate(mr.trace)]
    return {"density": density, "iterations": mr.iterations, "residual": mr.residual,
            "oracle_gap": mr.oracle_gap, "naive_oracle_gap": mr.naive_gap,
            "metric_min": float(mr.metric.samples.min()), "metric_coefficients": mr.metric.coefficient_list()}, trace


def _certify_metric(cfg, r):
    return [Certificate("metric_invariance", number(r["residual"]), 1e-6),
            Certificate("metric_oracle", number(r["oracle_gap"]), 2e-3),
            Certificate("metric_positive", -number(r["metric_min"]), 0.0, strict=True)]


def _run_pair(cfg):
    # the comparison embedding run uses the finer standard resolution
    N_emb, band_emb = 2 * cfg.grid, cfg.grid // 2
    g, rho, psi0, rho_p, dc, density = _instance(cfg, N_emb, band_emb)
    rep = re_.run_pair_pipeline(rho, rho_p, dc.h, N=cfg.grid, band=cfg.band, tol=cfg.tol,
                                max_iters=max(cfg.max_iters, 400), oracle=psi0.inverse(), timing=cfg.timing)
    emb = re_.run_embedding_pipeline(rho, rho_p, dc.h, NormSpec(cfg.k, cfg.p), tol=1e-7,
                                     max_iters=300, trace_residuals=False)
    cross, _ = re_.align_rotation(rep.psi, emb.psi)
    out = rep.as_dict()
    out["density"] = density
    out["cross_method_gap"] = cross
    out["embedding_resolution"] = [N_emb, band_emb]
    return out, rep.trace


def _certify_pair(cfg, r):
    ex = r["extras"]
    return [Certificate("fiber_hessian", -number(ex["hessian_min"]), 0.0, strict=True),
            Certificate("pair_residual", number(r["c0_residual"]), 1e-3),
            Certificate("cross_method", number(r["cross_method_gap"]), 5e-3)]


def _run_bootstrap(cfg):
    g, rho, psi0, rho_p, dc, density = _instance(cfg)
    res = re_.bootstrap_regularity(rho, rho_p, dc.h, cfg.schedule, cfg.p, cfg.max_iters)
    out = res.as_dict()
    out["density"] = density
    return out, []


def _certify_bootstrap(cfg, r):
    out = []
    for rd, ratio in zip(r["rounds"], r["ratios"]):
        i = rd["index"]
        out.append(Certificate(f"closeness_round_{i}", number(rd["precondition"]), number(rd["threshold"])))
        out.append(Certificate(f"residual_ratio_round_{i}", number(ratio), 0.5))
    out.append(Certificate("cauchy_increments", 0.0 if r["cauchy"] else 1.0, 0.0))
    return out


def _run_spread(cfg):
    g = build_group(cfg.group)
    res = re_.spreading_sets(g, cfg.subset_size or None)
    ts = sorted(res.per_subset.values())
    return {"points": res.m, "subset_size": res.subset_size, "eta": res.eta, "worst_t": res.worst_t,
            "worst_subset": list(res.worst_subset), "subsets": len(ts), "mean_t": float(np.mean(ts)),
            "kazhdan_epsilon": res.kazhdan_eps, "t_bound": res.t_bound}, []


def _certify_spread(cfg, r):
    return [Certificate("spreading", number(r["worst_t"]), 1.0, strict=True)]


RUNNERS = {k: (globals()[f"_run_{k}"], globals()[f"_certify_{k}"]) for k in
           ("gap", "fixpoint", "banach", "barycenter", "norms", "compose", "interp",
            "rigidity", "metric", "pair", "bootstrap", "spread")}

HEADLINE = {"gap": "contraction_factor", "fixpoint": "stated_bound_violations", "banach": "fitted_ratio",
            "barycenter": "worst_excess", "norms": "isometry_error", "compose": "worst_block_ratio",
            "interp": "worst_ratio_excess", "rigidity": "c0_residual", "metric": "residual",
            "pair": "c0_residual", "bootstrap": "ratios", "spread": "worst_t"}


def certify(cfg: ExperimentConfig, result: dict) -> list[Certificate]:
    return RUNNERS[cfg.kind][1](cfg, result)


def _now(enabled: bool) -> str | None:
    return datetime.now(timezone.utc).isoformat() if enabled else None


def run(cfg: ExperimentConfig) -> RunRecord:
    """Run one experiment; domain errors are recorded on the record rather than raised."""
    started = _now(cfg.timing)
    t0 = time.perf_counter()
    runner, _ = RUNNERS[cfg.kind]
    error = None
    trace: list[dict] = []
    try:
        result, trace = runner(cfg)
        result = jsonable(result)
        certs = certify(cfg, result)
    except BootstrapStalled as exc:
        result, certs, error = {"stalled_round": exc.round_index}, [], str(exc)
    except LabError as exc:
        result, certs, error = {}, [], f"{type(exc).__name__}: {exc}"
    elapsed = (time.perf_counter() - t0) * 1e3 if cfg.timing else None
    return RunRecord(cfg.as_dict(), cfg.hash(), versions(), result, certs, elapsed, started,
                     _now(cfg.timing), error, trace)


TRACE_COLUMNS = re_.TRACE_COLUMNS


def write_trace_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in TRACE_COLUMNS})


def write_record(record: RunRecord, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(record.to_json())


# -- suites -------------------------------------------------------------------------------------

def expand_matrix(data: dict) -> list[dict]:
    """Cells from ``[base]`` values crossed with ``[matrix]`` lists, plus explicit ``[[cell]]`` tables."""
    base = config_values_from_toml(data.get("base", {}))
    cells = []
    matrix = data.get("matrix", {})
    if matrix:
        keys = sorted(matrix)
        for key in keys:
            if not isinstance(matrix[key], list) or not matrix[key]:
                raise ConfigError(f"matrix.{key}: must be a nonempty list")
        for combo in itertools.product(*(matrix[k] for k in keys)):
            cells.append({**base, **dict(zip(keys, combo))})
    for extra in data.get("cell", []):
        cells.append({**base, **config_values_from_toml(extra)})
    if not cells:
        raise ConfigError("suite matrix is empty: give [matrix] lists or [[cell]] tables")
    return cells


def worker_count(n_cells: int) -> int:
    cap = os.environ.get(WORKERS_ENV)
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV}: must be a positive integer") from None
    return max(1, min(limit, n_cells))


def _run_cell(values: dict) -> dict:
    cfg = make_config(values)
    return run(cfg).to_dict()


def run_suite(path: str) -> tuple[dict, list[list]]:
    data = load_toml(path)
    meta = data.get("suite", {})
    cells = expand_matrix(data)
    configs = [make_config(c) for c in cells]  # validate everything before computing anything
    values = [c.as_dict() for c in configs]
    workers = worker_count(len(values))
    if workers == 1:
        records = [_run_cell(v) for v in values]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell, values))
    varying = sorted(data.get("matrix", {}))
    header = ["cell", "kind", "group", *[k for k in varying if k not in ("kind", "group")],
              "passed", "first_failure", "headline", "value"]
    rows = [header]
    for i, (cfg, rec) in enumerate(zip(configs, records)):
        first = rec["error"] or next((c["name"] for c in rec["certificates"] if not c["pass"]), "")
        key = HEADLINE[cfg.kind]
        val = rec["result"].get(key, "")
        if isinstance(val, list):
            val = max((number(v) for v in val), default="")
        rows.append([i, cfg.kind, cfg.group, *[rec["config"][k] for k in header[3:-4]],
                     rec["passed"], first, key, val])
    passed = sum(r["passed"] for r in records)
    report = {"schema_version": records[0]["schema_version"], "suite": meta.get("name", os.path.basename(path)),
              "cells": records, "summary": {"total": len(records), "passed": passed,
                                            "failed": len(records) - passed}}
    return report, rows


def suite_json(report: dict) -> str:
    return canonical(report) + "\n"
