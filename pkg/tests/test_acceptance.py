"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line."""
import json
import time

import numpy as np
import pytest

from rigidity_lab import banach_actions as ba
from rigidity_lab import hilbert_actions as ha
from rigidity_lab import jet_calculus as jc
from rigidity_lab import rigidity_engine as re_
from rigidity_lab.errors import BootstrapStalled
from rigidity_lab.experiments.cli import main
from rigidity_lab.experiments.runner import random_circle_diffeo
from rigidity_lab.function_spaces import NormSpec, PeriodicFunction, random_trig_polynomial
from rigidity_lab.groups import build_group, convolve_power, cyclic, named_density

ACTION_GROUPS = ("symmetric:3", "symmetric:4", "dihedral:8", "quaternion")
BASE_DENSITY = "lazy-k2:0.7"
C0 = 0.5


def _density_for(act, group):
    f = named_density(group, BASE_DENSITY)
    D = ha.contraction_factor(act, f)
    eps = ha.kazhdan_epsilon(act, restarts=8).value
    m = ha.choose_m(D, C0, eps)
    h, M = convolve_power(f, m)
    return h, M


def _corpus_actions(per_group: int, seed: int):
    rng = np.random.default_rng(seed)
    for spec in ACTION_GROUPS:
        g = build_group(spec)
        for _ in range(per_group):
            yield spec, g, ha.random_unitary_action(g, rng, max_dim=48), rng


def _batch_displacement(act, X):
    """K-displacement of every row of X (vectorised form of ha.displacement)."""
    out = np.zeros(len(X))
    for k in act.group.generators:
        out = np.maximum(out, np.linalg.norm(X @ act.A[k].T + act.b[k] - X, axis=1))
    return out


def test_criterion_01_contraction_analytics(criterion):
    t0 = time.perf_counter()
    g = cyclic(3)
    rep = ha.rotation_representation(g)
    D3 = ha.contraction_factor(rep, named_density(g, "uniform-k"))
    worst = 0.0
    for n in range(3, 65):
        gn = cyclic(n)
        D = ha.contraction_factor(ha.regular_representation(gn), named_density(gn, "lazy-k"))
        worst = max(worst, abs(D - (1 + 2 * np.cos(2 * np.pi / n)) / 3))
    elapsed = time.perf_counter() - t0
    ok = abs(D3 - 0.5) <= 1e-12 and worst <= 1e-10 and elapsed < 1.0
    criterion("criterion 1 (contraction analytics)", ok,
              f"|D - 0.5| = {abs(D3 - 0.5):.2e}, sweep error {worst:.2e}, {elapsed:.2f} s")


def test_criterion_02_fixed_point_oracle(criterion):
    worst_err, worst_time, worst_steps, count = 0.0, 0.0, 0, 0
    for spec, g, act, rng in _corpus_actions(20, 2):
        t0 = time.perf_counter()
        h, _ = _density_for(act, g)
        x0 = rng.standard_normal(act.dim)
        y, rep = ha.iterate_to_fixed_point(act, h, x0, tol=1e-12, max_iters=500)
        elapsed = time.perf_counter() - t0
        err = float(np.linalg.norm(y - ha.invariant_projection_oracle(act).project(x0)))
        worst_err, worst_time = max(worst_err, err), max(worst_time, elapsed)
        worst_steps = max(worst_steps, rep.steps)
        count += 1
    ok = worst_err <= 1e-8 and worst_steps <= 500 and worst_time < 1.0
    criterion("criterion 2 (fixed-point oracle)", ok,
              f"{count} actions, max error {worst_err:.2e}, max steps {worst_steps}, slowest {worst_time:.2f} s")


def _criterion_3_runs():
    """Per corpus action: contraction/movement violations over 1000 points, then one full iteration."""
    rows = []
    for spec, g, act, rng in _corpus_actions(20, 2):
        h, M = _density_for(act, g)
        S, c = act.averaged_operator(h)
        X = rng.standard_normal((1000, act.dim))
        d = _batch_displacement(act, X)
        AX = X @ S.T + c
        dA = _batch_displacement(act, AX)
        move = np.linalg.norm(AX - X, axis=1)
        live = d > 1e-12
        contr_viol = int(np.sum(dA[live] > C0 * d[live] * (1 + 1e-12)))
        move_viol = int(np.sum(move[live] > M * d[live] * (1 + 1e-12)))
        x0 = rng.standard_normal(act.dim)
        _, rep = ha.iterate_to_fixed_point(act, h, x0, tol=1e-12)
        rows.append({"spec": spec, "contr": contr_viol, "move": move_viol,
                     "travelled": rep.distance_travelled, "stated": rep.distance_bound,
                     "corrected": rep.corrected_bound})
    return rows


@pytest.fixture(scope="module")
def criterion_3_rows():
    return _criterion_3_runs()


def test_criterion_03_contraction_and_movement(criterion, criterion_3_rows):
    rows = criterion_3_rows
    contr = sum(r["contr"] for r in rows)
    move = sum(r["move"] for r in rows)
    corrected = sum(r["travelled"] > r["corrected"] * (1 + 1e-9) + 1e-12 for r in rows)
    criterion("criterion 3a (displacement contraction, movement bound)", contr == 0 and move == 0,
              f"{len(rows)} actions x 1000 points: {contr} contraction and {move} movement violations; "
              f"corrected M/(1-C) distance bound violated {corrected} times")


@pytest.mark.xfail(strict=True, reason="the stated MC/(1-C) distance bound omits the first step; see the ledger")
def test_criterion_03_stated_distance_bound(criterion, criterion_3_rows):
    rows = criterion_3_rows
    bad = [r for r in rows if r["travelled"] > r["stated"] * (1 + 1e-9) + 1e-12]
    worst = max(rows, key=lambda r: r["travelled"] - r["stated"])
    criterion("criterion 3b (stated MC/(1-C) distance bound)", not bad,
              f"{len(bad)}/{len(rows)} violations, worst {worst['spec']}: "
              f"travelled {worst['travelled']:.3g} vs bound {worst['stated']:.3g} (expected failure, ledgered)")


def test_criterion_04_almost_isometric_robustness(criterion):
    worst_disp, worst_err, worst_T = 0.0, 0.0, 0.0
    count = 0
    for spec, g, act, rng in _corpus_actions(3, 4):
        E = rng.standard_normal((act.dim, act.dim))
        T = np.eye(act.dim) + 0.01 * E / np.linalg.norm(E, 2)
        worst_T = max(worst_T, float(np.linalg.norm(T - np.eye(act.dim), 2)))
        conj = ha.make_almost_isometric(act, T)
        h, _ = _density_for(act, g)
        x0 = rng.standard_normal(act.dim)
        y, rep = ha.iterate_to_fixed_point(conj, h, x0, tol=1e-10)
        P = ha.invariant_projection_oracle(act).projector
        worst_disp = max(worst_disp, ha.displacement(conj, y))
        worst_err = max(worst_err, float(np.linalg.norm(y - T @ P @ np.linalg.solve(T, x0))))
        count += 1
    ok = worst_T <= 0.01 + 1e-15 and worst_disp <= 1e-8 and worst_err <= 1e-6
    criterion("criterion 4 (almost-isometric robustness)", ok,
              f"{count} actions, max |T-I| {worst_T:.4f}, max displacement {worst_disp:.2e}, "
              f"max limit error {worst_err:.2e}")


def test_criterion_05_banach_contraction(criterion):
    rng = np.random.default_rng(5)
    worst_C, worst_proj, worst_cross, bound_fail = 0.0, 0.0, 0.0, 0
    for spec in ("symmetric:3", "dihedral:4", "cyclic:5", "quaternion"):
        g = build_group(spec)
        act = ha.regular_representation(g)
        h = named_density(g, BASE_DENSITY)
        proj = ha.invariant_projection_oracle(act)
        for _ in range(5):
            v = rng.standard_normal(act.dim)
            limits = []
            for p in (1.5, 3.0, 4.0):
                space = ba.PNormSpace(act.dim, p)
                rep = ba.banach_iterate(act, h, v, space)
                bound_fail += not rep.bound_holds
                worst_C = max(worst_C, rep.fitted_ratio)
                worst_proj = max(worst_proj, space.norm(rep.limit - proj.project(v)))
                limits.append(rep.limit)
            worst_cross = max(worst_cross, max(np.abs(lim - limits[0]).max() for lim in limits))
    ok = bound_fail == 0 and worst_C < 1 and worst_proj <= 1e-6 and worst_cross <= 1e-8
    criterion("criterion 5 (l^p contraction)", ok,
              f"bound failures {bound_fail}, max fitted C {worst_C:.3f}, projector error {worst_proj:.2e}, "
              f"cross-p gap {worst_cross:.2e}")


def _near_isometry(rng, dim, eta):
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    U, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    s = np.exp(rng.uniform(-np.log1p(eta), np.log1p(eta), dim))
    return Q @ np.diag(s) @ U.T


def test_criterion_06_barycenter_stability(criterion):
    rng = np.random.default_rng(6)
    worst_excess, worst_exact, violations = -np.inf, 0.0, 0
    for _ in range(10_000):
        dim, n = int(rng.integers(1, 6)), int(rng.integers(1, 8))
        mu = ha.DiscreteMeasure(rng.standard_normal((n, dim)) * rng.uniform(0.1, 10), rng.dirichlet(np.ones(n)))
        c = rng.standard_normal(dim)
        chk = ha.verify_barycenter_stability((_near_isometry(rng, dim, rng.uniform(0, 0.1)), c), mu)
        excess = chk.lhs - chk.bound
        violations += excess > 1e-12
        worst_excess = max(worst_excess, excess)
        Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        worst_exact = max(worst_exact, ha.verify_barycenter_stability((Q, c), mu, eta=0.0).lhs)
    ok = violations == 0 and worst_exact <= 1e-12
    criterion("criterion 6 (barycenter stability)", ok,
              f"10^4 trials, {violations} violations, worst lhs - bound {worst_excess:.2e}, "
              f"exact isometry gap {worst_exact:.2e}")


def test_criterion_07_spectral_interpolation(criterion):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        f = random_trig_polynomial(128, int(rng.integers(1, 17)), rng, 32)
        a, c, b = sorted(rng.choice(7, 3, replace=False))
        chk = jc.interpolation_check(f, int(a), int(b), int(c), "spectral")
        worst = max(worst, chk.lhs / chk.rhs - 1.0)
    single = 0.0
    for j in range(1, 17):
        chk = jc.interpolation_check(PeriodicFunction.from_modes({j: 1.0}, 128, 32), 0, 4, 2, "spectral")
        single = max(single, abs(chk.lhs / chk.rhs - 1.0))
    corpus = [random_trig_polynomial(128, 32, rng, 32) for _ in range(200)]
    B1 = jc.fitted_interpolation_constant(corpus, 1, 5, 3, "ck")
    B2 = jc.fitted_interpolation_constant([f.resample(256) for f in corpus], 1, 5, 3, "ck")
    drift = abs(B2 - B1) / B1
    ok = worst <= 1e-10 and single <= 1e-12 and drift <= 0.1
    criterion("criterion 7 (interpolation)", ok,
              f"B=1 excess {worst:.2e}, single-frequency gap {single:.2e}, "
              f"C^k constant {B1:.4f} -> {B2:.4f} ({100 * drift:.2f}% drift)")


def test_criterion_08_composition_bounds(criterion):
    rng = np.random.default_rng(8)
    block_viol, worst_block = 0, 0.0
    for _ in range(10_000):
        mats, btype = jc.random_block_matrices(rng, N_max=6, j_max=40)
        chk = jc.block_product_bound(mats, btype)
        block_viol += not chk.passed
        worst_block = max(worst_block, chk.lhs / chk.rhs)
    chain_viol, worst_chain = 0, 0.0
    for _ in range(100):
        n, k = int(rng.integers(1, 51)), int(rng.integers(1, 6))
        maps = [random_circle_diffeo(rng, 64, 16) for _ in range(n)]
        chk = jc.composition_norm_bound(maps, k)
        chain_viol += not chk.passed
        worst_chain = max(worst_chain, chk.lhs / chk.rhs)
    ok = block_viol == 0 and chain_viol == 0
    criterion("criterion 8 (composition bounds)", ok,
              f"{block_viol} block and {chain_viol} chain violations, worst ratios "
              f"{worst_block:.3g} and {worst_chain:.3g}")


def _instance(spec, amplitude=0.05, N=512, band=128):
    g = build_group(spec)
    rho = re_.reference_action(g, "S1", N, band)
    psi0 = re_.conjugating_map(amplitude, N, band)
    return g, rho, psi0, re_.perturb_by_conjugation(rho, psi0)


def test_criterion_09_rigidity_recovery(criterion):
    t0 = time.perf_counter()
    parts = []
    ok = True
    for spec in ("cyclic:4", "dihedral:4"):
        g, rho, psi0, rho_p = _instance(spec)
        dc = re_.auto_density(g)
        rep = re_.run_embedding_pipeline(rho, rho_p, dc.h, NormSpec(3, 2.0), tol=1e-7, max_iters=300,
                                         oracle=psi0.inverse())
        ok &= rep.converged and rep.residuals[0] <= 1e-5 and rep.iterations <= 300 and rep.oracle_gap <= 2e-3
        parts.append(f"{spec}: C^0 residual {rep.residuals[0]:.2e} in {rep.iterations} iterations, "
                     f"oracle gap {rep.oracle_gap:.2e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 10.0
    criterion("criterion 9 (rigidity recovery)", bool(ok), "; ".join(parts) + f"; {elapsed:.1f} s")


def test_criterion_10_invariant_metric(criterion):
    parts, ok = [], True
    for spec in ("cyclic:4", "dihedral:4"):
        g, rho, psi0, rho_p = _instance(spec)
        mr = re_.invariant_metric_recovery(rho_p, re_.auto_density(g).h, psi0=psi0, rho=rho)
        ok &= mr.residual <= 1e-6 and mr.oracle_gap <= 2e-3
        parts.append(f"{spec}: residual {mr.residual:.2e}, oracle gap {mr.oracle_gap:.2e}")
    criterion("criterion 10 (invariant metric)", bool(ok), "; ".join(parts))


def test_criterion_11_pair_method(criterion):
    parts, ok = [], True
    for spec in ("cyclic:4", "dihedral:4"):
        g, rho, psi0, rho_p = _instance(spec)
        dc = re_.auto_density(g)
        small = re_.reference_action(g, "S1", 256, 96)
        small_psi0 = re_.conjugating_map(0.05, 256, 96)
        small_p = re_.perturb_by_conjugation(small, small_psi0)
        pair = re_.run_pair_pipeline(small, small_p, dc.h, N=256, oracle=small_psi0.inverse())
        emb = re_.run_embedding_pipeline(rho, rho_p, dc.h, NormSpec(3, 2.0), tol=1e-7, trace_residuals=False)
        cross, _ = re_.align_rotation(pair.psi, emb.psi)
        hess = pair.extras["hessian_min"]
        ok &= hess > 0 and pair.residuals[0] <= 1e-3 and cross <= 5e-3
        parts.append(f"{spec}: min Hessian {hess:.3g}, residual {pair.residuals[0]:.2e}, cross gap {cross:.2e}")
    criterion("criterion 11 (pair method)", bool(ok), "; ".join(parts))


def test_criterion_12_bootstrap(criterion):
    g, rho, psi0, rho_p = _instance("cyclic:4")
    h = re_.auto_density(g).h
    res = re_.bootstrap_regularity(rho, rho_p, h, (3, 4, 5))
    ratios = res.ratios()
    t0 = time.perf_counter()
    _, _, _, rho_big = _instance("cyclic:4", amplitude=0.15)
    stalled = None
    try:
        re_.bootstrap_regularity(rho, rho_big, h, (3, 4, 5))
    except BootstrapStalled as exc:
        stalled = exc
    fail_time = time.perf_counter() - t0
    ok = (all(r <= 0.5 for r in ratios) and stalled is not None and stalled.round_index == 1
          and "bootstrap stalled at round 1" in str(stalled) and fail_time < 5.0)
    criterion("criterion 12 (bootstrap)", ok,
              f"ratios {', '.join(f'{r:.3f}' for r in ratios)}; amplitude 0.15: "
              f"{stalled if stalled else 'no error'} after {fail_time:.2f} s")


def test_criterion_13_spreading_sets(criterion):
    parts, ok = [], True
    for spec in ("symmetric:3", "alternating:4"):
        g = build_group(spec)
        sizes = [s for s in range(1, g.elements.shape[1]) if 0 < 1 - s / g.elements.shape[1] < 0.5]
        for s in sizes:
            a, b = re_.spreading_sets(g, s), re_.spreading_sets(g, s)
            ok &= a.worst_t < 1 and a.per_subset == b.per_subset and a.worst_t == b.worst_t
            parts.append(f"{spec} |S|={s}: worst t {a.worst_t:.3f} over {len(a.per_subset)} subsets")
    criterion("criterion 13 (spreading sets)", bool(ok), "; ".join(parts))


def test_criterion_14_suite_determinism(criterion, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("RIGIDITY_LAB_WORKERS", "2")
    matrix = tmp_path / "det.toml"
    matrix.write_text(
        '[suite]\nname = "determinism"\n\n[base]\nseed = 11\n\n'
        '[matrix]\nkind = ["gap", "fixpoint", "barycenter", "spread"]\n\n'
        '[[cell]]\nkind = "rigidity"\ngrid = 128\nband = 32\n'
    )
    out = tmp_path / "report.json"
    blobs, codes = [], []
    for _ in range(2):
        codes.append(main(["suite", str(matrix), "--out", str(out)]))
        blobs.append(out.read_bytes())
    capsys.readouterr()
    cells = len(json.loads(blobs[0])["cells"])
    ok = blobs[0] == blobs[1] and codes == [0, 0]
    criterion("criterion 14 (determinism)", ok,
              f"{cells} cells, {len(blobs[0])} bytes, identical={blobs[0] == blobs[1]}, exit codes {codes}")
