"""Local rigidity experiments for finite groups acting on S^1 (and T^2).

The reference action is by rotations and reflections.  Perturbed actions
are produced by conjugating with a known diffeomorphism, which gives a
ground-truth conjugacy to compare against.  Two recovery methods are
implemented: averaging an equivariant embedding into R^2 and averaging a
distance-like function on S^1 x S^1.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import BootstrapStalled, LabError, PipelineError
from .function_spaces import (TWO_PI, CircleMap, NormSpec, PeriodicFunction, ck_norm,
                              circle_map_distance, grid, interpolation_matrix, rebanded,
                              sobolev_norm, wrap_angle)
from .groups import FiniteGroup, GroupDensity, convolve_power, named_density
from .hilbert_actions import (choose_m, contraction_factor, kazhdan_epsilon,
                              permutation_representation, regular_representation, rotation_angle)

TUBE_SLACK = 0.5
STALL_WINDOW = 10


# -- actions --------------------------------------------------------------------------

@dataclass
class GeometricAction:
    """One circle map per group element (a pair of them per element on T^2)."""

    group: FiniteGroup
    space: str
    maps: dict
    isometric: bool
    ck_distance: dict = field(default_factory=dict)
    relation_residual: float = 0.0

    @property
    def N(self) -> int:
        first = self.maps[self.group.identity]
        return (first[0] if self.space == "T2" else first).N

    @property
    def band(self) -> int:
        first = self.maps[self.group.identity]
        return (first[0] if self.space == "T2" else first).band

    def check_relations(self, points: int = 64) -> float:
        """max over pairs of the C^0 gap between map(γη) and map(γ)∘map(η), pointwise."""
        th = grid(points)
        g = self.group
        worst = 0.0
        for a in range(g.order):
            for b in range(g.order):
                ab = int(g.mul[a, b])
                if self.space == "S1":
                    pairs = [(self.maps[ab], self.maps[a], self.maps[b])]
                else:
                    pairs = list(zip(self.maps[ab], self.maps[a], self.maps[b]))
                for fab, fa, fb in pairs:
                    gap = wrap_angle(fab(th) - fa(np.mod(fb(th), TWO_PI)))
                    worst = max(worst, float(np.abs(gap).max()))
        self.relation_residual = worst
        return worst


def _isometry_for(group: FiniteGroup, a: int, N: int, band: int) -> CircleMap:
    ang, s = rotation_angle(group, a)
    return CircleMap.isometry(ang, s, N, band)


def reference_action(group: FiniteGroup, space: str = "S1", N: int = 512, band: int = 128) -> GeometricAction:
    """Rotations (and reflections for dihedral groups); products act factorwise on T^2."""
    if space == "S1":
        if group.kind not in ("cyclic", "dihedral"):
            raise LabError("no standard isometric action registered")
        maps = {a: _isometry_for(group, a, N, band) for a in range(group.order)}
    elif space == "T2":
        if group.kind != "product":
            raise LabError("no standard isometric action registered")
        g1, g2 = group.params
        if g1.kind not in ("cyclic", "dihedral") or g2.kind not in ("cyclic", "dihedral"):
            raise LabError("no standard isometric action registered")
        maps = {a: (_isometry_for(g1, int(group.elements[a, 0]), N, band),
                    _isometry_for(g2, int(group.elements[a, 1]), N, band)) for a in range(group.order)}
    else:
        raise LabError(f"unknown space {space!r}")
    act = GeometricAction(group, space, maps, True, {k: 0.0 for k in group.generators})
    act.check_relations()
    return act


def conjugating_map(amplitude: float, N: int, band: int, mode: int = 2) -> CircleMap:
    """ψ0(θ) = θ + A sin(mode θ)."""
    return CircleMap.from_displacement(lambda t: amplitude * np.sin(mode * t), N, band)


def perturb_by_conjugation(rho: GeometricAction, psi: CircleMap, k: int = 3) -> GeometricAction:
    """ρ′(γ) = ψ∘ρ(γ)∘ψ⁻¹ for every element."""
    if rho.space != "S1":
        raise LabError("conjugation perturbations are implemented on S^1")
    if psi.orientation != 1:
        raise LabError("conjugating map must preserve orientation")
    psi_inv = psi.inverse()
    maps = {a: psi.compose(m.compose(psi_inv)) for a, m in rho.maps.items()}
    ck = {kk: circle_map_distance(maps[kk], rho.maps[kk], k) for kk in rho.group.generators}
    out = GeometricAction(rho.group, "S1", maps, psi.is_isometry(), ck)
    out.check_relations()
    return out


# -- embeddings ------------------------------------------------------------------------

@dataclass
class EquivariantEmbedding:
    n: int
    sigma: dict
    s: PeriodicFunction
    tube_radius: float
    equivariance_residual: float


def _sigma_matrix(group: FiniteGroup, a: int) -> np.ndarray:
    ang, s = rotation_angle(group, a)
    c, si = np.cos(ang), np.sin(ang)
    return np.array([[c, -si], [si, c]]) @ np.diag([1.0, float(s)])


def standard_embedding(rho: GeometricAction) -> EquivariantEmbedding:
    """s(θ) = (cos θ, sin θ) into R^2 (R^4 on T^2) with σ the matching orthogonal matrices."""
    if not rho.isometric:
        raise LabError("embedding requires the reference isometric action")
    g = rho.group
    N, band = rho.N, rho.band
    th = grid(N)
    if rho.space == "S1":
        sigma = {a: _sigma_matrix(g, a) for a in range(g.order)}
        s = PeriodicFunction(np.stack([np.cos(th), np.sin(th)], axis=-1), band)
        res = 0.0
        for a in range(g.order):
            img = rho.maps[a](th)
            lhs = np.stack([np.cos(img), np.sin(img)], axis=-1)
            res = max(res, float(np.abs(lhs - s.samples @ sigma[a].T).max()))
        return EquivariantEmbedding(2, sigma, s, 1.0, res)
    g1, g2 = g.params
    sigma = {}
    for a in range(g.order):
        S = np.zeros((4, 4))
        S[:2, :2] = _sigma_matrix(g1, int(g.elements[a, 0]))
        S[2:, 2:] = _sigma_matrix(g2, int(g.elements[a, 1]))
        sigma[a] = S
    t1, t2 = np.meshgrid(th, th, indexing="ij")
    vals = np.stack([np.cos(t1), np.sin(t1), np.cos(t2), np.sin(t2)], axis=-1)
    s = PeriodicFunction(vals, band, "T2")
    res = 0.0
    for a in range(g.order):
        m1, m2 = rho.maps[a]
        i1, i2 = m1(t1), m2(t2)
        lhs = np.stack([np.cos(i1), np.sin(i1), np.cos(i2), np.sin(i2)], axis=-1)
        res = max(res, float(np.abs(lhs - vals @ sigma[a].T).max()))
    return EquivariantEmbedding(4, sigma, s, 1.0, res)


def tube_projection(v: np.ndarray) -> np.ndarray:
    """Closest point on the unit circle (normalisation)."""
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


# -- density selection -------------------------------------------------------------------

@dataclass
class DensityChoice:
    h: GroupDensity
    base: str
    m: int
    M: int
    D: float
    eps: float
    C0: float


def auto_density(group: FiniteGroup, base: str = "lazy-k2:0.7", C0: float = 0.5,
                 m: int | str = "auto") -> DensityChoice:
    """h = f^{*m} with m from the spectral gap of the regular representation."""
    f = named_density(group, base)
    reg = regular_representation(group)
    D = contraction_factor(reg, f)
    eps = kazhdan_epsilon(reg, restarts=16).value
    if m == "auto":
        m = choose_m(D, C0, eps)
    h, M = convolve_power(f, int(m))
    return DensityChoice(h, base, int(m), M, float(D), float(eps), C0)


# -- conjugacy diagnostics ----------------------------------------------------------------

def conjugacy_residuals(psi: CircleMap, rho: GeometricAction, rho_p: GeometricAction, k: int) -> list[float]:
    """[max_{γ∈K} ‖ψ∘ρ′(γ) − ρ(γ)∘ψ‖_{C^j} for j = 0..k]."""
    out = np.zeros(k + 1)
    for g in rho.group.non_identity_generators():
        a, b = rho_p.maps[g], rho.maps[g]

        def diff(theta, a=a, b=b):
            lhs = psi(np.mod(a(theta), TWO_PI)) + TWO_PI * np.floor(a(theta) / TWO_PI)
            rhs = b(psi(theta))
            d = lhs - rhs
            return d - TWO_PI * np.round(np.mean(d) / TWO_PI)

        try:
            f = rebanded(diff, psi.N, psi.band, band_cap=max(psi.band, a.band) * 2)
        except Exception:
            f = PeriodicFunction(diff(grid(psi.N)), psi.band)
        for j in range(k + 1):
            out[j] = max(out[j], ck_norm(f, j, refine=(j == 0)))
    return [float(x) for x in out]


def conjugation_gap(psi: CircleMap, rho: GeometricAction, rho_p: GeometricAction, points: int = 1024) -> float:
    """max_{γ∈K} sup_θ |ψ∘ρ′(γ)∘ψ⁻¹(θ) − ρ(γ)(θ)| (mod 2π)."""
    th = grid(points)
    psi_inv = psi.inverse()
    worst = 0.0
    for g in rho.group.non_identity_generators():
        y = np.mod(psi_inv(th), TWO_PI)
        z = psi(np.mod(rho_p.maps[g](y), TWO_PI))
        worst = max(worst, float(np.abs(wrap_angle(z - rho.maps[g](th))).max()))
    return worst


def align_rotation(psi: CircleMap, target: CircleMap, coarse: int = 4096, points: int = 1024) -> tuple[float, float]:
    """min over rotations r_α of sup |ψ − r_α∘target| (grid search, then golden section)."""
    th = grid(points)
    base = wrap_angle(psi(th) - target(th))

    def gap(alpha):
        return float(np.abs(wrap_angle(base - alpha)).max())

    alphas = TWO_PI * np.arange(coarse) / coarse - np.pi
    vals = np.array([gap(a) for a in alphas])
    i = int(np.argmin(vals))
    step = TWO_PI / coarse
    try:
        res = optimize.minimize_scalar(gap, bracket=(alphas[i] - step, alphas[i], alphas[i] + step),
                                       method="golden", tol=1e-12)
        best_a, best = float(res.x), float(res.fun)
    except ValueError:
        best_a, best = float(alphas[i]), float(vals[i])
    if vals[i] < best:
        best_a, best = float(alphas[i]), float(vals[i])
    return best, float(wrap_angle(best_a))


# -- reports ------------------------------------------------------------------------------

TRACE_COLUMNS = ("iter", "displacement", "movement", "ratio", "c0_residual", "ck_residual", "wall_ms")


@dataclass
class RigidityReport:
    method: str
    trace: list[dict]
    psi: CircleMap
    residuals: list[float]
    conjugation_gap: float
    distance_to_identity: float
    iterations: int
    converged: bool
    oracle_gap: float | None = None
    oracle_rotation: float | None = None
    density: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    wall_ms: float | None = None

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "iterations": self.iterations,
            "converged": self.converged,
            "residuals": self.residuals,
            "c0_residual": self.residuals[0],
            "ck_residual": self.residuals[-1],
            "conjugation_gap": self.conjugation_gap,
            "distance_to_identity": self.distance_to_identity,
            "oracle_gap": self.oracle_gap,
            "oracle_rotation": self.oracle_rotation,
            "density": self.density,
            "psi_coefficients": self.psi.eta.coefficient_list(),
            "extras": self.extras,
        }


def _band_projector(N: int, band: int) -> np.ndarray:
    F = np.fft.fft(np.eye(N), axis=0)
    F[np.abs(np.fft.fftfreq(N, 1.0 / N)) > band] = 0
    return np.ascontiguousarray(np.real(np.fft.ifft(F, axis=0)))


def _pullback_operator(N: int, band: int, phi: CircleMap, P: np.ndarray) -> np.ndarray:
    """Matrix of f ↦ band-projected f∘φ on grid samples."""
    E = interpolation_matrix(N, band, np.mod(phi(grid(N)), TWO_PI))
    return P @ E


class _Contraction:
    """Tracks per-step ratios and raises when averaging stops contracting."""

    def __init__(self, floor: float = 0.0, window: int = STALL_WINDOW):
        self.window = window
        self.floor = floor
        self.streak = 0
        self.plateau = False

    def update(self, prev: float, cur: float) -> float:
        ratio = cur / prev if prev > 0 else 0.0
        if ratio >= 1.0 - 1e-3:
            self.streak += 1
        else:
            self.streak = 0
        if self.streak >= self.window:
            if cur <= self.floor:
                self.plateau = True
            else:
                raise PipelineError("averaging failed to contract")
        return ratio


def _psi_from_section(values: np.ndarray, band: int) -> CircleMap:
    lift = np.unwrap(np.arctan2(values[:, 1], values[:, 0]))
    lift = lift - TWO_PI * np.round(lift[0] / TWO_PI)
    return CircleMap.from_lift_samples(lift, 1, band, check=False)


def run_embedding_pipeline(rho: GeometricAction, rho_p: GeometricAction, h: GroupDensity,
                           spec: NormSpec = NormSpec(3, 2.0), tol: float = 1e-7, max_iters: int = 300,
                           oracle: CircleMap | None = None, residual_order: int | None = None,
                           stop_residual: float | None = None, timing: bool = False,
                           trace_residuals: bool = True) -> RigidityReport:
    """Average the standard embedding under ρ′ and project back to the circle.

    ``stop_residual`` (used by the bootstrap) stops as soon as the C^k residual of
    the current candidate drops below it.
    """
    if rho.space != "S1":
        raise LabError("the embedding pipeline is implemented on S^1")
    t_start = time.perf_counter()
    emb = standard_embedding(rho)
    N, band = rho_p.N, rho_p.band
    P = _band_projector(N, band)
    supp = [int(a) for a in h.support]
    ops = {a: _pullback_operator(N, band, rho_p.maps[a], P) for a in set(supp) | set(rho.group.generators)}
    k = int(spec.k)
    p = 2.0 if spec.is_sup else float(spec.p)
    kres = (k - 1) if residual_order is None else residual_order
    K = rho.group.non_identity_generators()

    def act(a, s):
        return (ops[a] @ s) @ emb.sigma[a]

    def displacement(s):
        if not K:
            return 0.0
        return max(sobolev_norm(PeriodicFunction(act(g, s) - s, band), k, p) for g in K)

    s = np.array(emb.s.samples)
    disp = displacement(s)
    trace = []
    # roundoff in the samples is amplified by about band^k in the L^{p,k} displacement
    noise = 1e3 * np.finfo(float).eps * float(band) ** k
    tracker = _Contraction(floor=max(10 * tol, 1e-6, noise))
    n = 0
    psi = _psi_from_section(s, band)
    residuals = conjugacy_residuals(psi, rho, rho_p, kres) if trace_residuals or stop_residual else [np.nan]
    trace.append(_trace_row(0, disp, 0.0, np.nan, residuals, t_start, timing))
    while n < max_iters and disp > tol and not tracker.plateau:
        if stop_residual is not None and residuals[-1] <= stop_residual:
            break
        s_new = sum(h(a) * act(a, s) for a in supp)
        n += 1
        if np.linalg.norm(s_new, axis=1).min() < TUBE_SLACK:
            raise PipelineError("perturbation too large for tube projection")
        move = float(np.abs(s_new - s).max())
        s = s_new
        new_disp = displacement(s)
        ratio = tracker.update(disp, new_disp)
        disp = new_disp
        psi = _psi_from_section(s, band)
        if trace_residuals or stop_residual is not None:
            residuals = conjugacy_residuals(psi, rho, rho_p, kres)
        trace.append(_trace_row(n, disp, move, ratio, residuals, t_start, timing))
    if np.linalg.norm(s, axis=1).min() < TUBE_SLACK:
        raise PipelineError("perturbation too large for tube projection")
    psi = _psi_from_section(s, band)
    residuals = conjugacy_residuals(psi, rho, rho_p, kres)
    trace[-1]["c0_residual"] = residuals[0]
    trace[-1]["ck_residual"] = residuals[-1]
    converged = disp <= tol or tracker.plateau or (stop_residual is not None and residuals[-1] <= stop_residual)
    report = RigidityReport(
        method="embedding", trace=trace, psi=psi, residuals=residuals,
        conjugation_gap=conjugation_gap(psi, rho, rho_p),
        distance_to_identity=circle_map_distance(psi, CircleMap.identity(N, band), max(k - 1, 0)),
        iterations=n, converged=bool(converged),
    )
    report.extras["final_displacement"] = disp
    report.extras["min_section_norm"] = float(np.linalg.norm(s, axis=1).min())
    report.extras["tube_radius"] = emb.tube_radius
    if oracle is not None:
        report.oracle_gap, report.oracle_rotation = align_rotation(psi, oracle)
    if timing:
        report.wall_ms = (time.perf_counter() - t_start) * 1e3
    return report


def _trace_row(n, disp, move, ratio, residuals, t_start, timing) -> dict:
    return {
        "iter": n,
        "displacement": float(disp),
        "movement": float(move),
        "ratio": None if not np.isfinite(ratio) else float(ratio),
        "c0_residual": float(residuals[0]),
        "ck_residual": float(residuals[-1]),
        "wall_ms": (time.perf_counter() - t_start) * 1e3 if timing else None,
    }


def monotone_after(trace: Sequence[dict], start: int = 5, rel: float = 1e-9) -> bool:
    """Displacement non-increasing from ``start`` on, ignoring round-off at the noise floor."""
    d = [row["displacement"] for row in trace]
    floor = 1e3 * np.finfo(float).eps
    return all(b <= a * (1 + rel) or b <= floor for a, b in zip(d[start:], d[start + 1:]))


def tail_ratio(trace: Sequence[dict], floor: float = 1e-12) -> float:
    """Largest per-step ratio over the geometric tail (second half of the informative steps)."""
    d = [row["displacement"] for row in trace]
    r = [b / a for a, b in zip(d, d[1:]) if a > floor and b > floor]
    if not r:
        return 0.0
    return float(max(r[len(r) // 2:]))


# -- invariant metric ------------------------------------------------------------------------

@dataclass
class MetricRecovery:
    metric: PeriodicFunction
    residual: float
    iterations: int
    oracle_gap: float | None = None
    naive_gap: float | None = None
    trace: list[float] = field(default_factory=list)


def metric_oracle(psi0: CircleMap, rho: GeometricAction, N: int | None = None) -> PeriodicFunction:
    """ψ0_* of the ρ-average of ψ0^* g: ((ψ0⁻¹)′)² · mean_γ ψ0′(ρ(γ)ψ0⁻¹θ)²."""
    N = N or psi0.N
    th = grid(N)
    inv = psi0.inverse()
    u = np.mod(inv(th), TWO_PI)
    c = np.mean([psi0(np.mod(rho.maps[a](u), TWO_PI), deriv=1) ** 2 for a in range(rho.group.order)], axis=0)
    return PeriodicFunction(inv(th, deriv=1) ** 2 * c, psi0.band)


def invariant_metric_recovery(rho_p: GeometricAction, h: GroupDensity, tol: float = 1e-13,
                              max_iters: int = 500, psi0: CircleMap | None = None,
                              rho: GeometricAction | None = None) -> MetricRecovery:
    """Average the flat metric a ≡ 1 under a ↦ Σ h(γ) a(ρ′(γ)θ) ρ′(γ)′(θ)²."""
    N, band = rho_p.N, rho_p.band
    P = _band_projector(N, band)
    supp = [int(a) for a in h.support]
    K = rho_p.group.non_identity_generators()
    ops = {}
    for a in set(supp) | set(K):
        phi = rho_p.maps[a]
        ops[a] = P @ (interpolation_matrix(N, band, np.mod(phi(grid(N)), TWO_PI))
                      * (phi.derivative_samples(1) ** 2)[:, None])

    def disp(a_):
        return max((float(np.abs(ops[g] @ a_ - a_).max()) for g in K), default=0.0)

    a_ = np.ones(N)
    d = disp(a_)
    trace = [d]
    tracker = _Contraction(floor=1e-10)
    n = 0
    while d > tol and n < max_iters and not tracker.plateau:
        a_ = sum(h(g) * (ops[g] @ a_) for g in supp)
        n += 1
        if a_.min() <= 0:
            raise PipelineError("metric left the positive cone")
        nd = disp(a_)
        tracker.update(d, nd)
        d = nd
        trace.append(d)
    metric = PeriodicFunction(a_, band)
    out = MetricRecovery(metric, float(_metric_residual(metric, rho_p)), n, trace=trace)
    if psi0 is not None and rho is not None:
        oracle = metric_oracle(psi0, rho, N)
        out.oracle_gap = float(np.abs(metric.samples - oracle.samples).max())
        inv = psi0.inverse()
        out.naive_gap = float(np.abs(metric.samples - inv.derivative_samples(1) ** 2).max())
    return out


def _metric_residual(metric: PeriodicFunction, rho_p: GeometricAction) -> float:
    th = grid(metric.N)
    worst = 0.0
    for g in rho_p.group.non_identity_generators():
        phi = rho_p.maps[g]
        lhs = metric(np.mod(phi(th), TWO_PI)) * phi(th, deriv=1) ** 2
        worst = max(worst, float(np.abs(lhs - metric.samples).max()))
    return worst


# -- pair method -----------------------------------------------------------------------------

def pair_profile(x, eps: float) -> np.ndarray:
    """x²/ε² up to ε, a C² bump ≥ 1 on [ε, 2ε], constant 1 beyond."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    inner = x <= eps
    out[inner] = x[inner] ** 2 / eps ** 2
    mid = (x > eps) & (x < 2 * eps)
    t = (x[mid] - eps) / eps
    out[mid] = 1.0 + t * (1.0 - t) ** 3 * (2.0 + 7.0 * t)
    return out


def minimal_rotation_angle(rho: GeometricAction) -> float:
    """Smallest nonzero rotation angle among the reference maps (reflections ignored)."""
    best = np.pi
    for a, m in rho.maps.items():
        if m.orientation != 1:
            continue
        ang = abs(float(wrap_angle(m.eta.samples[0])))
        if ang > 1e-12:
            best = min(best, ang)
    return best


def run_pair_pipeline(rho: GeometricAction, rho_p: GeometricAction, h: GroupDensity, N: int = 256,
                      band: int | None = None, tol: float = 1e-11, max_iters: int = 400,
                      plateau_floor: float = 1e-6, margin: float = 0.1,
                      oracle: CircleMap | None = None, timing: bool = False) -> RigidityReport:
    """Average f(x, y) = g(d(x, y)) under (x, y) ↦ (ρ(γ)x, ρ′(γ)y) and read off fibre minima."""
    if rho.space != "S1":
        raise LabError("the pair pipeline is implemented on S^1")
    t_start = time.perf_counter()
    band = (3 * N) // 8 if band is None else band
    th = grid(N)
    eps = minimal_rotation_angle(rho) / 4.0
    P = _band_projector(N, band)
    F = P @ pair_profile(np.abs(wrap_angle(th[:, None] - th[None, :])), eps) @ P.T
    supp = [int(a) for a in h.support]
    K = rho.group.non_identity_generators()
    need = set(supp) | set(K)
    Ex = {a: _pullback_operator(N, band, _resample_map(rho.maps[a], N), P) for a in need}
    Ey = {a: _pullback_operator(N, band, rho_p.maps[a], P) for a in need}

    def act(a, F_):
        return Ex[a] @ F_ @ Ey[a].T

    def displacement(F_):
        return max((float(np.abs(act(g, F_) - F_).max()) for g in K), default=0.0)

    d = displacement(F)
    trace = [_trace_row(0, d, 0.0, np.nan, [np.nan], t_start, timing)]
    tracker = _Contraction(floor=plateau_floor)
    n = 0
    while d > tol and n < max_iters and not tracker.plateau:
        F_new = sum(h(a) * act(a, F) for a in supp)
        n += 1
        move = float(np.abs(F_new - F).max())
        F = F_new
        nd = displacement(F)
        ratio = tracker.update(d, nd)
        d = nd
        trace.append(_trace_row(n, d, move, ratio, [np.nan], t_start, timing))
    xprime, hess_min, gap_min = _fibre_minima(F, eps, margin)
    x_map = CircleMap.from_lift_samples(xprime, 1, band // 2, check=False)
    psi = x_map.inverse()
    residuals = conjugacy_residuals(psi, rho, rho_p, 0)
    for row in trace:
        row["c0_residual"] = None
        row["ck_residual"] = None
    trace[-1]["c0_residual"] = residuals[0]
    trace[-1]["ck_residual"] = residuals[-1]
    report = RigidityReport(
        method="pair", trace=trace, psi=psi, residuals=residuals,
        conjugation_gap=conjugation_gap(psi, rho, rho_p),
        distance_to_identity=circle_map_distance(psi, CircleMap.identity(psi.N, psi.band), 0),
        iterations=n, converged=bool(d <= tol or tracker.plateau),
    )
    report.extras.update({"final_displacement": d, "hessian_min": hess_min, "fibre_gap_min": gap_min,
                          "plateau": tracker.plateau, "profile_eps": eps, "grid": N, "band": band})
    if oracle is not None:
        report.oracle_gap, report.oracle_rotation = align_rotation(psi, oracle)
    if timing:
        report.wall_ms = (time.perf_counter() - t_start) * 1e3
    return report


def _resample_map(phi: CircleMap, N: int) -> CircleMap:
    if phi.N == N:
        return phi
    return CircleMap(phi.eta.resample(N), phi.orientation, check=False)


def _fibre_minima(F: np.ndarray, eps: float, margin: float) -> tuple[np.ndarray, float, float]:
    """Per-row argmin with 3-point quadratic refinement and a uniqueness check."""
    N = F.shape[0]
    h = TWO_PI / N
    i = np.arange(N)
    j = np.argmin(F, axis=1)
    fm, f0, fp = F[i, (j - 1) % N], F[i, j], F[i, (j + 1) % N]
    curv = fm - 2 * f0 + fp
    hess = curv / h ** 2
    if np.any(hess <= 0):
        raise PipelineError("fiber minimum ambiguous")
    delta = 0.5 * (fm - fp) / curv
    if np.any(np.abs(delta) > 1.0):
        raise PipelineError("fiber minimum ambiguous")
    y = TWO_PI * j / N + delta * h
    # values away from the minimum must clear it by a margin
    th = grid(N)
    far = np.abs(wrap_angle(th[None, :] - y[:, None])) > eps
    gaps = np.where(far, F - f0[:, None], np.inf).min(axis=1)
    if np.any(gaps < margin):
        raise PipelineError("fiber minimum ambiguous")
    lift = np.unwrap(y)
    lift = lift - TWO_PI * np.round((lift[0] - 0.0) / TWO_PI)
    return lift, float(hess.min()), float(gaps.min())


# -- bootstrap ---------------------------------------------------------------------------------

@dataclass
class BootstrapRound:
    index: int
    order: int
    precondition: float
    threshold: float
    residual: float
    target: float
    step_distance: float
    iterations: int


@dataclass
class BootstrapResult:
    rounds: list[BootstrapRound]
    composed: CircleMap
    increments: list[float]
    cauchy: bool
    initial_residual: float
    floor: float = 0.0

    def ratios(self) -> list[float]:
        """Residual after each round over the residual entering it (the first uses ρ′ itself).

        Rounds entered at or below the roundoff floor are trivial and get ratio 0.
        """
        out = []
        prev = self.initial_residual
        for r in self.rounds:
            out.append(r.residual / prev if prev > self.floor else 0.0)
            prev = r.residual
        return out

    def as_dict(self) -> dict:
        return {
            "initial_residual": self.initial_residual,
            "residual_floor": self.floor,
            "rounds": [vars(r).copy() for r in self.rounds],
            "ratios": self.ratios(),
            "increments": self.increments,
            "cauchy": self.cauchy,
        }


def residual_floor(band: int, order: int) -> float:
    """Size of a C^order residual that is indistinguishable from roundoff at this band."""
    return 1e3 * np.finfo(float).eps * float(band) ** order


def _closeness(rho_i: GeometricAction, rho: GeometricAction, order: int) -> float:
    """max over γ ∈ K of d_{C^order}(ρ_i(γ)∘ρ(γ)⁻¹, Id)."""
    worst = 0.0
    N, band = rho_i.N, rho_i.band
    ident = CircleMap.identity(N, band)
    for g in rho.group.non_identity_generators():
        ref_inv = rho.maps[int(rho.group.inv[g])]
        worst = max(worst, circle_map_distance(rho_i.maps[g].compose(ref_inv), ident, order))
    return worst


def _initial_residual(rho: GeometricAction, rho_p: GeometricAction, order: int) -> float:
    ident = CircleMap.identity(rho_p.N, rho_p.band)
    return conjugacy_residuals(ident, rho, rho_p, order)[-1]


def bootstrap_regularity(rho: GeometricAction, rho_p: GeometricAction, h: GroupDensity,
                         schedule: Sequence[int] = (3, 4, 5), p: float = 2.0, max_iters: int = 300,
                         residual_order: int = 3) -> BootstrapResult:
    """Successive conjugations at increasing orders, each round required to shrink the residual."""
    if len(schedule) < 2 or len(schedule) > 4 or list(schedule) != sorted(set(schedule)):
        raise LabError("schedule must be 2 to 4 strictly increasing orders")
    rounds: list[BootstrapRound] = []
    current = rho_p
    N, band = rho_p.N, rho_p.band
    Phi = CircleMap.identity(N, band)
    prev_res = _initial_residual(rho, rho_p, residual_order)
    initial = prev_res
    # below this the C^l residual is roundoff amplified by band^l and a round has nothing to do
    floor = residual_floor(band, residual_order)
    increments = []
    for i in range(1, len(schedule)):
        order = schedule[i - 1]
        # L^{2,l} averaging controls C^{l-1}, so closeness is measured there
        pre = _closeness(current, rho, order - 1)
        threshold = 2.0 ** -(i - 1)
        if pre > threshold:
            raise BootstrapStalled(i, f"C^{order - 1} distance {pre:.3g} exceeds {threshold:.3g}")
        if prev_res <= floor:
            increments.append(0.0)
            rounds.append(BootstrapRound(i, order, pre, threshold, prev_res, prev_res, 0.0, 0))
            continue
        target = min(0.25 * prev_res, 2.0 ** -i)
        try:
            rep = run_embedding_pipeline(rho, current, h, NormSpec(order, p), tol=0.0, max_iters=max_iters,
                                         residual_order=residual_order, stop_residual=target,
                                         trace_residuals=False)
        except PipelineError as exc:
            raise BootstrapStalled(i, str(exc)) from exc
        res = rep.residuals[-1]
        if res > target:
            raise BootstrapStalled(i, f"C^{residual_order} residual {res:.3g} above target {target:.3g}")
        phi = rep.psi
        step = circle_map_distance(phi, CircleMap.identity(N, band), schedule[i])
        phi_inv = phi.inverse()
        maps = {a: phi.compose(m.compose(phi_inv), band_cap=4 * band) for a, m in current.maps.items()}
        maps = {a: _reband_to(m, N, band) for a, m in maps.items()}
        current = GeometricAction(rho.group, "S1", maps, False)
        new_Phi = _reband_to(phi.compose(Phi, band_cap=4 * band), N, band)
        increments.append(circle_map_distance(new_Phi, Phi, schedule[i]))
        Phi = new_Phi
        rounds.append(BootstrapRound(i, order, pre, threshold, res, target, step, rep.iterations))
        prev_res = res
    cauchy = all(b <= a for a, b in zip(increments, increments[1:]))
    return BootstrapResult(rounds, Phi, increments, cauchy, initial, floor)


def _reband_to(phi: CircleMap, N: int, band: int) -> CircleMap:
    """Project a composed map back to the working grid (tail checked by ``rebanded`` beforehand)."""
    if phi.N == N and phi.band == band:
        return phi
    th = grid(N)
    return CircleMap(PeriodicFunction(phi(th) - phi.orientation * th, band), phi.orientation, check=False)


# -- spreading sets -----------------------------------------------------------------------------

@dataclass
class SpreadingResult:
    m: int
    subset_size: int
    eta: float
    worst_t: float
    worst_subset: tuple
    per_subset: dict
    kazhdan_eps: float
    t_bound: float


def spreading_sets(group: FiniteGroup, subset_size: int | None = None) -> SpreadingResult:
    """Exhaustive worst case of min_{k∈K} |(kS ∪ S)^c| / (η m) over subsets of one size."""
    if group.kind != "permutation":
        raise LabError("spreading sets need a permutation action")
    perms = group.elements
    m = perms.shape[1]
    orbit = {0}
    frontier = [0]
    while frontier:
        x = frontier.pop()
        for k in group.generators:
            y = int(perms[k][x])
            if y not in orbit:
                orbit.add(y)
                frontier.append(y)
    if len(orbit) != m:
        raise LabError("ergodicity required")
    if subset_size is None:
        subset_size = m // 2 + 1
    eta = 1.0 - subset_size / m
    if not (0 < eta < 0.5):
        raise LabError("subset size must give 0 < eta < 1/2")
    worst, worst_S = -1.0, ()
    per = {}
    K = [k for k in group.generators]
    for S in combinations(range(m), subset_size):
        Sset = set(S)
        best = min(m - len(Sset | {int(perms[k][x]) for x in S}) for k in K)
        t = best / (eta * m)
        per[S] = t
        if t > worst:
            worst, worst_S = t, S
    eps = kazhdan_epsilon(permutation_representation(group), restarts=16).value
    return SpreadingResult(m, subset_size, eta, float(worst), worst_S, per, float(eps), float(1 - eps ** 2 / 4))
