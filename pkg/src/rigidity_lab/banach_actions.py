"""Finite-dimensional l^p spaces: duality maps, convexity gaps and p-norm averaging."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import LabError, NoContraction
from .groups import GroupDensity
from .hilbert_actions import LinearAction, invariant_projection_oracle


@dataclass(frozen=True)
class PNormSpace:
    dim: int
    p: float

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if not (1.0 < self.p < np.inf):
            raise ValueError("p must satisfy 1 < p < inf (uniform convexity)")

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    def norm(self, x) -> float:
        return float(np.linalg.norm(np.asarray(x, dtype=float), ord=self.p))

    def dual_norm(self, x) -> float:
        return float(np.linalg.norm(np.asarray(x, dtype=float), ord=self.q))

    def normalize(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.norm(x)
        if n == 0:
            raise LabError("cannot normalise the zero vector")
        return x / n


def duality_map(x, space: PNormSpace) -> np.ndarray:
    """Norming functional of x: ‖j(x)‖_q = 1 and ⟨j(x), x/‖x‖_p⟩ = 1."""
    x = np.asarray(x, dtype=float)
    n = space.norm(x)
    if n == 0:
        raise LabError("duality map undefined at origin")
    u = x / n
    return np.sign(u) * np.abs(u) ** (space.p - 1.0)


def convexity_gap(v, w, space: PNormSpace) -> tuple[float, float]:
    """(⟨j(w), v⟩, ‖v − w‖_p) for unit vectors v, w."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return float(duality_map(w, space) @ v), space.norm(v - w)


def sample_convexity_pairs(space: PNormSpace, n: int, rng: np.random.Generator) -> np.ndarray:
    """Rows (inner, dist) for random unit pairs spread over distances in (0, 2]."""
    out = np.empty((n, 2))
    for i in range(n):
        w = space.normalize(rng.standard_normal(space.dim))
        u = rng.standard_normal(space.dim)
        t = 4.0 * rng.random() ** 2
        v = space.normalize(w + t * u / space.norm(u))
        if i % 5 == 0:
            v = space.normalize(-w + t * u / space.norm(u))
        out[i] = convexity_gap(v, w, space)
    return out


def convexity_envelope(pairs: np.ndarray, eps_grid) -> np.ndarray:
    """Greatest convex minorant of the sampled (dist, 1 − inner) cloud through the origin.

    The result lies below every sample, vanishes at 0, and is strictly
    increasing exactly when every sampled pair at positive distance has a
    positive gap.  Grid points beyond the largest sampled distance get inf.
    """
    d = np.concatenate([[0.0], pairs[:, 1]])
    g = np.concatenate([[0.0], 1.0 - pairs[:, 0]])
    order = np.lexsort((g, d))
    d, g = d[order], g[order]
    hull: list[tuple[float, float]] = []
    for x, y in zip(d, g):
        if hull and x == hull[-1][0]:
            continue
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append((x, y))
    hx = np.array([h[0] for h in hull])
    hy = np.array([h[1] for h in hull])
    eps_grid = np.asarray(eps_grid, dtype=float)
    out = np.interp(eps_grid, hx, hy)
    out[eps_grid > hx[-1]] = np.inf
    return out


def p_displacement(action: LinearAction, v, space: PNormSpace) -> float:
    v = np.asarray(v, dtype=float)
    K = list(action.group.generators)
    moved = np.einsum("kij,j->ki", action.A[K], v) + action.b[K] - v
    return float(np.max(np.linalg.norm(moved, ord=space.p, axis=1)))


def _boyd_power(A: np.ndarray, p: float, x: np.ndarray, iters: int = 200) -> float:
    q = p / (p - 1.0)
    x = x / np.linalg.norm(x, ord=p)
    val = np.linalg.norm(A @ x, ord=p)
    for _ in range(iters):
        y = A @ x
        ny = np.linalg.norm(y, ord=p)
        if ny == 0:
            break
        z = A.T @ (np.sign(y) * np.abs(y / ny) ** (p - 1.0))
        nz = np.linalg.norm(z, ord=q)
        if nz == 0:
            break
        x_new = np.sign(z) * np.abs(z / nz) ** (q - 1.0)
        x_new /= np.linalg.norm(x_new, ord=p)
        new_val = np.linalg.norm(A @ x_new, ord=p)
        x = x_new
        if new_val <= val * (1 + 1e-15):
            val = max(val, new_val)
            break
        val = new_val
    return float(val)


def operator_p_norm(A, p: float, restarts: int = 32, seed: int = 0) -> tuple[float, float]:
    """(lower estimate by power ascent, Riesz-Thorin upper bound ‖A‖_1^{1/p}‖A‖_∞^{1−1/p})."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    upper = np.linalg.norm(A, 1) ** (1.0 / p) * np.linalg.norm(A, np.inf) ** (1.0 - 1.0 / p)
    rng = np.random.default_rng(seed)
    starts = [np.eye(A.shape[1])[i] for i in range(min(A.shape[1], 4))]
    starts += [rng.standard_normal(A.shape[1]) for _ in range(restarts)]
    best = max(_boyd_power(A, p, x) for x in starts)
    return float(best), float(upper)


def p_norm_defect(action: LinearAction, space: PNormSpace, restarts: int = 32) -> float:
    """max over k ∈ K of max(‖A_k‖_p − 1, 1 − 1/‖A_k⁻¹‖_p)."""
    eps = 0.0
    for k in action.group.generators:
        up, _ = operator_p_norm(action.A[k], space.p, restarts)
        inv, _ = operator_p_norm(np.linalg.inv(action.A[k]), space.p, restarts)
        eps = max(eps, up - 1.0, 1.0 - 1.0 / inv)
    return float(max(eps, 0.0))


@dataclass
class BanachIterationReport:
    differences: list[float]
    displacement0: float
    support_radius: int
    fitted_ratio: float
    limit: np.ndarray
    bound_holds: bool
    invariance_residual: float | None
    operator_bound: float
    certificates: dict[str, bool] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "differences": self.differences,
            "displacement0": self.displacement0,
            "support_radius": self.support_radius,
            "fitted_ratio": self.fitted_ratio,
            "limit": self.limit.tolist(),
            "invariance_residual": self.invariance_residual,
            "operator_bound": self.operator_bound,
            "certificates": self.certificates,
        }


def banach_iterate(action: LinearAction, h: GroupDensity, v, space: PNormSpace, n_max: int = 500,
                   tol: float = 1e-14, stall_window: int = 10, probes: int = 16,
                   seed: int = 0) -> BanachIterationReport:
    """Iterate σ(h) in l^p and check ‖σ(h)^{n+1}v − σ(h)^n v‖_p ≤ M C^n disp_p(v)."""
    if not h.is_symmetric:
        raise LabError("banach_iterate needs a symmetric density")
    if space.dim != action.dim:
        raise LabError("space and action dimensions differ")
    S, c = action.averaged_operator(h)
    v = np.asarray(v, dtype=float)
    disp0 = p_displacement(action, v, space)
    M = h.radius
    diffs: list[float] = []
    x = v.copy()
    streak = 0
    floor = 1e-13 * max(1.0, space.norm(v))
    for _ in range(n_max):
        x_next = S @ x + c
        d = space.norm(x_next - x)
        diffs.append(d)
        x = x_next
        if len(diffs) > 1 and d >= diffs[-2] and d > floor:
            streak += 1
            if streak >= stall_window:
                raise NoContraction("no p-norm contraction")
        else:
            streak = 0
        if d <= tol * max(1.0, space.norm(v)):
            break
    # fitted C: smallest C with diff_n ≤ M C^n disp0 on the informative range
    fitted = 0.0
    if disp0 > 0:
        for n, d in enumerate(diffs):
            if n == 0 or d <= 1e3 * floor:
                continue
            fitted = max(fitted, (d / (M * disp0)) ** (1.0 / n))
    holds = all(d <= M * fitted ** n * disp0 * (1 + 1e-9) + 1e3 * floor for n, d in enumerate(diffs))
    holds = holds and (diffs[0] <= M * disp0 * (1 + 1e-9) + 1e-15 if diffs else True)
    inv_res = None
    if action.kind in ("unitary", "affine-isometric") or action.epsilon == 0:
        inv_res = p_displacement(action, x, space)
    # ‖P‖_p estimated on random probes: P = lim S^n
    rng = np.random.default_rng(seed)
    P = np.linalg.matrix_power(S, max(len(diffs), 1))
    opb = 0.0
    for _ in range(probes):
        u = rng.standard_normal(space.dim)
        opb = max(opb, space.norm(P @ u) / space.norm(u))
    certs = {"difference_bound": bool(holds), "contracting": bool(fitted < 1.0)}
    if inv_res is not None:
        certs["limit_invariant"] = bool(inv_res <= 1e-8 * max(1.0, space.norm(v)))
    return BanachIterationReport([float(d) for d in diffs], disp0, M, float(fitted), x, bool(holds),
                                 inv_res, float(opb), certs)


def norm_growth_check(action: LinearAction, h: GroupDensity, space: PNormSpace, n_max: int = 20,
                      samples: int = 50, seed: int = 0) -> tuple[float, float]:
    """Largest ‖σ(h)^n v‖_p/‖v‖_p over samples and n, against (1+ε)^{nM} at the worst n."""
    S, _ = action.averaged_operator(h)
    eps = p_norm_defect(action, space, restarts=8)
    M = h.radius
    rng = np.random.default_rng(seed)
    worst_slack = -np.inf
    worst_ratio = 0.0
    for _ in range(samples):
        u = rng.standard_normal(space.dim)
        x = u.copy()
        for n in range(1, n_max + 1):
            x = S @ x
            ratio = space.norm(x) / space.norm(u)
            slack = ratio - (1 + eps) ** (n * M)
            if slack > worst_slack:
                worst_slack, worst_ratio = slack, ratio
    return float(worst_ratio), float(worst_ratio - worst_slack)


def adjoint_pairing_defect(action: LinearAction, h: GroupDensity, v, w, n: int = 5) -> float:
    """|⟨w, σ(h)^n v⟩ − ⟨σ(h)ᵀ^n w, v⟩| together with the transpose identity for symmetric h."""
    S, _ = action.averaged_operator(h)
    Sn = np.linalg.matrix_power(S, n)
    lhs = float(np.asarray(w) @ (Sn @ np.asarray(v)))
    rhs = float((Sn.T @ np.asarray(w)) @ np.asarray(v))
    sym = 0.0
    if h.is_symmetric and action.kind == "unitary":
        sym = float(np.abs(S.T - S).max())
    return max(abs(lhs - rhs), sym)


# -- invariant vectors and uniform convexity ------------------------------------

def _orbit_blocks(action: LinearAction) -> list[np.ndarray] | None:
    """Orbits of a permutation-matrix action, or None if the maps are not permutations."""
    A = action.A
    if not (np.all((np.abs(A) < 1e-12) | (np.abs(A - 1) < 1e-12)) and np.allclose(A.sum(axis=1), 1)):
        return None
    d = action.dim
    parent = list(range(d))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for k in action.group.generators:
        img = np.argmax(A[k], axis=0)
        for i in range(d):
            a, b = find(i), find(int(img[i]))
            if a != b:
                parent[a] = b
    roots: dict[int, list[int]] = {}
    for i in range(d):
        roots.setdefault(find(i), []).append(i)
    return [np.array(v) for v in roots.values()]


def _dist_to_constant(x: np.ndarray, p: float) -> float:
    """min over c of ‖x − c‖_p (1-D convex problem)."""
    if x.size == 1:
        return 0.0
    lo, hi = float(x.min()), float(x.max())
    if hi - lo == 0:
        return 0.0
    res = optimize.minimize_scalar(lambda c: np.sum(np.abs(x - c) ** p), bounds=(lo, hi),
                                   method="bounded", options={"xatol": 1e-13 * max(1.0, hi - lo)})
    return float(res.fun ** (1.0 / p))


class InvariantDistance:
    """p-distance to the subspace of vectors fixed by the action."""

    def __init__(self, action: LinearAction, space: PNormSpace):
        self.space = space
        self.orbits = _orbit_blocks(action)
        fixed = invariant_projection_oracle(action)
        self.basis = fixed.basis
        self.projector = fixed.projector
        self.dim = fixed.dim

    def __call__(self, v) -> float:
        v = np.asarray(v, dtype=float)
        p = self.space.p
        if self.dim == 0:
            return self.space.norm(v)
        if p == 2:
            return float(np.linalg.norm(v - self.projector @ v))
        if self.orbits is not None:
            return float(sum(_dist_to_constant(v[o], p) ** p for o in self.orbits) ** (1.0 / p))
        B = self.basis
        c0 = B.T @ v
        res = optimize.minimize(lambda c: np.sum(np.abs(v - B @ c) ** p), c0, method="BFGS")
        return float(res.fun ** (1.0 / p))


@dataclass
class UCContraction:
    C: float
    M: float
    passed: bool
    vacuous: bool = False


def verify_uc_contraction(action: LinearAction, f: GroupDensity, space: PNormSpace, samples: int = 400,
                          seed: int = 0) -> UCContraction:
    """Measure sup dist_p(σ(f)v, B)/dist_p(v, B) and sup dist_p(v, B)/disp_p(v)."""
    dist = InvariantDistance(action, space)
    if dist.dim == action.dim:
        return UCContraction(0.0, 0.0, True, vacuous=True)
    S, _ = action.averaged_operator(f)
    rng = np.random.default_rng(seed)
    comp = np.eye(action.dim) - dist.projector
    # the Euclidean worst directions seed the search; exact when p = 2
    _, _, vt = np.linalg.svd(S @ comp)
    cands = [vt[0], vt[min(1, len(vt) - 1)]]
    cands += [rng.standard_normal(action.dim) for _ in range(samples)]

    def ratio(v):
        d = dist(v)
        return dist(S @ v) / d if d > 1e-12 else 0.0

    def lip(v):
        dp = p_displacement(action, v, space)
        return dist(v) / dp if dp > 1e-12 else 0.0

    vals = [ratio(v) for v in cands]
    best = int(np.argmax(vals))
    C = vals[best]
    if space.p != 2:
        res = optimize.minimize(lambda v: -ratio(v), cands[best], method="Nelder-Mead",
                                options={"maxiter": 2000, "xatol": 1e-10, "fatol": 1e-12})
        C = max(C, -float(res.fun))
    Mhat = max(lip(v) for v in cands)
    return UCContraction(float(C), float(Mhat), bool(C < 1.0))
