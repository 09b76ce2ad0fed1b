"""Finite-dimensional affine actions of finite groups and the averaging operator.

A :class:`LinearAction` stores one affine map ``x -> A_γ x + b_γ`` per group
element.  The averaging operator of a density h is ``ρ(h)x = Σ h(γ) ρ(γ)x``
and the fixed-point iteration repeats it.  Exact linear-algebra oracles
(kernel projectors, eigenvalues) live next to the iterative routines so that
every contraction claim can be checked against them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import DimensionMismatch, DomainViolation, LabError, NoContraction
from .groups import FiniteGroup, GroupDensity, convolve

UNITARY = "unitary"
AFFINE = "affine-isometric"
ALMOST = "almost-isometric"

HOM_SAMPLE_CAP = 4096
HOM_FLOP_BUDGET = 2**22  # matrix-product work spent on random pairs beyond the generator pairs


class LinearAction:
    """Per-element affine maps on R^dim forming a group action."""

    def __init__(self, group: FiniteGroup, A, b=None, kind: str | None = None):
        A = np.asarray(A, dtype=float)
        if A.ndim != 3 or A.shape[0] != group.order or A.shape[1] != A.shape[2]:
            raise DimensionMismatch("expected one square matrix per group element")
        self.group = group
        self.dim = A.shape[1]
        self.A = A
        self.b = np.zeros((group.order, self.dim)) if b is None else np.asarray(b, dtype=float)
        if self.b.shape != (group.order, self.dim):
            raise DimensionMismatch("translation vectors have the wrong shape")
        self.epsilon = self._measure_epsilon()
        self.hom_residual = self._measure_hom_residual()
        if kind is None:
            kind = self._infer_kind()
        self.kind = kind
        self.A.setflags(write=False)
        self.b.setflags(write=False)

    # -- measured properties ------------------------------------------------
    def _measure_epsilon(self) -> float:
        eps = 0.0
        for k in self.group.generators:
            s = np.linalg.svd(self.A[k], compute_uv=False)
            eps = max(eps, s[0] - 1.0, 1.0 - s[-1])
        return float(max(eps, 0.0))

    def _measure_hom_residual(self, seed: int = 0) -> float:
        """Max of ‖ρ(ab) − ρ(a)ρ(b)‖ over sampled pairs.

        Every pair (x, k) with k a generator is always included, which already
        certifies a homomorphism; further pairs are all of G×G when that is
        cheap, otherwise a random sample within a fixed amount of work.
        """
        g = self.group
        n, d = g.order, self.dim
        res = 0.0
        flat = self.A.reshape(n * d, d)
        for k in g.generators:
            # ρ(x)ρ(k) for every x at once as one matrix product
            comp = (flat @ self.A[k]).reshape(n, d, d)
            xk = g.mul[:, k]
            res = max(res, np.abs(self.A[xk] - comp).max(),
                      np.abs(self.b[xk] - (self.A @ self.b[k] + self.b)).max())
        cap = min(HOM_SAMPLE_CAP, HOM_FLOP_BUDGET // max(1, d ** 3))
        if n * n <= cap:
            pairs = np.array([(a, c) for a in range(n) for c in range(n)])
        else:
            pairs = np.random.default_rng(seed).integers(0, n, size=(cap, 2))
        # chunked so that large regular representations do not materialise n^2 full matrices
        chunk = max(1, 2**22 // max(1, d * d))
        for start in range(0, len(pairs), chunk):
            a, c = pairs[start:start + chunk, 0], pairs[start:start + chunk, 1]
            ac = g.mul[a, c]
            A_comp = np.matmul(self.A[a], self.A[c])
            b_comp = np.matmul(self.A[a], self.b[c][..., None])[..., 0] + self.b[a]
            res = max(res, np.abs(self.A[ac] - A_comp).max(), np.abs(self.b[ac] - b_comp).max())
        e = g.identity
        res = max(res, np.abs(self.A[e] - np.eye(self.dim)).max(), np.abs(self.b[e]).max())
        return float(res)

    def _infer_kind(self) -> str:
        orth = all(np.allclose(self.A[k].T @ self.A[k], np.eye(self.dim), atol=1e-10)
                   for k in range(self.group.order))
        if orth and np.abs(self.b).max() <= 1e-14:
            return UNITARY
        if orth:
            return AFFINE
        return ALMOST

    # -- evaluation -----------------------------------------------------------
    def apply(self, a: int, x: np.ndarray) -> np.ndarray:
        return self.A[a] @ x + self.b[a]

    def _check_dim(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionMismatch(f"vector of shape {x.shape} for an action of dimension {self.dim}")
        return x

    def averaged_operator(self, h: GroupDensity) -> tuple[np.ndarray, np.ndarray]:
        """Matrix and translation of ρ(h)."""
        if h.group is not self.group:
            raise LabError("density lives on a different group")
        w = h.weights
        return np.einsum("g,gij->ij", w, self.A), w @ self.b

    def __repr__(self) -> str:
        return f"LinearAction({self.group.name}, dim={self.dim}, kind={self.kind}, eps={self.epsilon:.3g})"


# -- constructors ---------------------------------------------------------------

def extend_homomorphism(group: FiniteGroup, images: dict[int, tuple[np.ndarray, np.ndarray] | np.ndarray],
                        kind: str | None = None) -> LinearAction:
    """Extend affine images of the generators to every element by BFS over words."""
    first = next(iter(images.values()))
    A0 = first[0] if isinstance(first, tuple) else first
    d = np.asarray(A0).shape[0]
    gens: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for k, img in images.items():
        if isinstance(img, tuple):
            gens[k] = (np.asarray(img[0], float), np.asarray(img[1], float))
        else:
            gens[k] = (np.asarray(img, float), np.zeros(d))
    for k in list(gens):
        ki = int(group.inv[k])
        if ki not in gens:
            Ak, bk = gens[k]
            Ainv = np.linalg.inv(Ak)
            gens[ki] = (Ainv, -Ainv @ bk)
    A = np.full((group.order, d, d), np.nan)
    b = np.full((group.order, d), np.nan)
    e = group.identity
    A[e], b[e] = np.eye(d), np.zeros(d)
    frontier = [e]
    seen = {e}
    while frontier:
        nxt = []
        for x in frontier:
            for k, (Ak, bk) in gens.items():
                y = int(group.mul[x, k])
                if y not in seen:
                    # ρ(xk) = ρ(x)∘ρ(k)
                    A[y] = A[x] @ Ak
                    b[y] = A[x] @ bk + b[x]
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    if len(seen) != group.order:
        raise LabError("generator images do not reach every element")
    return LinearAction(group, A, b, kind=kind)


def trivial_representation(group: FiniteGroup, dim: int = 1) -> LinearAction:
    return LinearAction(group, np.broadcast_to(np.eye(dim), (group.order, dim, dim)).copy(), kind=UNITARY)


def regular_representation(group: FiniteGroup) -> LinearAction:
    n = group.order
    A = np.zeros((n, n, n))
    cols = np.arange(n)
    for g in range(n):
        A[g, group.mul[g], cols] = 1.0
    return LinearAction(group, A, kind=UNITARY)


def permutation_representation(group: FiniteGroup) -> LinearAction:
    """Natural representation of a permutation group on R^n."""
    if group.kind != "permutation":
        raise LabError("permutation representation needs a permutation group")
    n = group.elements.shape[1]
    A = np.zeros((group.order, n, n))
    cols = np.arange(n)
    for g in range(group.order):
        A[g, group.elements[g], cols] = 1.0
    return LinearAction(group, A, kind=UNITARY)


def rotation_angle(group: FiniteGroup, a: int) -> tuple[float, int]:
    """(angle, orientation) of the standard isometry of S^1 for cyclic/dihedral groups."""
    if group.kind == "cyclic":
        n = group.params[0]
        return 2 * np.pi * int(group.elements[a, 0]) / n, 1
    if group.kind == "dihedral":
        n = group.params[0]
        j, s = group.elements[a]
        return 2 * np.pi * int(j) / n, (-1 if s else 1)
    raise LabError("no standard isometric action registered")


def rotation_representation(group: FiniteGroup) -> LinearAction:
    """Cyclic/dihedral groups acting on R^2 by rotations (and reflections)."""
    A = np.zeros((group.order, 2, 2))
    for a in range(group.order):
        ang, s = rotation_angle(group, a)
        c, si = np.cos(ang), np.sin(ang)
        A[a] = np.array([[c, -si], [si, c]]) @ np.diag([1.0, float(s)])
    return LinearAction(group, A, kind=UNITARY)


def direct_sum(*actions: LinearAction) -> LinearAction:
    group = actions[0].group
    d = sum(a.dim for a in actions)
    A = np.zeros((group.order, d, d))
    b = np.zeros((group.order, d))
    o = 0
    for act in actions:
        A[:, o:o + act.dim, o:o + act.dim] = act.A
        b[:, o:o + act.dim] = act.b
        o += act.dim
    return LinearAction(group, A, b)


def conjugate(action: LinearAction, T: np.ndarray, kind: str | None = None) -> LinearAction:
    T = np.asarray(T, dtype=float)
    Tinv = np.linalg.inv(T)
    A = np.einsum("ij,gjk,kl->gil", T, action.A, Tinv)
    b = action.b @ T.T
    return LinearAction(action.group, A, b, kind=kind)


def make_almost_isometric(action: LinearAction, T: np.ndarray) -> LinearAction:
    """Conjugate by T: maps γ -> T∘ρ(γ)∘T⁻¹ (a genuine action, no longer isometric)."""
    T = np.asarray(T, dtype=float)
    if T.shape != (action.dim, action.dim):
        raise DimensionMismatch("conjugating matrix has the wrong shape")
    s = np.linalg.svd(T, compute_uv=False)
    if s[-1] <= 1e-12 * max(s[0], 1.0):
        raise LabError("singular conjugating matrix")
    if s[0] / s[-1] > 10.0:
        raise LabError("conjugating matrix condition number exceeds 10")
    out = conjugate(action, T)
    if out.epsilon > 1e-12:
        out.kind = ALMOST
    else:
        out.kind = action.kind
    return out


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


# -- displacement and averaging -------------------------------------------------

def displacement(action: LinearAction, x, return_argmax: bool = False):
    """K-displacement sup_{k∈K} ‖ρ(k)x − x‖."""
    x = action._check_dim(x)
    K = list(action.group.generators)
    moved = np.einsum("kij,j->ki", action.A[K], x) + action.b[K] - x
    norms = np.linalg.norm(moved, axis=1)
    i = int(np.argmax(norms))
    if return_argmax:
        return float(norms[i]), K[i]
    return float(norms[i])


def average(action, h: GroupDensity, x) -> np.ndarray:
    """ρ(h)x = Σ h(γ) ρ(γ)x."""
    if isinstance(action, PartialAlmostAction):
        return action.average(h, x)
    x = action._check_dim(x)
    M, c = action.averaged_operator(h)
    return M @ x + c


# -- exact oracles ----------------------------------------------------------------

@dataclass
class FixedSubspace:
    basis: np.ndarray  # (dim, r) orthonormal columns spanning the linear part
    projector: np.ndarray  # orthogonal projector onto span(basis)
    origin: np.ndarray  # a fixed point (zero for linear actions)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.origin + self.projector @ (np.asarray(x) - self.origin)

    def complement_basis(self) -> np.ndarray:
        d = self.projector.shape[0]
        if self.dim == 0:
            return np.eye(d)
        u, s, _ = np.linalg.svd(np.eye(d) - self.projector)
        r = int(np.sum(s > 0.5))
        return u[:, :r]


def invariant_projection_oracle(action: LinearAction, rank_tol: float = 1e-9) -> FixedSubspace:
    """Fixed set of the action from the kernel of the stacked (A_k − I), k ∈ K."""
    K = [k for k in action.group.generators if k != action.group.identity]
    d = action.dim
    if not K:
        return FixedSubspace(np.eye(d), np.eye(d), np.zeros(d))
    stacked = np.concatenate([action.A[k] - np.eye(d) for k in K])
    rhs = -np.concatenate([action.b[k] for k in K])
    _, s, vt = np.linalg.svd(stacked)
    scale = max(s[0] if s.size else 0.0, 1.0)
    rank = int(np.sum(s > rank_tol * scale))
    basis = vt[rank:].T
    P = basis @ basis.T
    if np.abs(rhs).max(initial=0.0) > 0:
        origin, *_ = np.linalg.lstsq(stacked, rhs, rcond=None)
        if np.linalg.norm(stacked @ origin - rhs) > 1e-8 * max(1.0, np.linalg.norm(rhs)):
            raise LabError("no fixed point found")
        origin = origin - P @ origin
    else:
        origin = np.zeros(d)
    return FixedSubspace(basis, P, origin)


def _complement_operator(action: LinearAction, f: GroupDensity) -> tuple[np.ndarray, np.ndarray]:
    fixed = invariant_projection_oracle(action)
    Q = fixed.complement_basis()
    M, _ = action.averaged_operator(f)
    return Q, Q.T @ M @ Q


def contraction_factor(action: LinearAction, f: GroupDensity) -> float:
    """Operator norm of ρ(f) on the orthogonal complement of the invariant vectors."""
    if action.kind != UNITARY:
        raise LabError("contraction factor requires unitary kind")
    Q, S = _complement_operator(action, f)
    if Q.shape[1] == 0:
        return 0.0
    return float(np.linalg.norm(S, 2))


@dataclass
class KazhdanEstimate:
    value: float
    lower_bound: float
    certified: bool
    vacuous: bool = False
    argmin: np.ndarray | None = field(default=None, repr=False)

    def __float__(self) -> float:
        return self.value


def kazhdan_epsilon(action: LinearAction, restarts: int = 64, seed: int = 0) -> KazhdanEstimate:
    """min over unit v ⊥ invariants of max_{k∈K} ‖A_k v − v‖, with a spectral certificate.

    The certificate is the bound √(2 − 2λ_max) where λ_max is the top
    eigenvalue on the complement of the symmetrised average of A_k over the
    non-identity generators.
    """
    if action.kind != UNITARY:
        raise LabError("kazhdan_epsilon requires unitary kind")
    fixed = invariant_projection_oracle(action)
    Q = fixed.complement_basis()
    r = Q.shape[1]
    if r == 0:
        return KazhdanEstimate(2.0, 2.0, True, vacuous=True)
    K = action.group.non_identity_generators()
    B = np.stack([(action.A[k] - np.eye(action.dim)) @ Q for k in K])
    avg = np.mean([Q.T @ action.A[k] @ Q for k in K], axis=0)
    lam = float(np.linalg.eigvalsh(0.5 * (avg + avg.T))[-1])
    lower = float(np.sqrt(max(2.0 - 2.0 * lam, 0.0)))

    def objective(c):
        return float(np.max(np.linalg.norm(B @ c, axis=1)))

    rng = np.random.default_rng(seed)
    best_val, best_c = np.inf, None
    cons = [{"type": "eq", "fun": lambda z: z[:-1] @ z[:-1] - 1.0,
             "jac": lambda z: np.append(2 * z[:-1], 0.0)}]
    for i in range(len(K)):
        Bi = B[i]
        cons.append({"type": "ineq",
                     "fun": (lambda z, Bi=Bi: z[-1] - (Bi @ z[:-1]) @ (Bi @ z[:-1])),
                     "jac": (lambda z, Bi=Bi: np.append(-2 * Bi.T @ (Bi @ z[:-1]), 1.0))})
    for _ in range(restarts):
        c0 = rng.standard_normal(r)
        c0 /= np.linalg.norm(c0)
        t0 = objective(c0) ** 2
        res = optimize.minimize(lambda z: z[-1], np.append(c0, t0), jac=lambda z: np.append(np.zeros(r), 1.0),
                                constraints=cons, method="SLSQP", options={"maxiter": 500, "ftol": 1e-14})
        c = res.x[:-1]
        nc = np.linalg.norm(c)
        if not np.isfinite(nc) or nc == 0:
            continue
        c = c / nc
        val = objective(c)
        if val < best_val:
            best_val, best_c = val, c
    certified = best_val >= lower - 1e-9
    return KazhdanEstimate(float(best_val), lower, bool(certified), argmin=Q @ best_c)


def choose_m(D: float, C0: float, eps: float) -> int:
    """Smallest m with 2 D^m ≤ C0 eps."""
    if D >= 1:
        raise NoContraction("no spectral gap; m undefined")
    if not (0 < C0 < 1) or eps <= 0 or D < 0:
        raise ValueError("choose_m needs 0 <= D < 1, 0 < C0 < 1, eps > 0")
    target = C0 * eps
    if D == 0 or 2 * D <= target:
        return 1
    m = max(1, int(np.floor(np.log(target / 2) / np.log(D))))
    while 2 * D ** m > target:
        m += 1
    while m > 1 and 2 * D ** (m - 1) <= target:
        m -= 1
    return m


# -- fixed-point iteration --------------------------------------------------------

@dataclass
class IterationReport:
    steps: int
    displacements: list[float]
    movements: list[float]
    ratios: list[float]
    final_point: np.ndarray
    support_radius: int
    fitted_ratio: float
    distance_bound: float  # (MC/(1−C))·displacement(x0)
    distance_travelled: float
    corrected_bound: float  # (M/(1−C))·displacement(x0), includes the first step
    certificates: dict[str, bool] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "steps": self.steps,
            "displacements": self.displacements,
            "movements": self.movements,
            "ratios": self.ratios,
            "support_radius": self.support_radius,
            "fitted_ratio": self.fitted_ratio,
            "distance_bound": self.distance_bound,
            "distance_travelled": self.distance_travelled,
            "corrected_bound": self.corrected_bound,
            "certificates": self.certificates,
        }


def fixed_point_distance_bound(M: int, C: float, disp0: float, include_first_step: bool = False) -> float:
    """Geometric-series bound on ‖x0 − lim y_n‖.

    The stated form sums M C^n over n >= 1, giving MC/(1−C).  The movement of
    the very first step is also bounded only by M·disp0, so the sum over n >= 0,
    M/(1−C), is the bound that actually follows from the per-step estimates.
    """
    if C >= 1:
        return np.inf
    factor = M / (1.0 - C) if include_first_step else M * C / (1.0 - C)
    return factor * disp0


def iterate_to_fixed_point(action, h: GroupDensity, x0, tol: float = 1e-10, max_iters: int = 500,
                           stall_window: int = 10, contraction: float | None = None):
    """Iterate y_{n+1} = ρ(h) y_n until the K-displacement is at most ``tol``.

    ``contraction`` is the constant C used in the distance certificate
    ‖x0 − y‖ ≤ (MC/(1−C))·displacement(x0); by default the largest observed
    per-step displacement ratio is used.
    """
    partial = action if isinstance(action, PartialAlmostAction) else None
    base = partial.base if partial else action
    y = base._check_dim(x0).copy()
    x0 = y.copy()
    M_op, c_op = base.averaged_operator(h)
    if partial:
        partial._check_support(h)
    disp = [displacement(base, y)]
    moves: list[float] = []
    ratios: list[float] = []
    streak = 0
    steps = 0
    floor = 1e-13 * max(1.0, np.linalg.norm(x0))
    while disp[-1] > tol and steps < max_iters:
        if partial:
            partial._check_point(y, steps)
        y_next = M_op @ y + c_op
        steps += 1
        if partial and np.linalg.norm(y_next - partial.center) > partial.radius + partial.slack:
            raise DomainViolation("iterate left the admissible ball", step=steps)
        moves.append(float(np.linalg.norm(y_next - y)))
        y = y_next
        disp.append(displacement(base, y))
        ratio = disp[-1] / disp[-2] if disp[-2] > 0 else 0.0
        ratios.append(float(ratio))
        streak = streak + 1 if ratio >= 1.0 and disp[-1] > floor else 0
        if streak >= stall_window:
            raise NoContraction(f"no contraction observed over {stall_window} consecutive steps")
    M = h.radius
    informative = [r for r, d in zip(ratios, disp[:-1]) if d > 1e3 * floor]
    fitted = max(informative) if informative else 0.0
    C = fitted if contraction is None else contraction
    bound = fixed_point_distance_bound(M, C, disp[0])
    corrected = fixed_point_distance_bound(M, C, disp[0], include_first_step=True)
    travelled = float(np.linalg.norm(x0 - y))
    certs = {
        "converged": disp[-1] <= tol,
        "displacement_contracts": all(r <= C + 1e-12 for r, d in zip(ratios, disp[:-1]) if d > 1e3 * floor),
        "movement_bound": all(mv <= M * d * (1 + 1e-9) + 1e-15 for mv, d in zip(moves, disp[:-1])),
        "distance_bound": travelled <= bound * (1 + 1e-9) + 1e-12,
        "corrected_distance_bound": travelled <= corrected * (1 + 1e-9) + 1e-12,
    }
    report = IterationReport(steps, [float(d) for d in disp], moves, ratios, y, M, float(fitted),
                             float(bound), travelled, float(corrected), certs)
    return y, report


# -- partial almost actions --------------------------------------------------------

class PartialAlmostAction:
    """An action restricted to words in K^s and points in the ball B(x, r)."""

    def __init__(self, base: LinearAction, center, radius: float, s: int, slack: float = 1e-9,
                 samples: int = 200, seed: int = 0):
        if radius <= 0 or s < 1:
            raise ValueError("partial action needs r > 0 and s >= 1")
        self.base = base
        self.center = base._check_dim(center).copy()
        self.radius = float(radius)
        self.s = int(s)
        self.slack = slack
        self.words = base.group.ball(s)
        self.delta = displacement(base, self.center)
        self.epsilon = base.epsilon
        self.condition3_residual = self._validate_condition3(samples, seed)
        if self.condition3_residual > 1e-10:
            raise LabError("partial action violates the composition condition")

    def _validate_condition3(self, samples: int, seed: int) -> float:
        g = self.base.group
        rng = np.random.default_rng(seed)
        words = set(int(w) for w in self.words)
        pairs = [(a, b) for a in words for b in words if int(g.mul[a, b]) in words]
        worst = 0.0
        if not pairs:
            return worst
        r = self.radius if np.isfinite(self.radius) else 1.0
        for _ in range(samples):
            a, b = pairs[rng.integers(len(pairs))]
            u = rng.standard_normal(self.base.dim)
            y = self.center + r * rng.random() * u / np.linalg.norm(u)
            by = self.base.apply(b, y)
            if np.linalg.norm(by - self.center) > self.radius:
                continue
            lhs = self.base.apply(a, by)
            rhs = self.base.apply(int(g.mul[a, b]), y)
            worst = max(worst, float(np.linalg.norm(lhs - rhs)))
        return worst

    def _check_support(self, h: GroupDensity) -> None:
        if np.any(self.base.group.word_length[h.support] > self.s):
            raise DomainViolation("density support exceeds partial action")

    def _check_point(self, y, step: int | None = None) -> None:
        if np.linalg.norm(np.asarray(y) - self.center) > self.radius + self.slack:
            raise DomainViolation("iterate left the admissible ball", step=step)

    def average(self, h: GroupDensity, y) -> np.ndarray:
        self._check_support(h)
        y = self.base._check_dim(y)
        self._check_point(y)
        M, c = self.base.averaged_operator(h)
        return M @ y + c


def restrict_to_partial(action: LinearAction, x, r: float, s: int) -> PartialAlmostAction:
    return PartialAlmostAction(action, x, r, s)


# -- barycenters -------------------------------------------------------------------

@dataclass
class DiscreteMeasure:
    points: np.ndarray  # (n, dim)
    masses: np.ndarray

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.masses = np.asarray(self.masses, dtype=float)
        if self.points.shape[0] == 0:
            raise ValueError("measure must be nonempty")
        if self.masses.shape != (self.points.shape[0],) or np.any(self.masses < 0):
            raise ValueError("masses must be nonnegative, one per point")
        if abs(self.masses.sum() - 1.0) > 1e-12:
            raise ValueError("masses must sum to 1")

    @classmethod
    def uniform(cls, points) -> "DiscreteMeasure":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))

    def pushforward(self, g: Callable[[np.ndarray], np.ndarray]) -> "DiscreteMeasure":
        return DiscreteMeasure(np.array([g(p) for p in self.points]), self.masses.copy())

    def energy(self, x) -> float:
        """f_μ(x) = Σ a_i ‖y_i − x‖²."""
        return float(self.masses @ np.sum((self.points - x) ** 2, axis=1))

    def energy_gradient(self, x) -> np.ndarray:
        return 2.0 * self.masses @ (np.asarray(x) - self.points)


def barycenter(mu: DiscreteMeasure) -> tuple[np.ndarray, float]:
    """Mass-weighted mean and the minimal value m_μ of f_μ."""
    b = mu.masses @ mu.points
    grad = mu.energy_gradient(b)
    scale = max(1.0, float(np.abs(mu.points).max()))
    if np.linalg.norm(grad) > 1e-12 * scale:
        raise LabError("barycenter gradient check failed")
    return b, mu.energy(b)


def affine_defect(A: np.ndarray) -> float:
    s = np.linalg.svd(np.atleast_2d(A), compute_uv=False)
    return float(max(s[0] - 1.0, 1.0 - s[-1], 0.0))


def measured_defect(g: Callable, points: np.ndarray) -> float:
    """Largest |d(g x, g y)/d(x, y) − 1| over pairs of the given points."""
    pts = np.asarray(points, float)
    img = np.array([g(p) for p in pts])
    i, j = np.triu_indices(len(pts), 1)
    d0 = np.linalg.norm(pts[i] - pts[j], axis=1)
    d1 = np.linalg.norm(img[i] - img[j], axis=1)
    keep = d0 > 1e-12
    if not np.any(keep):
        return 0.0
    return float(np.abs(d1[keep] / d0[keep] - 1.0).max())


@dataclass
class BarycenterCheck:
    lhs: float
    bound: float
    eta: float
    m_mu: float

    @property
    def passed(self) -> bool:
        return self.lhs <= self.bound + 1e-12


def verify_barycenter_stability(g, mu: DiscreteMeasure, eta: float | None = None) -> BarycenterCheck:
    """Compare ‖g(b(μ)) − b(g_*μ)‖ with √(((1+η)^4 − 1) m_μ).

    ``g`` is either an ``(A, c)`` pair (affine map, η from its singular values)
    or a callable; for callables η must be given or is measured on the
    support together with b(μ).
    """
    if isinstance(g, tuple):
        A, c = np.asarray(g[0], float), np.asarray(g[1], float)
        fn = lambda y: A @ y + c  # noqa: E731
        if eta is None:
            eta = affine_defect(A)
    else:
        fn = g
    b, m_mu = barycenter(mu)
    if eta is None:
        eta = measured_defect(fn, np.vstack([mu.points, b]))
    b_push, _ = barycenter(mu.pushforward(fn))
    lhs = float(np.linalg.norm(fn(b) - b_push))
    bound = float(np.sqrt(max(((1 + eta) ** 4 - 1) * m_mu, 0.0)))
    return BarycenterCheck(lhs, bound, float(eta), m_mu)


def verify_almost_affine(f: Callable, A, B, t: float) -> float:
    """‖f(tA + (1−t)B) − (t f(A) + (1−t) f(B))‖."""
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    return float(np.linalg.norm(f(t * A + (1 - t) * B) - (t * f(A) + (1 - t) * f(B))))


def affine_combination_gap(xs, ys, coeffs) -> tuple[float, float]:
    """(‖Σ a_i x_i − Σ a_i y_i‖, (Σ|a_i|)·max_i ‖x_i − y_i‖)."""
    xs, ys, a = np.asarray(xs, float), np.asarray(ys, float), np.asarray(coeffs, float)
    gap = float(np.linalg.norm(a @ xs - a @ ys))
    eta = float(np.linalg.norm(xs - ys, axis=1).max())
    return gap, float(np.abs(a).sum() * eta)


def verify_convolution_composition(action: LinearAction, mu: GroupDensity, lam: GroupDensity, x) -> float:
    """‖ρ(μ)(ρ(λ)x) − ρ(μ*λ)x‖."""
    x = action._check_dim(x)
    lhs = average(action, mu, average(action, lam, x))
    rhs = average(action, convolve(mu, lam), x)
    return float(np.linalg.norm(lhs - rhs))


def orbit_diameter(action: LinearAction, x) -> float:
    pts = np.einsum("gij,j->gi", action.A, x) + action.b
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.linalg.norm(diff, axis=2).max())


def random_unitary_action(group: FiniteGroup, rng: np.random.Generator, max_dim: int = 48,
                          blocks: Sequence[LinearAction] | None = None) -> LinearAction:
    """Random orthogonal conjugate of a direct sum of standard representations."""
    if blocks is None:
        pool = [regular_representation(group), trivial_representation(group)]
        if group.kind == "permutation":
            pool.append(permutation_representation(group))
        if group.kind in ("cyclic", "dihedral"):
            pool.append(rotation_representation(group))
        chosen = []
        dim = 0
        while True:
            cand = pool[rng.integers(len(pool))]
            if dim + cand.dim > max_dim:
                break
            chosen.append(cand)
            dim += cand.dim
            if len(chosen) >= 1 and rng.random() < 0.4:
                break
        if not chosen:
            chosen = [min(pool, key=lambda a: a.dim)]
        blocks = chosen
    act = direct_sum(*blocks)
    Q = random_orthogonal(act.dim, rng)
    return conjugate(act, Q, kind=UNITARY)
