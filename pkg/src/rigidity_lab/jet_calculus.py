"""Jets of circle maps as matrices, block-triangular product bounds, and interpolation.

Jets of functions are row vectors (f, f′, …, f^{(k)}).  A map φ acts on them
by the matrix M_φ(x) with ``jet(f∘φ, x) = jet(f, φ(x)) @ M_φ(x)``, whose
entries are partial Bell polynomials in the derivatives of φ.  On S^1 every
diagonal block is 1 x 1 and equals (φ′)^j.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

from .errors import LabError
from .function_spaces import (TWO_PI, CircleMap, PeriodicFunction, ck_norm, sobolev_norm,
                              wrap_angle)
from .groups import GroupDensity


def bell_matrix(derivs: Sequence[float], k: int) -> np.ndarray:
    """Matrix B[j, n] = B_{n,j}(x_1, …, x_{n−j+1}) of partial Bell polynomials, 0 ≤ j, n ≤ k.

    ``derivs[i]`` is the (i+1)-th derivative x_{i+1}.
    """
    x = np.zeros(k + 1)
    x[1:] = np.asarray(derivs, dtype=float)[:k]
    B = np.zeros((k + 1, k + 1))
    B[0, 0] = 1.0
    for n in range(1, k + 1):
        for j in range(1, n + 1):
            B[j, n] = sum(comb(n - 1, i - 1) * x[i] * B[j - 1, n - i] for i in range(1, n - j + 2))
    return B


@dataclass(frozen=True)
class BlockType:
    sizes: tuple[int, ...]

    def __post_init__(self):
        if not self.sizes or any(int(s) <= 0 for s in self.sizes):
            raise ValueError("block sizes must be positive")

    @property
    def N(self) -> int:
        return int(sum(self.sizes))

    @classmethod
    def scalar(cls, N: int) -> "BlockType":
        return cls(tuple([1] * N))

    def block_index(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.sizes)), self.sizes)

    def offsets(self) -> list[tuple[int, int]]:
        out, o = [], 0
        for s in self.sizes:
            out.append((o, o + s))
            o += s
        return out


@dataclass
class JetMatrix:
    matrix: np.ndarray
    base: float
    image: float

    @property
    def k(self) -> int:
        return self.matrix.shape[0] - 1

    @property
    def block_type(self) -> BlockType:
        return BlockType.scalar(self.k + 1)

    def apply(self, jet_at_image) -> np.ndarray:
        """Jet of f∘φ at ``base`` from the jet of f at ``image``."""
        return np.asarray(jet_at_image, dtype=float) @ self.matrix

    def max_entry(self) -> float:
        return float(np.abs(self.matrix).max())


def jet_matrix(phi: CircleMap, x: float, k: int) -> JetMatrix:
    derivs = [float(phi(np.array([x]), deriv=j)[0]) for j in range(1, k + 1)]
    image = float(np.mod(phi(np.array([x]))[0], TWO_PI))
    return JetMatrix(bell_matrix(derivs, k), float(np.mod(x, TWO_PI)), image)


def jet_matrices_on_grid(phi: CircleMap, k: int, points=None) -> np.ndarray:
    """Stack of jet matrices of φ at the given points (default: φ's grid)."""
    pts = phi.eta.grid if points is None else np.asarray(points, dtype=float)
    D = np.stack([phi(pts, deriv=j) for j in range(1, k + 1)], axis=1) if k else np.zeros((len(pts), 0))
    return np.stack([bell_matrix(row, k) for row in D])


def compose_jets(A: JetMatrix, B: JetMatrix, tol: float = 1e-9) -> JetMatrix:
    """Jet matrix of φ∘ψ at x from A = M_φ(ψ(x)) and B = M_ψ(x)."""
    if abs(wrap_angle(A.base - B.image)) > tol:
        raise LabError("jet base points do not chain")
    if A.k != B.k:
        raise LabError("jet orders differ")
    return JetMatrix(A.matrix @ B.matrix, B.base, A.image)


# -- block-triangular products -----------------------------------------------------------

def check_block_type(M: np.ndarray, btype: BlockType, tol: float = 0.0) -> None:
    idx = btype.block_index()
    below = idx[:, None] > idx[None, :]
    if M.shape != (btype.N, btype.N) or np.any(np.abs(M[below]) > tol):
        raise LabError("block structure violated")


@dataclass
class BoundCheck:
    lhs: float
    rhs: float
    C1: float
    C2: float

    @property
    def passed(self) -> bool:
        return bool(self.lhs <= self.rhs * (1 + 1e-12))

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def Q(x: float, N: int) -> float:
    return float((1.0 + x) ** N)


def block_product_bound(mats: Sequence[np.ndarray], btype: BlockType) -> BoundCheck:
    """max-entry norm of M_1⋯M_j against C_1^j Q(j C_2), Q(x) = (1+x)^N.

    C_1 is the largest spectral norm of a diagonal block, floored at 1, and
    C_2 the largest absolute entry outside the diagonal blocks.
    """
    mats = [np.asarray(M, dtype=float) for M in mats]
    if not mats:
        raise ValueError("need at least one matrix")
    idx = btype.block_index()
    off = idx[:, None] != idx[None, :]
    C1 = 1.0
    C2 = 0.0
    for M in mats:
        check_block_type(M, btype)
        for a, b in btype.offsets():
            C1 = max(C1, float(np.linalg.norm(M[a:b, a:b], 2)))
        if off.any():
            C2 = max(C2, float(np.abs(M[off]).max()))
    P = mats[0]
    for M in mats[1:]:
        P = P @ M
    j = len(mats)
    return BoundCheck(float(np.abs(P).max()), C1 ** j * Q(j * C2, btype.N), C1, C2)


def random_block_matrices(rng: np.random.Generator, N_max: int = 6, j_max: int = 40):
    """Random block type and a random list of block upper triangular matrices of that type."""
    N = int(rng.integers(1, N_max + 1))
    sizes = []
    left = N
    while left:
        s = int(rng.integers(1, left + 1))
        sizes.append(s)
        left -= s
    btype = BlockType(tuple(sizes))
    j = int(rng.integers(1, j_max + 1))
    idx = btype.block_index()
    below = idx[:, None] > idx[None, :]
    scale = rng.choice([0.1, 0.5, 1.0, 2.0])
    mats = []
    for _ in range(j):
        M = scale * rng.standard_normal((N, N))
        M[below] = 0.0
        mats.append(M)
    return mats, btype


# -- composition estimates -----------------------------------------------------------------

def map_jet_norm(phi: CircleMap, k: int) -> float:
    """‖φ‖_k: sup over the grid of the max-entry norm of the k-jet matrix."""
    return float(np.abs(jet_matrices_on_grid(phi, k)).max())


def composition_norm_bound(maps: Sequence[CircleMap], k: int, points=None) -> BoundCheck:
    """‖φ_1∘…∘φ_n‖_k against N_1^{kn} Q(n N_k) with N = k + 1.

    The composed jet matrix is accumulated along orbits
    (functoriality), so no resampling of the composed map is needed.
    """
    n = len(maps)
    if n == 0:
        raise ValueError("need at least one map")
    pts = maps[-1].eta.grid if points is None else np.asarray(points, dtype=float)
    N1 = max(map_jet_norm(phi, 1) for phi in maps)
    Nk = max(map_jet_norm(phi, k) for phi in maps)
    x = pts.copy()
    P = np.broadcast_to(np.eye(k + 1), (len(pts), k + 1, k + 1)).copy()
    # φ_1∘…∘φ_n: the innermost map φ_n acts first
    for phi in reversed(maps):
        Mx = jet_matrices_on_grid(phi, k, x)
        P = np.einsum("pij,pjl->pil", Mx, P)
        x = np.mod(phi(x), TWO_PI)
    lhs = float(np.abs(P).max())
    return BoundCheck(lhs, N1 ** (k * n) * Q(n * Nk, k + 1), N1, Nk)


def averaged_operator_bound(maps: dict[int, CircleMap], h: GroupDensity, n: int, k: int,
                            corpus: Sequence[PeriodicFunction]) -> BoundCheck:
    """Corpus estimate of ‖ρ′(h)^n‖ on C^k against N_1^{kn} Q(n N_k), N_i over supp(h)."""
    supp = [int(g) for g in h.support]
    N1 = max(map_jet_norm(maps[g], 1) for g in supp)
    Nk = max(map_jet_norm(maps[g], k) for g in supp)
    worst = 0.0
    for f in corpus:
        g = f
        for _ in range(n):
            vals = sum(h(a) * g(np.mod(maps[a](g.grid), TWO_PI)) for a in supp)
            g = PeriodicFunction(vals, g.band)
        den = ck_norm(f, k)
        if den > 0:
            worst = max(worst, ck_norm(g, k) / den)
    return BoundCheck(worst, N1 ** (k * n) * Q(n * Nk, k + 1), N1, Nk)


# -- interpolation inequality -------------------------------------------------------------

def homogeneous_seminorm(f: PeriodicFunction, s: int) -> float:
    """‖f^{(s)}‖_{L²} with normalised measure, i.e. (Σ_j |j|^{2s} |f̂_j|²)^{1/2}."""
    d = f.derivative_samples(s)
    return float(np.sqrt(np.mean(d ** 2)))


@dataclass
class InterpolationCheck:
    lhs: float
    rhs: float
    B: float
    lam: float

    @property
    def passed(self) -> bool:
        return bool(self.lhs <= self.B * self.rhs * (1 + 1e-12) + 1e-300)

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else 0.0


def _grading(a: int, b: int, c: int) -> float:
    if not (a < c < b):
        raise LabError("grading violated: need a < c < b")
    return (c - a) / (b - a)


def interpolation_check(f: PeriodicFunction, a: int, b: int, c: int, regime: str = "spectral",
                        B: float = 1.0) -> InterpolationCheck:
    """‖f‖_c against B ‖f‖_a^{1−λ} ‖f‖_b^λ.

    regime "spectral": homogeneous L² seminorms of derivatives, where B = 1 is exact;
    regime "sobolev": the L^{2,s} norms (all derivatives up to s);
    regime "ck": C^s norms.
    """
    lam = _grading(a, b, c)
    if regime == "spectral":
        nrm = lambda s: homogeneous_seminorm(f, s)  # noqa: E731
    elif regime == "sobolev":
        nrm = lambda s: sobolev_norm(f, s, 2.0)  # noqa: E731
    elif regime == "ck":
        nrm = lambda s: ck_norm(f, s)  # noqa: E731
    else:
        raise ValueError(f"unknown regime {regime!r}")
    lhs = nrm(c)
    rhs = nrm(a) ** (1 - lam) * nrm(b) ** lam
    return InterpolationCheck(lhs, rhs, B, lam)


def fitted_interpolation_constant(corpus: Sequence[PeriodicFunction], a: int, b: int, c: int,
                                  regime: str = "ck") -> float:
    return float(max(interpolation_check(f, a, b, c, regime).ratio for f in corpus))
