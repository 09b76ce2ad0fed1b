"""Band-limited functions on S^1 and T^2, circle diffeomorphisms, and jet-based norms.

Functions are stored twice, as samples on a uniform grid and as the
band-truncated discrete Fourier coefficients, and the two views are kept
consistent.  Derivatives are spectral.  On T^2 = S^1 x S^1 the leaves are
the vertical circles, so derivatives act along the second coordinate and
norms integrate over both.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import LabError, ResolutionError

TWO_PI = 2.0 * np.pi
JET_DYNAMIC_RANGE = 1e13
SOBOLEV_MAX_GRID = 1 << 16
MAX_GRID = 16384
BAND_TAIL_TOL = 1e-13


def max_jet_order(band: int) -> int:
    """Largest k for which band^k stays inside the usable dynamic range."""
    if band <= 1:
        return 64
    return int(np.floor(np.log(JET_DYNAMIC_RANGE) / np.log(band)))


def wrap_angle(x):
    """Map angles into (−π, π]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), TWO_PI)


class PeriodicFunction:
    """Real band-limited function (scalar or R^n valued) on S^1 or T^2."""

    def __init__(self, samples, band: int | None = None, space: str = "S1"):
        if space not in ("S1", "T2"):
            raise ValueError("space must be 'S1' or 'T2'")
        self.space = space
        self.nspatial = 1 if space == "S1" else 2
        samples = np.asarray(samples, dtype=float)
        if samples.ndim < self.nspatial:
            raise ValueError("too few sample axes")
        N = samples.shape[0]
        if self.nspatial == 2 and samples.shape[1] != N:
            raise ValueError("torus samples must be square")
        self.N = N
        if band is None:
            band = N // 2
        if band > N // 2 or band < 0:
            raise ResolutionError(f"band {band} exceeds N/2 = {N // 2}")
        self.band = int(band)
        self.value_shape = samples.shape[self.nspatial:]
        axes = tuple(range(self.nspatial))
        freqs = np.fft.fftfreq(N, 1.0 / N)
        mask = np.abs(freqs) <= self.band
        coeffs = np.fft.fft(samples, axis=0)
        coeffs[~mask] = 0
        if self.nspatial == 2:
            coeffs = np.fft.fft(coeffs, axis=1)
            coeffs[:, ~mask] = 0
        self.coeffs = coeffs
        self.samples = np.ascontiguousarray(np.real(np.fft.ifftn(coeffs, axes=axes)))
        self.samples.setflags(write=False)
        self.coeffs.setflags(write=False)
        self._freqs = freqs
        self._deriv_cache: dict[int, np.ndarray] = {}

    # -- construction --------------------------------------------------------
    @classmethod
    def from_callable(cls, fn: Callable, N: int, band: int | None = None, space: str = "S1"):
        theta = grid(N)
        if space == "S1":
            return cls(fn(theta), band, space)
        t1, t2 = np.meshgrid(theta, theta, indexing="ij")
        return cls(fn(t1, t2), band, space)

    @classmethod
    def constant(cls, value: float, N: int, band: int | None = None, space: str = "S1"):
        shape = (N,) if space == "S1" else (N, N)
        return cls(np.full(shape, float(value)), band, space)

    @classmethod
    def from_modes(cls, modes: dict[int, complex], N: int, band: int | None = None):
        """Real part of Σ c_j e^{ijθ} for the given integer frequencies."""
        theta = grid(N)
        vals = np.zeros(N, dtype=complex)
        for j, c in modes.items():
            vals += c * np.exp(1j * j * theta)
        return cls(vals.real, band)

    # -- basic properties -------------------------------------------------------
    @property
    def grid(self) -> np.ndarray:
        return grid(self.N)

    @property
    def k_max(self) -> int:
        return max_jet_order(self.band)

    def __repr__(self) -> str:
        return f"PeriodicFunction({self.space}, N={self.N}, band={self.band}, values={self.value_shape})"

    def _like(self, samples, band=None) -> "PeriodicFunction":
        return PeriodicFunction(samples, self.band if band is None else band, self.space)

    def __add__(self, other):
        if isinstance(other, PeriodicFunction):
            _check_same_grid(self, other)
            return self._like(self.samples + other.samples, max(self.band, other.band))
        return self._like(self.samples + other)

    def __sub__(self, other):
        if isinstance(other, PeriodicFunction):
            _check_same_grid(self, other)
            return self._like(self.samples - other.samples, max(self.band, other.band))
        return self._like(self.samples - other)

    def __mul__(self, c):
        return self._like(self.samples * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return self._like(-self.samples)

    # -- spectral calculus -----------------------------------------------------
    def _check_order(self, k: int) -> None:
        if k < 0:
            raise ValueError("derivative order must be nonnegative")
        if k > self.k_max:
            raise ResolutionError(f"jet order exceeds resolution (k={k} > k_max={self.k_max} at band {self.band})")

    def _leaf_multiplier(self, j: int) -> np.ndarray:
        mult = (1j * self._freqs) ** j
        if j % 2 == 1 and self.N % 2 == 0:
            mult[self.N // 2] = 0.0  # the Nyquist mode has no well-defined odd derivative
        shape = [1] * self.coeffs.ndim
        leaf = self.nspatial - 1
        shape[leaf] = self.N
        return mult.reshape(shape)

    def derivative_samples(self, j: int) -> np.ndarray:
        self._check_order(j)
        if j == 0:
            return self.samples
        if j not in self._deriv_cache:
            axes = tuple(range(self.nspatial))
            d = np.ascontiguousarray(np.real(np.fft.ifftn(self.coeffs * self._leaf_multiplier(j), axes=axes)))
            d.setflags(write=False)
            self._deriv_cache[j] = d
        return self._deriv_cache[j]

    def derivative(self, j: int = 1) -> "PeriodicFunction":
        return self._like(self.derivative_samples(j))

    def jet_samples(self, k: int) -> np.ndarray:
        """Array of shape (k+1, grid..., values...) with f, f′, …, f^{(k)} on the grid."""
        return np.stack([self.derivative_samples(j) for j in range(k + 1)])

    def _band_coeffs(self):
        freqs = np.arange(-self.band, self.band + 1)
        idx = np.mod(freqs, self.N)
        c = self.coeffs[idx] / self.N
        if self.band == self.N // 2 and self.N % 2 == 0:
            # both ±N/2 map to one stored coefficient; split it evenly
            c = c.copy()
            c[0] *= 0.5
            c[-1] *= 0.5
        return freqs, c

    def __call__(self, x, deriv: int = 0):
        """Evaluate (a derivative of) the trigonometric interpolant at arbitrary points of S^1."""
        if self.space != "S1":
            raise LabError("pointwise evaluation is implemented for S^1 functions")
        self._check_order(deriv)
        x = np.asarray(x, dtype=float)
        freqs, c = self._band_coeffs()
        E = np.exp(1j * np.multiply.outer(x, freqs))
        w = (1j * freqs) ** deriv
        vals = np.tensordot(E * w, c, axes=([-1], [0]))
        return np.real(vals)

    def evaluation_matrix(self, x, deriv: int = 0) -> np.ndarray:
        """Real matrix mapping grid samples to values of the interpolant at x."""
        x = np.asarray(x, dtype=float)
        return interpolation_matrix(self.N, self.band, x, deriv)

    def jet(self, x, k: int) -> np.ndarray:
        self._check_order(k)
        return np.array([self(x, deriv=j) for j in range(k + 1)])

    def resample(self, N: int, band: int | None = None) -> "PeriodicFunction":
        """Same trigonometric polynomial on an N-point grid (band clipped to N/2)."""
        b = min(self.band if band is None else band, N // 2)
        if self.space == "S1":
            if N < self.N:
                return PeriodicFunction(self(grid(N)), b, "S1")
            freqs, c = self._band_coeffs()
            spec = np.zeros((N,) + self.value_shape, dtype=complex)
            np.add.at(spec, np.mod(freqs, N), c * N)
            return PeriodicFunction(np.real(np.fft.ifft(spec, axis=0)), b, "S1")
        coeffs = _pad_coeffs(self.coeffs, self.N, N, axes=(0, 1))
        vals = np.real(np.fft.ifftn(coeffs, axes=(0, 1))) * (N / self.N) ** 2
        return PeriodicFunction(vals, b, "T2")

    def tail_ratio(self) -> float:
        """Largest |coefficient| in the top octave of the band relative to the largest overall."""
        mags = np.abs(self.coeffs)
        if self.nspatial == 1:
            f = np.abs(self._freqs)
            top = mags[f > self.band / 2].max(initial=0.0)
        else:
            f = np.maximum(np.abs(self._freqs)[:, None], np.abs(self._freqs)[None, :])
            top = mags[f > self.band / 2].max(initial=0.0)
        ref = mags.max(initial=0.0)
        return float(top / ref) if ref > 0 else 0.0

    def coefficient_list(self) -> list[list[float]]:
        """Coefficients for frequencies −B..B as [re, im] pairs (S^1 scalar functions)."""
        _, c = self._band_coeffs()
        return [[float(z.real), float(z.imag)] for z in np.ravel(c)]


def grid(N: int) -> np.ndarray:
    return TWO_PI * np.arange(N) / N


def _check_same_grid(a: PeriodicFunction, b: PeriodicFunction) -> None:
    if a.N != b.N or a.space != b.space:
        raise LabError("functions live on different grids")


def _pad_coeffs(c: np.ndarray, N: int, M: int, axes=(0,)) -> np.ndarray:
    out = c
    for ax in axes:
        shape = list(out.shape)
        shape[ax] = M
        new = np.zeros(shape, dtype=complex)
        half = min(N, M) // 2
        src = [slice(None)] * out.ndim
        dst = [slice(None)] * out.ndim
        src[ax], dst[ax] = slice(0, half), slice(0, half)
        new[tuple(dst)] = out[tuple(src)]
        src[ax], dst[ax] = slice(N - half, N), slice(M - half, M)
        new[tuple(dst)] = out[tuple(src)]
        out = new
    return out


def interpolation_matrix(N: int, band: int, x, deriv: int = 0) -> np.ndarray:
    """Matrix E with E @ samples = value (or derivative) of the band-B interpolant at points x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    freqs = np.arange(-band, band + 1)
    w = np.ones(len(freqs))
    if band == N // 2 and N % 2 == 0:
        w[0] = w[-1] = 0.5
    th = grid(N)
    # coefficient c_j = (1/N) Σ_n f_n e^{-ijθ_n}; value Σ_j c_j (ij)^d e^{ijx}
    F = np.exp(-1j * np.multiply.outer(freqs, th)) / N
    E = np.exp(1j * np.multiply.outer(x, freqs)) * (w * (1j * freqs) ** deriv)
    return np.ascontiguousarray(np.real(E @ F))


# -- norms --------------------------------------------------------------------------

@dataclass(frozen=True)
class NormSpec:
    """Norm selector: integer or fractional k; p in (1, ∞) or the tag "C"."""

    k: float
    p: float | str = 2.0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be nonnegative")
        if self.p != "C":
            if not isinstance(self.p, (int, float)) or not (1 < float(self.p) < np.inf):
                raise ValueError("p must lie in (1, inf) or be 'C'")

    @property
    def is_sup(self) -> bool:
        return self.p == "C"

    @property
    def fractional(self) -> bool:
        return float(self.k) != int(self.k)

    def __str__(self) -> str:
        return f"C^{self.k}" if self.is_sup else f"L^({self.p},{self.k})"


def _jet_length_sq(f: PeriodicFunction, k: int) -> np.ndarray:
    J = f.jet_samples(k)
    sq = J ** 2
    # sum over derivative order and value components, keep spatial axes
    axes = (0,) + tuple(range(1 + f.nspatial, sq.ndim))
    return sq.sum(axis=axes)


def sobolev_norm(f: PeriodicFunction, k: int, p: float = 2.0) -> float:
    """(mean over the torus/circle of |j^k f|^p)^{1/p}, mean = normalised trapezoid rule."""
    if int(k) != k:
        raise ValueError("Sobolev norms need integer k")
    k = int(k)
    f._check_order(k)
    # oversample so that even powers of the jet are integrated without aliasing
    q = f
    target = 2 * int(np.ceil(p / 2.0 + 1)) * f.band + 2
    if f.space == "S1" and f.N < target:
        q = f.resample(int(2 ** np.ceil(np.log2(target))))
    L = _jet_length_sq(q, k)
    value = float(np.mean(L ** (p / 2.0)))
    if f.space == "S1" and (p / 2.0) != int(p / 2.0):
        # |j^k f|^p is not a trigonometric polynomial (kinks where the jet vanishes),
        # so refine the grid until the quadrature settles
        N = q.N
        while N < SOBOLEV_MAX_GRID:
            N *= 2
            finer = float(np.mean(_jet_length_sq(f.resample(N), k) ** (p / 2.0)))
            done = abs(finer - value) <= 1e-14 * max(finer, 1e-300)
            value = finer
            if done:
                break
    return value ** (1.0 / p)


def ck_norm(f: PeriodicFunction, k: int, refine: bool = True) -> float:
    """sup over the space of the Euclidean length of the k-jet."""
    k = int(k)
    f._check_order(k)
    L = _jet_length_sq(f, k)
    best = float(L.max())
    if not refine or f.space != "S1" or best == 0:
        return float(np.sqrt(best))
    N = f.N
    h = TWO_PI / N
    is_peak = (L >= np.roll(L, 1)) & (L >= np.roll(L, -1))
    peaks = np.flatnonzero(is_peak)
    peaks = peaks[np.argsort(L[peaks])[::-1][:6]]

    freqs, c = f._band_coeffs()
    weights = np.stack([(1j * freqs) ** j for j in range(k + 1)])[(...,) + (None,) * (c.ndim - 1)] * c

    def neg_len(theta):
        e = np.exp(1j * freqs * theta)
        vals = np.real(np.tensordot(weights, e, axes=([1], [0])))
        return -float(np.sum(vals ** 2))

    for i in peaks:
        th = f.grid[i]
        res = optimize.minimize_scalar(neg_len, bounds=(th - h, th + h), method="bounded",
                                       options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return float(np.sqrt(best))


def _holder_seminorm(D: np.ndarray, alpha: float, nspatial: int) -> float:
    """sup over leafwise grid pairs at arc distance ≥ spacing of |D(a) − D(b)| / d(a, b)^α."""
    leaf = nspatial - 1
    N = D.shape[leaf]
    best = 0.0
    for s in range(1, N // 2 + 1):
        d = TWO_PI * s / N
        diff = np.roll(D, -s, axis=leaf) - D
        if D.ndim > nspatial:
            mag = np.sqrt(np.sum(diff ** 2, axis=tuple(range(nspatial, D.ndim))))
        else:
            mag = np.abs(diff)
        best = max(best, float(mag.max()) / d ** alpha)
    return best


def holder_norm(f: PeriodicFunction, k: float) -> float:
    """‖f‖_{C^{k′}} plus the α-Hölder quotient of f^{(k′)}, k = k′ + α."""
    kp = int(np.floor(k))
    alpha = k - kp
    base = ck_norm(f, kp)
    if alpha == 0:
        return base
    return base + _holder_seminorm(f.derivative_samples(kp), alpha, f.nspatial)


def norm(f: PeriodicFunction, spec: NormSpec) -> float:
    if spec.is_sup:
        return holder_norm(f, spec.k) if spec.fractional else ck_norm(f, int(spec.k))
    if spec.fractional:
        raise ValueError("fractional Sobolev norms are not supported")
    return sobolev_norm(f, int(spec.k), float(spec.p))


# -- circle maps -----------------------------------------------------------------------

class CircleMap:
    """Diffeomorphism of S^1 given by the lift F(θ) = sθ + η(θ), s = ±1, η periodic."""

    def __init__(self, eta: PeriodicFunction, orientation: int = 1, check: bool = True):
        if eta.space != "S1" or eta.value_shape != ():
            raise LabError("circle maps need a scalar function on S^1")
        if orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        self.eta = eta
        self.orientation = orientation
        if check:
            dmin = float(np.min(1.0 + orientation * eta.derivative_samples(1)))
            if dmin <= 0:
                raise LabError("not a diffeomorphism: derivative changes sign")

    # -- constructors ----------------------------------------------------------
    @classmethod
    def identity(cls, N: int, band: int | None = None) -> "CircleMap":
        return cls(PeriodicFunction.constant(0.0, N, band))

    @classmethod
    def rotation(cls, alpha: float, N: int, band: int | None = None) -> "CircleMap":
        return cls(PeriodicFunction.constant(alpha, N, band))

    @classmethod
    def reflection(cls, alpha: float, N: int, band: int | None = None) -> "CircleMap":
        """θ ↦ −θ + α."""
        return cls(PeriodicFunction.constant(alpha, N, band), orientation=-1)

    @classmethod
    def isometry(cls, alpha: float, orientation: int, N: int, band: int | None = None) -> "CircleMap":
        return cls(PeriodicFunction.constant(alpha, N, band), orientation)

    @classmethod
    def from_displacement(cls, fn: Callable, N: int, band: int | None = None, orientation: int = 1):
        return cls(PeriodicFunction.from_callable(fn, N, band), orientation)

    @classmethod
    def from_lift_samples(cls, values, orientation: int, band: int | None = None, check: bool = True):
        values = np.asarray(values, dtype=float)
        th = grid(len(values))
        return cls(PeriodicFunction(values - orientation * th, band), orientation, check)

    # -- properties ------------------------------------------------------------
    @property
    def N(self) -> int:
        return self.eta.N

    @property
    def band(self) -> int:
        return self.eta.band

    def __repr__(self) -> str:
        return f"CircleMap(N={self.N}, band={self.band}, orientation={self.orientation:+d})"

    def lift_samples(self) -> np.ndarray:
        return self.orientation * self.eta.grid + self.eta.samples

    def __call__(self, theta, deriv: int = 0):
        """Lift F (deriv = 0) or its derivatives at arbitrary θ."""
        theta = np.asarray(theta, dtype=float)
        if deriv == 0:
            return self.orientation * theta + self.eta(theta)
        val = self.eta(theta, deriv=deriv)
        if deriv == 1:
            val = val + self.orientation
        return val

    def derivative_samples(self, j: int) -> np.ndarray:
        if j == 0:
            return self.lift_samples()
        d = self.eta.derivative_samples(j)
        return d + self.orientation if j == 1 else d

    def jet(self, x, k: int) -> np.ndarray:
        return np.array([self(x, deriv=j) for j in range(k + 1)])

    def is_isometry(self, tol: float = 1e-12) -> bool:
        return float(np.abs(self.eta.samples - self.eta.samples.mean()).max()) <= tol

    # -- group operations -------------------------------------------------------
    def compose(self, other: "CircleMap", band_cap: int | None = None) -> "CircleMap":
        """self ∘ other."""
        s1 = self.orientation
        N = max(self.N, other.N)
        band = max(self.band, other.band)

        def eta_fn(theta):
            G = other(theta)
            return s1 * other.eta(theta) + self.eta(G)

        eta = rebanded(eta_fn, N, band, band_cap)
        return CircleMap(eta, s1 * other.orientation, check=False)

    def __matmul__(self, other: "CircleMap") -> "CircleMap":
        return self.compose(other)

    def inverse(self, tol: float = 1e-14, band_cap: int | None = None) -> "CircleMap":
        """Inverse by Newton iteration on the lift."""
        s = self.orientation

        def eta_fn(theta):
            G = s * (theta - self.eta(theta))
            for _ in range(100):
                r = self(G) - theta
                dG = r / self(G, deriv=1)
                G = G - dG
                if np.abs(dG).max() <= tol:
                    break
            else:
                raise LabError("Newton iteration for the inverse did not converge")
            return G - s * theta

        eta = rebanded(eta_fn, self.N, self.band, band_cap)
        return CircleMap(eta, s, check=False)

    def pushforward_points(self, theta) -> np.ndarray:
        return np.mod(self(theta), TWO_PI)


def rebanded(fn: Callable, N: int, band: int, band_cap: int | None = None) -> PeriodicFunction:
    """Sample fn on the N grid at band B; double both while the spectrum overflows the band."""
    cap = band_cap if band_cap is not None else max(4 * band, band)
    while True:
        theta = grid(N)
        vals = fn(theta)
        c = np.abs(np.fft.fft(vals)) / N
        freqs = np.abs(np.fft.fftfreq(N, 1.0 / N))
        ref = max(c.max(), 1.0)
        tail = c[freqs > band].max(initial=0.0)
        if tail <= BAND_TAIL_TOL * ref:
            return PeriodicFunction(vals, band)
        if 2 * band > cap or 2 * N > MAX_GRID:
            raise ResolutionError("resolution exhausted")
        band *= 2
        N = max(N, 2 * band) if 2 * band > N // 2 else N
        if band > N // 2:
            N = 2 * band


def circle_map_distance(phi: CircleMap, psi: CircleMap, k: int) -> float:
    """C^k distance between lifts, the constant part of the difference reduced mod 2π."""
    if phi.orientation != psi.orientation:
        return np.inf
    N = max(phi.N, psi.N)
    th = grid(N)
    diff = phi(th) - psi(th)
    diff = diff - TWO_PI * np.round(np.mean(diff) / TWO_PI)
    band = min(max(phi.band, psi.band), N // 2)
    return ck_norm(PeriodicFunction(diff, band), k)


def pullback(f: PeriodicFunction, phi: CircleMap, band_cap: int | None = None) -> PeriodicFunction:
    """f ∘ φ, re-banded (with band doubling) onto a grid at least as fine as f's."""
    if f.space != "S1":
        raise LabError("pullback by circle maps is implemented on S^1")
    N = max(f.N, phi.N)
    band = max(f.band, phi.band)

    def fn(theta):
        return f(np.mod(phi(theta), TWO_PI))

    if f.value_shape:
        comps = [pullback(PeriodicFunction(f.samples[..., i], f.band), phi, band_cap)
                 for i in range(f.value_shape[0])]
        Nc = max(c.N for c in comps)
        bc = max(c.band for c in comps)
        comps = [c if c.N == Nc else c.resample(Nc, bc) for c in comps]
        return PeriodicFunction(np.stack([c.samples for c in comps], axis=-1), bc)
    return rebanded(fn, N, band, band_cap)


# -- corpora and checks -------------------------------------------------------------------

def standard_corpus(N: int, band: int | None = None, count: int = 6, seed: int = 0,
                    max_mode: int = 4) -> list[PeriodicFunction]:
    """Pure modes sin jθ, cos jθ plus a few random low-band trigonometric polynomials."""
    out = []
    for j in range(1, max_mode + 1):
        out.append(PeriodicFunction.from_callable(lambda t, j=j: np.sin(j * t), N, band))
        out.append(PeriodicFunction.from_callable(lambda t, j=j: np.cos(j * t), N, band))
    rng = np.random.default_rng(seed)
    for _ in range(count):
        out.append(random_trig_polynomial(N, 8, rng, band))
    return out


def random_trig_polynomial(N: int, top: int, rng: np.random.Generator, band: int | None = None,
                           decay: float = 1.0) -> PeriodicFunction:
    modes = {j: (rng.standard_normal() + 1j * rng.standard_normal()) / (1 + j) ** decay
             for j in range(0, top + 1)}
    return PeriodicFunction.from_modes(modes, N, band)


def verify_almost_isometry_of_pullback(phi_prime: CircleMap, phi: CircleMap, spec: NormSpec,
                                       corpus: Sequence[PeriodicFunction] | None = None) -> float:
    """max over the corpus of |‖f∘φ′‖ / ‖f∘φ‖ − 1|."""
    if corpus is None:
        corpus = standard_corpus(phi.N, phi.band)
    worst = 0.0
    for f in corpus:
        a = norm(pullback(f, phi_prime), spec)
        b = norm(pullback(f, phi), spec)
        if b > 0:
            worst = max(worst, abs(a / b - 1.0))
    return float(worst)


def sobolev_embedding_check(corpus: Sequence[PeriodicFunction], k: int, p: float,
                            d: int | None = None) -> float:
    """A = max over the corpus of ‖f‖_{C^{k − d/p}} / ‖f‖_{p,k}."""
    if d is None:
        d = 1 if corpus[0].space == "S1" else 2
    s = k - d / p
    if s <= 0:
        raise ValueError("embedding needs k − d/p > 0")
    A = 0.0
    for f in corpus:
        den = sobolev_norm(f, k, p)
        if den > 0:
            A = max(A, holder_norm(f, s) / den)
    return float(A)


@dataclass
class PointwiseAECheck:
    passed: bool
    C: float
    exceptional_measures: list[float]
    tail_bounds: list[float]
    max_deviation_outside: float


def pointwise_ae_convergence_check(seq: Sequence, f, p: float = 2.0, C: float | None = None,
                                   start: int = 0) -> PointwiseAECheck:
    """Borel–Cantelli style check of grid-pointwise convergence f_n → f.

    With ‖f_n − f_{n+1}‖_p ≤ C^n, the sets X_n = {|f_n − f_{n+1}| > C^{n/(2p)}}
    have measure ≤ C^{n/2}.  Off E_m = ∪_{n ≥ m} X_n the values satisfy
    |f_m − f| ≤ Σ_{n ≥ m} C^{n/(2p)}.
    """
    vals = [np.asarray(g.samples if isinstance(g, PeriodicFunction) else g, dtype=float) for g in seq]
    lim = np.asarray(f.samples if isinstance(f, PeriodicFunction) else f, dtype=float)
    if len(vals) < 2:
        raise ValueError("need at least two terms")
    diffs = [vals[n] - vals[n + 1] for n in range(len(vals) - 1)]
    norms = [float(np.mean(np.abs(dn) ** p) ** (1.0 / p)) for dn in diffs]
    if C is None:
        fitted = 0.0
        for n, nv in enumerate(norms):
            if n + start == 0 or nv == 0:
                continue
            fitted = max(fitted, nv ** (1.0 / (n + start)))
        C = fitted
    if not (0 <= C < 1) or any(nv > C ** (n + start) * (1 + 1e-9) + 1e-300 for n, nv in enumerate(norms)):
        raise LabError("difference decay not geometric")
    n_idx = np.arange(len(diffs)) + start
    thresholds = C ** (n_idx / (2.0 * p))
    X = [np.abs(dn) > t for dn, t in zip(diffs, thresholds)]
    measures = [float(x.mean()) for x in X]
    ok = all(mu <= C ** (n / 2.0) + 1e-15 for mu, n in zip(measures, n_idx))
    tails = []
    worst = 0.0
    for m in range(len(diffs)):
        E = np.zeros_like(X[0])
        for x in X[m:]:
            E |= x
        r = C ** (1.0 / (2.0 * p))
        tail = float(r ** (m + start) / (1.0 - r))
        tails.append(tail)
        good = ~E
        if good.any():
            dev = float(np.abs(vals[m][good] - lim[good]).max())
            worst = max(worst, dev - tail)
            ok = ok and dev <= tail + 1e-12
    return PointwiseAECheck(bool(ok), float(C), measures, tails, float(worst))
