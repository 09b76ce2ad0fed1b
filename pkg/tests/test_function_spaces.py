import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize

from rigidity_lab import function_spaces as fs
from rigidity_lab.errors import LabError, ResolutionError
from rigidity_lab.function_spaces import CircleMap, NormSpec, PeriodicFunction

N = 128


def sin_fn(n=N):
    return PeriodicFunction.from_callable(np.sin, n, n // 4)


def test_transform_round_trip_and_band(rng):
    f = fs.random_trig_polynomial(N, 20, rng, 32)
    assert np.allclose(np.fft.ifft(f.coeffs).real, f.samples, atol=1e-10)
    with pytest.raises(ResolutionError):
        PeriodicFunction(np.zeros(16), band=9)


def test_jet_examples():
    one = PeriodicFunction.constant(1.0, N, 32)
    assert np.allclose(one.jet(0.7, 3), [1, 0, 0, 0], atol=1e-14)
    assert np.allclose(sin_fn().jet(0.0, 2), [0, 1, 0], atol=1e-14)
    f = PeriodicFunction.from_callable(lambda t: np.cos(3 * t) + 0.5 * np.sin(3 * t), N, 32)
    x = 1.1
    sym = [np.cos(3 * x) + 0.5 * np.sin(3 * x), -3 * np.sin(3 * x) + 1.5 * np.cos(3 * x),
           -9 * np.cos(3 * x) - 4.5 * np.sin(3 * x), 27 * np.sin(3 * x) - 13.5 * np.cos(3 * x)]
    assert np.allclose(f.jet(x, 3), sym, atol=1e-10)
    with pytest.raises(ResolutionError, match="jet order exceeds resolution"):
        f.jet(x, f.k_max + 1)


def test_sobolev_examples():
    one = PeriodicFunction.constant(1.0, N, 32)
    for k, p in [(0, 2), (3, 3.0), (2, 4.0)]:
        assert fs.sobolev_norm(one, k, p) == pytest.approx(1.0, abs=1e-14)
    assert fs.sobolev_norm(sin_fn(), 1, 2.0) == pytest.approx(1.0, abs=1e-14)
    assert fs.sobolev_norm(sin_fn(), 0, 2.0) == pytest.approx(1 / np.sqrt(2), abs=1e-14)


def test_ck_and_holder_examples():
    assert fs.ck_norm(PeriodicFunction.constant(1.0, N, 32), 2) == pytest.approx(1.0)
    assert fs.ck_norm(sin_fn(), 0) == pytest.approx(1.0, abs=1e-12)
    h = fs.holder_norm(sin_fn(512), 0.5)
    dense = np.linspace(0, 2 * np.pi, 4001)[:-1]
    a, b = np.meshgrid(dense[::4], dense, indexing="ij")
    d = np.abs(fs.wrap_angle(a - b))
    mask = d > 0
    oracle = 1 + (np.abs(np.sin(a) - np.sin(b))[mask] / np.sqrt(d[mask])).max()
    assert h == pytest.approx(oracle, rel=1e-2)


def test_pullback_examples():
    f = fs.random_trig_polynomial(N, 10, np.random.default_rng(1), 32)
    ident = CircleMap.identity(N, 32)
    assert np.allclose(fs.pullback(f, ident).samples, f.samples, atol=1e-13)
    r = CircleMap.rotation(0.37, N, 32)
    for k in range(4):
        assert fs.sobolev_norm(fs.pullback(f, r), k) == pytest.approx(fs.sobolev_norm(f, k), rel=1e-10)
    phi = CircleMap.from_displacement(lambda t: 0.05 * np.sin(2 * t), 256, 64)
    g = fs.pullback(PeriodicFunction.from_callable(np.sin, 256, 64), phi)
    x = 0.8
    u, du, ddu = x + 0.05 * np.sin(2 * x), 1 + 0.1 * np.cos(2 * x), -0.2 * np.sin(2 * x)
    sym = [np.sin(u), np.cos(u) * du, -np.sin(u) * du ** 2 + np.cos(u) * ddu]
    assert np.allclose(g.jet(x, 2), sym, atol=1e-8)


def test_circle_map_invariants():
    with pytest.raises(LabError, match="diffeomorphism"):
        CircleMap.from_displacement(lambda t: 1.5 * np.sin(t), N, 32)
    phi = CircleMap.from_displacement(lambda t: 0.1 * np.sin(t), N, 32)
    th = phi.eta.grid
    assert np.allclose(phi(th + 2 * np.pi), phi(th) + 2 * np.pi, atol=1e-12)
    inv = phi.inverse()
    assert np.abs(phi(np.mod(inv(th), 2 * np.pi)) + 2 * np.pi * np.floor(inv(th) / (2 * np.pi)) - th).max() <= 1e-11


def test_almost_isometry_of_pullback():
    r = CircleMap.rotation(0.4, N, 32)
    spec = NormSpec(2, 2.0)
    assert fs.verify_almost_isometry_of_pullback(r, r, spec) == 0.0

    def perturbed(amp):
        return CircleMap.from_displacement(lambda t: 0.4 + amp * np.sin(2 * t), N, 32)

    e1 = fs.verify_almost_isometry_of_pullback(perturbed(0.01), r, spec)
    e2 = fs.verify_almost_isometry_of_pullback(perturbed(0.005), r, spec)
    assert e1 <= 0.2
    assert e2 <= e1 / 2 * 1.2 and e2 >= e1 / 2 * 0.8
    amps = [0.04, 0.02, 0.01, 0.005]
    eps = [fs.verify_almost_isometry_of_pullback(perturbed(a), r, spec) for a in amps]
    assert all(b < a for a, b in zip(eps, eps[1:]))


def test_sobolev_embedding_check(rng):
    one = PeriodicFunction.constant(1.0, N, 32)
    assert fs.sobolev_embedding_check([one], 2, 2.0) == pytest.approx(1.0)
    polys = [fs.random_trig_polynomial(256, 32, rng, 32, decay=2.0) for _ in range(200)]
    A256 = fs.sobolev_embedding_check(polys, 2, 2.0)
    A512 = fs.sobolev_embedding_check([f.resample(512) for f in polys], 2, 2.0)
    assert np.isfinite(A256) and abs(A512 - A256) <= 0.1 * A256
    # single frequency cos(B θ): C^{3/2} norm B + c B^{3/2}, L^{2,2} norm sqrt((1 + B² + B⁴)/2),
    # c = sup_u 2|sin(u/2)|/u^{1/2}; the ratio decays like B^{-1/2}
    c = -optimize.minimize_scalar(lambda u: -2 * abs(np.sin(u / 2)) / np.sqrt(u), bounds=(0.01, 6),
                                  method="bounded").fun
    rs = []
    for B in (1, 2, 4, 8, 16):
        ratio = fs.sobolev_embedding_check([PeriodicFunction.from_modes({B: 1.0}, 256, 64)], 2, 2.0)
        assert ratio == pytest.approx((B + c * B ** 1.5) / np.sqrt((1 + B ** 2 + B ** 4) / 2), rel=1e-3)
        rs.append(ratio)
    assert all(b < a for a, b in zip(rs, rs[1:]))


def test_pointwise_ae_examples():
    f = sin_fn()
    assert fs.pointwise_ae_convergence_check([f, f, f], f, C=0.5).passed
    seq = [f + 2.0 ** -n * f for n in range(1, 20)]
    chk = fs.pointwise_ae_convergence_check(seq, f, start=1)
    assert chk.passed and all(m == 0 for m in chk.exceptional_measures)
    th = f.grid
    spikes = []
    for n in range(1, 12):
        s = np.zeros(N)
        s[(7 * n) % N] = 2.0 ** (-n) * N ** 0.5 * 0.5
        spikes.append(s)
    seq = [np.sin(th) + sp for sp in spikes]
    chk = fs.pointwise_ae_convergence_check(seq, np.sin(th), start=1, C=0.9)
    assert chk.passed
    assert any(m > 0 for m in chk.exceptional_measures)
    assert sum(chk.exceptional_measures) < np.inf
    with pytest.raises(LabError, match="not geometric"):
        fs.pointwise_ae_convergence_check([np.zeros(N), np.ones(N), np.zeros(N)], np.zeros(N), C=0.5)


CORPUS = fs.standard_corpus(N, 32)


@given(st.sampled_from(range(len(CORPUS))), st.floats(0, 2 * np.pi), st.integers(0, 4),
       st.sampled_from([2.0, 3.0, 4.0]))
def test_isometry_invariance(i, alpha, k, p):
    f = CORPUS[i]
    rot = PeriodicFunction.from_callable(lambda t: f(np.mod(t + alpha, 2 * np.pi)), N, 32)
    assert fs.sobolev_norm(rot, k, p) == pytest.approx(fs.sobolev_norm(f, k, p), rel=1e-10)


@given(st.sampled_from(range(len(CORPUS))), st.integers(0, 4), st.sampled_from([2.0, 3.0, 4.0]))
def test_norm_monotonicity(i, k, p):
    f = CORPUS[i]
    assert fs.sobolev_norm(f, k, p) <= fs.sobolev_norm(f, k + 1, p) * (1 + 1e-12)
    assert fs.ck_norm(f, k) <= fs.ck_norm(f, k + 1) * (1 + 1e-12)


@given(st.integers(0, 2**31), st.integers(0, 3), st.sampled_from([2.0, 3.0, 4.0]))
def test_resolution_independence(seed, k, p):
    f = fs.random_trig_polynomial(N, 16, np.random.default_rng(seed), 32)
    g = f.resample(2 * N)
    assert fs.sobolev_norm(g, k, p) == pytest.approx(fs.sobolev_norm(f, k, p), rel=1e-6)
    assert fs.ck_norm(g, k) == pytest.approx(fs.ck_norm(f, k), rel=1e-6)


def test_torus_leafwise_norm():
    f = PeriodicFunction.from_callable(lambda a, b: np.sin(b) + 0 * a, 32, 8, space="T2")
    assert fs.sobolev_norm(f, 1, 2.0) == pytest.approx(1.0, abs=1e-12)
    assert fs.ck_norm(f, 0) == pytest.approx(1.0, abs=1e-12)
