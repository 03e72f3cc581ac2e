import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisy_extremes import theory
from noisy_extremes.dynamics import GOLDEN_MEAN, MapSpec, NoiseSpec, OrbitConfig, Space, random_orbit, stream
from noisy_extremes.errors import NotExpanding, NotPeriodic, TooFewExceedances, TruncationTooSmall
from noisy_extremes.observables import distance


def test_expected_params_examples():
    p = theory.expected_params("1d", 2)
    assert (p.kappa_g1, p.kappa_g2, p.kappa_g3, p.sigma_g1) == (0, 0.5, -0.5, 1)
    p = theory.expected_params("2d", 1)
    assert (p.kappa_g1, p.kappa_g2, p.kappa_g3, p.sigma_g1) == (0, 0.5, -0.5, 0.5)
    p = theory.expected_params("local_dimension", 1, 1.25)
    assert (p.kappa_g2, p.kappa_g3, p.sigma_g1) == pytest.approx((0.8, -0.8, 0.8))


@given(st.floats(0.01, 100), st.sampled_from(["1d", "2d"]))
def test_expected_params_antisymmetry(a, basis):
    p = theory.expected_params(basis, a)
    assert p.kappa_g2 == -p.kappa_g3
    assert p.sigma_g1 > 0


def test_theoretical_ei_examples():
    ternary = MapSpec.ternary_shift()
    assert theory.theoretical_ei(ternary, 0.5, 1) == pytest.approx(2 / 3)
    assert theory.theoretical_ei(ternary, 0.25, 2) == pytest.approx(8 / 9)
    with pytest.raises(NotPeriodic):
        theory.theoretical_ei(MapSpec.rotation(), 0.3, 1)


def test_theoretical_ei_prime_period():
    # 1/2 is a fixed point, so it does not have prime period 2
    with pytest.raises(NotPeriodic):
        theory.theoretical_ei(MapSpec.ternary_shift(), 0.5, 2)


def test_theoretical_ei_two_code_paths():
    ternary = MapSpec.ternary_shift()
    for z, p in [(0.5, 1), (0.25, 2), (1 / 8, 2), (1 / 26, 3)]:
        a = theory.theoretical_ei(ternary, z, p)
        assert a == pytest.approx(1 - 3.0**-p, abs=1e-12)
        assert theory.theoretical_ei_fd(ternary, z, p) == pytest.approx(a, abs=1e-6)


def test_theoretical_ei_attracting_point():
    q = MapSpec.quadratic(0.314)
    z = (-1 + math.sqrt(1 + 4 * 0.314)) / (2 * 0.314)
    with pytest.raises(NotExpanding):
        theory.theoretical_ei(q, z, 1)


def test_theoretical_ei_cat_fixed_point():
    # the origin is fixed; det of the cat matrix is 1, so the determinant formula gives no clustering
    with pytest.raises(NotExpanding):
        theory.theoretical_ei(MapSpec.arnold_cat(), (0.0, 0.0), 1)


def test_correlation_bound_examples():
    assert theory.correlation_bound(0, 0.3) == (4.0, True)
    b, ok = theory.correlation_bound(100, 0.5)
    assert b == pytest.approx(4 * (2 * math.pi) ** -25)
    assert ok
    assert theory.correlation_bound(10, 0.9)[1] is False


def test_fourier_j0():
    r = theory.fourier_correlation((0.0, 0.3), (0.0, 0.3), GOLDEN_MEAN, 0.3, 0)
    assert r.value == pytest.approx(0.21, abs=r.uncertainty + 1e-12)


def test_fourier_example_within_bound():
    r = theory.fourier_correlation((0.0, 0.1), (0.0, 0.1), GOLDEN_MEAN, 0.3, 20)
    assert r.bound == pytest.approx(4 * math.exp(-20 * 0.09 * math.log(2 * math.pi)))
    assert r.within_bound and r.value + r.uncertainty <= r.bound


def test_fourier_truncation_too_small():
    with pytest.raises(TruncationTooSmall):
        theory.fourier_correlation((0, 0.1), (0, 0.1), GOLDEN_MEAN, 0.1, 5, K=5)
    with pytest.raises(TruncationTooSmall):
        # K = 1/eps, but at j = 0 the tail 2 zeta(2, 2) ~ 1.29 is over 10% of the bound 4
        theory.fourier_correlation((0, 0.1), (0, 0.1), GOLDEN_MEAN, 1.0, 0, K=1)


def test_s_kernel_bounds():
    x = np.linspace(1e-4, 1 - 1e-4, 10_000)
    S = np.abs(theory.sinc_kernel(x))
    assert np.all(S <= np.exp(-x * x * math.log(2 * math.pi)) + 1e-15)
    x = np.linspace(1.0, 50.0, 10_000)
    assert np.all(np.abs(theory.sinc_kernel(x)) <= 1 / (2 * math.pi * x) + 1e-15)


def test_fourier_coefficient_bound():
    k = np.arange(1, 5000)
    for A in [(0.0, 0.3), [(0.1, 0.2), (0.5, 0.9)]]:
        c = theory.indicator_coefficients(A, k)
        n_int = 1 if isinstance(A, tuple) else len(A)
        assert np.all(np.abs(c) <= n_int / k + 1e-15)
    assert np.all(np.abs(theory.indicator_coefficients((0.0, 0.3), k)) <= 1 / k + 1e-15)


def test_lemma_grid():
    for eps in (0.1, 0.3, 0.5, 0.7):
        for j in range(5, 201, 5):
            r = theory.fourier_correlation((0.0, 0.1), [(0.2, 0.3), (0.6, 0.65)], GOLDEN_MEAN, eps, j)
            assert r.valid
            assert r.value + r.uncertainty <= r.bound


def test_fourier_vs_monte_carlo():
    rng = stream(50)
    rot = MapSpec.rotation()
    misses = 0
    for t in range(20):
        a, b = np.sort(rng.random(2))
        c, d = np.sort(rng.random(2))
        j = int(rng.integers(0, 6))
        f = theory.fourier_correlation((a, b), [(c, d)], rot.params["alpha"], 0.3, j)
        m = theory.monte_carlo_correlation(rot, NoiseSpec(0.3), (a, b), [(c, d)], j, 100_000, stream(51, t))
        misses += abs(f.signed - m.signed) > 3 * m.uncertainty + f.uncertainty
    # 3 standard errors: about one miss in 400 comparisons is expected
    assert misses <= 1


def test_monte_carlo_j0():
    rot = MapSpec.rotation()
    A, B = (0.1, 0.4), [(0.3, 0.6)]
    m = theory.monte_carlo_correlation(rot, NoiseSpec(0.3), A, B, 0, 100_000, 1)
    assert abs(m.signed - (0.1 - 0.3 * 0.3)) <= 4 * m.uncertainty


def test_deterministic_rotation_does_not_decay():
    rot = MapSpec.rotation()
    A = (0.0, 0.05)
    vals = [
        theory.monte_carlo_correlation(rot, NoiseSpec(0.0), A, A, j, 10_000, stream(52, j)).value for j in range(1, 201)
    ]
    assert max(vals) > 0.5 * 0.05


def test_dprime_noisy_vs_periodic():
    n = 1000
    kn = math.ceil(math.sqrt(n))
    u = math.log(2 * n)  # n P(-log d > u) = 1 on the circle
    noisy = random_orbit(MapSpec.ternary_shift(), NoiseSpec(1e-2), 0.3, OrbitConfig(2 * 10**6, 1000, 3))
    ex = -np.log(distance(Space.CIRCLE, noisy.points, 0.7371)) > u
    assert theory.dprime_sum(ex, n, kn) < 0.1
    det = random_orbit(MapSpec.ternary_shift(), NoiseSpec(0.0), 0.2718281828, OrbitConfig(2 * 10**6, 1000, 3))
    ex = -np.log(distance(Space.CIRCLE, det.points, 0.5)) > u
    assert theory.dprime_sum(ex, n, kn) > 0.2


def test_dprime_iid_and_errors():
    n = 1000
    ex = stream(60).random(2 * 10**6) < 1 / n
    val = theory.dprime_sum(ex, n)
    kn = math.ceil(math.sqrt(n))
    assert val < 5 / kn
    with pytest.raises(TooFewExceedances):
        theory.dprime_sum(np.zeros(10_000, dtype=bool), n)


def test_annulus_entrances():
    e = np.array([1, 1, 0, 1, 0, 0, 1], dtype=bool)
    # X_i > u and X_{i+1} <= u at i = 1, 3
    assert theory.annulus_entrances(e, 1) == 2
    # at the periodic point 1/2 returns in one step are frequent, so fewer exceedances start a new cluster
    det = random_orbit(MapSpec.ternary_shift(), NoiseSpec(0.0), 0.2718281828, OrbitConfig(10**6, 1000, 3))
    ex = -np.log(distance(Space.CIRCLE, det.points, 0.5)) > math.log(2000)
    frac = theory.annulus_entrances(ex, 1) / ex.sum()
    assert frac == pytest.approx(2 / 3, abs=0.07)


def test_box_counting_known_sets():
    rng = stream(70)
    line = np.column_stack([rng.random(200_000), np.zeros(200_000)])
    assert theory.box_counting_dimension(line) == pytest.approx(1.0, abs=0.05)
    square = rng.random((1_000_000, 2))
    assert theory.box_counting_dimension(square) == pytest.approx(2.0, abs=0.05)


@settings(max_examples=20, deadline=None)
@given(st.integers(5, 200), st.sampled_from([0.1, 0.3, 0.5, 0.7]))
def test_lemma_property(j, eps):
    r = theory.fourier_correlation((0.0, 0.2), [(0.1, 0.25)], GOLDEN_MEAN, eps, j)
    assert not r.valid or r.within_bound
