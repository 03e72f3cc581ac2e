import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisy_extremes.dynamics import Space, StateVector, stream
from noisy_extremes.errors import EscapedState, InfeasibleThreshold, InsufficientData
from noisy_extremes.observables import (
    Family,
    MeasureModel,
    Observable,
    distance,
    normalizing_constants,
    tail_exponent,
    threshold_for_tau,
)


def test_distance_examples():
    assert distance(Space.CIRCLE, 0.9, 0.1) == pytest.approx(0.2)
    assert distance(Space.TORUS2, (0.95, 0.5), (0.05, 0.5)) == pytest.approx(0.1)
    assert distance(Space.PLANE2, (3.0, 4.0), (0.0, 0.0)) == 5.0
    assert distance(Space.INTERVAL, -0.5, 0.25) == 0.75


def test_distance_vectorised():
    x = np.array([[0.1], [0.9], [0.5]])
    assert np.allclose(distance(Space.CIRCLE, x, 0.0), [0.1, 0.1, 0.5])


def test_distance_escaped():
    with pytest.raises(EscapedState):
        distance(Space.PLANE2, StateVector((1.0, 1.0), escaped=True), (0.0, 0.0))
    with pytest.raises(EscapedState):
        distance(Space.PLANE2, np.array([[np.nan, np.nan]]), (0.0, 0.0))


def test_evaluate_examples():
    z = (0.0,)
    assert Observable(Family.G1, z, Space.INTERVAL).evaluate(math.exp(-3)) == pytest.approx(3.0)
    assert Observable(Family.G2, z, Space.INTERVAL, a=1).evaluate(0.1) == pytest.approx(10.0)
    assert Observable(Family.G3, z, Space.INTERVAL, a=1, C=0).evaluate(0.25) == pytest.approx(-0.25)


def test_evaluate_at_target():
    z = (0.3,)
    assert Observable(Family.G1, z, Space.CIRCLE).evaluate(0.3) == math.inf
    assert Observable(Family.G2, z, Space.CIRCLE, a=2).evaluate(0.3) == math.inf
    assert Observable(Family.G3, z, Space.CIRCLE, a=2, C=1.5).evaluate(0.3) == 1.5


@settings(max_examples=200, deadline=None)
@given(
    st.sampled_from(list(Family)),
    st.floats(0.1, 5.0),
    st.floats(1e-6, 0.5),
    st.floats(1e-6, 0.5),
)
def test_monotone_decreasing(family, a, d1, d2):
    obs = Observable(family, (0.0,), Space.INTERVAL, a=a, C=1.0)
    lo, hi = sorted((d1, d2))
    assert obs.g(lo) >= obs.g(hi)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(list(Family)), st.floats(0.2, 4.0), st.floats(0.01, 0.4))
def test_g_inverse(family, a, d):
    obs = Observable(family, (0.0,), Space.INTERVAL, a=a, C=2.0)
    # G3 loses digits to the cancellation in C - d**(1/a)
    assert obs.g_inverse(obs.g(d)) == pytest.approx(d, rel=1e-6)


def test_threshold_examples():
    circle = MeasureModel.uniform_circle()
    g1 = Observable(Family.G1, (0.3,), Space.CIRCLE)
    g2 = Observable(Family.G2, (0.3,), Space.CIRCLE, a=2)
    assert threshold_for_tau(circle, g1, 1000, 1.0) == pytest.approx(math.log(2000), abs=1e-12)
    assert threshold_for_tau(circle, g1, 1000, 1.0) == pytest.approx(7.6009, abs=1e-4)
    assert threshold_for_tau(circle, g2, 1000, 2.0) == pytest.approx(31.6228, abs=1e-4)
    with pytest.raises(InfeasibleThreshold):
        threshold_for_tau(circle, g1, 10, 11.0)


def test_threshold_monte_carlo_oracle():
    rng = stream(123)
    x = rng.random(10**6)
    circle = MeasureModel.uniform_circle()
    g1 = Observable(Family.G1, (0.3,), Space.CIRCLE)
    for n, tau in [(1000, 1.0), (1000, 3.0), (100, 0.5)]:
        u = threshold_for_tau(circle, g1, n, tau)
        hits = int(np.count_nonzero(g1.evaluate(x) > u))
        expected = x.size * tau / n
        assert abs(hits - expected) <= 3 * math.sqrt(expected)


def test_exceedance_set_is_ball():
    rng = stream(5)
    pts = rng.random((100_000, 2))
    obs = Observable(Family.G2, (0.2, 0.8), Space.TORUS2, a=1.5)
    u = 4.0
    inside = obs.evaluate(pts) > u
    assert np.array_equal(inside, distance(Space.TORUS2, pts, (0.2, 0.8)) < obs.g_inverse(u))


def test_normalizing_constants_examples():
    circle = MeasureModel.uniform_circle()
    z = (0.3,)
    nc = normalizing_constants(circle, Observable(Family.G1, z, Space.CIRCLE), 1000)
    assert (nc.a_n, nc.b_n) == pytest.approx((1.0, math.log(2000)))
    nc = normalizing_constants(circle, Observable(Family.G2, z, Space.CIRCLE, a=1), 1000)
    assert (nc.a_n, nc.b_n) == pytest.approx((1 / 2000, 0.0))
    nc = normalizing_constants(circle, Observable(Family.G3, z, Space.CIRCLE, a=2, C=1.0), 1000)
    assert (nc.a_n, nc.b_n) == pytest.approx((2000**0.5, 1.0))


def test_normalizing_constants_torus_g1():
    # P(X > u) = pi exp(-2u), so u_n(y) = y / 2 + log(pi n) / 2
    torus = MeasureModel.uniform_torus()
    nc = normalizing_constants(torus, Observable(Family.G1, (0.5, 0.5), Space.TORUS2), 1000)
    assert nc.a_n == 2.0
    assert nc.b_n == pytest.approx(0.5 * math.log(math.pi * 1000))


@pytest.mark.parametrize("family", list(Family))
@pytest.mark.parametrize("model,space,z", [
    (MeasureModel.uniform_circle(), Space.CIRCLE, (0.3,)),
    (MeasureModel.uniform_torus(), Space.TORUS2, (0.3, 0.6)),
])
def test_constants_threshold_identity(family, model, space, z):
    obs = Observable(family, z, space, a=1.7, C=0.4)
    n = 1000
    nc = normalizing_constants(model, obs, n)
    for y in (-1.0, 0.0, 0.5, 2.0):
        if family is Family.G2 and y <= 0:
            continue
        if family is Family.G3 and y >= 0:
            continue
        alpha = obs.a * model.ball_constants[1]
        if family is Family.G1:
            tau = math.exp(-y)
        elif family is Family.G2:
            tau = y**-alpha
        else:
            tau = (-y) ** alpha
        u = threshold_for_tau(model, obs, n, tau)
        assert u == pytest.approx(y / nc.a_n + nc.b_n, abs=1e-12, rel=1e-12)


def test_empirical_model():
    rng = stream(8)
    pts = rng.random((200_000, 1))
    obs = Observable(Family.G1, (0.3,), Space.CIRCLE)
    emp = MeasureModel.empirical(pts)
    u = threshold_for_tau(emp, obs, 100, 1.0)
    assert u == pytest.approx(math.log(200), abs=0.05)
    nc = normalizing_constants(emp, obs, 100)
    assert nc.a_n == pytest.approx(1.0, abs=0.05)
    with pytest.raises(InsufficientData):
        threshold_for_tau(MeasureModel.empirical(pts[:999]), obs, 10, 1.0)


def test_tail_exponent():
    assert tail_exponent(MeasureModel.uniform_torus(), Observable(Family.G2, (0, 0), Space.TORUS2, a=1.5)) == 3.0
