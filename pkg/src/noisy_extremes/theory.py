"""Closed-form predictions and numerical checks of the analytic results.

* expected GEV parameters for the three observable families,
* the extremal index at repelling periodic points,
* exponential decay of correlations for noisy circle rotations, both from the
  Fourier series of the correlation and by direct Monte Carlo,
* empirical anti-clustering (D') sums and annulus entrance counts,
* a box-counting dimension estimator used as an independent oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.special import zeta

from .dynamics import MapKind, MapSpec, NoiseSpec, as_generator, jacobian, propagate, step
from .errors import (
    ConfigurationError,
    NotExpanding,
    NotPeriodic,
    TooFewExceedances,
    TruncationTooSmall,
)

LOG_2PI = math.log(2.0 * math.pi)
EPS2_MAX = 1.0 - math.log(2.0) / LOG_2PI


class Basis(str, Enum):
    ONE_D = "1d"
    TWO_D = "2d"
    LOCAL_DIMENSION = "local_dimension"


@dataclass(frozen=True)
class ExpectedParams:
    kappa_g1: float
    kappa_g2: float
    kappa_g3: float
    sigma_g1: float
    basis: Basis
    dimension: float


def expected_params(basis: Basis | str, exponent: float, local_dimension: float | None = None) -> ExpectedParams:
    """Asymptotic shape parameters and G1 scale for absolutely continuous
    measures in dimension 1 or 2, or for a measure with local dimension d_L."""
    basis = Basis(basis)
    if not exponent > 0:
        raise ConfigurationError("observable exponent must be > 0")
    if basis is Basis.ONE_D:
        d = 1.0
    elif basis is Basis.TWO_D:
        d = 2.0
    else:
        if local_dimension is None or not local_dimension > 0:
            raise ConfigurationError("local dimension must be > 0")
        d = float(local_dimension)
    k = 1.0 / (exponent * d)
    return ExpectedParams(0.0, k, -k, 1.0 / d, basis, d)


# ---------------------------------------------------------------------------
# extremal index at periodic points
# ---------------------------------------------------------------------------

PERIOD_TOL = 1e-9


def _gap(map_: MapSpec, a, b) -> float:
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    if map_.space.periodic:
        d = np.minimum(d, 1.0 - d)
    return float(np.max(d))


def _iterate_det(map_: MapSpec, z, p: int):
    x = np.atleast_1d(np.asarray(z, dtype=float))
    path = [x]
    for _ in range(p):
        x = np.asarray(step(map_, x).coords)
        path.append(x)
    return path


def periodic_derivative(map_: MapSpec, z, p: int) -> np.ndarray:
    """Jacobian of the p-th iterate at z by the chain rule."""
    path = _iterate_det(map_, z, p)
    D = np.eye(map_.dim)
    for x in path[:-1]:
        D = jacobian(map_, x) @ D
    return D


def check_periodic(map_: MapSpec, z, p: int) -> None:
    if p < 1:
        raise NotPeriodic("period must be >= 1")
    path = _iterate_det(map_, z, p)
    if _gap(map_, path[-1], path[0]) > PERIOD_TOL:
        raise NotPeriodic(f"|f^{p}(z) - z| = {_gap(map_, path[-1], path[0]):.3g} > {PERIOD_TOL:g}")
    for q in range(1, p):
        if p % q == 0 and _gap(map_, path[q], path[0]) <= PERIOD_TOL:
            raise NotPeriodic(f"z has period {q}, not prime period {p}")


def theoretical_ei(map_: MapSpec, z, p: int) -> float:
    """``1 - |det D f^{-p}(z)|`` at a repelling periodic point of prime period p."""
    check_periodic(map_, z, p)
    det = abs(float(np.linalg.det(periodic_derivative(map_, z, p))))
    if not det > 1.0:
        raise NotExpanding(f"|det Df^p(z)| = {det:.6g} <= 1: periodic point is not repelling")
    return 1.0 - 1.0 / det


def theoretical_ei_fd(map_: MapSpec, z, p: int, h: float = 1e-7) -> float:
    """Same quantity for 1-D maps from a central difference of f^p."""
    if map_.dim != 1:
        raise ConfigurationError("finite-difference path implemented for 1-D maps only")
    check_periodic(map_, z, p)
    z = float(np.atleast_1d(z)[0])
    hi = _iterate_det(map_, [z + h], p)[-1][0]
    lo = _iterate_det(map_, [z - h], p)[-1][0]
    diff = hi - lo
    if map_.space.periodic:
        diff = (diff + 0.5) % 1.0 - 0.5 if abs(diff) < 1 else diff
    deriv = abs(diff) / (2 * h)
    if not deriv > 1.0:
        raise NotExpanding("periodic point is not repelling")
    return 1.0 - deriv ** -1.0


# ---------------------------------------------------------------------------
# decay of correlations for noisy rotations
# ---------------------------------------------------------------------------


class CorrelationMethod(str, Enum):
    FOURIER = "fourier"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class CorrelationReport:
    j: int
    epsilon: float
    value: float
    bound: float
    within_bound: bool
    method: CorrelationMethod
    uncertainty: float = 0.0  # truncation tail (Fourier) or standard error (Monte Carlo)
    signed: float = math.nan
    valid: bool = True


def correlation_bound(j: int, epsilon: float) -> tuple[float, bool]:
    """Upper bound ``4 exp(-j eps^2 log 2 pi)`` and whether ``eps^2 < 1 - log 2 / log 2 pi``."""
    return 4.0 * math.exp(-j * epsilon * epsilon * LOG_2PI), epsilon * epsilon < EPS2_MAX


def sinc_kernel(x):
    """``S(x) = sin(2 pi x) / (2 pi x)``, the characteristic function of U[-1, 1] at 2 pi x."""
    return np.sinc(2.0 * np.asarray(x, dtype=float))


Interval = tuple[float, float]


def _as_union(B) -> list[Interval]:
    if len(B) == 2 and np.isscalar(B[0]):
        B = [B]
    out = []
    for a, b in B:
        if not 0.0 <= a <= b <= 1.0:
            raise ConfigurationError(f"interval [{a}, {b}] must satisfy 0 <= a <= b <= 1")
        out.append((float(a), float(b)))
    return out


def indicator_coefficients(intervals, k: np.ndarray) -> np.ndarray:
    """Fourier coefficients ``int chi e^{-2 pi i k x} dx`` of a finite union of intervals, k != 0."""
    k = np.asarray(k, dtype=float)
    c = np.zeros(k.shape, dtype=complex)
    for a, b in _as_union(intervals):
        c += np.exp(-2j * np.pi * k * a) - np.exp(-2j * np.pi * k * b)
    return c / (2j * np.pi * k)


def _measure(intervals) -> float:
    return sum(b - a for a, b in _as_union(intervals))


def fourier_correlation(A, B, alpha: float, epsilon: float, j: int, K: int | None = None) -> CorrelationReport:
    """``|int U^j(chi_B) chi_A dx - Leb(A) Leb(B)|`` for the noisy rotation via Fourier series.

    The series ``sum_k psi_k phi_{-k} e^{2 pi i k j alpha} S(k eps)^j`` is summed
    for ``0 < |k| <= K``; the neglected tail is bounded rigorously by
    ``2 c sum_{k>K} k^-2 (2 pi k eps)^-j`` with ``c = max(1, l_A l_B / pi^2)``
    for unions of ``l_A`` and ``l_B`` intervals, using ``|S(x)| <= 1/(2 pi |x|)``
    for ``|x| >= 1``.  ``within_bound`` compares value plus tail with the bound.
    """
    if j < 0:
        raise ConfigurationError("lag must be >= 0")
    if epsilon <= 0:
        raise ConfigurationError("epsilon must be > 0")
    A_u, B_u = _as_union(A), _as_union(B)
    min_k = math.ceil(1.0 / epsilon)
    if K is None:
        K = max(min_k, 10_000)
    if K < min_k:
        raise TruncationTooSmall(f"K = {K} < 1/eps = {min_k}")
    k = np.arange(1, K + 1, dtype=float)
    phi = indicator_coefficients(A_u, k)
    psi = indicator_coefficients(B_u, k)
    S = sinc_kernel(k * epsilon)
    with np.errstate(under="ignore"):
        damp = S**j if j else np.ones_like(S)
        terms = psi * np.conj(phi) * np.exp(2j * np.pi * k * j * alpha) * damp
    signed = 2.0 * float(np.sum(terms).real)
    c = max(1.0, len(A_u) * len(B_u) / math.pi**2)
    tail = 2.0 * c * float(zeta(2.0 + j, K + 1)) * (2.0 * math.pi * epsilon) ** (-j)
    bound, valid = correlation_bound(j, epsilon)
    if tail > 0.1 * bound:
        raise TruncationTooSmall(f"tail bound {tail:.3g} exceeds 10% of the decay bound {bound:.3g}")
    value = abs(signed)
    return CorrelationReport(
        j=j,
        epsilon=epsilon,
        value=value,
        bound=bound,
        within_bound=value + tail <= bound,
        method=CorrelationMethod.FOURIER,
        uncertainty=tail,
        signed=signed,
        valid=valid,
    )


def _indicator(intervals, x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape, dtype=bool)
    for a, b in _as_union(intervals):
        out |= (x >= a) & (x < b)
    return out


def monte_carlo_correlation(
    map_: MapSpec, noise: NoiseSpec, A, B, j: int, samples: int = 100_000, seed=0
) -> CorrelationReport:
    """Direct estimate of ``|E[chi_B(f^j_w x) chi_A(x)] - Leb(A) Leb(B)|``, x uniform."""
    if samples < 10_000:
        raise ConfigurationError("need at least 10^4 samples")
    if map_.dim != 1:
        raise ConfigurationError("indicator correlations implemented on the circle")
    rng = as_generator(seed)
    x0 = rng.random(samples)
    xj, alive = propagate(map_, noise, x0, j, rng)
    y = (_indicator(A, x0) & _indicator(B, xj[:, 0]) & alive).astype(float)
    signed = float(y.mean()) - _measure(A) * _measure(B)
    se = float(y.std(ddof=1)) / math.sqrt(samples)
    bound, valid = correlation_bound(j, noise.epsilon) if noise.epsilon > 0 else (4.0, False)
    return CorrelationReport(
        j=j,
        epsilon=noise.epsilon,
        value=abs(signed),
        bound=bound,
        within_bound=abs(signed) <= bound,
        method=CorrelationMethod.MONTE_CARLO,
        uncertainty=se,
        signed=signed,
        valid=valid,
    )


# ---------------------------------------------------------------------------
# clustering diagnostics
# ---------------------------------------------------------------------------


def default_kn(n: int) -> int:
    return max(2, math.ceil(math.sqrt(n)))


def dprime_sum(exceed: Sequence[bool], n: int, k_n: int | None = None) -> float:
    """Empirical ``n * sum_{j=1}^{floor(n/k_n)} P(X0 > u_n, X_j > u_n)`` from time averages."""
    e = np.asarray(exceed, dtype=bool).ravel()
    if k_n is None:
        k_n = default_kn(n)
    if k_n < 2:
        raise ConfigurationError("k_n must be >= 2")
    if int(e.sum()) < 50:
        raise TooFewExceedances(f"only {int(e.sum())} exceedances; need at least 50")
    jmax = n // k_n
    if jmax >= e.size:
        raise ConfigurationError("exceedance sequence shorter than the lag window")
    total = math.fsum(float(np.mean(e[:-j] & e[j:])) for j in range(1, jmax + 1))
    return n * total


def annulus_entrances(exceed: Sequence[bool], p: int) -> int:
    """Number of times ``X_i > u`` and ``X_{i+p} <= u`` (entrances into the annulus Q_p(u))."""
    e = np.asarray(exceed, dtype=bool).ravel()
    if p < 1:
        raise ConfigurationError("p must be >= 1")
    return int(np.count_nonzero(e[:-p] & ~e[p:]))


# ---------------------------------------------------------------------------
# box-counting oracle
# ---------------------------------------------------------------------------


def box_counting_dimension(points, exponents: Sequence[int] = (4, 5, 6, 7, 8)) -> float:
    """Slope of log N(r) against log(1/r) for boxes of side ``r = L 2**-k``.

    ``L`` is the side of the bounding square of ``points`` (shape (N, dim)).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    pts = pts[np.all(np.isfinite(pts), axis=1)]
    lo = pts.min(axis=0)
    L = float(np.max(pts.max(axis=0) - lo)) * (1 + 1e-9)
    logs_inv_r, logs_n = [], []
    for k in exponents:
        r = L * 2.0**-k
        idx = np.floor((pts - lo) / r).astype(np.int64)
        keys = idx[:, 0] * (2**k + 1) + (idx[:, 1] if idx.shape[1] > 1 else 0)
        logs_n.append(math.log(np.unique(keys).size))
        logs_inv_r.append(math.log(1.0 / r))
    slope = np.polyfit(logs_inv_r, logs_n, 1)[0]
    return float(slope)


def is_rotation(map_: MapSpec) -> bool:
    return map_.kind is MapKind.ROTATION
