"""Distances, the three observable families and EVL normalising sequences.

An observable is ``phi(x) = g(dist(x, z))`` with

* ``G1``: ``g(y) = -log y`` (Gumbel domain),
* ``G2``: ``g(y) = y**(-1/a)`` (Frechet domain),
* ``G3``: ``g(y) = C - y**(1/a)`` (Weibull domain).

Every ``g`` is strictly decreasing, so the maximum of ``phi`` over a block is
``g`` of the minimum distance over that block.  Experiments exploit this and
work with block minima of distances throughout.

For the uniform models the mass of a ball of radius ``r`` is ``c * r**d``
(``c = 2, d = 1`` on the circle and ``c = pi, d = 2`` on the torus, valid for
``r <= 1/2``), which gives closed-form thresholds and constants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dynamics import Space, StateVector
from .errors import EscapedState, InfeasibleThreshold, InsufficientData, ConfigurationError


class Family(str, Enum):
    G1 = "g1"
    G2 = "g2"
    G3 = "g3"


def distance(space: Space, x, z) -> np.ndarray | float:
    """Metric on ``space``; vectorised over leading axes of ``x``.

    Circle: ``min(|x - z|, 1 - |x - z|)``; torus: Euclidean norm of the
    per-coordinate circle distances; interval and plane: Euclidean.
    """
    x = _as_coords(x)
    z = _as_coords(z)
    diff = np.abs(x - z)
    if space.periodic:
        diff = np.minimum(diff, 1.0 - diff)
    if space.dim == 1:
        d = diff[..., 0] if diff.ndim and diff.shape[-1] == 1 else diff
    else:
        d = np.hypot(diff[..., 0], diff[..., 1])
    return float(d) if np.ndim(d) == 0 else d


def _as_coords(x):
    if isinstance(x, StateVector):
        if x.escaped:
            raise EscapedState("distance to an Escaped state is undefined")
        x = x.coords
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if np.any(np.isnan(arr)):
        raise EscapedState("state contains NaN (Escaped)")
    return arr


@dataclass(frozen=True)
class Observable:
    family: Family
    z: tuple[float, ...]
    space: Space
    a: float = 1.0
    C: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "space", Space(self.space))
        z = tuple(float(c) for c in np.atleast_1d(self.z))
        if len(z) != self.space.dim:
            raise ConfigurationError(f"target point must have {self.space.dim} coordinate(s)")
        object.__setattr__(self, "z", z)
        if not self.a > 0:
            raise ConfigurationError("observable exponent a must be > 0")

    @property
    def tag(self) -> str:
        if self.family is Family.G1:
            return "g1"
        if self.family is Family.G2:
            return f"g2(a={self.a:g})"
        return f"g3(a={self.a:g},C={self.C:g})"

    def g(self, d):
        """Apply the family's profile to distances ``d`` (distance 0 maps to the supremum)."""
        d = np.asarray(d, dtype=float)
        with np.errstate(divide="ignore"):
            if self.family is Family.G1:
                out = -np.log(d)
            elif self.family is Family.G2:
                out = np.power(d, -1.0 / self.a)
            else:
                out = self.C - np.power(d, 1.0 / self.a)
        return float(out) if out.ndim == 0 else out

    def g_inverse(self, u):
        """Distance at which the observable equals ``u``."""
        u = np.asarray(u, dtype=float)
        if self.family is Family.G1:
            out = np.exp(-u)
        elif self.family is Family.G2:
            out = np.power(u, -self.a)
        else:
            out = np.power(self.C - u, self.a)
        return float(out) if out.ndim == 0 else out

    def evaluate(self, x):
        """``g(dist(x, z))``; +inf (G1, G2) or C (G3) when ``x == z``."""
        return self.g(distance(self.space, x, self.z))

    @property
    def tail_type(self) -> int:
        return {Family.G1: 1, Family.G2: 2, Family.G3: 3}[self.family]


def evaluate(obs: Observable, x):
    return obs.evaluate(x)


class MeasureKind(str, Enum):
    UNIFORM_CIRCLE = "uniform_circle"
    UNIFORM_TORUS2 = "uniform_torus2"
    EMPIRICAL = "empirical"


MIN_EMPIRICAL = 1000


@dataclass(frozen=True)
class MeasureModel:
    kind: MeasureKind
    data: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", MeasureKind(self.kind))
        if self.kind is MeasureKind.EMPIRICAL:
            if self.data is None:
                raise InsufficientData("empirical model needs a sample")
            object.__setattr__(self, "data", np.asarray(self.data, dtype=float))

    @classmethod
    def uniform_circle(cls) -> "MeasureModel":
        return cls(MeasureKind.UNIFORM_CIRCLE)

    @classmethod
    def uniform_torus(cls) -> "MeasureModel":
        return cls(MeasureKind.UNIFORM_TORUS2)

    @classmethod
    def empirical(cls, states) -> "MeasureModel":
        return cls(MeasureKind.EMPIRICAL, np.asarray(states, dtype=float))

    @property
    def ball_constants(self) -> tuple[float, int]:
        """(c, d) with mass of a ball of radius r equal to c * r**d."""
        if self.kind is MeasureKind.UNIFORM_CIRCLE:
            return 2.0, 1
        if self.kind is MeasureKind.UNIFORM_TORUS2:
            return math.pi, 2
        raise ValueError("empirical model has no closed-form ball mass")


@dataclass(frozen=True)
class NormalizingConstants:
    a_n: float
    b_n: float
    n: int

    def __post_init__(self):
        if not self.a_n > 0:
            raise ValueError("a_n must be positive")

    def normalize(self, maxima):
        return self.a_n * (np.asarray(maxima, dtype=float) - self.b_n)


def _empirical_exceedance_quantile(values: np.ndarray, p_exceed: float) -> float:
    """Level u with estimated P(X > u) = p_exceed; plotting position k/(N+1)."""
    v = np.sort(values)
    N = v.size
    # x_(k) has non-exceedance probability k/(N+1)
    pos = (1.0 - p_exceed) * (N + 1)
    if pos < 1 or pos > N:
        raise InfeasibleThreshold(
            f"exceedance probability {p_exceed:g} is outside what {N} samples can resolve"
        )
    k = int(math.floor(pos))
    frac = pos - k
    if k >= N:
        return float(v[-1])
    return float(v[k - 1] + frac * (v[k] - v[k - 1]))


def threshold_for_tau(model: MeasureModel, obs: Observable, n: int, tau: float) -> float:
    """Level ``u_n`` with ``n * P(X0 > u_n) = tau`` under ``model``."""
    if not tau > 0 or n < 1:
        raise InfeasibleThreshold("need tau > 0 and n >= 1")
    p = tau / n
    if p > 1:
        raise InfeasibleThreshold(f"tau/n = {p:g} exceeds 1")
    if model.kind is MeasureKind.EMPIRICAL:
        if model.data.shape[0] < MIN_EMPIRICAL:
            raise InsufficientData(f"empirical model needs >= {MIN_EMPIRICAL} samples")
        return _empirical_exceedance_quantile(obs.evaluate(model.data), p)
    c, d = model.ball_constants
    if obs.space.dim != d:
        raise ConfigurationError("measure model and observable live in different spaces")
    r = (p / c) ** (1.0 / d)
    if r > 0.5:
        raise InfeasibleThreshold(f"ball radius {r:g} wraps around the space")
    return float(obs.g(r))


def normalizing_constants(model: MeasureModel, obs: Observable, n: int) -> NormalizingConstants:
    """Affine constants making ``a_n (M_n - b_n)`` converge for i.i.d. draws.

    Closed forms for a uniform model with ball mass ``c r**d``:

    ======  ========================  =================
    family  a_n                       b_n
    ======  ========================  =================
    G1      d                         log(c n) / d
    G2      (c n) ** (-1 / (a d))     0
    G3      (c n) ** (1 / (a d))      C
    ======  ========================  =================

    For the empirical model the same identities ``u_n(tau(y)) = y / a_n + b_n``
    are solved with empirical thresholds.
    """
    if model.kind is MeasureKind.EMPIRICAL:
        if model.data.shape[0] < MIN_EMPIRICAL:
            raise InsufficientData(f"empirical model needs >= {MIN_EMPIRICAL} samples")
        u1 = threshold_for_tau(model, obs, n, 1.0)
        if obs.family is Family.G1:
            a_n = 1.0 / (threshold_for_tau(model, obs, n, math.exp(-1.0)) - u1)
            return NormalizingConstants(a_n, u1, n)
        if obs.family is Family.G2:
            return NormalizingConstants(1.0 / u1, 0.0, n)
        return NormalizingConstants(1.0 / (obs.C - u1), obs.C, n)
    c, d = model.ball_constants
    ad = obs.a * d
    if obs.family is Family.G1:
        return NormalizingConstants(float(d), math.log(c * n) / d, n)
    if obs.family is Family.G2:
        return NormalizingConstants((c * n) ** (-1.0 / ad), 0.0, n)
    return NormalizingConstants((c * n) ** (1.0 / ad), obs.C, n)


def tail_exponent(model: MeasureModel, obs: Observable) -> float:
    """Exponent alpha of the limiting Frechet/Weibull law (``a * d``)."""
    _, d = model.ball_constants
    return obs.a * d
