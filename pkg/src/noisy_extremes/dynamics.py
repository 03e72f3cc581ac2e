"""Map families, additive uniform noise and random orbits.

Every map is perturbed as ``x -> f(x) + eps * xi`` with ``xi`` drawn uniformly
on ``[-1, 1]`` independently at each step; circle and torus coordinates are
then reduced mod 1.  The per-step arithmetic lives in a single numba kernel so
that the scalar :func:`step` and the bulk :func:`random_orbit` agree bit for
bit.

Random streams
--------------
All randomness comes from :func:`stream`, which builds a PCG64 generator from
``SeedSequence(master_seed, spawn_key=key)``.  Distinct keys give statistically
independent streams, so realization ``i`` of an ensemble can be generated in
any order (or in another process) and still reproduce exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence, Union

import numpy as np
from numba import njit

from .errors import ConfigurationError, EscapeDominates

GOLDEN_MEAN = (math.sqrt(5.0) - 1.0) / 2.0

HENON_ESCAPE = 10.0
QUADRATIC_ESCAPE = 1.0e3

_CHUNK = 1 << 18


class MapKind(str, Enum):
    ROTATION = "rotation"
    TERNARY_SHIFT = "ternary_shift"
    QUADRATIC = "quadratic"
    POMEAU_MANNEVILLE = "pomeau_manneville"
    LSV = "lsv"
    CUSP_LORENZ = "cusp_lorenz"
    ARNOLD_CAT = "arnold_cat"
    HENON = "henon"


class Space(str, Enum):
    CIRCLE = "circle"
    INTERVAL = "interval"
    TORUS2 = "torus2"
    PLANE2 = "plane2"

    @property
    def dim(self) -> int:
        return 2 if self in (Space.TORUS2, Space.PLANE2) else 1

    @property
    def periodic(self) -> bool:
        return self in (Space.CIRCLE, Space.TORUS2)


SPACE_OF = {
    MapKind.ROTATION: Space.CIRCLE,
    MapKind.TERNARY_SHIFT: Space.CIRCLE,
    MapKind.POMEAU_MANNEVILLE: Space.CIRCLE,
    MapKind.LSV: Space.CIRCLE,
    MapKind.QUADRATIC: Space.INTERVAL,
    MapKind.CUSP_LORENZ: Space.INTERVAL,
    MapKind.ARNOLD_CAT: Space.TORUS2,
    MapKind.HENON: Space.PLANE2,
}

# integer codes used inside the numba kernels
_CODE = {kind: i for i, kind in enumerate(MapKind)}

_DEFAULT_PARAMS: dict[MapKind, dict[str, float]] = {
    MapKind.ROTATION: {"alpha": GOLDEN_MEAN},
    MapKind.TERNARY_SHIFT: {},
    MapKind.QUADRATIC: {"a": 0.314},
    MapKind.POMEAU_MANNEVILLE: {"alpha": 0.5},
    MapKind.LSV: {"alpha": 0.5},
    MapKind.CUSP_LORENZ: {"a": 0.98},
    MapKind.ARNOLD_CAT: {"independent_noise": 0.0},
    MapKind.HENON: {"a": 1.4, "b": 0.3},
}

# generic starting points for long stationary runs
_DEFAULT_START = {
    MapKind.ROTATION: (0.1234567,),
    MapKind.TERNARY_SHIFT: (0.2718281828,),
    MapKind.QUADRATIC: (0.1,),
    MapKind.POMEAU_MANNEVILLE: (0.3141592653,),
    MapKind.LSV: (0.3141592653,),
    MapKind.CUSP_LORENZ: (0.5,),
    MapKind.ARNOLD_CAT: (0.1234567, 0.5678901),
    MapKind.HENON: (0.1, 0.1),
}


@dataclass(frozen=True)
class MapSpec:
    """A deterministic map family with its parameters.

    ``params`` is completed with the family defaults; unknown keys are
    rejected.  Use the classmethod constructors for the common cases.
    """

    kind: MapKind
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        kind = MapKind(self.kind)
        merged = dict(_DEFAULT_PARAMS[kind])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ConfigurationError(f"unknown parameters for {kind.value}: {sorted(unknown)}")
        merged.update({k: float(v) for k, v in self.params.items()})
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", merged)
        self._validate()

    def _validate(self):
        p = self.params
        if self.kind is MapKind.QUADRATIC and not p["a"] > 0:
            raise ConfigurationError("quadratic map needs a > 0")
        if self.kind in (MapKind.POMEAU_MANNEVILLE, MapKind.LSV) and not 0 < p["alpha"] <= 1:
            raise ConfigurationError("intermittency exponent alpha must lie in (0, 1]")
        if self.kind is MapKind.CUSP_LORENZ and not 0 < p["a"] < 2:
            raise ConfigurationError("cusp map needs a in (0, 2)")
        if self.kind is MapKind.HENON and p["b"] == 0:
            raise ConfigurationError("Henon map needs b != 0")

    # constructors ---------------------------------------------------------
    @classmethod
    def rotation(cls, alpha: float = GOLDEN_MEAN) -> "MapSpec":
        return cls(MapKind.ROTATION, {"alpha": alpha})

    @classmethod
    def ternary_shift(cls) -> "MapSpec":
        return cls(MapKind.TERNARY_SHIFT)

    @classmethod
    def quadratic(cls, a: float) -> "MapSpec":
        return cls(MapKind.QUADRATIC, {"a": a})

    @classmethod
    def pomeau_manneville(cls, alpha: float) -> "MapSpec":
        return cls(MapKind.POMEAU_MANNEVILLE, {"alpha": alpha})

    @classmethod
    def lsv(cls, alpha: float) -> "MapSpec":
        return cls(MapKind.LSV, {"alpha": alpha})

    @classmethod
    def cusp_lorenz(cls, a: float) -> "MapSpec":
        return cls(MapKind.CUSP_LORENZ, {"a": a})

    @classmethod
    def arnold_cat(cls, independent_noise: bool = False) -> "MapSpec":
        return cls(MapKind.ARNOLD_CAT, {"independent_noise": float(independent_noise)})

    @classmethod
    def henon(cls, a: float = 1.4, b: float = 0.3) -> "MapSpec":
        return cls(MapKind.HENON, {"a": a, "b": b})

    # properties -----------------------------------------------------------
    @property
    def space(self) -> Space:
        return SPACE_OF[self.kind]

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def noise_draws(self) -> int:
        """Number of uniform draws consumed per step."""
        if self.kind is MapKind.ARNOLD_CAT and self.params["independent_noise"]:
            return 2
        return 1

    @property
    def default_start(self) -> tuple[float, ...]:
        return _DEFAULT_START[self.kind]

    def kernel_args(self) -> tuple[int, float, float]:
        p = self.params
        if self.kind is MapKind.HENON:
            return _CODE[self.kind], p["a"], p["b"]
        first = p.get("alpha", p.get("a", 0.0))
        return _CODE[self.kind], float(first), 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "params": dict(sorted(self.params.items()))}


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise, uniform on ``[-epsilon, epsilon]``."""

    epsilon: float = 0.0

    def __post_init__(self):
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ConfigurationError(f"noise intensity must be finite and >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class StateVector:
    coords: tuple[float, ...]
    escaped: bool = False

    @property
    def alive(self) -> bool:
        return not self.escaped


@dataclass(frozen=True)
class OrbitConfig:
    length: int
    burn_in: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.length < 1:
            raise ConfigurationError("orbit length must be >= 1")
        if self.burn_in < 0:
            raise ConfigurationError("burn_in must be >= 0")


@dataclass
class Orbit:
    """States of one random orbit.

    ``points`` has shape ``(length, dim)``.  If the orbit escaped, rows from
    ``escaped_at`` on are NaN and every later state counts as Escaped.
    """

    points: np.ndarray
    escaped_at: int | None = None

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def escaped(self) -> bool:
        return self.escaped_at is not None

    @property
    def alive_points(self) -> np.ndarray:
        return self.points if self.escaped_at is None else self.points[: self.escaped_at]

    def state(self, i: int) -> StateVector:
        if self.escaped_at is not None and i >= self.escaped_at:
            return StateVector(tuple(self.points[i]), escaped=True)
        return StateVector(tuple(float(c) for c in self.points[i]))


SeedLike = Union[int, np.random.Generator, np.random.SeedSequence]


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the sub-task identified by ``key``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return stream(int(seed))


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _wrap(x):
    r = x - math.floor(x)
    if r >= 1.0:  # x a tiny negative number
        r = 0.0
    return r


@njit(cache=True)
def _apply(code, p0, p1, x, y, e1, e2):
    """One noisy step. Returns (x', y', escaped)."""
    if code == 0:  # rotation
        return _wrap(x + p0 + e1), 0.0, False
    if code == 1:  # ternary shift
        return _wrap(3.0 * x + e1), 0.0, False
    if code == 2:  # quadratic
        nx = 1.0 - p0 * x * x + e1
        return nx, 0.0, not abs(nx) <= 1.0e3
    if code == 3:  # Pomeau-Manneville
        return _wrap(x + x ** (1.0 + p0) + e1), 0.0, False
    if code == 4:  # Liverani-Saussol-Vaienti
        if x < 0.5:
            fx = x * (1.0 + (2.0 ** p0) * x ** p0)
        else:
            fx = 2.0 * x - 1.0
        return _wrap(fx + e1), 0.0, False
    if code == 5:  # cusp Lorenz map
        if x > 0.0:
            fx = -p0 + x ** p0
        elif x < 0.0:
            fx = p0 - (-x) ** p0
        else:
            fx = 0.0
        nx = fx + e1
        return nx, 0.0, not abs(nx) <= 1.0
    if code == 6:  # Arnold cat
        return _wrap(2.0 * x + y + e1), _wrap(x + y + e2), False
    # Henon, noise on the x equation only
    nx = y + 1.0 - p0 * x * x + e1
    return nx, p1 * x, not abs(nx) <= 10.0


@njit(cache=True)
def _iterate(code, p0, p1, eps, two_draws, x, y, xi, out):
    """Advance ``xi.shape[0]`` steps from (x, y), storing states in ``out``.

    Returns (x, y, k) where k is the index of the first escaped state or -1.
    """
    for i in range(xi.shape[0]):
        e1 = eps * xi[i, 0]
        e2 = eps * xi[i, 1] if two_draws else e1
        x, y, esc = _apply(code, p0, p1, x, y, e1, e2)
        if esc:
            return x, y, i
        out[i, 0] = x
        if out.shape[1] > 1:
            out[i, 1] = y
    return x, y, -1


@njit(cache=True)
def _advance_many(code, p0, p1, eps, two_draws, xs, ys, xi, alive):
    """One step for a population of states, in place."""
    for i in range(xs.shape[0]):
        if not alive[i]:
            continue
        e1 = eps * xi[i, 0]
        e2 = eps * xi[i, 1] if two_draws else e1
        nx, ny, esc = _apply(code, p0, p1, xs[i], ys[i], e1, e2)
        if esc:
            alive[i] = False
        xs[i] = nx
        ys[i] = ny


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def _coords(map_: MapSpec, x) -> np.ndarray:
    if isinstance(x, StateVector):
        if x.escaped:
            raise ConfigurationError("cannot iterate an Escaped state")
        x = x.coords
    c = np.atleast_1d(np.asarray(x, dtype=float))
    if c.shape != (map_.dim,):
        raise ConfigurationError(
            f"{map_.kind.value} lives in {map_.space.value} (dim {map_.dim}); got state of shape {c.shape}"
        )
    return c


def _draws(rng: np.random.Generator, map_: MapSpec, eps: float, steps: int) -> np.ndarray:
    k = map_.noise_draws
    if eps == 0.0:
        return np.zeros((steps, 2))
    xi = rng.uniform(-1.0, 1.0, size=(steps, k))
    if k == 1:
        xi = np.repeat(xi, 2, axis=1)
    return xi


def step(map_: MapSpec, x: StateVector | Sequence[float] | float, xi=0.0, epsilon: float = 0.0) -> StateVector:
    """Apply one noisy step with explicit noise draw(s) ``xi`` in [-1, 1].

    Examples
    --------
    >>> step(MapSpec.rotation(0.25), 0.5).coords
    (0.75,)
    """
    c = _coords(map_, x)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.any(np.abs(xi) > 1.0):
        raise ConfigurationError("noise draws must lie in [-1, 1]")
    e1 = epsilon * xi[0]
    e2 = epsilon * xi[1] if (xi.size > 1 and map_.noise_draws == 2) else e1
    code, p0, p1 = map_.kernel_args()
    y = c[1] if c.size > 1 else 0.0
    nx, ny, esc = _apply(code, p0, p1, float(c[0]), float(y), float(e1), float(e2))
    coords = (nx, ny) if map_.dim == 2 else (nx,)
    return StateVector(tuple(float(v) for v in coords), escaped=bool(esc))


def _run(map_, eps, start, steps, rng, out=None):
    """Advance ``steps`` steps; returns (final coords, escape index or -1)."""
    code, p0, p1 = map_.kernel_args()
    two = map_.noise_draws == 2
    x = float(start[0])
    y = float(start[1]) if start.size > 1 else 0.0
    scratch = None
    done = 0
    while done < steps:
        chunk = min(_CHUNK, steps - done)
        xi = _draws(rng, map_, eps, chunk)
        if out is None:
            if scratch is None or scratch.shape[0] < chunk:
                scratch = np.empty((chunk, map_.dim))
            buf = scratch[:chunk]
        else:
            buf = out[done : done + chunk]
        x, y, k = _iterate(code, p0, p1, eps, two, x, y, xi, buf)
        if k >= 0:
            return None, done + k
        done += chunk
    final = np.array([x, y][: map_.dim])
    return final, -1


def random_orbit(map_: MapSpec, noise: NoiseSpec, x0, cfg: OrbitConfig) -> Orbit:
    """Random orbit ``x, f_w1(x), f_w2(f_w1(x)), ...`` with i.i.d. noise.

    The first ``cfg.burn_in`` steps are discarded; the returned orbit starts
    with the state reached after burn-in (``x0`` itself when burn_in is 0)
    and holds ``cfg.length`` states.  ``cfg.seed`` may be an int or a
    ready-made generator.
    """
    rng = as_generator(cfg.seed)
    start = _coords(map_, x0)
    points = np.full((cfg.length, map_.dim), np.nan)
    if cfg.burn_in:
        start, k = _run(map_, noise.epsilon, start, cfg.burn_in, rng)
        if k >= 0:
            return Orbit(points, escaped_at=0)
    points[0] = start
    if cfg.length > 1:
        _, k = _run(map_, noise.epsilon, start, cfg.length - 1, rng, out=points[1:])
        if k >= 0:
            points[1 + k :] = np.nan
            return Orbit(points, escaped_at=1 + k)
    return Orbit(points)


@dataclass
class StationarySample:
    points: np.ndarray
    escapes: int = 0

    def __len__(self) -> int:
        return self.points.shape[0]


def sample_stationary(
    map_: MapSpec,
    noise: NoiseSpec,
    burn_in: int,
    count: int,
    seed: SeedLike,
    stride: int = 100,
    x0=None,
    max_restarts: int = 20,
) -> StationarySample:
    """Draw ``count`` states from the empirical stationary measure.

    States are read every ``stride`` steps along one long run after
    ``burn_in`` transient steps.  If the run escapes, the states collected so
    far are kept and a fresh run is started from ``x0``; after
    ``max_restarts`` escapes the (possibly short) sample is returned.

    Raises
    ------
    EscapeDominates
        If no state at all survives.
    """
    if count < 1:
        raise ConfigurationError("count must be >= 1")
    rng = as_generator(seed)
    start = _coords(map_, map_.default_start if x0 is None else x0)
    collected: list[np.ndarray] = []
    have = 0
    escapes = 0
    while have < count:
        need = count - have
        orbit = random_orbit(map_, noise, start, OrbitConfig(length=need * stride, burn_in=burn_in, seed=rng))
        picked = orbit.alive_points[::stride][:need]
        if picked.shape[0]:
            collected.append(picked)
            have += picked.shape[0]
        if not orbit.escaped:
            break
        escapes += 1
        if escapes > max_restarts:
            break
    if not have:
        raise EscapeDominates(
            f"{map_.kind.value} with eps={noise.epsilon:g}: every stationary run escaped ({escapes} attempts)"
        )
    return StationarySample(np.concatenate(collected)[:count], escapes=escapes)


def random_start(map_: MapSpec, rng: np.random.Generator) -> np.ndarray:
    """Lebesgue-random point in a box inside the basin of the attractor."""
    if map_.space.periodic:
        return rng.random(map_.dim)
    if map_.kind is MapKind.HENON:
        return np.asarray(map_.default_start) + 0.1 * rng.uniform(-1.0, 1.0, 2)
    return rng.uniform(-1.0, 1.0, 1) * (0.999 if map_.kind is MapKind.CUSP_LORENZ else 1.0)


def typical_states(
    map_: MapSpec,
    noise: NoiseSpec,
    burn_in: int,
    count: int,
    seed_of,
    max_tries: int = 20,
) -> StationarySample:
    """``count`` independent states, each a random start pushed through its own burn-in.

    ``seed_of(j)`` returns the generator for state ``j``.  Unlike
    :func:`sample_stationary` the states do not lie on a common trajectory,
    which matters for deterministic maps.  Starts that escape are redrawn
    from the same generator; states that fail ``max_tries`` times are
    dropped.

    Raises
    ------
    EscapeDominates
        If no state survives.
    """
    out = []
    escapes = 0
    for j in range(count):
        rng = as_generator(seed_of(j))
        for _ in range(max_tries):
            orbit = random_orbit(map_, noise, random_start(map_, rng), OrbitConfig(1, burn_in, rng))
            if not orbit.escaped:
                out.append(orbit.points[0])
                break
            escapes += 1
        if not out and escapes >= max_tries:
            # the very first state never survived: the noise level is hopeless
            break
    if not out:
        raise EscapeDominates(
            f"{map_.kind.value} with eps={noise.epsilon:g}: every burn-in run escaped ({escapes} attempts)"
        )
    return StationarySample(np.array(out), escapes=escapes)


def propagate(map_: MapSpec, noise: NoiseSpec, points: np.ndarray, steps: int, rng: np.random.Generator):
    """Push a population of states ``steps`` noisy steps forward.

    Each point gets its own independent noise sequence.  Returns the new
    points and a boolean mask of the ones that stayed alive.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, map_.dim)
    xs = pts[:, 0].copy()
    ys = pts[:, 1].copy() if map_.dim == 2 else np.zeros_like(xs)
    alive = np.ones(xs.shape[0], dtype=bool)
    code, p0, p1 = map_.kernel_args()
    two = map_.noise_draws == 2
    for _ in range(steps):
        xi = _draws(rng, map_, noise.epsilon, xs.shape[0])
        _advance_many(code, p0, p1, noise.epsilon, two, xs, ys, xi, alive)
    out = np.column_stack([xs, ys])[:, : map_.dim]
    return out, alive


def deterministic_image(map_: MapSpec, x) -> np.ndarray:
    """f(x) without noise."""
    return np.asarray(step(map_, x).coords)


def jacobian(map_: MapSpec, x) -> np.ndarray:
    """Derivative matrix of the deterministic map at ``x``."""
    c = _coords(map_, x)
    p = map_.params
    k = map_.kind
    if k is MapKind.ROTATION:
        d = 1.0
    elif k is MapKind.TERNARY_SHIFT:
        d = 3.0
    elif k is MapKind.QUADRATIC:
        d = -2.0 * p["a"] * c[0]
    elif k is MapKind.POMEAU_MANNEVILLE:
        d = 1.0 + (1.0 + p["alpha"]) * c[0] ** p["alpha"]
    elif k is MapKind.LSV:
        a = p["alpha"]
        d = 1.0 + (1.0 + a) * 2.0**a * c[0] ** a if c[0] < 0.5 else 2.0
    elif k is MapKind.CUSP_LORENZ:
        d = p["a"] * abs(c[0]) ** (p["a"] - 1.0)
    elif k is MapKind.ARNOLD_CAT:
        return np.array([[2.0, 1.0], [1.0, 1.0]])
    else:
        return np.array([[-2.0 * p["a"] * c[0], 1.0], [p["b"], 0.0]])
    return np.array([[d]])


def attracting_fixed_point(map_: MapSpec) -> float:
    """Fixed point ``z = (-1 + sqrt(1 + 4a)) / (2a)`` of the quadratic map."""
    if map_.kind is not MapKind.QUADRATIC:
        raise ConfigurationError("closed-form attracting fixed point only for the quadratic map")
    a = map_.params["a"]
    return (-1.0 + math.sqrt(1.0 + 4.0 * a)) / (2.0 * a)
