"""Ensemble protocol: orbits, block maxima, GEV fits, KS tests, aggregation.

For each noise level the protocol is

1. draw initial conditions (and, for ``stationary`` targets, target points)
   from a long run of the noisy system,
2. generate ``R`` independent orbits of length ``m * n``,
3. take block minima of the distance to the target, which give the block
   maxima of every observable at once,
4. fit a GEV to each series by maximum likelihood and KS-test the fit,
5. average the parameters over realizations and flag the noise level as
   reliable when at least 70% of the realizations pass the KS test.

Random streams are keyed by ``(master_seed, role, eps index, realization)``
so results do not depend on the number of workers or on execution order.
"""
from __future__ import annotations

import logging
import math
import os
import warnings
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import theory
from .dynamics import (
    MapKind,
    MapSpec,
    NoiseSpec,
    OrbitConfig,
    attracting_fixed_point,
    random_orbit,
    stream,
    typical_states,
)
from .errors import (
    AllRealizationsFailed,
    ConfigurationError,
    EscapeDominates,
    NoisyExtremesError,
    NotExpanding,
    RangeError,
)
from .evt import (
    EiNormalization,
    BlockMaximaSeries,
    GevFit,
    block_minima,
    estimate_extremal_index,
    fit_and_test,
)
from .observables import Family, Observable, distance

log = logging.getLogger(__name__)

GENERIC_Z = 0.7371
RELIABLE_FRACTION = 0.7
ABORT_FRACTION = 0.5
MAX_MN = 10**8
MAX_RESTARTS = 3
STATIONARY_RESTARTS = 20
WORKERS_ENV = "NOISY_EXTREMES_WORKERS"

# stream roles
_STATIONARY = 0
_ORBIT = 1


class TargetKind(str, Enum):
    FIXED = "fixed"
    PERIODIC = "periodic"
    STATIONARY = "stationary"


@dataclass(frozen=True)
class Target:
    kind: TargetKind
    z: tuple[float, ...] | None = None
    period: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", TargetKind(self.kind))
        if self.z is not None:
            object.__setattr__(self, "z", tuple(float(c) for c in np.atleast_1d(self.z)))
        if self.kind is TargetKind.STATIONARY:
            if self.z is not None or self.period is not None:
                raise ConfigurationError("a stationary target takes no point or period")
        elif self.kind is TargetKind.PERIODIC:
            if self.period is None or int(self.period) < 1:
                raise RangeError("target.period", "must be an integer >= 1")
            object.__setattr__(self, "period", int(self.period))
        elif self.period is not None:
            raise ConfigurationError("only periodic targets take a period")

    @classmethod
    def fixed(cls, z) -> "Target":
        return cls(TargetKind.FIXED, z)

    @classmethod
    def periodic(cls, z, p: int) -> "Target":
        return cls(TargetKind.PERIODIC, z, p)

    @classmethod
    def stationary(cls) -> "Target":
        return cls(TargetKind.STATIONARY)


def default_target_point(map_: MapSpec) -> tuple[float, ...]:
    """Generic point 0.7371 on circle maps, the attracting fixed point for the quadratic map."""
    if map_.kind is MapKind.QUADRATIC:
        return (attracting_fixed_point(map_),)
    if map_.dim == 1:
        return (GENERIC_Z,)
    return (GENERIC_Z, GENERIC_Z)


@dataclass(frozen=True)
class ObservableSpec:
    family: Family
    a: float = 1.0
    C: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "C", float(self.C))
        if not self.a > 0:
            raise RangeError("observables.a", "must be > 0")

    def bind(self, map_: MapSpec, z) -> Observable:
        return Observable(self.family, z, map_.space, self.a, self.C)

    @property
    def tag(self) -> str:
        return Observable(self.family, (0.0,), "circle", self.a, self.C).tag


def standard_observables(a: float = 3.0, C: float = 0.0) -> tuple[ObservableSpec, ...]:
    return (ObservableSpec(Family.G1), ObservableSpec(Family.G2, a), ObservableSpec(Family.G3, a, C))


class Analysis(str, Enum):
    GEV = "gev"
    EI = "ei"


@dataclass(frozen=True)
class ExperimentConfig:
    map: MapSpec
    observables: tuple[ObservableSpec, ...]
    target: Target
    eps_grid: tuple[float, ...]
    m: int = 200
    n: int = 1000
    realizations: int = 50
    master_seed: int = 0
    burn_in: int = 10_000
    analysis: Analysis = Analysis.GEV
    normalization: EiNormalization = EiNormalization.TWO_N

    def __post_init__(self):
        object.__setattr__(self, "observables", tuple(self.observables))
        object.__setattr__(self, "eps_grid", tuple(float(e) for e in self.eps_grid))
        object.__setattr__(self, "analysis", Analysis(self.analysis))
        object.__setattr__(self, "normalization", EiNormalization(self.normalization))
        if not self.eps_grid:
            raise RangeError("eps_grid", "must contain at least one noise level")
        for i, e in enumerate(self.eps_grid):
            if not (e >= 0 and math.isfinite(e)):
                raise RangeError(f"eps_grid[{i}]", f"noise intensity must be >= 0, got {e}")
        if self.analysis is Analysis.GEV and not self.observables:
            raise RangeError("observables", "at least one observable is required")
        for name in ("m", "n", "realizations"):
            if int(getattr(self, name)) < 1:
                raise RangeError(name, "must be >= 1")
        if self.analysis is Analysis.GEV and self.m < 30:
            raise RangeError("m", "GEV fits need at least 30 blocks")
        if self.burn_in < 0:
            raise RangeError("burn_in", "must be >= 0")
        if self.m * self.n > MAX_MN:
            raise RangeError("m*n", f"orbit length {self.m * self.n} exceeds the guard {MAX_MN}")
        if self.target.z is not None and len(self.target.z) != self.map.dim:
            raise RangeError("target.z", f"needs {self.map.dim} coordinate(s)")
        if self.analysis is Analysis.EI and self.target.kind is TargetKind.STATIONARY:
            raise RangeError("target", "extremal index sweeps need a fixed or periodic target")


def p_of(eps: float) -> float:
    """Noise exponent p with eps = 10**-p (inf for the deterministic case)."""
    return math.inf if eps == 0 else -math.log10(eps)


def fsum_mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation with compensated sums."""
    v = [float(x) for x in values]
    if not v:
        return math.nan, math.nan
    mean = math.fsum(v) / len(v)
    var = math.fsum((x - mean) ** 2 for x in v) / len(v)
    return mean, math.sqrt(var)


# ---------------------------------------------------------------------------
# single realizations (top level so they pickle into worker processes)
# ---------------------------------------------------------------------------


@dataclass
class RealizationOutcome:
    index: int
    fits: dict[str, GevFit | None]
    reasons: dict[str, str]
    escapes: int = 0
    failure: str | None = None  # orbit-level failure: nothing could be fitted


def _simulate(cfg: ExperimentConfig, eps: float, eps_idx: int, i: int, x0, reserve):
    """Orbit of realization ``i``; escaped cusp orbits restart from ``reserve``.

    Returns (orbit or None, number of escapes, failure reason or None).
    """
    rng = stream(cfg.master_seed, _ORBIT, eps_idx, i)
    noise = NoiseSpec(eps)
    escapes = 0
    start = x0
    while True:
        orbit = random_orbit(cfg.map, noise, start, OrbitConfig(length=cfg.m * cfg.n, seed=rng))
        if not orbit.escaped:
            return orbit, escapes, None
        escapes += 1
        if cfg.map.kind is not MapKind.CUSP_LORENZ or escapes > MAX_RESTARTS or not len(reserve):
            return None, escapes, f"orbit escaped at step {orbit.escaped_at}"
        start = reserve[(i + escapes * 7919) % len(reserve)]


def _orbit_distances(cfg: ExperimentConfig, eps: float, eps_idx: int, i: int, x0, z, reserve):
    orbit, escapes, why = _simulate(cfg, eps, eps_idx, i, x0, reserve)
    if orbit is None:
        return None, escapes, why
    return block_minima(distance(cfg.map.space, orbit.points, z), cfg.n), escapes, None


def _gev_realization(cfg: ExperimentConfig, eps: float, eps_idx: int, i: int, x0, z, reserve) -> RealizationOutcome:
    tags = [o.tag for o in cfg.observables]
    dmin, escapes, why = _orbit_distances(cfg, eps, eps_idx, i, x0, z, reserve)
    if dmin is None:
        return RealizationOutcome(i, dict.fromkeys(tags), dict.fromkeys(tags, why), escapes, why)
    if np.any(dmin == 0):
        why = "orbit hit the target exactly"
        return RealizationOutcome(i, dict.fromkeys(tags), dict.fromkeys(tags, why), escapes, why)
    fits: dict[str, GevFit | None] = {}
    reasons: dict[str, str] = {}
    for ospec in cfg.observables:
        obs = ospec.bind(cfg.map, z)
        try:
            fits[ospec.tag] = fit_and_test(BlockMaximaSeries(obs.g(dmin), cfg.n, ospec.tag))
        except NoisyExtremesError as exc:
            fits[ospec.tag] = None
            reasons[ospec.tag] = f"{type(exc).__name__}: {exc}"
    return RealizationOutcome(i, fits, reasons, escapes)


@dataclass
class EiOutcome:
    index: int
    theta: float | None
    raw: float | None
    escapes: int = 0
    failure: str | None = None


def _ei_realization(cfg: ExperimentConfig, eps: float, eps_idx: int, i: int, x0, z, reserve) -> EiOutcome:
    dmin, escapes, why = _orbit_distances(cfg, eps, eps_idx, i, x0, z, reserve)
    if dmin is None:
        return EiOutcome(i, None, None, escapes, why)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            est = estimate_extremal_index(dmin, cfg.n, cfg.normalization, eps)
    except NoisyExtremesError as exc:
        return EiOutcome(i, None, None, escapes, f"{type(exc).__name__}: {exc}")
    return EiOutcome(i, est.theta, est.raw_theta, escapes)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _map_realizations(fn: Callable, jobs: list[tuple], workers: int | None) -> list:
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(jobs) < 2:
        return [fn(*job) for job in jobs]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=workers)(delayed(fn)(*job) for job in jobs)


@dataclass
class _Inputs:
    starts: np.ndarray
    targets: list[tuple[float, ...]]
    reserve: np.ndarray
    escapes: int
    failure: str | None = None


def _prepare(cfg: ExperimentConfig, eps: float, eps_idx: int) -> _Inputs:
    """Initial conditions, targets and a reserve of restart states for one noise level.

    Every state comes from its own random start and burn-in, so realizations
    are independent even without noise.
    """
    R = cfg.realizations
    stationary = cfg.target.kind is TargetKind.STATIONARY
    restartable = cfg.map.kind is MapKind.CUSP_LORENZ
    count = R * (1 + stationary + restartable)
    try:
        sample = typical_states(
            cfg.map,
            NoiseSpec(eps),
            cfg.burn_in,
            count,
            lambda j: stream(cfg.master_seed, _STATIONARY, eps_idx, j),
            max_tries=STATIONARY_RESTARTS,
        )
    except EscapeDominates as exc:
        empty = np.empty((0, cfg.map.dim))
        return _Inputs(empty, [], empty, STATIONARY_RESTARTS, str(exc))
    pts = sample.points
    if pts.shape[0] < count:
        # some states never survived their burn-in: reuse the others cyclically
        pts = pts[np.arange(count) % pts.shape[0]]
    starts = pts[:R]
    if stationary:
        targets = [tuple(float(c) for c in row) for row in pts[R : 2 * R]]
    else:
        z = cfg.target.z if cfg.target.z is not None else default_target_point(cfg.map)
        targets = [tuple(z)] * R
    reserve = pts[R * (1 + stationary) :]
    return _Inputs(starts, targets, reserve, sample.escapes)


# ---------------------------------------------------------------------------
# GEV ensembles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamSummary:
    mean: float
    std: float
    n_fits: int


@dataclass
class ObservableSummary:
    tag: str
    kappa: ParamSummary
    sigma: ParamSummary
    nu: ParamSummary
    inv_sigma: ParamSummary
    ks_pass_fraction: float
    reliable: bool
    failures: dict[str, int] = field(default_factory=dict)


@dataclass
class AggregateResult:
    """Ensemble summary at one noise level."""

    epsilon: float
    p: float
    observables: dict[str, ObservableSummary]
    escape_count: int
    realizations: int
    failed_realizations: int
    aborted: bool
    outcomes: list[RealizationOutcome] = field(default_factory=list, repr=False)


def _summ(values: list[float]) -> ParamSummary:
    mean, std = fsum_mean_std(values)
    return ParamSummary(mean, std, len(values))


def aggregate(
    epsilon: float, tags: Sequence[str], outcomes: Sequence[RealizationOutcome], R: int, extra_escapes: int = 0
) -> AggregateResult:
    """Reduce realization outcomes; the result does not depend on their order."""
    outcomes = sorted(outcomes, key=lambda o: o.index)
    summaries = {}
    for tag in tags:
        fits = [o.fits[tag] for o in outcomes if o.fits.get(tag) is not None]
        passed = sum(1 for f in fits if f.ks_pass)
        reasons = Counter(o.reasons[tag].split(":")[0] for o in outcomes if tag in o.reasons)
        frac = passed / R
        summaries[tag] = ObservableSummary(
            tag=tag,
            kappa=_summ([f.kappa for f in fits]),
            sigma=_summ([f.sigma for f in fits]),
            nu=_summ([f.nu for f in fits]),
            inv_sigma=_summ([1.0 / f.sigma for f in fits]),
            ks_pass_fraction=frac,
            reliable=frac >= RELIABLE_FRACTION,
            failures=dict(sorted(reasons.items())),
        )
    failed = R - sum(1 for o in outcomes if o.failure is None)
    return AggregateResult(
        epsilon=epsilon,
        p=p_of(epsilon),
        observables=summaries,
        escape_count=extra_escapes + sum(o.escapes for o in outcomes),
        realizations=R,
        failed_realizations=failed,
        aborted=failed > ABORT_FRACTION * R,
        outcomes=list(outcomes),
    )


@dataclass
class EnsembleResult:
    config: ExperimentConfig
    per_eps: list[AggregateResult]

    @property
    def aborted(self) -> bool:
        return any(r.aborted for r in self.per_eps)


def ensemble_orbits(cfg: ExperimentConfig, eps_idx: int):
    """Yield ``(target, orbit points)`` for every surviving realization at one noise level.

    Regenerates exactly the data that :func:`run_ensemble` analyses.
    """
    eps = cfg.eps_grid[eps_idx]
    inp = _prepare(cfg, eps, eps_idx)
    if inp.failure is not None:
        return
    for i in range(cfg.realizations):
        orbit, _, _ = _simulate(cfg, eps, eps_idx, i, inp.starts[i], inp.reserve)
        if orbit is not None:
            yield inp.targets[i], orbit.points


def _check_target(cfg: ExperimentConfig) -> None:
    if cfg.target.kind is TargetKind.PERIODIC:
        theory.check_periodic(cfg.map, cfg.target.z, cfg.target.period)


def run_ensemble(cfg: ExperimentConfig, workers: int | None = None, strict: bool = False) -> EnsembleResult:
    """Run the GEV protocol at every noise level of ``cfg``.

    Realizations that fail (escape, exact hit of the target) are excluded and
    logged; a noise level where more than half fail is flagged ``aborted``.
    With ``strict=True`` a noise level without a single usable realization
    raises :class:`AllRealizationsFailed` instead of being reported.
    """
    if cfg.analysis is not Analysis.GEV:
        raise ConfigurationError("run_ensemble needs a GEV analysis config; use ei_sweep")
    _check_target(cfg)
    tags = [o.tag for o in cfg.observables]
    results = []
    for k, eps in enumerate(cfg.eps_grid):
        inp = _prepare(cfg, eps, k)
        if inp.failure is not None:
            log.warning("eps=%g: %s", eps, inp.failure)
            outcomes = [
                RealizationOutcome(i, dict.fromkeys(tags), dict.fromkeys(tags, "EscapeDominates"), 0, inp.failure)
                for i in range(cfg.realizations)
            ]
        else:
            jobs = [(cfg, eps, k, i, inp.starts[i], inp.targets[i], inp.reserve) for i in range(cfg.realizations)]
            outcomes = _map_realizations(_gev_realization, jobs, workers)
        for o in outcomes:
            if o.failure is not None:
                log.info("eps=%g realization %d excluded: %s", eps, o.index, o.failure)
        agg = aggregate(eps, tags, outcomes, cfg.realizations, inp.escapes)
        if strict and agg.failed_realizations == cfg.realizations:
            raise AllRealizationsFailed(f"eps={eps:g}: every realization failed")
        results.append(agg)
    return EnsembleResult(cfg, results)


# ---------------------------------------------------------------------------
# extremal index sweeps
# ---------------------------------------------------------------------------


@dataclass
class EiAggregate:
    epsilon: float
    p: float
    theta_mean: float
    theta_std: float
    raw_mean: float
    n_ok: int
    realizations: int
    escape_count: int
    theoretical: float | None
    failures: dict[str, int] = field(default_factory=dict)

    @property
    def aborted(self) -> bool:
        return self.realizations - self.n_ok > ABORT_FRACTION * self.realizations


@dataclass
class EiSweepResult:
    config: ExperimentConfig
    per_eps: list[EiAggregate]

    @property
    def aborted(self) -> bool:
        return any(r.aborted for r in self.per_eps)


def ei_sweep(cfg: ExperimentConfig, workers: int | None = None) -> EiSweepResult:
    """Extremal index against noise intensity at a fixed or periodic target.

    ``theoretical`` holds ``1 - |det Df^-p(z)|`` for repelling periodic
    targets and None when the formula does not apply (attracting or
    non-hyperbolic points, fixed targets without a period).
    """
    if cfg.analysis is not Analysis.EI:
        raise ConfigurationError("ei_sweep needs an EI analysis config")
    _check_target(cfg)
    theo = None
    if cfg.target.kind is TargetKind.PERIODIC:
        try:
            theo = theory.theoretical_ei(cfg.map, cfg.target.z, cfg.target.period)
        except NotExpanding:
            theo = None
    out = []
    for k, eps in enumerate(cfg.eps_grid):
        inp = _prepare(cfg, eps, k)
        if inp.failure is not None:
            outcomes = [EiOutcome(i, None, None, 0, "EscapeDominates") for i in range(cfg.realizations)]
        else:
            jobs = [(cfg, eps, k, i, inp.starts[i], inp.targets[i], inp.reserve) for i in range(cfg.realizations)]
            outcomes = _map_realizations(_ei_realization, jobs, workers)
        ok = [o for o in sorted(outcomes, key=lambda o: o.index) if o.theta is not None]
        mean, std = fsum_mean_std([o.theta for o in ok])
        raw_mean, _ = fsum_mean_std([o.raw for o in ok])
        reasons = Counter(o.failure.split(":")[0] for o in outcomes if o.failure is not None)
        out.append(
            EiAggregate(
                epsilon=eps,
                p=p_of(eps),
                theta_mean=mean,
                theta_std=std,
                raw_mean=raw_mean,
                n_ok=len(ok),
                realizations=cfg.realizations,
                escape_count=inp.escapes + sum(o.escapes for o in outcomes),
                theoretical=theo,
                failures=dict(sorted(reasons.items())),
            )
        )
    return EiSweepResult(cfg, out)


# ---------------------------------------------------------------------------
# figure datasets
# ---------------------------------------------------------------------------


class Scale(str, Enum):
    DESK = "desk"
    FULL = "full"


@dataclass(frozen=True)
class ScaleParams:
    realizations: int
    m: int
    n_values: tuple[int, ...]


SCALES = {
    Scale.DESK: ScaleParams(50, 200, (1000,)),
    Scale.FULL: ScaleParams(500, 1000, (1000, 10_000)),
}

P_GRID = tuple(range(1, 9))
EPS_GRID = (0.0,) + tuple(10.0**-p for p in P_GRID)
PM_ALPHAS = tuple(round(0.1 * i, 1) for i in range(1, 11))
CUSP_AS = (0.95, 0.96, 0.97, 0.98, 0.99)


@dataclass(frozen=True)
class Series:
    label: str
    config: ExperimentConfig


def _gev_series(label, map_, observables, target, scale: Scale, seed: int, eps_grid=EPS_GRID) -> list[Series]:
    sp = SCALES[scale]
    out = []
    for n in sp.n_values:
        cfg = ExperimentConfig(
            map=map_,
            observables=observables,
            target=target,
            eps_grid=eps_grid,
            m=sp.m,
            n=n,
            realizations=sp.realizations,
            master_seed=seed,
        )
        out.append(Series(f"{label}n={n}", cfg))
    return out


def _fig_rot(scale, seed):
    return _gev_series("", MapSpec.rotation(), standard_observables(), Target.fixed(GENERIC_Z), scale, seed)


def _fig_ber(scale, seed):
    return _gev_series("", MapSpec.ternary_shift(), standard_observables(), Target.fixed(GENERIC_Z), scale, seed)


def _fig_ei(scale, seed):
    sp = SCALES[scale]
    out = []
    for n in sp.n_values:
        cfg = ExperimentConfig(
            map=MapSpec.ternary_shift(),
            observables=(),
            target=Target.periodic(0.5, 1),
            eps_grid=EPS_GRID,
            m=sp.m,
            n=n,
            realizations=sp.realizations,
            master_seed=seed,
            analysis=Analysis.EI,
        )
        out.append(Series(f"n={n}", cfg))
    return out


def _fig_pm(scale, seed):
    out = []
    for alpha in PM_ALPHAS:
        out += _gev_series(
            f"alpha={alpha:g},",
            MapSpec.pomeau_manneville(alpha),
            (ObservableSpec(Family.G1),),
            Target.fixed(GENERIC_Z),
            scale,
            seed,
        )
    return out


def _fig_lor(scale, seed):
    out = []
    for a in CUSP_AS:
        out += _gev_series(
            f"a={a:g},", MapSpec.cusp_lorenz(a), (ObservableSpec(Family.G1),), Target.stationary(), scale, seed
        )
    return out


def _fig_cat(scale, seed):
    return _gev_series(
        "", MapSpec.arnold_cat(), standard_observables(a=1.0), Target.fixed((GENERIC_Z, GENERIC_Z)), scale, seed
    )


def _fig_henon(scale, seed):
    return _gev_series("", MapSpec.henon(), standard_observables(a=1.0), Target.stationary(), scale, seed)


FIGURES: dict[str, Callable[[Scale, int], list[Series]]] = {
    "rot": _fig_rot,
    "ber": _fig_ber,
    "ei": _fig_ei,
    "PM": _fig_pm,
    "lor": _fig_lor,
    "cat": _fig_cat,
    "henon": _fig_henon,
}


@dataclass
class FigureDataset:
    name: str
    scale: Scale
    series: list[tuple[str, EnsembleResult | EiSweepResult]]

    @property
    def aborted(self) -> bool:
        return any(res.aborted for _, res in self.series)


def figure_series(name: str, scale: Scale | str = Scale.DESK, seed: int = 0) -> list[Series]:
    if name not in FIGURES:
        raise ConfigurationError(f"unknown figure {name!r}; choose from {sorted(FIGURES)}")
    return FIGURES[name](Scale(scale), seed)


def figure_dataset(name: str, scale: Scale | str = Scale.DESK, seed: int = 0, workers: int | None = None) -> FigureDataset:
    """Run every series of the named figure."""
    series = figure_series(name, scale, seed)
    out = []
    for s in series:
        if s.config.analysis is Analysis.EI:
            out.append((s.label, ei_sweep(s.config, workers)))
        else:
            out.append((s.label, run_ensemble(s.config, workers)))
    return FigureDataset(name, Scale(scale), out)
