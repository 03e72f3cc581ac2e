"""Block maxima, GEV maximum likelihood, goodness of fit and the extremal index.

GEV convention: ``F(x) = exp(-[1 + kappa (x - nu) / sigma] ** (-1 / kappa))``
on ``1 + kappa (x - nu) / sigma > 0``.  ``kappa > 0`` is Frechet, ``kappa < 0``
Weibull and ``kappa -> 0`` the Gumbel law ``exp(-exp(-(x - nu) / sigma))``.
Note that ``scipy.stats.genextreme`` uses ``c = -kappa``.

Fitting is done on standardised data (zero mean, unit variance) and mapped
back, which makes the optimiser tolerances scale free.
"""
from __future__ import annotations

import logging
import math
import os
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize
from scipy.special import gamma as gamma_fn

from .dynamics import stream
from .errors import (
    DegenerateSample,
    EpsilonRequired,
    InsufficientData,
    NonConvergence,
    NonFiniteInput,
    SupportViolation,
    TooFewBlocks,
    ZeroDistance,
)

log = logging.getLogger(__name__)

MIN_BLOCKS = 30
SMALL_SHAPE = 1e-6
EULER_GAMMA = 0.5772156649015329
Z95 = 1.959963984540054

PARAM_NAMES = ("kappa", "sigma", "nu")


# ---------------------------------------------------------------------------
# block statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockMaximaSeries:
    values: np.ndarray
    block_length: int
    tag: str = ""

    @property
    def m(self) -> int:
        return int(self.values.size)

    @property
    def degenerate(self) -> bool:
        return is_degenerate(self.values)


def is_degenerate(values) -> bool:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return True
    sd = float(np.std(v, ddof=1))
    return not sd > max(1e-12, 1e-8 * abs(float(np.mean(v))))


def _blocks(series, n: int) -> np.ndarray:
    x = np.asarray(series, dtype=float).ravel()
    if n < 1:
        raise ValueError("block length must be >= 1")
    if x.size < 2 * n:
        raise InsufficientData(f"series of length {x.size} holds fewer than two blocks of {n}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("series contains NaN or infinite values")
    m = x.size // n
    return x[: m * n].reshape(m, n)


def block_maxima(series, n: int, tag: str = "") -> BlockMaximaSeries:
    """One maximum per contiguous block of ``n``; a trailing partial block is dropped."""
    bm = BlockMaximaSeries(_blocks(series, n).max(axis=1), n, tag)
    if bm.degenerate:
        log.debug("block maxima %s are degenerate", tag or "")
    return bm


def block_minima(series, n: int) -> np.ndarray:
    return _blocks(series, n).min(axis=1)


# ---------------------------------------------------------------------------
# GEV distribution
# ---------------------------------------------------------------------------


def gev_cdf(x, kappa: float, sigma: float, nu: float):
    z = (np.asarray(x, dtype=float) - nu) / sigma
    if abs(kappa) < SMALL_SHAPE:
        return np.exp(-np.exp(-z))
    t = 1.0 + kappa * z
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.exp(-np.exp(-np.log1p(kappa * z) / kappa))
    below = 0.0 if kappa > 0 else 1.0
    return np.where(t > 0, out, below)


def gev_ppf(p, kappa: float, sigma: float, nu: float):
    w = -np.log(-np.log(np.asarray(p, dtype=float)))  # standard Gumbel quantile
    if abs(kappa) < SMALL_SHAPE:
        return nu + sigma * w
    return nu + sigma * np.expm1(kappa * w) / kappa


def gev_rvs(kappa: float, sigma: float, nu: float, size, rng: np.random.Generator):
    u = rng.random(size)
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    return gev_ppf(u, kappa, sigma, nu)


def _terms_general(z, kappa):
    lt = np.log1p(kappa * z)
    L = lt / kappa
    return -lt - L - np.exp(-L)


def _terms_small(z, kappa):
    # second order expansion of log1p(kappa z) / kappa around the Gumbel limit
    lt = np.log1p(kappa * z)
    L = z - kappa * z * z / 2.0 + kappa * kappa * z**3 / 3.0
    return -lt - L - np.exp(-L)


def gev_logpdf_terms(x, kappa: float, sigma: float, nu: float) -> np.ndarray:
    """Per-point log density; -inf outside the support."""
    if not sigma > 0:
        return np.full(np.shape(x), -np.inf)
    z = (np.asarray(x, dtype=float) - nu) / sigma
    t = 1.0 + kappa * z
    out = np.full(z.shape, -np.inf)
    ok = t > 0
    with np.errstate(over="ignore"):
        if abs(kappa) < SMALL_SHAPE:
            out[ok] = _terms_small(z[ok], kappa)
        else:
            out[ok] = _terms_general(z[ok], kappa)
    return out - math.log(sigma)


def gev_loglik(x, kappa: float, sigma: float, nu: float) -> float:
    if not sigma > 0:
        return -math.inf
    z = (np.asarray(x, dtype=float) - nu) / sigma
    if np.any(1.0 + kappa * z <= 0):
        return -math.inf
    with np.errstate(over="ignore"):
        terms = _terms_small(z, kappa) if abs(kappa) < SMALL_SHAPE else _terms_general(z, kappa)
    val = float(np.sum(terms)) - z.size * math.log(sigma)
    return val if math.isfinite(val) else -math.inf


def gev_loglik_grad(x, kappa: float, sigma: float, nu: float) -> np.ndarray:
    """Analytic gradient of :func:`gev_loglik` in the order (kappa, sigma, nu)."""
    z = (np.asarray(x, dtype=float) - nu) / sigma
    t = 1.0 + kappa * z
    if np.any(t <= 0) or not sigma > 0:
        return np.full(3, np.nan)
    if abs(kappa) < SMALL_SHAPE:
        L = z - kappa * z * z / 2.0 + kappa * kappa * z**3 / 3.0
        # (z/t - L) / kappa expanded in kappa
        r = -z * z / 2.0 + 2.0 * kappa * z**3 / 3.0 - 0.75 * kappa * kappa * z**4
    else:
        L = np.log1p(kappa * z) / kappa
        r = (z / t - L) / kappa
    s = np.exp(-L)
    w = (s - 1.0 - kappa) / t  # d loglik / dz per point
    d_nu = -np.sum(w) / sigma
    d_sigma = -z.size / sigma - np.sum(z * w) / sigma
    d_kappa = np.sum(-z / t - (1.0 - s) * r)
    return np.array([d_kappa, d_sigma, d_nu])


def gev_loglik_hessian(x, kappa: float, sigma: float, nu: float) -> np.ndarray:
    """Hessian by central differences of the analytic gradient."""
    theta = np.array([kappa, sigma, nu], dtype=float)
    h = np.array([1e-5, 1e-5 * sigma, 1e-5 * sigma])
    H = np.empty((3, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = h[i]
        gp = gev_loglik_grad(x, *(theta + e))
        gm = gev_loglik_grad(x, *(theta - e))
        H[:, i] = (gp - gm) / (2.0 * h[i])
    return 0.5 * (H + H.T)


# ---------------------------------------------------------------------------
# maximum likelihood
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GevFit:
    kappa: float
    sigma: float
    nu: float
    ci: tuple[tuple[float, float], ...]
    stderr: tuple[float, float, float]
    loglik: float
    m: int
    ks_stat: float | None = None
    ks_pass: bool | None = None
    iterations: int = 0

    @property
    def params(self) -> tuple[float, float, float]:
        return (self.kappa, self.sigma, self.nu)

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "sigma": self.sigma,
            "nu": self.nu,
            "ci": {name: list(ci) for name, ci in zip(PARAM_NAMES, self.ci)},
            "stderr": dict(zip(PARAM_NAMES, self.stderr)),
            "loglik": self.loglik,
            "m": self.m,
            "ks_stat": self.ks_stat,
            "ks_pass": self.ks_pass,
        }


def pwm_start(x) -> tuple[float, float, float]:
    """Probability-weighted-moment estimates (Hosking 1985), used as a seed."""
    x = np.sort(np.asarray(x, dtype=float))
    m = x.size
    i = np.arange(m)
    b0 = x.mean()
    b1 = np.sum(i / (m - 1) * x) / m
    b2 = np.sum(i * (i - 1) / ((m - 1) * (m - 2)) * x) / m
    l1, l2, l3 = b0, 2 * b1 - b0, 6 * b2 - 6 * b1 + b0
    if not l2 > 0:
        return 0.0, float(np.std(x)) or 1.0, float(b0)
    c = 2.0 / (3.0 + l3 / l2) - math.log(2) / math.log(3)
    k = float(np.clip(7.8590 * c + 2.9554 * c * c, -0.9, 5.0))  # Hosking's k = -kappa
    if abs(k) < 1e-6:
        sigma = l2 / math.log(2)
        return 0.0, sigma, l1 - EULER_GAMMA * sigma
    sigma = l2 * k / ((1 - 2.0**-k) * gamma_fn(1 + k))
    nu = l1 - sigma * (1 - gamma_fn(1 + k)) / k
    return -k, float(sigma), float(nu)


def _newton(y, theta, max_iter=50):
    """Newton ascent with backtracking; returns (theta, loglik, iterations, ok)."""
    theta = np.asarray(theta, dtype=float)
    ll = gev_loglik(y, *theta)
    if not math.isfinite(ll):
        return theta, ll, 0, False
    for it in range(1, max_iter + 1):
        g = gev_loglik_grad(y, *theta)
        H = gev_loglik_hessian(y, *theta)
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
            return theta, ll, it, False
        if np.max(np.linalg.eigvalsh(H)) >= 0:
            return theta, ll, it, False
        d = np.linalg.solve(H, -g)
        step = 1.0
        for _ in range(40):
            cand = theta + step * d
            cll = gev_loglik(y, *cand)
            if cll >= ll - 1e-12 * abs(ll):
                break
            step *= 0.5
        else:
            return theta, ll, it, np.linalg.norm(g) < 1e-6
        theta, ll = cand, cll
        if np.max(np.abs(step * d)) < 1e-11 or np.linalg.norm(g) < 1e-10:
            return theta, ll, it, True
    g = gev_loglik_grad(y, *theta)
    return theta, ll, max_iter, bool(np.linalg.norm(g) < 1e-6)


def _simplex(y, start, max_iter, tol):
    def negll(p):
        ll = gev_loglik(y, p[0], math.exp(p[1]), p[2])
        return -ll if math.isfinite(ll) else math.inf

    p0 = np.array([start[0], math.log(start[1]), start[2]])
    if not math.isfinite(negll(p0)):
        # fall back to a Gumbel seed, always admissible
        p0 = np.array([0.0, math.log(math.sqrt(6) / math.pi), -EULER_GAMMA * math.sqrt(6) / math.pi])
        if not math.isfinite(negll(p0)):
            raise SupportViolation("no admissible starting parameters")
    res = minimize(
        negll, p0, method="Nelder-Mead", options={"xatol": tol, "fatol": 1e-10, "maxiter": max_iter}
    )
    if not math.isfinite(res.fun):
        raise SupportViolation("simplex search left the GEV support")
    return np.array([res.x[0], math.exp(res.x[1]), res.x[2]]), res


def _fit_standardized(y, start=None, *, use_simplex=True, max_iter=500, tol=1e-8):
    """MLE on standardised data. Returns (theta, loglik, H, iterations)."""
    if start is None:
        start = pwm_start(y)
    iters = 0
    theta = np.asarray(start, dtype=float)
    if use_simplex:
        theta, res = _simplex(y, theta, max_iter, tol)
        iters = int(res.nit)
    theta_n, ll, it, ok = _newton(y, theta)
    iters += it
    if not ok:
        g = gev_loglik_grad(y, *theta_n)
        if not (np.all(np.isfinite(g)) and np.linalg.norm(g) < 1e-4):
            raise NonConvergence(f"GEV likelihood did not converge (|grad| = {np.linalg.norm(g):.3g})")
    return theta_n, ll, gev_loglik_hessian(y, *theta_n), iters


def _check_sample(values) -> np.ndarray:
    x = np.asarray(values, dtype=float).ravel()
    if x.size < MIN_BLOCKS:
        raise TooFewBlocks(f"need at least {MIN_BLOCKS} maxima, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("maxima contain NaN or infinite values")
    if is_degenerate(x):
        raise DegenerateSample("maxima have zero spread: no non-degenerate extreme value law")
    return x


def fit_gev_mle(bm: BlockMaximaSeries | np.ndarray, *, max_iter: int = 500, tol: float = 1e-8) -> GevFit:
    """Maximum likelihood GEV fit with observed-information 95% intervals.

    A Nelder-Mead search seeded by probability-weighted moments locates the
    optimum; Newton steps with the analytic gradient then polish it.

    Raises
    ------
    TooFewBlocks, DegenerateSample, SupportViolation, NonConvergence
    """
    x = _check_sample(bm.values if isinstance(bm, BlockMaximaSeries) else bm)
    mu, sd = float(x.mean()), float(x.std(ddof=1))
    y = (x - mu) / sd
    theta, ll, H, iters = _fit_standardized(y, max_iter=max_iter, tol=tol)
    k, s_y, n_y = theta
    jac = np.diag([1.0, sd, sd])
    try:
        cov = jac @ np.linalg.inv(-H) @ jac
        se = np.sqrt(np.where(np.diag(cov) > 0, np.diag(cov), np.nan))
    except np.linalg.LinAlgError:
        se = np.full(3, np.nan)
    params = np.array([k, sd * s_y, mu + sd * n_y])
    ci = tuple((float(p - Z95 * e), float(p + Z95 * e)) for p, e in zip(params, se))
    return GevFit(
        kappa=float(params[0]),
        sigma=float(params[1]),
        nu=float(params[2]),
        ci=ci,
        stderr=tuple(float(e) for e in se),
        loglik=float(ll - x.size * math.log(sd)),
        m=x.size,
        iterations=iters,
    )


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov with estimated parameters
# ---------------------------------------------------------------------------

KS_LEVEL = 0.05
KS_RESAMPLES = 999
KS_TABLE_SEED = 7_250_001
KS_GRID = np.round(np.arange(-1.0, 2.0 + 1e-9, 0.1), 10)
# on-disk cache for bootstrap nodes, shared by worker processes; "off" disables it
CACHE_ENV = "NOISY_EXTREMES_CACHE"


def ks_statistic(values, kappa: float, sigma: float, nu: float) -> float:
    x = np.sort(np.asarray(values, dtype=float))
    m = x.size
    F = gev_cdf(x, kappa, sigma, nu)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))


def _bootstrap_stat(y_raw, kappa):
    mu, sd = float(y_raw.mean()), float(y_raw.std(ddof=1))
    y = (y_raw - mu) / sd
    start = (kappa, 1.0 / sd, -mu / sd)
    try:
        theta, _, _, _ = _fit_standardized(y, start, use_simplex=False)
    except (NonConvergence, SupportViolation):
        theta, _, _, _ = _fit_standardized(y)
    return ks_statistic(y, *theta)


def _bootstrap_node(m: int, idx: int) -> float:
    kappa = float(KS_GRID[idx])
    rng = stream(KS_TABLE_SEED, m, idx)
    stats = []
    for _ in range(KS_RESAMPLES):
        sample = gev_rvs(kappa, 1.0, 0.0, m, rng)
        try:
            stats.append(_bootstrap_stat(sample, kappa))
        except (NonConvergence, SupportViolation, DegenerateSample):
            continue
    if len(stats) < 0.9 * KS_RESAMPLES:
        raise NonConvergence(f"bootstrap table for m={m}, kappa={kappa:g}: too many failed refits")
    stats = np.sort(stats)
    # (B + 1)(1 - level)-th order statistic
    r = int(math.ceil((len(stats) + 1) * (1.0 - KS_LEVEL))) - 1
    return float(stats[min(r, len(stats) - 1)])


def _disk_cache():
    loc = os.environ.get(CACHE_ENV, os.path.join(os.path.expanduser("~"), ".cache", "noisy_extremes"))
    if loc.lower() == "off":
        return None
    from joblib import Memory

    return Memory(loc, verbose=0)


@lru_cache(maxsize=None)
def _critical_node(m: int, idx: int) -> float:
    mem = _disk_cache()
    if mem is None:
        return _bootstrap_node(m, idx)
    # the node is a pure function of (m, idx) and the fixed table seed
    return mem.cache(_bootstrap_node)(m, idx)


def ks_critical_value(m: int, kappa: float) -> float:
    """5% critical value of the KS statistic when all three GEV parameters are estimated.

    The null distribution does not depend on location and scale, so a
    parametric-bootstrap table over a grid of shapes (999 resamples per node)
    is built lazily, cached in memory and on disk, and interpolated linearly in kappa.
    """
    k = float(np.clip(kappa, KS_GRID[0], KS_GRID[-1]))
    pos = (k - KS_GRID[0]) / 0.1
    lo = int(min(math.floor(pos + 1e-9), KS_GRID.size - 2))
    w = pos - lo
    c_lo = _critical_node(int(m), lo)
    if w < 1e-9:
        return c_lo
    return (1 - w) * c_lo + w * _critical_node(int(m), lo + 1)


def ks_test(bm: BlockMaximaSeries | np.ndarray, fit: GevFit) -> tuple[float, bool]:
    """KS statistic of the maxima against the fitted GEV and pass flag at level 0.05."""
    values = bm.values if isinstance(bm, BlockMaximaSeries) else np.asarray(bm, dtype=float)
    stat = ks_statistic(values, fit.kappa, fit.sigma, fit.nu)
    return stat, bool(stat < ks_critical_value(values.size, fit.kappa))


def fit_and_test(bm: BlockMaximaSeries | np.ndarray) -> GevFit:
    fit = fit_gev_mle(bm)
    stat, ok = ks_test(bm, fit)
    return replace(fit, ks_stat=stat, ks_pass=ok)


# ---------------------------------------------------------------------------
# extremal index and local dimension
# ---------------------------------------------------------------------------


class EiNormalization(str, Enum):
    TWO_N = "2n"
    TWO_N_OVER_EPS = "2n/eps"


@dataclass(frozen=True)
class EiEstimate:
    theta: float
    ci: tuple[float, float]
    normalization: EiNormalization
    raw_theta: float = field(default=math.nan)
    m: int = 0


def estimate_extremal_index(
    min_distances,
    n: int,
    normalization: EiNormalization | str = EiNormalization.TWO_N,
    epsilon: float | None = None,
) -> EiEstimate:
    """Extremal index from block minima of distances to the target.

    The minima are rescaled by ``2n`` (or ``2n/eps``), so that for a process
    with EI ``theta`` the rescaled values are approximately Exp(theta).  The
    rate MLE ``1/mean`` is clipped to (0, 1].
    """
    normalization = EiNormalization(normalization)
    d = np.asarray(min_distances, dtype=float).ravel()
    if d.size == 0:
        raise InsufficientData("no block minima")
    if not np.all(np.isfinite(d)):
        raise NonFiniteInput("minimum distances must be finite")
    if np.any(d <= 0):
        raise ZeroDistance("a block minimum distance is zero; the orbit hit the target exactly")
    factor = 2.0 * n
    if normalization is EiNormalization.TWO_N_OVER_EPS:
        if not epsilon:
            raise EpsilonRequired("2n/eps normalisation needs eps > 0")
        factor /= epsilon
    v = factor * d
    raw = 1.0 / float(np.mean(v))
    theta = min(raw, 1.0)
    if raw > 1.0:
        warnings.warn(f"extremal index estimate {raw:.4f} > 1 clipped to 1", RuntimeWarning, stacklevel=2)
    half = Z95 / math.sqrt(d.size)
    ci = (raw * (1.0 - half), raw * (1.0 + half))
    return EiEstimate(theta=theta, ci=ci, normalization=normalization, raw_theta=raw, m=d.size)


def local_dimension_from_fit(fit: GevFit) -> float:
    """Local dimension ``1/sigma`` from a fit of G1 maxima."""
    return 1.0 / fit.sigma
