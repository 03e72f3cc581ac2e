"""Acceptance checks shared by ``noisy-extremes selftest`` and the test suite.

Each ``criterion_k`` runs one check at its stated tolerance and returns a
:class:`CriterionResult`.  ``details`` only holds deterministic quantities, so
the files written by :func:`run_selftest` are byte-identical between runs
with the same seed; wall-clock timings go to the manifest only.
"""
from __future__ import annotations

import filecmp
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats

from . import __version__
from .dynamics import GOLDEN_MEAN, MapSpec, stream
from .evt import (
    _terms_general,
    _terms_small,
    fit_gev_mle,
    gev_loglik,
    gev_loglik_grad,
    gev_logpdf_terms,
    gev_rvs,
)
from .experiments import (
    GENERIC_Z,
    ExperimentConfig,
    ObservableSpec,
    Target,
    default_target_point,
    ei_sweep,
    ensemble_orbits,
    run_ensemble,
    standard_observables,
)
from .observables import Family, MeasureModel, Observable, distance, normalizing_constants
from .theory import box_counting_dimension, fourier_correlation

DESK = dict(m=200, n=1000, realizations=50)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0
    budget: float | None = None

    @property
    def in_time(self) -> bool:
        return self.budget is None or self.seconds <= self.budget

    def line(self) -> str:
        status = "PASS" if self.passed and self.in_time else "FAIL"
        budget = f" budget {self.budget:.0f}s" if self.budget else ""
        key = ", ".join(f"{k}={_short(v)}" for k, v in self.details.items() if not isinstance(v, (list, dict)))
        return f"[{status}] criterion {self.number}: {self.title} ({self.seconds:.1f}s{budget}) {key}"

    def to_dict(self) -> dict:
        return {"criterion": self.number, "title": self.title, "passed": self.passed, "details": self.details}


def _short(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return v


def _within(x, lo, hi) -> bool:
    return bool(lo <= x <= hi)


# ---------------------------------------------------------------------------
# 1. correlation decay lemma
# ---------------------------------------------------------------------------


def criterion_1(seed: int = 1) -> CriterionResult:
    pairs = [((0.0, 0.1), [(0.0, 0.1)]), ((0.2, 0.45), [(0.05, 0.15), (0.5, 0.62)])]
    checked = violations = invalid = 0
    worst = -math.inf
    for eps in (0.1, 0.3, 0.5, 0.7):
        for j in range(5, 201):
            for A, B in pairs:
                r = fourier_correlation(A, B, GOLDEN_MEAN, eps, j)
                if not r.valid:
                    invalid += 1
                    continue
                checked += 1
                violations += not r.within_bound
                worst = max(worst, (r.value + r.uncertainty) / r.bound)
    return CriterionResult(
        1,
        "correlation decay bound for noisy rotations",
        violations == 0 and checked > 0,
        {"grid_points": checked, "invalid_points": invalid, "violations": violations, "max_ratio_to_bound": worst},
        budget=60,
    )


# ---------------------------------------------------------------------------
# 2. ternary shift at a generic point
# ---------------------------------------------------------------------------


def criterion_2(seed: int = 1) -> CriterionResult:
    cfg = ExperimentConfig(
        MapSpec.ternary_shift(), standard_observables(3.0), Target.fixed(GENERIC_Z), (1e-3,), master_seed=seed, **DESK
    )
    a = run_ensemble(cfg).per_eps[0]
    g1, g2, g3 = (a.observables[o.tag] for o in cfg.observables)
    d = {
        "kappa_g1": g1.kappa.mean,
        "sigma_g1": g1.sigma.mean,
        "kappa_g2": g2.kappa.mean,
        "kappa_g3": g3.kappa.mean,
        "ks_pass_g1": g1.ks_pass_fraction,
        "ks_pass_g2": g2.ks_pass_fraction,
        "ks_pass_g3": g3.ks_pass_fraction,
    }
    ok = (
        _within(d["kappa_g1"], -0.05, 0.05)
        and _within(d["sigma_g1"], 0.93, 1.07)
        and _within(d["kappa_g2"], 1 / 3 - 0.05, 1 / 3 + 0.05)
        and _within(d["kappa_g3"], -1 / 3 - 0.05, -1 / 3 + 0.05)
        and min(g1.ks_pass_fraction, g2.ks_pass_fraction, g3.ks_pass_fraction) >= 0.7
    )
    return CriterionResult(2, "ternary shift, generic point, eps=1e-3", ok, d, budget=300)


# ---------------------------------------------------------------------------
# 3. extremal index dichotomy at z = 1/2
# ---------------------------------------------------------------------------


def criterion_3(seed: int = 1) -> CriterionResult:
    cfg = ExperimentConfig(
        MapSpec.ternary_shift(), (), Target.periodic(0.5, 1), (0.0, 0.1), master_seed=seed, analysis="ei", **DESK
    )
    det, noisy = ei_sweep(cfg).per_eps
    d = {"theta_eps0": det.theta_mean, "theta_eps0.1": noisy.theta_mean, "theta_theory": det.theoretical}
    ok = _within(det.theta_mean, 2 / 3 - 0.06, 2 / 3 + 0.06) and _within(noisy.theta_mean, 0.93, 1.07)
    return CriterionResult(3, "extremal index 2/3 at eps=0, 1 at eps=0.1", ok, d, budget=180)


# ---------------------------------------------------------------------------
# 4. rotation: no EVL without noise
# ---------------------------------------------------------------------------


def criterion_4(seed: int = 1) -> CriterionResult:
    g1 = (ObservableSpec(Family.G1),)
    det_cfg = ExperimentConfig(
        MapSpec.rotation(), g1, Target.fixed(GENERIC_Z), (0.0,), m=1000, n=1000, realizations=50, master_seed=seed
    )
    noisy_cfg = ExperimentConfig(MapSpec.rotation(), g1, Target.fixed(GENERIC_Z), (1e-2,), master_seed=seed, **DESK)
    det = run_ensemble(det_cfg).per_eps[0].observables["g1"]
    noisy = run_ensemble(noisy_cfg).per_eps[0].observables["g1"]
    d = {
        "eps0_reliable": det.reliable,
        "eps0_ks_pass": det.ks_pass_fraction,
        "eps0_kappa_g1": det.kappa.mean,
        "eps0.01_reliable": noisy.reliable,
        "eps0.01_ks_pass": noisy.ks_pass_fraction,
        "eps0.01_kappa_g1": noisy.kappa.mean,
    }
    ok = (not det.reliable) and noisy.reliable and _within(noisy.kappa.mean, -0.08, 0.08)
    return CriterionResult(4, "rotation: unreliable at eps=0, EVL at eps=1e-2", ok, d)


# ---------------------------------------------------------------------------
# 5. Arnold cat map
# ---------------------------------------------------------------------------


def criterion_5(seed: int = 1) -> CriterionResult:
    cfg = ExperimentConfig(
        MapSpec.arnold_cat(),
        standard_observables(1.0),
        Target.fixed((GENERIC_Z, GENERIC_Z)),
        (0.0, 1e-3),
        master_seed=seed,
        **DESK,
    )
    d = {}
    ok = True
    for a in run_ensemble(cfg).per_eps:
        g1, g2 = a.observables["g1"], a.observables["g2(a=1)"]
        d[f"sigma_g1_eps{a.epsilon:g}"] = g1.sigma.mean
        d[f"kappa_g2_eps{a.epsilon:g}"] = g2.kappa.mean
        ok = ok and _within(g1.sigma.mean, 0.45, 0.55) and _within(g2.kappa.mean, 0.43, 0.57)
    return CriterionResult(5, "Arnold cat: sigma(g1)=1/2, kappa(g2)=1/2", ok, d, budget=300)


# ---------------------------------------------------------------------------
# 6. quadratic map, 2n/eps normalisation
# ---------------------------------------------------------------------------


def criterion_6(seed: int = 1) -> CriterionResult:
    map_ = MapSpec.quadratic(0.314)
    cfg = ExperimentConfig(
        map_,
        (),
        Target.fixed(default_target_point(map_)),
        (1e-4, 1e-3, 1e-2),
        master_seed=seed,
        analysis="ei",
        normalization="2n/eps",
        **DESK,
    )
    d = {}
    ok = True
    for a in ei_sweep(cfg).per_eps:
        d[f"theta_eps{a.epsilon:g}"] = a.theta_mean
        ok = ok and _within(a.theta_mean, 0.9, 1.1)
    return CriterionResult(6, "quadratic map, attracting fixed point, 2n/eps", ok, d, budget=180)


# ---------------------------------------------------------------------------
# 7. Pomeau-Manneville
# ---------------------------------------------------------------------------

PM_SLOW_GRID = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


def criterion_7(seed: int = 1) -> CriterionResult:
    g1 = (ObservableSpec(Family.G1),)
    fast = ExperimentConfig(
        MapSpec.pomeau_manneville(0.3), g1, Target.fixed(GENERIC_Z), (1e-3,), master_seed=seed, **DESK
    )
    slow = ExperimentConfig(
        MapSpec.pomeau_manneville(0.9), g1, Target.fixed(GENERIC_Z), PM_SLOW_GRID, master_seed=seed, **DESK
    )
    f = run_ensemble(fast).per_eps[0].observables["g1"]
    d = {"alpha0.3_reliable": f.reliable, "alpha0.3_sigma_g1": f.sigma.mean}
    ok = f.reliable and _within(f.sigma.mean, 0.9, 1.1)
    for a in run_ensemble(slow).per_eps:
        s = a.observables["g1"]
        d[f"alpha0.9_eps{a.epsilon:g}_ks_pass"] = s.ks_pass_fraction
        ok = ok and not s.reliable
    return CriterionResult(7, "Pomeau-Manneville alpha=0.3 vs alpha=0.9", ok, d)


# ---------------------------------------------------------------------------
# 8. Henon local dimension
# ---------------------------------------------------------------------------

BOX_THIN = 10


def criterion_8(seed: int = 1) -> CriterionResult:
    g1 = (ObservableSpec(Family.G1),)
    cfg = ExperimentConfig(MapSpec.henon(), g1, Target.stationary(), (0.0, 0.1), master_seed=seed, **DESK)
    det, noisy = run_ensemble(cfg).per_eps
    inv_sigma = det.observables["g1"].inv_sigma.mean
    pts = np.concatenate([p[::BOX_THIN] for _, p in ensemble_orbits(cfg, 0)])
    box = box_counting_dimension(pts)
    d = {
        "mean_inv_sigma_g1": inv_sigma,
        "box_counting": box,
        "fits": det.observables["g1"].inv_sigma.n_fits,
        "eps0.1_escape_count": noisy.escape_count,
        "eps0.1_reliable": noisy.observables["g1"].reliable,
    }
    ok = abs(inv_sigma - box) <= 0.1 and noisy.escape_count > 0 and not noisy.observables["g1"].reliable
    return CriterionResult(8, "Henon local dimension vs box counting", ok, d)


# ---------------------------------------------------------------------------
# 9. statistical core
# ---------------------------------------------------------------------------


def _iid_oracle_pass_rate(model: MeasureModel, obs: Observable, seed: int, reps=100, m=200, n=1000) -> float:
    """Fraction of repetitions where normalised i.i.d. maxima pass KS against the limit law."""
    c, d = model.ball_constants
    nc = normalizing_constants(model, obs, n)
    alpha = obs.a * d
    if obs.family is Family.G1:
        cdf = stats.gumbel_r.cdf
    elif obs.family is Family.G2:
        cdf = lambda y: np.exp(-np.power(np.maximum(y, 1e-300), -alpha))  # noqa: E731
    else:
        cdf = lambda y: np.exp(-np.power(np.maximum(-y, 0.0), alpha))  # noqa: E731
    passed = 0
    for r in range(reps):
        rng = stream(seed, 9, obs.tail_type, d, r)
        pts = rng.random((m * n, d))
        dmin = distance(obs.space, pts if d > 1 else pts[:, 0], obs.z).reshape(m, n).min(axis=1)
        y = nc.normalize(obs.g(dmin))
        passed += stats.kstest(y, cdf).pvalue > 0.05
    return passed / reps


def criterion_9(seed: int = 1) -> CriterionResult:
    d = {}
    rng = stream(seed, 9, 0)
    # MLE recovery: Gumbel by x = -log(-log U), Frechet alpha = 2 by x = (-log U)^(-1/2)
    u = rng.random(10_000)
    gum = fit_gev_mle(-np.log(-np.log(u)))
    u = rng.random(10_000)
    fre = fit_gev_mle((-np.log(u)) ** -0.5)
    d.update(gumbel_kappa=gum.kappa, gumbel_sigma=gum.sigma, gumbel_nu=gum.nu, frechet_kappa=fre.kappa)
    ok_mle = (
        abs(gum.kappa) <= 0.05 and abs(gum.sigma - 1) <= 0.05 and abs(gum.nu) <= 0.05 and abs(fre.kappa - 0.5) <= 0.07
    )
    # analytic gradient against central differences
    worst = 0.0
    for kappa, sigma, nu in [(0.3, 1.5, 0.2), (-0.2, 0.7, -0.1), (0.01, 1.0, 0.0), (0.8, 2.0, 1.0)]:
        x = gev_rvs(kappa, sigma, nu, 500, rng)
        g = gev_loglik_grad(x, kappa, sigma, nu)
        theta = np.array([kappa, sigma, nu])
        fd = np.empty(3)
        for i in range(3):
            h = 1e-6 * max(1.0, abs(theta[i]))
            e = np.zeros(3)
            e[i] = h
            fd[i] = (gev_loglik(x, *(theta + e)) - gev_loglik(x, *(theta - e))) / (2 * h)
        worst = max(worst, float(np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1.0))))
    d["grad_rel_error"] = worst
    # kappa -> 0: series branch against the general formula at |kappa| = 1e-4,
    # and the jump of the per-point log density across the switch at 1e-6
    z = np.linspace(-2.0, 8.0, 2001)
    cont = max(float(np.max(np.abs(_terms_small(z, k) - _terms_general(z, k)))) for k in (1e-4, -1e-4))
    below = gev_logpdf_terms(z, 0.999999e-6, 1.0, 0.0)
    above = gev_logpdf_terms(z, 1.000001e-6, 1.0, 0.0)
    cont = max(cont, float(np.max(np.abs(below - above))))
    d["kappa0_continuity"] = cont
    # normalising constants: i.i.d. uniform maxima against the exact limit laws
    rates = {}
    for name, model, space, z0 in [
        ("circle", MeasureModel.uniform_circle(), "circle", (0.3,)),
        ("torus", MeasureModel.uniform_torus(), "torus2", (0.3, 0.6)),
    ]:
        for obs in (
            Observable(Family.G1, z0, space),
            Observable(Family.G2, z0, space, a=2.0),
            Observable(Family.G3, z0, space, a=2.0, C=1.0),
        ):
            rates[f"ks_rate_{name}_{obs.family.value}"] = _iid_oracle_pass_rate(model, obs, seed)
    d.update(rates)
    ok = ok_mle and worst < 1e-5 and cont < 1e-6 and min(rates.values()) >= 0.9
    return CriterionResult(9, "statistical core", ok, d)


# ---------------------------------------------------------------------------
# 10. reproducibility
# ---------------------------------------------------------------------------

CRITERIA: dict[int, Callable[[int], CriterionResult]] = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


def _result_files(outdir: Path) -> list[str]:
    return sorted(p.name for p in outdir.glob("criterion_*.json"))


def compare_outputs(a, b) -> tuple[bool, list[str]]:
    """Byte comparison of the per-criterion result files (the manifest carries timestamps)."""
    a, b = Path(a), Path(b)
    names = _result_files(a)
    if names != _result_files(b):
        return False, names
    _, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    return not mismatch and not errors, mismatch + errors


def criterion_10(seed: int, outdir, first: Path, only) -> CriterionResult:
    second = Path(outdir) / "repeat"
    _run_and_write(second, seed, only)
    same, diff = compare_outputs(first, second)
    return CriterionResult(10, "selftest twice gives byte-identical result files", same, {"differing_files": diff})


def _write(path: Path, text: str) -> str:
    data = text.encode("ascii")
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def _summary_csv(results) -> str:
    lines = ["criterion,passed,title"]
    lines += [f"{r.number},{'true' if r.passed else 'false'},{r.title}" for r in results]
    return "\n".join(lines) + "\n"


def _run_and_write(outdir: Path, seed: int, only) -> tuple[list[CriterionResult], dict]:
    outdir.mkdir(parents=True, exist_ok=True)
    results = []
    checksums = {}
    for k in only:
        t0 = time.perf_counter()
        r = CRITERIA[k](seed)
        r.seconds = time.perf_counter() - t0
        results.append(r)
        name = f"criterion_{k}.json"
        checksums[name] = _write(outdir / name, json.dumps(r.to_dict(), indent=2, sort_keys=True, default=float) + "\n")
    return results, checksums


def run_selftest(outdir, seed: int = 1, only=None) -> list[CriterionResult]:
    """Run the selected criteria (all by default) and write one JSON file per criterion.

    Criterion 10 reruns the other selected criteria into ``outdir/repeat``
    and compares the files byte by byte.
    """
    from datetime import datetime, timezone

    outdir = Path(outdir)
    wanted = sorted(set(only) if only else set(CRITERIA) | {10})
    base = [k for k in wanted if k in CRITERIA]
    started = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    results, checksums = _run_and_write(outdir, seed, base)
    if 10 in wanted:
        t0 = time.perf_counter()
        r = criterion_10(seed, outdir, outdir, base)
        r.seconds = time.perf_counter() - t0
        results.append(r)
    checksums["selftest.csv"] = _write(outdir / "selftest.csv", _summary_csv(results))
    manifest = {
        "tool_version": __version__,
        "master_seed": seed,
        "started": started,
        "finished": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "seconds": {str(r.number): round(r.seconds, 3) for r in results},
        "checksums": checksums,
    }
    _write(outdir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return results
