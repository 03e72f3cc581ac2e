"""Command line interface and result writers.

Configs are JSON objects; see :func:`config_from_dict` for the schema.  Every
run writes its canonical config, ``results.csv``, ``results.json`` and a
``manifest.json`` into one output directory.  Only the manifest carries wall
clock timestamps, so result files of two runs with the same config are
byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .dynamics import MapKind, MapSpec, NoiseSpec, OrbitConfig, random_orbit
from .errors import ConfigurationError, NoisyExtremesError, RangeError, SchemaError
from .evt import EiNormalization, fit_and_test
from .experiments import (
    Analysis,
    EiSweepResult,
    EnsembleResult,
    ExperimentConfig,
    FigureDataset,
    ObservableSpec,
    Scale,
    Target,
    TargetKind,
    default_target_point,
    ei_sweep,
    figure_dataset,
    run_ensemble,
    standard_observables,
)
from .observables import Family

log = logging.getLogger("noisy_extremes")

FORMAT_VERSION = 1
COLUMNS = ("p", "epsilon", "observable", "param", "mean", "std", "ks_pass_fraction", "reliable", "escape_count")

# ---------------------------------------------------------------------------
# config schema
# ---------------------------------------------------------------------------

MAP_ALIASES = {
    "ternary": MapKind.TERNARY_SHIFT,
    "shift": MapKind.TERNARY_SHIFT,
    "pm": MapKind.POMEAU_MANNEVILLE,
    "cusp": MapKind.CUSP_LORENZ,
    "lorenz": MapKind.CUSP_LORENZ,
    "cat": MapKind.ARNOLD_CAT,
    "logistic": MapKind.QUADRATIC,
}
KEY_ALIASES = {"eps": "eps_grid", "epsilon": "eps_grid", "seed": "master_seed", "R": "realizations"}
CONFIG_KEYS = (
    "map",
    "observables",
    "target",
    "eps_grid",
    "m",
    "n",
    "realizations",
    "master_seed",
    "burn_in",
    "analysis",
    "normalization",
)


def _map_kind(value, path: str) -> MapKind:
    if not isinstance(value, str):
        raise SchemaError(path, "map kind must be a string")
    key = value.strip().lower()
    if key in MAP_ALIASES:
        return MAP_ALIASES[key]
    try:
        return MapKind(key)
    except ValueError:
        raise SchemaError(path, f"unknown map {value!r}") from None


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected a number, got {type(value).__name__}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or float(value) != int(value):
        raise SchemaError(path, "expected an integer")
    return int(value)


def _check_keys(d: dict, allowed, path: str) -> None:
    if not isinstance(d, dict):
        raise SchemaError(path or "$", "expected an object")
    for k in d:
        if k not in allowed:
            raise SchemaError(f"{path}.{k}" if path else k, "unknown key")


def _parse_map(value) -> MapSpec:
    if isinstance(value, str):
        value = {"kind": value}
    _check_keys(value, ("kind", "params"), "map")
    if "kind" not in value:
        raise SchemaError("map.kind", "missing")
    kind = _map_kind(value["kind"], "map.kind")
    params = value.get("params", {})
    _check_keys(params, list(MapSpec(kind).params), "map.params")
    params = {k: _number(v, f"map.params.{k}") for k, v in params.items()}
    try:
        return MapSpec(kind, params)
    except ConfigurationError as exc:
        raise RangeError("map.params", str(exc)) from None


def _parse_observables(value, map_: MapSpec) -> tuple[ObservableSpec, ...]:
    if value is None:
        return default_observables(map_)
    if not isinstance(value, list):
        raise SchemaError("observables", "expected a list")
    out = []
    for i, item in enumerate(value):
        path = f"observables[{i}]"
        if isinstance(item, str):
            item = {"family": item}
        _check_keys(item, ("family", "a", "C"), path)
        try:
            family = Family(str(item.get("family", "")).lower())
        except ValueError:
            raise SchemaError(f"{path}.family", "expected g1, g2 or g3") from None
        a = _number(item.get("a", 1.0), f"{path}.a")
        if not a > 0:
            raise RangeError(f"{path}.a", "must be > 0")
        out.append(ObservableSpec(family, a, _number(item.get("C", 0.0), f"{path}.C")))
    return tuple(out)


def default_observables(map_: MapSpec) -> tuple[ObservableSpec, ...]:
    return standard_observables(a=3.0 if map_.dim == 1 else 1.0)


def default_target(map_: MapSpec) -> Target:
    if map_.kind in (MapKind.HENON, MapKind.CUSP_LORENZ):
        return Target.stationary()
    return Target.fixed(default_target_point(map_))


def _parse_target(value, map_: MapSpec) -> Target:
    if value is None:
        return default_target(map_)
    if isinstance(value, str):
        value = {"kind": value}
    _check_keys(value, ("kind", "z", "period"), "target")
    try:
        kind = TargetKind(str(value.get("kind", "fixed")).lower())
    except ValueError:
        raise SchemaError("target.kind", "expected fixed, periodic or stationary") from None
    z = value.get("z")
    if z is None and kind is TargetKind.FIXED:
        z = default_target_point(map_)
    if z is not None:
        z = [z] if not isinstance(z, list) else z
        z = [_number(c, f"target.z[{i}]") for i, c in enumerate(z)]
    period = value.get("period")
    if period is not None:
        period = _integer(period, "target.period")
    try:
        return Target(kind, z, period)
    except RangeError:
        raise
    except ConfigurationError as exc:
        raise SchemaError("target", str(exc)) from None


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a config object and resolve every default.

    Canonical keys are listed in ``CONFIG_KEYS``; ``eps``/``epsilon``,
    ``seed`` and ``R`` are accepted as aliases.  Unknown keys raise
    :class:`SchemaError` with the offending path, violated invariants raise
    :class:`RangeError`.
    """
    if not isinstance(raw, dict):
        raise SchemaError("$", "config must be a JSON object")
    d: dict[str, Any] = {}
    for k, v in raw.items():
        key = KEY_ALIASES.get(k, k)
        if key not in CONFIG_KEYS:
            raise SchemaError(k, "unknown key")
        if key in d:
            raise SchemaError(k, f"duplicates {key}")
        d[key] = v
    if "map" not in d:
        raise SchemaError("map", "missing")
    if "eps_grid" not in d:
        raise SchemaError("eps_grid", "missing")
    map_ = _parse_map(d["map"])
    eps = d["eps_grid"]
    eps = eps if isinstance(eps, list) else [eps]
    eps = [_number(e, f"eps_grid[{i}]") for i, e in enumerate(eps)]
    for i, e in enumerate(eps):
        if not (e >= 0 and math.isfinite(e)):
            raise RangeError(f"eps_grid[{i}]", f"noise intensity must be >= 0, got {e}")
    kwargs = {}
    for key in ("m", "n", "realizations", "master_seed", "burn_in"):
        if key in d:
            kwargs[key] = _integer(d[key], key)
    for key in ("m", "n"):
        if key in kwargs and kwargs[key] < 1:
            raise RangeError(key, "must be >= 1")
    try:
        analysis = Analysis(str(d.get("analysis", "gev")).lower())
    except ValueError:
        raise SchemaError("analysis", "expected gev or ei") from None
    try:
        normalization = EiNormalization(d.get("normalization", "2n"))
    except ValueError:
        raise SchemaError("normalization", "expected 2n or 2n/eps") from None
    observables = () if analysis is Analysis.EI and d.get("observables") is None else _parse_observables(
        d.get("observables"), map_
    )
    target = _parse_target(d.get("target"), map_)
    try:
        return ExperimentConfig(
            map=map_,
            observables=observables,
            target=target,
            eps_grid=tuple(eps),
            analysis=analysis,
            normalization=normalization,
            **kwargs,
        )
    except RangeError:
        raise
    except ConfigurationError as exc:
        raise RangeError("$", str(exc)) from None


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Canonical form of a config; ``config_from_dict`` inverts it exactly."""
    target: dict[str, Any] = {"kind": cfg.target.kind.value}
    if cfg.target.z is not None:
        target["z"] = list(cfg.target.z)
    if cfg.target.period is not None:
        target["period"] = cfg.target.period
    return {
        "map": cfg.map.to_dict(),
        "observables": [{"family": o.family.value, "a": o.a, "C": o.C} for o in cfg.observables],
        "target": target,
        "eps_grid": list(cfg.eps_grid),
        "m": cfg.m,
        "n": cfg.n,
        "realizations": cfg.realizations,
        "master_seed": cfg.master_seed,
        "burn_in": cfg.burn_in,
        "analysis": cfg.analysis.value,
        "normalization": cfg.normalization.value,
    }


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    return config_from_dict(raw)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_json(config_to_dict(cfg)).encode("ascii")).hexdigest()


# ---------------------------------------------------------------------------
# result tables
# ---------------------------------------------------------------------------


def fmt(value) -> str:
    """Serialise one cell: 17 significant digits, ``inf``/``nan`` spelled out."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    v = float(value)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "%.17g" % v


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return fmt(value)
    return value


def result_rows(results: EnsembleResult | EiSweepResult) -> list[dict]:
    """Rows of the frozen result schema.

    GEV runs give a ``kappa`` row for every observable and a ``sigma`` row
    for G1.  Extremal index sweeps give a ``theta`` row (clipped estimate),
    a ``theta_raw`` row and, where defined, a ``theta_theory`` row; their
    ``ks_pass_fraction`` column holds the fraction of usable realizations.
    """
    rows = []
    if isinstance(results, EiSweepResult):
        for a in results.per_eps:
            frac = a.n_ok / a.realizations
            base = {"p": a.p, "epsilon": a.epsilon, "observable": "ei"}
            tail = {"ks_pass_fraction": frac, "reliable": not a.aborted, "escape_count": a.escape_count}
            rows.append({**base, "param": "theta", "mean": a.theta_mean, "std": a.theta_std, **tail})
            rows.append({**base, "param": "theta_raw", "mean": a.raw_mean, "std": math.nan, **tail})
            if a.theoretical is not None:
                rows.append({**base, "param": "theta_theory", "mean": a.theoretical, "std": 0.0, **tail})
        return rows
    for a in results.per_eps:
        for tag, s in a.observables.items():
            params = [("kappa", s.kappa)]
            if tag == "g1":
                params.append(("sigma", s.sigma))
            for name, summ in params:
                rows.append(
                    {
                        "p": a.p,
                        "epsilon": a.epsilon,
                        "observable": tag,
                        "param": name,
                        "mean": summ.mean,
                        "std": summ.std,
                        "ks_pass_fraction": s.ks_pass_fraction,
                        "reliable": s.reliable,
                        "escape_count": a.escape_count,
                    }
                )
    return rows


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str] = COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])
    return buf.getvalue()


def rows_to_json(rows: Sequence[dict], header: dict, columns: Sequence[str] = COLUMNS) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        **header,
        "columns": list(columns),
        "rows": [{c: _json_value(r[c]) for c in columns} for r in rows],
    }
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str
    master_seed: int
    started: str = ""
    finished: str = ""
    checksums: dict[str, str] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def stable_part(self) -> dict:
        """Fields that do not depend on the wall clock (embedded in result files)."""
        return {
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "master_seed": self.master_seed,
            "format_version": self.format_version,
        }

    def to_dict(self) -> dict:
        return {**self.stable_part(), "started": self.started, "finished": self.finished, "checksums": self.checksums}


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _write_ascii(path: Path, text: str) -> str:
    data = text.encode("ascii")
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def new_manifest(digest: str, seed: int) -> RunManifest:
    return RunManifest(digest, __version__, int(seed), started=_now())


def write_manifest(outdir: Path, manifest: RunManifest) -> None:
    manifest.finished = _now()
    _write_ascii(outdir / "manifest.json", json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")


def emit_results(
    results: EnsembleResult | EiSweepResult,
    format: str,
    path,
    manifest: RunManifest | None = None,
) -> str:
    """Write results as CSV or JSON and return the SHA-256 of the file."""
    rows = result_rows(results)
    if manifest is None:
        manifest = RunManifest(config_hash(results.config), __version__, results.config.master_seed)
    if format == "csv":
        text = rows_to_csv(rows)
    elif format == "json":
        text = rows_to_json(rows, {"manifest": manifest.stable_part(), "config": config_to_dict(results.config)})
    else:
        raise ValueError(f"unknown format {format!r}")
    return _write_ascii(Path(path), text)


def write_run(results: EnsembleResult | EiSweepResult, outdir) -> RunManifest:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = results.config
    manifest = new_manifest(config_hash(cfg), cfg.master_seed)
    manifest.checksums["config.json"] = _write_ascii(
        outdir / "config.json", json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"
    )
    for name, fmt_ in (("results.csv", "csv"), ("results.json", "json")):
        manifest.checksums[name] = emit_results(results, fmt_, outdir / name, manifest)
    write_manifest(outdir, manifest)
    return manifest


def write_figure(ds: FigureDataset, outdir, seed: int) -> RunManifest:
    """One table for the whole figure, with a leading ``series`` column."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    configs = []
    for label, res in ds.series:
        rows += [{"series": label, **r} for r in result_rows(res)]
        configs.append({"series": label, "config": config_to_dict(res.config)})
    digest = hashlib.sha256(canonical_json(configs).encode("ascii")).hexdigest()
    manifest = new_manifest(digest, seed)
    cols = ("series",) + COLUMNS
    header = {"figure": ds.name, "scale": ds.scale.value, "manifest": manifest.stable_part(), "series": configs}
    manifest.checksums[f"{ds.name}.csv"] = _write_ascii(outdir / f"{ds.name}.csv", rows_to_csv(rows, cols))
    manifest.checksums[f"{ds.name}.json"] = _write_ascii(outdir / f"{ds.name}.json", rows_to_json(rows, header, cols))
    write_manifest(outdir, manifest)
    return manifest


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    res = ei_sweep(cfg, args.workers) if cfg.analysis is Analysis.EI else run_ensemble(cfg, args.workers)
    write_run(res, args.out)
    print(rows_to_csv(result_rows(res)), end="")
    return 1 if res.aborted else 0


def _parse_params(items) -> dict:
    out = {}
    for item in items or []:
        k, _, v = item.partition("=")
        if not _:
            raise SchemaError("--param", f"expected key=value, got {item!r}")
        out[k.strip()] = float(v)
    return out


def _cmd_simulate(args) -> int:
    map_ = _parse_map({"kind": args.map, "params": _parse_params(args.param)})
    x0 = args.x0 if args.x0 is not None else list(map_.default_start)
    orbit = random_orbit(map_, NoiseSpec(args.eps), x0, OrbitConfig(args.length, args.burn_in, args.seed))
    cols = ("x", "y")[: map_.dim]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in orbit.points:
        w.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if args.out:
        _write_ascii(Path(args.out), text)
    else:
        sys.stdout.write(text)
    if orbit.escaped:
        print(f"orbit escaped at index {orbit.escaped_at}", file=sys.stderr)
        return 1
    return 0


def read_series(path, column: int = 0) -> np.ndarray:
    """Numbers from one column of a CSV or whitespace file; a header line is skipped."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f for f in line.replace(",", " ").split()]
            try:
                values.append(float(fields[column]))
            except (ValueError, IndexError):
                if values or i > 0:
                    raise SchemaError(f"{path}:{i + 1}", "not a number") from None
    return np.asarray(values, dtype=float)


def _cmd_fit(args) -> int:
    x = read_series(args.input, args.column)
    fit = fit_and_test(x)
    text = json.dumps({k: _json_value(v) for k, v in fit.to_dict().items()}, indent=2, sort_keys=True) + "\n"
    if args.out:
        _write_ascii(Path(args.out), text)
    sys.stdout.write(text)
    return 0


def _cmd_ei(args) -> int:
    if args.config:
        cfg = parse_config(args.config)
        if cfg.analysis is not Analysis.EI:
            raise SchemaError("analysis", "the ei command needs analysis = ei")
    else:
        raw = {
            "map": {"kind": args.map, "params": _parse_params(args.param)},
            "target": {"kind": "periodic" if args.period else "fixed", "z": args.z, "period": args.period},
            "eps_grid": args.eps,
            "m": args.m,
            "n": args.n,
            "realizations": args.realizations,
            "master_seed": args.seed,
            "analysis": "ei",
            "normalization": args.normalization,
        }
        if args.z is None:
            raw["target"].pop("z")
        if args.period is None:
            raw["target"].pop("period")
        cfg = config_from_dict(raw)
    res = ei_sweep(cfg, args.workers)
    if args.out:
        write_run(res, args.out)
    print(rows_to_csv(result_rows(res)), end="")
    return 1 if res.aborted else 0


def _cmd_figure(args) -> int:
    ds = figure_dataset(args.name, args.scale, args.seed, args.workers)
    write_figure(ds, args.out, args.seed)
    print(f"wrote {Path(args.out) / (args.name + '.csv')}")
    return 1 if ds.aborted else 0


def _cmd_verify_lemma(args) -> int:
    from .theory import fourier_correlation

    cols = ("j", "epsilon", "value", "tail", "bound", "valid", "within_bound")
    rows = []
    bad = 0
    for eps in args.eps:
        for j in range(args.jmin, args.jmax + 1):
            r = fourier_correlation(tuple(args.A), tuple(args.B), args.alpha, eps, j)
            rows.append(
                {
                    "j": j,
                    "epsilon": eps,
                    "value": r.value,
                    "tail": r.uncertainty,
                    "bound": r.bound,
                    "valid": r.valid,
                    "within_bound": r.within_bound,
                }
            )
            bad += r.valid and not r.within_bound
    text = rows_to_csv(rows, cols)
    if args.out:
        _write_ascii(Path(args.out), text)
    else:
        sys.stdout.write(text)
    print(f"{len(rows)} rows, {bad} violations on valid rows", file=sys.stderr)
    return 1 if bad else 0


def _cmd_selftest(args) -> int:
    from .acceptance import run_selftest

    only = [int(c) for c in args.only.split(",")] if args.only else None
    results = run_selftest(args.out, seed=args.seed, only=only)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    from .dynamics import GOLDEN_MEAN
    from .experiments import FIGURES

    p = argparse.ArgumentParser(prog="noisy-extremes", description="Extreme value laws for randomly perturbed maps.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log excluded realizations")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    workers = argparse.ArgumentParser(add_help=False)
    workers.add_argument("--workers", type=int, default=None, help="worker processes (default: $NOISY_EXTREMES_WORKERS or 1)")

    s = sub.add_parser("run", parents=[workers], help="run an experiment config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=_cmd_run)

    s = sub.add_parser("simulate", help="dump one random orbit as CSV")
    s.add_argument("--map", required=True)
    s.add_argument("--param", action="append", metavar="KEY=VALUE")
    s.add_argument("--eps", type=float, default=0.0)
    s.add_argument("--length", type=int, default=1000)
    s.add_argument("--burn-in", type=int, default=0)
    s.add_argument("--x0", type=float, nargs="+")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("fit", help="GEV fit and KS test of a series of maxima")
    s.add_argument("--input", required=True)
    s.add_argument("--column", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_fit)

    s = sub.add_parser("ei", parents=[workers], help="extremal index sweep over noise levels")
    s.add_argument("--config")
    s.add_argument("--map", default="ternary_shift")
    s.add_argument("--param", action="append", metavar="KEY=VALUE")
    s.add_argument("--z", type=float, nargs="+", default=[0.5])
    s.add_argument("--period", type=int, default=1)
    s.add_argument("--eps", type=float, nargs="+", default=[0.0] + [10.0**-p for p in range(1, 9)])
    s.add_argument("--m", type=int, default=200)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--realizations", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--normalization", default="2n", choices=[e.value for e in EiNormalization])
    s.add_argument("--out")
    s.set_defaults(func=_cmd_ei)

    s = sub.add_parser("figure", parents=[workers], help="dataset behind one figure")
    s.add_argument("name", choices=sorted(FIGURES))
    s.add_argument("--scale", default="desk", choices=[e.value for e in Scale])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=".")
    s.set_defaults(func=_cmd_figure)

    s = sub.add_parser("verify-lemma", help="check the correlation decay bound on a grid")
    s.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.3, 0.5, 0.7])
    s.add_argument("--jmin", type=int, default=5)
    s.add_argument("--jmax", type=int, default=200)
    s.add_argument("--alpha", type=float, default=GOLDEN_MEAN)
    s.add_argument("--A", type=float, nargs=2, default=[0.0, 0.1])
    s.add_argument("--B", type=float, nargs=2, default=[0.0, 0.1])
    s.add_argument("--out")
    s.set_defaults(func=_cmd_verify_lemma)

    s = sub.add_parser("selftest", help="run the acceptance checks")
    s.add_argument("--out", default="selftest-out")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--only", help="comma separated criterion numbers")
    s.set_defaults(func=_cmd_selftest)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return int(args.func(args))
    except (NoisyExtremesError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
