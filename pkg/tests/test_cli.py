import csv
import hashlib
import io
import json

import numpy as np
import pytest
from scipy import stats

from noisy_extremes import cli
from noisy_extremes.dynamics import MapKind
from noisy_extremes.errors import RangeError, SchemaError
from noisy_extremes.experiments import TargetKind, run_ensemble

MINIMAL = {"map": "ternary_shift", "eps": [1e-2], "m": 50, "n": 200, "R": 3, "burn_in": 100, "seed": 5}


def test_minimal_config_defaults():
    cfg = cli.config_from_dict({"map": "ternary", "eps": 0.01})
    assert cfg.map.kind is MapKind.TERNARY_SHIFT
    assert cfg.eps_grid == (0.01,)
    assert [o.tag for o in cfg.observables] == ["g1", "g2(a=3)", "g3(a=3,C=0)"]
    assert cfg.target.kind is TargetKind.FIXED
    assert (cfg.m, cfg.n, cfg.realizations, cfg.master_seed) == (200, 1000, 50, 0)


def test_two_dimensional_defaults():
    cfg = cli.config_from_dict({"map": "henon", "eps": [0.0]})
    assert cfg.target.kind is TargetKind.STATIONARY
    assert cfg.observables[1].a == 1


@pytest.mark.parametrize(
    "raw,path",
    [
        ({"map": "ternary", "eps": [-0.1]}, "eps_grid[0]"),
        ({"map": "ternary", "eps": [0.1], "m": 10_000, "n": 100_000}, "m*n"),
        ({"map": "ternary", "eps": [0.1], "n": 0}, "n"),
    ],
)
def test_range_errors(raw, path):
    with pytest.raises(RangeError) as exc:
        cli.config_from_dict(raw)
    assert exc.value.path == path


@pytest.mark.parametrize(
    "raw,path",
    [
        ({"map": "ternary", "eps": [0.1], "blocks": 3}, "blocks"),
        ({"eps": [0.1]}, "map"),
        ({"map": "ternary"}, "eps_grid"),
        ({"map": "ternary", "eps": [0.1], "m": "many"}, "m"),
        ({"map": "ternary", "eps": [0.1], "epsilon": [0.2]}, "epsilon"),
    ],
)
def test_schema_errors(raw, path):
    with pytest.raises(SchemaError) as exc:
        cli.config_from_dict(raw)
    assert exc.value.path == path


def test_unknown_nested_key_reports_path():
    with pytest.raises(SchemaError) as exc:
        cli.config_from_dict({"map": {"kind": "ternary", "colour": 1}, "eps": [0.1]})
    assert "colour" in exc.value.path


@pytest.mark.parametrize(
    "raw",
    [
        MINIMAL,
        {"map": {"kind": "pm", "params": {"alpha": 0.3}}, "eps": [0, 1e-3]},
        {"map": "henon", "eps": [0.0], "observables": [{"family": "g2", "a": 2}]},
        {"map": "ternary", "eps": [0.0, 0.1], "analysis": "ei", "target": {"kind": "periodic", "z": [0.25], "period": 2}},
    ],
)
def test_config_round_trip(raw, tmp_path):
    cfg = cli.config_from_dict(raw)
    d = cli.config_to_dict(cfg)
    assert cli.config_from_dict(d) == cfg
    p = tmp_path / "c.json"
    p.write_text(json.dumps(d))
    assert cli.parse_config(p) == cfg
    assert cli.config_hash(cli.parse_config(p)) == cli.config_hash(cfg)


def test_fmt():
    assert cli.fmt(0.1) == "0.10000000000000001"
    assert cli.fmt(float("inf")) == "inf"
    assert cli.fmt(float("nan")) == "nan"
    assert cli.fmt(True) == "true"
    assert cli.fmt(3) == "3"


@pytest.fixture(scope="module")
def ternary_run():
    cfg = cli.config_from_dict(MINIMAL)
    return run_ensemble(cfg)


def test_result_rows_and_csv(ternary_run, tmp_path):
    rows = cli.result_rows(ternary_run)
    # kappa for each observable plus sigma for g1
    assert len(rows) == 4
    assert {(r["observable"], r["param"]) for r in rows} == {
        ("g1", "kappa"),
        ("g1", "sigma"),
        ("g2(a=3)", "kappa"),
        ("g3(a=3,C=0)", "kappa"),
    }
    path = tmp_path / "r.csv"
    digest = cli.emit_results(ternary_run, "csv", path)
    raw = path.read_bytes()
    assert digest == hashlib.sha256(raw).hexdigest()
    raw.decode("ascii")
    reader = csv.reader(io.StringIO(raw.decode()))
    assert tuple(next(reader)) == cli.COLUMNS
    assert len(list(reader)) == 4


def test_json_output(ternary_run, tmp_path):
    path = tmp_path / "r.json"
    cli.emit_results(ternary_run, "json", path)
    doc = json.loads(path.read_text())
    assert doc["format_version"] == cli.FORMAT_VERSION
    assert cli.config_from_dict(doc["config"]) == ternary_run.config
    assert "created" not in json.dumps(doc["manifest"])


def test_run_subcommand_is_byte_reproducible(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(MINIMAL))
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    for name in ("results.csv", "results.json", "config.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["checksums"]["results.csv"] == hashlib.sha256((tmp_path / "a" / "results.csv").read_bytes()).hexdigest()


def test_run_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"map": "ternary", "eps": [-0.1]}))
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "eps_grid[0]" in capsys.readouterr().err


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code != 0


def test_simulate(tmp_path, capsys):
    out = tmp_path / "o.csv"
    assert cli.main(["simulate", "--map", "ternary", "--eps", "0.01", "--length", "50", "--x0", "0.3", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x" and len(lines) == 51
    assert float(lines[1]) == 0.3
    assert cli.main(["simulate", "--map", "henon", "--length", "5", "--x0", "5", "0"]) == 1


def test_fit_subcommand(tmp_path, capsys):
    x = stats.gumbel_r.rvs(loc=2.0, scale=0.5, size=300, random_state=np.random.default_rng(3))
    p = tmp_path / "m.txt"
    p.write_text("maxima\n" + "\n".join(repr(float(v)) for v in x))
    assert cli.main(["fit", "--input", str(p)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["kappa"] == pytest.approx(0.0, abs=0.1)
    assert doc["sigma"] == pytest.approx(0.5, abs=0.07)
    assert doc["ks_pass"] is True


def test_verify_lemma_exit_zero(tmp_path):
    out = tmp_path / "lemma.csv"
    assert cli.main(["verify-lemma", "--eps", "0.3", "0.5", "--jmax", "60", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2 * 56
    assert all(r["within_bound"] == "true" for r in rows)


def test_ei_subcommand(tmp_path, capsys):
    code = cli.main(
        ["ei", "--z", "0.5", "--eps", "0", "0.1", "--m", "50", "--n", "200", "--realizations", "3", "--out", str(tmp_path)]
    )
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "results.csv").open()))
    theory_rows = [r for r in rows if r["param"] == "theta_theory"]
    assert theory_rows and float(theory_rows[0]["mean"]) == pytest.approx(2 / 3)


def test_ei_config_requires_ei_analysis(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(MINIMAL))
    assert cli.main(["ei", "--config", str(cfg)]) == 2
