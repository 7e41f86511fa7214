"""Scenario runner: config validation, outputs, determinism, exit codes."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

import jcdiss.propagate
from jcdiss import cli
from jcdiss.errors import ConfigError, DefectiveLiouvillianError
from jcdiss.propagate import SingleExcitationAmplitudes, analytic_microscopic
from jcdiss.hilbert import SpaceSpec

from conftest import load_scenario, read_csv


def _tiny_raw(**overrides):
    raw = {
        "description": "tiny test scenario",
        "params": {"omega0": 100.0, "omega": 100.0, "gamma": 0.2},
        "model": "microscopic",
        "initial_state": {"kind": "single_excitation", "alpha": 1.0, "beta": 0.0},
        "t_max": 5.0,
        "n_points": 51,
        "n_max": 8,
        "observables": ["ground_population", "purity"],
        "output": "unused",
    }
    raw.update(overrides)
    return raw


def _write_config(tmp_path, raw, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw), encoding="utf-8")
    return str(path)


# ---------------------------------------------------------------------------
# validation


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda r: r.pop("params"), "params"),
        (lambda r: r.__setitem__("t_max", -1.0), "t_max"),
        (lambda r: r.__setitem__("n_points", 1), "n_points"),
        (lambda r: r.__setitem__("model", "hybrid"), "model"),
        (lambda r: r.__setitem__("observables", ["entropy_of_motion"]),
         "observables"),
        (lambda r: r.__setitem__("detunings", [0.0, 0.0]), "detunings"),
        (lambda r: r.__setitem__("initial_state", {"alpha": 1.0}), "initial_state"),
        (lambda r: r.__setitem__("method", "euler"), "method"),
        (lambda r: r.__setitem__("frobnicate", 1), "frobnicate"),
        (lambda r: r["params"].__setitem__("gamma", "strong"), "gamma"),
        (lambda r: r.__setitem__(
            "husimi", {"times": [2.0, 1.0], "extent": 3.0}), "husimi"),
    ],
)
def test_config_validation_names_the_field(mutate, fragment):
    raw = _tiny_raw()
    mutate(raw)
    with pytest.raises(ConfigError) as err:
        cli.parse_config(raw, source="inline")
    assert fragment in str(err.value)


def test_detunings_conflict_with_explicit_cavity_frequency():
    raw = _tiny_raw(detunings=[0.0, 2.0])
    with pytest.raises(ConfigError) as err:
        cli.parse_config(raw, source="inline")
    assert "detunings" in str(err.value) or "omega" in str(err.value)


def test_detunings_fan_out_sets_cavity_frequency():
    raw = _tiny_raw(detunings=[0.0, 2.0, -2.0])
    del raw["params"]["omega"]
    config = cli.parse_config(raw, source="inline")
    jobs = cli._jobs(config)
    assert [tag for tag, _ in jobs] == ["_delta0", "_delta2", "_delta-2"]
    for (_, params), delta in zip(jobs, (0.0, 2.0, -2.0)):
        assert params.delta == pytest.approx(delta)
        assert params.omega0 == 100.0


def test_quadratures_alias_expands():
    raw = _tiny_raw(observables=["quadratures"])
    config = cli.parse_config(raw, source="inline")
    assert config.observables == ("q_mean", "p_mean", "q_var", "p_var")


def test_config_hash_ignores_key_order():
    raw = _tiny_raw()
    shuffled = {k: raw[k] for k in reversed(list(raw))}
    a = cli.parse_config(raw, source="a").sha256()
    b = cli.parse_config(shuffled, source="b").sha256()
    assert a == b and len(a) == 64


# ---------------------------------------------------------------------------
# outputs


def test_series_csv_round_trip(tmp_path):
    header = ["gt", "value"]
    gt = np.linspace(0.0, np.pi, 7)
    vals = np.array([1.0, -1e-17, 2.0 / 3.0, np.pi, 1e300, 5e-324, -0.0])
    path = tmp_path / "series.csv"
    cli._write_csv(str(path), header, [gt, vals])
    back = read_csv(str(path))
    assert np.array_equal(back["gt"], gt)
    assert np.array_equal(back["value"], vals)


def test_run_scenario_is_byte_deterministic(tmp_path):
    raw = _tiny_raw()
    config = cli.parse_config(raw, source="inline")
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    cli.run_scenario(config, out_dir=str(out1))
    cli.run_scenario(config, out_dir=str(out2))
    names = sorted(os.listdir(out1))
    assert names == sorted(os.listdir(out2))
    for name in names:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_manifest_structure(tmp_path):
    config = cli.parse_config(_tiny_raw(), source="inline")
    manifest = cli.run_scenario(config, out_dir=str(tmp_path / "out"))
    assert manifest["command"] == "evolve"
    assert manifest["model"] == "microscopic"
    assert manifest["n_max"] == 8
    assert manifest["backend"] in ("numba", "numpy")
    assert len(manifest["config_sha256"]) == 64
    assert manifest["files"] == ["ground_population.csv", "purity.csv"]
    entry = manifest["jobs"][0]["models"]["microscopic"]
    assert entry["method"] == "spectral"
    assert entry["fallback_to_rk4"] is False
    for key in (
        "trace_drift_max", "herm_defect_max", "top_population_max",
        "min_eigenvalue", "uncertainty_product_min",
    ):
        assert key in entry and key in manifest["invariants"]


def test_spectral_failure_falls_back_to_rk4(tmp_path, monkeypatch):
    def refuse(self, v0, times, amplification_limit=None):
        raise DefectiveLiouvillianError("forced failure")

    monkeypatch.setattr(
        jcdiss.propagate.SpectralDecomposition, "propagate_vec", refuse
    )
    config = cli.parse_config(_tiny_raw(n_points=11), source="inline")
    manifest = cli.run_scenario(config, out_dir=str(tmp_path / "out"))
    entry = manifest["jobs"][0]["models"]["microscopic"]
    assert entry["fallback_to_rk4"] is True
    assert entry["method"] == "rk4"


def test_scenario_with_nothing_to_do_is_rejected(tmp_path):
    raw = _tiny_raw(observables=[])
    config = cli.parse_config(raw, source="inline")
    with pytest.raises(ConfigError):
        cli.run_scenario(config, out_dir=str(tmp_path / "out"))


def test_steady_outputs(tmp_path):
    raw = _tiny_raw(
        model="both",
        observables=["mean_photon"],
        n_max=12,
    )
    raw["params"]["nbar_at_omega"] = 0.1
    config = cli.parse_config(raw, source="inline")
    manifest = cli.run_steady(config, out_dir=str(tmp_path / "out"))
    for kind in ("microscopic", "phenomenological"):
        entry = manifest["jobs"][0]["models"][kind]
        n_mean = entry["observables"]["mean_photon"]
        assert abs(n_mean - 0.1) < 1e-3
        table = read_csv(str(tmp_path / "out" / entry["file"]))
        assert table["population"].sum() == pytest.approx(1.0, abs=1e-9)
        assert table["population"].min() > -1e-10
        assert np.array_equal(table["fock_n"], table["k"] // 2)


def test_rates_outputs_zero_temperature(tmp_path, scenario_dir):
    config = load_scenario("ground_state_detuning")
    manifest = cli.run_rates(config, out_dir=str(tmp_path / "out"))
    assert manifest["files"] == [
        "rates_delta0.csv", "rates_delta2.csv", "rates_delta4.csv"
    ]
    for job in manifest["jobs"]:
        assert job["kT"] == 0.0
        table = read_csv(str(tmp_path / "out" / job["file"]))
        for i in range(1, 7):
            assert np.all(table[f"gamma{i}"] == 0.2)
            assert np.all(table[f"gtilde{i}"] == 0.0)


def test_oracle_report_passes(tmp_path):
    config = load_scenario("oracle_single_excitation")
    report = cli.compare_analytic(config, out_dir=str(tmp_path / "out"))
    assert report["passed"] is True
    assert report["flagged"] == []
    assert report["n_trials"] == 6
    for kind in ("microscopic", "phenomenological"):
        assert report["worst_trace_distance"][kind] < 1e-6
    assert (tmp_path / "out" / "oracle_report.json").exists()


def test_oracle_rejects_wrong_initial_state(tmp_path):
    raw = _tiny_raw(
        initial_state={"kind": "fock", "n": 1, "qubit_level": "ground"}
    )
    config = cli.parse_config(raw, source="inline")
    with pytest.raises(ConfigError):
        cli.compare_analytic(config, out_dir=str(tmp_path / "out"))


# ---------------------------------------------------------------------------
# golden-run content


def test_ground_population_series_match_closed_form(golden_runs):
    manifest, out = golden_runs["ground_state_detuning"]
    config = load_scenario("ground_state_detuning")
    spec = SpaceSpec(n_max=manifest["n_max"])
    amps = SingleExcitationAmplitudes(alpha=1.0, beta=0.0)
    for tag, params in cli._jobs(config):
        table = read_csv(os.path.join(out, f"ground_population{tag}.csv"))
        assert np.all(np.diff(table["value"]) > -1e-9)
        exact = analytic_microscopic(params, amps, table["gt"], spec)
        p0 = exact[:, 0, 0].real
        assert np.abs(table["value"] - p0).max() < 1e-7


def test_revival_scenario_keeps_models_close_at_revival(golden_runs):
    manifest, out = golden_runs["coherent_revival_two_models"]
    table = read_csv(os.path.join(out, "mean_photon.csv"))
    i = int(np.argmin(np.abs(table["gt"] - 14.05)))
    diff = abs(table["value"][i] - table["value_phenomenological"][i])
    assert diff < 0.1


def test_husimi_snapshot_files(golden_runs):
    manifest, out = golden_runs["husimi_snapshots_two_models"]
    for kind in ("microscopic", "phenomenological"):
        index = manifest["jobs"][0]["models"][kind]["husimi"]
        assert len(index) == 4
        for snap in index:
            assert snap["mass"] == pytest.approx(1.0, abs=0.02)
            table = read_csv(os.path.join(out, snap["file"]))
            assert table["q"].size == 121 * 121
            assert table["q"].max() <= 1.0 / np.pi + 1e-9
            assert table["q"].min() >= 0.0


def test_detuning_jobs_write_one_csv_per_delta(golden_runs):
    manifest, out = golden_runs["inversion_detuning"]
    assert manifest["files"] == [
        "inversion_delta0.csv", "inversion_delta2.csv", "inversion_delta4.csv"
    ]
    assert [job["delta"] for job in manifest["jobs"]] == [0.0, 2.0, 4.0]


# ---------------------------------------------------------------------------
# exit codes


def test_main_success(tmp_path, capsys):
    path = _write_config(tmp_path, _tiny_raw(n_points=11))
    code = cli.main(["evolve", path, "--out", str(tmp_path / "out")])
    assert code == 0
    assert "wrote 2 data file(s)" in capsys.readouterr().out
    assert (tmp_path / "out" / "manifest.json").exists()


def test_main_rejects_bad_config(tmp_path, capsys):
    raw = _tiny_raw()
    raw["t_max"] = 0.0
    path = _write_config(tmp_path, raw)
    assert cli.main(["evolve", path, "--out", str(tmp_path / "out")]) == 2
    assert "config error" in capsys.readouterr().err


def test_main_rejects_missing_file(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    assert cli.main(["evolve", missing, "--out", str(tmp_path / "out")]) == 2


def test_main_reports_physics_guard(tmp_path, capsys):
    raw = _tiny_raw(
        initial_state={"kind": "fock", "n": 3, "qubit_level": "excited"},
        n_max=4,
        observables=["mean_photon"],
    )
    path = _write_config(tmp_path, raw)
    assert cli.main(["evolve", path, "--out", str(tmp_path / "out")]) == 3
    assert "TruncationError" in capsys.readouterr().err


def test_main_reports_oracle_mismatch(tmp_path, capsys, monkeypatch):
    def corrupted(params, amps, times, spec):
        d = spec.dim_total
        out = np.zeros((times.size, d, d), dtype=complex)
        out[:, 0, 0] = 1.0
        return out

    monkeypatch.setattr(cli, "analytic_microscopic", corrupted)
    raw = _tiny_raw(t_max=4.0, n_points=9, n_max=6)
    raw["oracle"] = {"n_trials": 0}
    path = _write_config(tmp_path, raw)
    assert cli.main(["oracle", path, "--out", str(tmp_path / "out")]) == 4
    err = capsys.readouterr().err
    assert "oracle mismatch" in err
    # the partial report still lands on disk for the post-mortem
    report = json.loads((tmp_path / "out" / "oracle_report.json").read_text())
    assert report["runs"][-1]["max_trace_distance"] > 1e-6


def test_console_module_entry(tmp_path):
    path = _write_config(tmp_path, _tiny_raw(n_points=11))
    out = subprocess.run(
        [sys.executable, "-m", "jcdiss.cli", "evolve", path,
         "--out", str(tmp_path / "out")],
        capture_output=True, text=True,
    )
    assert out.returncode == 0
    assert "evolve: wrote" in out.stdout
