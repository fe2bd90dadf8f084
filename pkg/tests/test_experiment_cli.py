"""Experiment runner determinism, CSV layout, config parsing, CLI."""

import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from gomsp import cli
from gomsp.errors import (ConfigError, NumericalError, VerificationFailure)
from gomsp.experiment import (ExperimentConfig, load_config, run_comparison,
                              run_experiment)

_METRICS = ("tadr", "taccv", "taql", "hcfit_mean", "dual_norm",
            "regret_cum", "gap_cum")


def _small_cfg(**kw):
    base = dict(algorithm="gomsp", regularizer="euclidean",
                penalty_power_p=1.0, gamma=0.05, alpha=0.5, horizon_T=6,
                warmup_slots=2, num_samples=2, master_seed=77, dim_D=2,
                num_R=2, benchmark_tol=1e-6)
    base.update(kw)
    return ExperimentConfig(**base)


def _write_cfg(path, raw):
    path.write_text(json.dumps(raw), encoding="utf-8")
    return str(path)


# ---------------------------------------------------------------------------
# config resolution


def test_defaults_scale_with_horizon():
    cfg = ExperimentConfig.from_dict({})
    assert cfg.horizon_T == 500
    assert cfg.gamma == pytest.approx(0.1 / math.sqrt(500))
    assert cfg.alpha == pytest.approx(15.0 * cfg.gamma)
    assert cfg.label == "gomsp-entropy-p1"


def test_nested_sections_map_onto_fields():
    cfg = ExperimentConfig.from_dict({
        "horizon_T": 100,
        "problem": {"kind": "dispatch", "dim_D": 3, "sigma_a": 0.0},
        "algorithm": {"kind": "sdg", "gamma": 0.02},
    })
    assert cfg.dim_D == 3 and cfg.sigma_a == 0.0
    assert cfg.algorithm == "sdg" and cfg.gamma == 0.02
    assert cfg.label == "sdg"


def test_unknown_keys_are_rejected_per_section():
    with pytest.raises(ConfigError, match="unknown config key"):
        ExperimentConfig.from_dict({"horzion_T": 10})
    with pytest.raises(ConfigError, match="unknown problem key"):
        ExperimentConfig.from_dict({"problem": {"dim": 4}})
    with pytest.raises(ConfigError, match="unknown algorithm key"):
        ExperimentConfig.from_dict({"algorithm": {"step": 0.1}})


def test_config_field_validation():
    for bad in (dict(horizon_T=0), dict(num_samples=0), dict(epsilon=0.0),
                dict(penalty_power_p=0.5), dict(gamma=-1.0),
                dict(benchmark_tol=0.0), dict(problem="tracking"),
                dict(algorithm="nope"), dict(regularizer="nope"),
                dict(master_seed=-1), dict(master_seed=2 ** 64),
                dict(warmup_slots=-1)):
        with pytest.raises(ConfigError):
            ExperimentConfig(**bad)


def test_config_wrong_value_type_becomes_config_error():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"horizon_T": "many"})


def test_labels_encode_regularizer_and_power():
    assert _small_cfg(penalty_power_p=2.0).label == "gomsp-euclidean-p2"
    assert ExperimentConfig(penalty_power_p=1.5).label == "gomsp-entropy-p1_5"
    assert _small_cfg(algorithm="mosp").label == "mosp"


def test_load_config_error_paths(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(str(bad))
    good = _write_cfg(tmp_path / "ok.json", {"horizon_T": 25})
    assert load_config(good).horizon_T == 25


def test_make_params_is_deterministic():
    a = _small_cfg().make_params()
    b = _small_cfg().make_params()
    assert np.array_equal(a.curvature, b.curvature)
    assert np.array_equal(a.slope, b.slope)


# ---------------------------------------------------------------------------
# runner output


def test_series_shapes_and_final_accessor():
    result = run_experiment(_small_cfg())
    for name in _METRICS:
        assert result.series[name].shape == (2, 6)
    assert np.array_equal(result.final("tadr"), result.series["tadr"][:, -1])
    assert result.written_paths == ()


def test_outputs_are_byte_identical_across_reruns_and_workers(tmp_path):
    cfg = _small_cfg()
    dirs = [tmp_path / name for name in ("a", "b", "c")]
    run_experiment(cfg, workers=1, out_dir=str(dirs[0]))
    run_experiment(cfg, workers=2, out_dir=str(dirs[1]))
    run_experiment(cfg, workers=1, out_dir=str(dirs[2]))
    for name in ("samples.csv", "aggregate.csv"):
        blobs = [(d / name).read_bytes() for d in dirs]
        assert blobs[0] == blobs[1] == blobs[2]
        assert b"\r" not in blobs[0]


def test_samples_csv_round_trips_float64(tmp_path):
    cfg = _small_cfg(num_samples=1, horizon_T=4)
    result = run_experiment(cfg, out_dir=str(tmp_path))
    with open(tmp_path / "samples.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["slot", "sample"] + list(_METRICS)
    assert len(rows) == 1 + 4
    for row in rows[1:]:
        k, s = int(row[0]) - 1, int(row[1])
        for j, name in enumerate(_METRICS):
            assert float(row[2 + j]) == result.series[name][s, k]


def test_aggregate_csv_has_percentile_columns(tmp_path):
    run_experiment(_small_cfg(), out_dir=str(tmp_path))
    with open(tmp_path / "aggregate.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    head = rows[0]
    assert head[0] == "slot" and len(head) == 1 + 4 * 5
    assert "tadr_mean" in head and "hcfit_mean_p90" in head
    assert len(rows) == 1 + 6


def test_written_paths_report_both_files(tmp_path):
    result = run_experiment(_small_cfg(), out_dir=str(tmp_path))
    assert result.written_paths == (str(tmp_path / "samples.csv"),
                                    str(tmp_path / "aggregate.csv"))


def test_workers_must_be_positive():
    with pytest.raises(ConfigError):
        run_experiment(_small_cfg(), workers=0)


def test_zero_observation_noise_collapses_samples():
    cfg = _small_cfg(sigma_a=0.0, sigma_b=0.0)
    series = run_experiment(cfg).series
    assert np.array_equal(series["tadr"][0], series["tadr"][1])
    noisy = run_experiment(_small_cfg()).series
    assert not np.array_equal(noisy["tadr"][0], noisy["tadr"][1])


def test_warmup_advances_state_but_not_scoreboard():
    # One warmed-up recorded slot must equal the second slot's increment of
    # an unwarmed run: same state trajectory, shifted scoreboard start.
    warmed = run_experiment(_small_cfg(warmup_slots=1, horizon_T=1,
                                       num_samples=1, benchmark_tol=1e-9))
    flat = run_experiment(_small_cfg(warmup_slots=0, horizon_T=2,
                                     num_samples=1, benchmark_tol=1e-9))
    increment = (flat.series["regret_cum"][0, 1]
                 - flat.series["regret_cum"][0, 0])
    assert warmed.series["regret_cum"][0, 0] == pytest.approx(increment,
                                                              abs=1e-6)


# ---------------------------------------------------------------------------
# comparisons


def test_comparison_rejects_mismatched_environments():
    with pytest.raises(ConfigError, match="master_seed"):
        run_comparison([_small_cfg(), _small_cfg(master_seed=78)])


def test_comparison_labels_and_csv(tmp_path):
    cfgs = [_small_cfg(), _small_cfg(algorithm="sdg"),
            _small_cfg(algorithm="mosp")]
    comparison = run_comparison(cfgs, out_dir=str(tmp_path))
    assert comparison.labels == ("gomsp-euclidean-p1", "sdg", "mosp")
    with open(tmp_path / "comparison.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "slot"
    assert "sdg_tadr" in rows[0] and "mosp_taql" in rows[0]
    assert len(rows[0]) == 1 + 3 * 3
    assert len(rows) == 1 + 6


def test_comparison_duplicate_labels_get_suffixes():
    comparison = run_comparison([_small_cfg(), _small_cfg()])
    assert comparison.labels == ("gomsp-euclidean-p1", "gomsp-euclidean-p1-1")
    a, b = comparison.results
    assert np.array_equal(a.series["tadr"], b.series["tadr"])


# ---------------------------------------------------------------------------
# command line


def test_cli_run_writes_and_reports(tmp_path, capsys):
    cfg_path = _write_cfg(tmp_path / "cfg.json", {
        "horizon_T": 4, "warmup_slots": 0, "num_samples": 1,
        "master_seed": 5, "benchmark_tol": 1e-6,
        "problem": {"kind": "dispatch", "dim_D": 2, "num_R": 1},
        "algorithm": {"kind": "gomsp", "regularizer": "euclidean",
                      "gamma": 0.05, "alpha": 0.5},
    })
    code = cli.main(["run", "--config", cfg_path, "--out",
                     str(tmp_path / "out")])
    out = capsys.readouterr().out
    assert code == 0
    assert "final mean tadr:" in out
    assert (tmp_path / "out" / "samples.csv").exists()


def test_cli_seed_and_samples_overrides(tmp_path):
    cfg_path = _write_cfg(tmp_path / "cfg.json", {
        "horizon_T": 3, "warmup_slots": 0, "num_samples": 1,
        "benchmark_tol": 1e-6,
        "problem": {"kind": "dispatch", "dim_D": 2, "num_R": 1},
        "algorithm": {"kind": "gomsp", "regularizer": "euclidean",
                      "gamma": 0.05, "alpha": 0.5},
    })
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert cli.main(["run", "--config", cfg_path, "--out", a,
                     "--seed", "9", "--samples", "2"]) == 0
    assert cli.main(["run", "--config", cfg_path, "--out", b,
                     "--seed", "9", "--samples", "2", "--workers", "2"]) == 0
    for name in ("samples.csv", "aggregate.csv"):
        import pathlib
        assert (pathlib.Path(a) / name).read_bytes() \
            == (pathlib.Path(b) / name).read_bytes()


def test_cli_exit_code_one_on_config_errors(tmp_path, capsys):
    assert cli.main(["run", "--config",
                     str(tmp_path / "missing.json")]) == 1
    bad = _write_cfg(tmp_path / "bad.json", {"nope": 1})
    assert cli.main(["run", "--config", bad]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_exit_code_two_on_numerical_failure(tmp_path, monkeypatch,
                                                capsys):
    cfg_path = _write_cfg(tmp_path / "cfg.json", {"horizon_T": 2})

    def boom(*a, **kw):
        raise NumericalError("solver blew up")

    monkeypatch.setattr(cli, "run_experiment", boom)
    assert cli.main(["run", "--config", cfg_path]) == 2
    assert "numerical error" in capsys.readouterr().err


def test_cli_exit_code_three_on_verification_failure(monkeypatch, capsys):
    def fail(*a, **kw):
        raise VerificationFailure("a property did not hold")

    monkeypatch.setattr(cli, "run_verification", fail)
    assert cli.main(["verify", "geometry"]) == 3
    assert "verification failure" in capsys.readouterr().err


def test_cli_verify_geometry_small_case_count(capsys):
    assert cli.main(["verify", "geometry", "--cases", "64"]) == 0
    out = capsys.readouterr().out
    assert "pass" in out.lower()


def test_cli_estimate_constants_dispatch(tmp_path, capsys):
    cfg_path = _write_cfg(tmp_path / "cfg.json", {
        "horizon_T": 50,
        "problem": {"kind": "dispatch", "dim_D": 2, "num_R": 1},
        "algorithm": {"kind": "gomsp", "gamma": 0.01, "alpha": 0.15},
    })
    assert cli.main(["estimate-constants", "--config", cfg_path,
                     "--samples", "64"]) == 0
    out = capsys.readouterr().out
    assert "C1=" in out and "step condition" in out


def test_cli_estimate_constants_tracking(tmp_path, capsys):
    cfg_path = _write_cfg(tmp_path / "cfg.json", {
        "problem": {"kind": "tracking", "system_A": [[1.0]],
                    "input_B_mat": [[1.0]], "box_lower": [0.0],
                    "box_upper": [1.0], "target_path": [[0.5]]},
    })
    assert cli.main(["estimate-constants", "--config", cfg_path,
                     "--samples", "32"]) == 0
    assert "C2=" in capsys.readouterr().out


def test_cli_module_entry_point(tmp_path):
    cfg_path = _write_cfg(tmp_path / "cfg.json", {
        "horizon_T": 2, "warmup_slots": 0, "num_samples": 1,
        "benchmark_tol": 1e-6,
        "problem": {"kind": "dispatch", "dim_D": 2, "num_R": 1},
        "algorithm": {"kind": "gomsp", "regularizer": "euclidean",
                      "gamma": 0.05, "alpha": 0.5},
    })
    proc = subprocess.run(
        [sys.executable, "-m", "gomsp.cli", "run", "--config", cfg_path],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "final mean tadr:" in proc.stdout
