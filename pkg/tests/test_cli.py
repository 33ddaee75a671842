import json
import math
import subprocess
import sys

import numpy as np
import pytest

from sequifilt import ConfigurationError, io
from sequifilt.cli import SEED_ENV, bundled_config, load_config, parse_config, resolve_seed, run


def bundled_raw():
    return json.loads(bundled_config().read_text())


def write_config(tmp_path, raw, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


def small_config(tmp_path, **filter_overrides):
    raw = bundled_raw()
    raw["data"] = str(bundled_config().parent / "table1.csv")
    raw["filter"].update(particle_count=64, **filter_overrides)
    raw["convergence"] = {"particle_counts": [8, 16, 32], "repetitions": 3}
    raw["mcmc"] = {"samples": 300, "burn_in": 50, "initial": 10.0}
    raw["calibration"]["n_mc"] = 200
    return write_config(tmp_path, raw)


class TestConfig:
    def test_bundled(self, run_config):
        assert run_config.filter.particle_count == 2500
        assert run_config.filter.move_only_after_resample is True
        assert run_config.model.config.length == 7.4
        assert run_config.model.config.initial_angle == pytest.approx(math.pi / 36)
        assert run_config.model.noise.variance == 0.0025
        assert run_config.g_true == pytest.approx(9.808, abs=1e-3)
        assert run_config.data.name == "table1.csv"

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda r: r.update(colour="blue"),
            lambda r: r["model"].update(damping=0.1),
            lambda r: r["model"].pop("length"),
            lambda r: r["model"].pop("initial_velocity"),
            lambda r: r.pop("noise"),
            lambda r: r.pop("prior"),
            lambda r: r["filter"].update(particle_count=1),
            lambda r: r["filter"].update(threshold_fraction=2.0),
            lambda r: r["filter"].update(algorithm="smc"),
            lambda r: r["filter"].update(move_only_after_resample="yes"),
            lambda r: r["noise"].update(variance=-1.0),
            lambda r: r["model"].update(length="long"),
            lambda r: r.update(data="missing.csv"),
            lambda r: r["model"].update(type="tumour"),
            lambda r: r["mcmc"].update(burn_in=5000),
        ],
    )
    def test_rejects(self, tmp_path, mutate):
        raw = bundled_raw()
        mutate(raw)
        with pytest.raises(ConfigurationError):
            parse_config(raw, base_dir=bundled_config().parent)

    def test_gaussian_mean_config(self):
        raw = {"model": {"type": "gaussian_mean", "true_mean": 1.0, "observations": 10}, "filter": {"particle_count": 100}}
        cfg = parse_config(raw)
        assert not cfg.is_pendulum and cfg.oracle["observations"] == 10

    def test_gaussian_mean_rejects_noise(self):
        raw = {
            "model": {"type": "gaussian_mean", "true_mean": 1.0, "observations": 10},
            "filter": {"particle_count": 100},
            "noise": {"variance": 1.0},
        }
        with pytest.raises(ConfigurationError):
            parse_config(raw)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigurationError):
            load_config(path)


@pytest.mark.parametrize(
    "flag, env, expected",
    [(None, {}, 5), (None, {SEED_ENV: "17"}, 17), (3, {SEED_ENV: "17"}, 3), (None, {SEED_ENV: " "}, 5)],
)
def test_seed_precedence(flag, env, expected):
    assert resolve_seed(5, flag, env) == expected


def test_seed_env_must_be_integer():
    with pytest.raises(ConfigurationError):
        resolve_seed(5, None, {SEED_ENV: "abc"})


class TestCommands:
    def test_smc_outputs(self, tmp_path):
        out = tmp_path / "out"
        assert run(["smc", "--config", str(small_config(tmp_path)), "--output", str(out)], environ={}) == 0
        for name in ("summary.json", "trace.csv", "particles_final.csv", "kde.csv", "deviation.csv"):
            assert (out / name).is_file()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["seed"] == 20171021 and summary["steps"] == 10
        assert len(summary["posterior_mean"]) == 10
        assert summary["runtime_seconds"] > 0
        trace = io.read_trace(out / "trace.csv")
        assert trace["post_mean"][-1] == pytest.approx(summary["posterior_mean"][-1])
        io.read_particles(out / "particles_final.csv")
        io.read_kde(out / "kde.csv")
        eps, p = io.read_deviation(out / "deviation.csv")
        assert np.all(np.diff(p) >= 0)

    def test_sis_tiny(self, tmp_path, capsys):
        out = tmp_path / "sis"
        assert run(["sis", "--particles", "16", "--output", str(out)], environ={}) == 0
        trace = io.read_trace(out / "trace.csv")
        assert len(trace["t"]) == 10 and not trace["resampled"].any()
        assert "sis:" in capsys.readouterr().out

    def test_env_seed(self, tmp_path):
        out = tmp_path / "o"
        cfg = small_config(tmp_path)
        assert run(["sis", "--config", str(cfg), "--output", str(out)], environ={SEED_ENV: "99"}) == 0
        assert json.loads((out / "summary.json").read_text())["seed"] == 99

    def test_mcmc_ref(self, tmp_path):
        out = tmp_path / "m"
        assert run(["mcmc-ref", "--config", str(small_config(tmp_path)), "--output", str(out)], environ={}) == 0
        particles = io.read_particles(out / "particles_final.csv")
        assert particles.size == 250

    @pytest.mark.parametrize("algorithm", ["sis", "smc"])
    def test_convergence(self, tmp_path, algorithm):
        out = tmp_path / "c"
        args = ["convergence", "--algorithm", algorithm, "--config", str(small_config(tmp_path)), "--output", str(out)]
        assert run(args, environ={}) == 0
        m, _, var = io.read_convergence(out / "convergence.csv")
        np.testing.assert_array_equal(m, [8, 16, 32])
        assert np.all(var > 0)

    def test_calibrate(self, tmp_path):
        out = tmp_path / "cal"
        assert run(["calibrate-noise", "--config", str(small_config(tmp_path)), "--output", str(out)], environ={}) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["sigma2"] > 0 and len(summary["schedule"]) == 10

    def test_oracle_check(self, tmp_path, capsys):
        out = tmp_path / "oc"
        assert run(["oracle-check", "--particles", "2000", "--output", str(out)], environ={}) == 0
        assert "max |filter mean - conjugate mean|" in capsys.readouterr().out

    def test_oracle_check_fails_above_tolerance(self, tmp_path):
        out = tmp_path / "oc"
        args = ["oracle-check", "--particles", "4", "--tolerance", "1e-9", "--output", str(out)]
        assert run(args, environ={}) == 3
        assert json.loads((out / "summary.json").read_text())["passed"] is False

    def test_extra_batches(self, tmp_path):
        extra = tmp_path / "extra.csv"
        extra.write_text("t,tau_seconds\n11,27.2\n12,30.0\n")
        out = tmp_path / "x"
        args = ["sis", "--config", str(small_config(tmp_path)), "--extra-data", str(extra), "--output", str(out)]
        assert run(args, environ={}) == 0
        assert json.loads((out / "summary.json").read_text())["steps"] == 11


class TestExitCodes:
    def test_missing_config(self, tmp_path):
        assert run(["smc", "--config", str(tmp_path / "none.json"), "--output", str(tmp_path)], environ={}) == 2

    def test_unknown_key(self, tmp_path, capsys):
        raw = bundled_raw()
        raw["filter"]["particles"] = 10
        raw["data"] = str(bundled_config().parent / "table1.csv")
        assert run(["smc", "--config", str(write_config(tmp_path, raw)), "--output", str(tmp_path)], environ={}) == 2
        assert "particles" in capsys.readouterr().err

    def test_bad_particles_flag(self, tmp_path):
        assert run(["smc", "--particles", "1", "--output", str(tmp_path)], environ={}) == 2

    def test_malformed_extra(self, tmp_path, capsys):
        extra = tmp_path / "bad.csv"
        extra.write_text("t,tau_seconds\n1,fast\n")
        args = ["sis", "--particles", "16", "--extra-data", str(extra), "--output", str(tmp_path)]
        assert run(args, environ={}) == 2
        assert "line 2" in capsys.readouterr().err

    def test_likelihood_collapse(self, tmp_path):
        raw = bundled_raw()
        raw["data"] = str(bundled_config().parent / "table1.csv")
        # every particle's predicted angle misses the data by far more than sigma
        raw["noise"]["variance"] = 1e-300
        args = ["sis", "--config", str(write_config(tmp_path, raw)), "--particles", "16", "--output", str(tmp_path)]
        assert run(args, environ={}) == 3

    def test_argparse_error(self):
        with pytest.raises(SystemExit) as info:
            run(["teleport"])
        assert info.value.code == 2


def test_module_entry_point(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "sequifilt", "sis", "--particles", "8", "--output", str(tmp_path)],
        capture_output=True,
        text=True,
        check=False,
    )
    assert result.returncode == 0, result.stderr
    assert (tmp_path / "trace.csv").is_file()


def test_summary_deterministic_except_runtime(tmp_path):
    cfg = small_config(tmp_path)
    outs = []
    for threads in ("1", "3"):
        out = tmp_path / f"t{threads}"
        assert run(["smc", "--config", str(cfg), "--threads", threads, "--output", str(out)], environ={}) == 0
        summary = json.loads((out / "summary.json").read_text())
        summary.pop("runtime_seconds")
        outs.append((summary, (out / "trace.csv").read_bytes()))
    assert outs[0] == outs[1]
