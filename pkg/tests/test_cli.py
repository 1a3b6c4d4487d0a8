"""CLI behavior: config parsing, exit codes, manifests, output schemas."""

import json
import os

import numpy as np
import pytest

from hnslab.cli import ConfigError, load_config, main


def run_cli(args, tmp_path, out="runs"):
    return main(args + ["--out", str(tmp_path / out)])


class TestConfig:
    def test_unknown_keys_listed(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("seed=1\nnot.a.key=2\nalso.bad=3\n")
        with pytest.raises(ConfigError, match="also.bad, not.a.key"):
            load_config(str(cfg), [])

    def test_overrides_win(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("seed=1\ngrid.n=64\n")
        out = load_config(str(cfg), ["grid.n=128"])
        assert out["grid.n"] == 128

    def test_comments_and_blanks(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("# comment\n\nseed=9\n")
        assert load_config(str(cfg), [])["seed"] == 9

    def test_bad_value_type(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(None, ["grid.n=many"])


class TestExitCodes:
    def test_version(self, capsys):
        assert main(["version"]) == 0
        from hnslab import __version__

        assert capsys.readouterr().out.strip() == __version__

    def test_missing_seed_is_validation_error(self, tmp_path):
        assert run_cli(["simulate", "grid.n=32"], tmp_path) == 2

    def test_unknown_key_is_validation_error(self, tmp_path):
        assert run_cli(["simulate", "seed=1", "bogus=1"], tmp_path) == 2

    def test_simulate_t_end_zero(self, tmp_path):
        code = run_cli(
            [
                "simulate",
                "seed=1",
                "grid.n=32",
                "model.kind=hns_eps",
                "model.epsilon=0.1",
                "step.t_end=0",
            ],
            tmp_path,
        )
        assert code == 0
        rundirs = list((tmp_path / "runs").iterdir())
        assert len(rundirs) == 1
        probes = (rundirs[0] / "probes.csv").read_text().splitlines()
        assert probes[0] == "time,probe_name,value"
        times = {ln.split(",")[0] for ln in probes[1:]}
        assert times == {"0"}

    def test_refuse_overwrite_then_force(self, tmp_path):
        args = [
            "simulate",
            "seed=1",
            "grid.n=32",
            "model.kind=hns_eps",
            "model.epsilon=0.1",
            "step.t_end=0",
        ]
        assert run_cli(args, tmp_path) == 0
        assert run_cli(args, tmp_path) == 2
        assert main(args + ["--out", str(tmp_path / "runs"), "--force"]) == 0


class TestManifest:
    def test_manifest_written_and_run_id_stable(self, tmp_path):
        args = [
            "simulate",
            "seed=3",
            "grid.n=32",
            "model.kind=ns",
            "step.t_end=0",
        ]
        assert run_cli(args, tmp_path, out="a") == 0
        assert run_cli(args, tmp_path, out="b") == 0
        dir_a = next((tmp_path / "a").iterdir())
        dir_b = next((tmp_path / "b").iterdir())
        assert dir_a.name == dir_b.name  # content-hash run id
        m = json.loads((dir_a / "manifest.json").read_text())
        assert m["status"] == "ok"
        assert m["run_id"] == dir_a.name
        assert "probes.csv" in m["outputs"]

    def test_env_var_out_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("HNS_OUT_DIR", str(tmp_path / "env_runs"))
        code = main(["simulate", "seed=4", "grid.n=32", "model.kind=ns", "step.t_end=0"])
        assert code == 0
        assert (tmp_path / "env_runs").exists()


class TestSweepCommand:
    def test_mini_alpha_sweep_outputs(self, tmp_path):
        args = [
            "sweep",
            "seed=5",
            "grid.n=32",
            "model.epsilon=0.01",
            "sweep.variable=alpha",
            "sweep.values=1e-1,1e-2,1e-3",
            "sweep.T_final=0.1",
            "init.kind=taylor_green",
        ]
        assert run_cli(args, tmp_path) == 0
        rundir = next((tmp_path / "runs").iterdir())
        sweep_lines = (rundir / "sweep.csv").read_text().splitlines()
        assert sweep_lines[0].startswith("sweep_var,value,T_final")
        assert len(sweep_lines) == 1 + 3 + 1  # header + 3 points + rate_fit row
        assert sweep_lines[-1].startswith("rate_fit,")
        rates = (rundir / "rates.csv").read_text().splitlines()
        assert rates[0] == "metric,slope,intercept,r_squared"
        assert any(ln.startswith("modulated_energy,") for ln in rates[1:])
        assert (rundir / "plot_modulated_energy.dat").exists()

    def test_default_grid_row_count(self, tmp_path):
        # default alpha grid has 7 points -> 7 + summary row
        args = [
            "sweep",
            "seed=6",
            "grid.n=16",
            "model.epsilon=0.05",
            "sweep.variable=alpha",
            "sweep.T_final=0.05",
            "init.kind=taylor_green",
        ]
        assert run_cli(args, tmp_path) == 0
        rundir = next((tmp_path / "runs").iterdir())
        lines = (rundir / "sweep.csv").read_text().splitlines()
        assert len(lines) == 1 + 7 + 1


class TestOtherCommands:
    def test_lp_check(self, tmp_path):
        args = ["lp-check", "seed=7", "grid.n=32", "lp.trials=8", "lp.names=ladyzhenskaya,bernstein"]
        assert run_cli(args, tmp_path) == 0
        rundir = next((tmp_path / "runs").iterdir())
        lines = (rundir / "inequalities.csv").read_text().splitlines()
        assert lines[0] == "name,trials,max_ratio,mean_ratio,seed,dim,n,L"
        assert len(lines) == 3

    def test_speed_test(self, tmp_path):
        args = [
            "speed-test",
            "seed=8",
            "grid.n=128",
            "model.epsilon=0.1",
            "model.alpha=0.1",
            "speed.bump=gradient",
            "speed.damping=0",
            "speed.samples=4",
        ]
        assert run_cli(args, tmp_path) == 0
        rundir = next((tmp_path / "runs").iterdir())
        assert (rundir / "front.csv").read_text().splitlines()[0] == (
            "time,support_radius,bound_radius"
        )
        summary = (rundir / "front_summary.txt").read_text()
        assert "bound_satisfied=1" in summary

    def test_gates(self, tmp_path):
        args = [
            "gates",
            "seed=9",
            "grid.n=32",
            "model.kind=hns_eps",
            "model.epsilon=0.01",
            "init.amplitude=0.05",
            "gates.constants_trials=100",
        ]
        assert run_cli(args, tmp_path) == 0
        rundir = next((tmp_path / "runs").iterdir())
        assert (rundir / "gates.csv").read_text().splitlines()[0] == (
            "gate,value,threshold,ratio,passed"
        )
        assert (rundir / "constants.csv").exists()
        assert (rundir / "gates.txt").exists()
