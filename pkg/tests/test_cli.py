"""End-to-end tests of the command-line subcommands on small configurations."""

import json

import numpy as np
import pytest

from app.config import settings
from app.main import main
from app.services.basis import ensemble_state
from app.services.dynamics import entropy
from app.services.outputs import write_matrix


def qubit_config(tmp_path, t1="1.0", final_time=1.0, steps=1000, target="", output="", optimizer=""):
    text = f"""
[subsystem.1]
levels = 2
freq_ghz = 4.5
t1_us = {t1}

[control.1]
num_splines = 4
carrier_freqs_mhz = 0
lab_amp_bound_mhz = 10

[grid]
t_us = {final_time}
steps = {steps}

[target]
index = 0
{target}

[objective]
gamma1 = 1e-6
gamma2 = 1e-2
penalty_width_us = 0.02

[optimizer]
{optimizer}

[output]
directory = {tmp_path / "out"}
stride = 100
{output}
"""
    path = tmp_path / "run.ini"
    path.write_text(text)
    return str(path)


def load_table(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def error_document(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


class TestSimulate:
    def test_excited_state_decay(self, tmp_path):
        write_matrix(tmp_path / "excited.csv", np.diag([0.0, 1.0]))
        config = qubit_config(tmp_path, target="initial_state = file\nstate_file = excited.csv")
        assert main(["simulate", "--config", config]) == 0

        out = tmp_path / "out"
        table = load_table(out / "trajectory.csv")
        assert table.shape == (11, 4)
        np.testing.assert_allclose(table[:, 1], np.exp(-table[:, 0]), atol=1e-6)

        summary = json.loads((out / "summary.json").read_text())
        assert summary["command"] == "simulate"
        assert summary["average_fidelity"] == pytest.approx(1.0 - np.exp(-1.0), abs=1e-6)
        assert summary["subsystem_fidelities"] == {"q1": pytest.approx(1.0 - np.exp(-1.0), abs=1e-6)}
        for name in ("trajectory.csv", "controls_q1.csv", "spectrum_q1.csv", "final_state.csv", "summary.json"):
            assert name in summary["files"]
            assert (out / name).is_file()

    def test_ensemble_entropy_in_first_row(self, tmp_path):
        config = qubit_config(tmp_path, final_time=0.1, steps=100)
        assert main(["simulate", "--config", config]) == 0
        table = load_table(tmp_path / "out" / "trajectory.csv")
        assert table[0, 2] == pytest.approx(entropy(ensemble_state(2)))
        assert table[0, 1] == pytest.approx(0.5)

    def test_strong_drive_from_pure_state(self, tmp_path):
        write_matrix(tmp_path / "ground.csv", np.diag([1.0, 0.0]))
        bound = 0.999 * 10.0 / (2.0 * np.sqrt(2.0))
        rows = "\n".join(f"1,{s},0,{bound:.6f},{-bound:.6f}" for s in range(4))
        (tmp_path / "strong.csv").write_text(f"q,s,n,re,im\n{rows}\n")
        config = qubit_config(tmp_path, steps=200, target="initial_state = file\nstate_file = ground.csv")

        assert main(["simulate", "--config", config, "--alpha", str(tmp_path / "strong.csv")]) == 0

        table = load_table(tmp_path / "out" / "trajectory.csv")
        assert np.all(np.isfinite(table))
        assert table[0, 2] == pytest.approx(0.0, abs=1e-12)
        assert np.all((table[:, 2] >= 0.0) & (table[:, 2] <= 1.0))

    def test_out_overrides_config_directory(self, tmp_path):
        config = qubit_config(tmp_path, final_time=0.1, steps=100)
        assert main(["simulate", "--config", config, "--out", str(tmp_path / "elsewhere")]) == 0
        assert (tmp_path / "elsewhere" / "summary.json").is_file()
        assert not (tmp_path / "out").exists()

    def test_oracle_and_pure_state_trajectories(self, tmp_path):
        config = qubit_config(tmp_path, final_time=0.1, steps=100,
                              output="oracle_fidelity = true\npure_state_trajectories = true")
        assert main(["simulate", "--config", config]) == 0
        out = tmp_path / "out"
        summary = json.loads((out / "summary.json").read_text())
        assert summary["oracle_average_fidelity"] == pytest.approx(summary["average_fidelity"], abs=1e-10)
        assert (out / "trajectory_k0.csv").is_file() and (out / "trajectory_k1.csv").is_file()


class TestErrors:
    def test_invalid_config_exits_with_one(self, tmp_path, capsys):
        path = tmp_path / "bad.ini"
        path.write_text("[subsystem.1]\nlevels = 1\nfreq_ghz = 4.5\n")
        assert main(["simulate", "--config", str(path)]) == 1
        document = error_document(capsys)
        assert document["error"]["type"] == "ConfigError"
        assert document["run_id"]

    def test_undersampled_spectrum_exits_with_one(self, tmp_path, capsys):
        config = qubit_config(tmp_path, final_time=0.1, steps=100, output="sample_rate_ghz = 1.0")
        assert main(["spectrum", "--config", config]) == 1
        assert error_document(capsys)["error"]["type"] == "UndersamplingError"


class TestChecks:
    def test_gradcheck(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setattr(settings, "gradcheck_tol", 1e-5)
        config = qubit_config(tmp_path, final_time=0.1, steps=50, optimizer="init_amplitude_scale = 2.0")
        assert main(["gradcheck", "--config", config]) == 0
        assert capsys.readouterr().out.startswith("coord,eps,adjoint,fd,rel_err")
        table = load_table(tmp_path / "out" / "gradcheck.csv")
        assert table.shape == (8 * 5, 5)

    def test_gradcheck_failure_exits_with_two(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setattr(settings, "gradcheck_tol", 1e-300)
        config = qubit_config(tmp_path, final_time=0.1, steps=50, optimizer="init_amplitude_scale = 2.0")
        assert main(["gradcheck", "--config", config]) == 2
        assert error_document(capsys)["error"]["type"] == "CheckFailedError"

    def test_verify_basis(self, tmp_path, capsys):
        assert main(["verify-basis", "--config", qubit_config(tmp_path)]) == 0
        report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert report["hermitian"] and report["psd"] and report["unit_trace"] and report["independent"]

    def test_spectrum(self, tmp_path):
        config = qubit_config(tmp_path, final_time=0.1, steps=100)
        assert main(["spectrum", "--config", config]) == 0
        table = load_table(tmp_path / "out" / "spectrum_q1.csv")
        assert table.shape[1] == 2


class TestOptimize:
    def test_short_optimization_then_replay(self, tmp_path):
        config = qubit_config(tmp_path, final_time=0.1, steps=100, optimizer="max_iters = 3\nseed = 2")
        assert main(["optimize", "--config", config]) == 0

        out = tmp_path / "out"
        summary = json.loads((out / "summary.json").read_text())
        assert summary["termination_reason"] in {"max_iters", "grad_tol", "cost_tol", "line_search_failed"}
        assert summary["iterations"] <= 3
        history = load_table(out / "history.csv")
        assert history.shape[1] == 8
        assert np.all(np.diff(history[:, 1]) <= 0)
        assert "alpha.csv" in summary["files"]

        replay = tmp_path / "replay"
        assert main(["simulate", "--config", config, "--alpha", str(out / "alpha.csv"), "--out", str(replay)]) == 0
        replayed = json.loads((replay / "summary.json").read_text())
        assert replayed["average_fidelity"] == pytest.approx(summary["average_fidelity"], abs=1e-12)
