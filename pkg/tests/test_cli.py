import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from mscmc.cli import main

from conftest import HEART_PATH


def write_config(path, **overrides):
    cfg = {
        "model": "ar",
        "master_seed": 7,
        "n_atoms": 2_000,
        "n_chains": 400,
        "out_dir": None,
        "ar": {"rho": 0.9, "d": 2, "h": 0.49, "r": 1.5},
    }
    cfg.update(overrides)
    with open(path, "w") as fh:
        json.dump(cfg, fh)
    return path


def read_estimates(out_dir):
    rows = {}
    with open(os.path.join(out_dir, "estimates.csv")) as fh:
        assert fh.readline().strip() == "function,estimate,stderr"
        for line in fh:
            name, est, se = line.strip().split(",")
            rows[name] = (float(est), float(se))
    return rows


class TestPlan:
    def test_sweep_outputs(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "cfg.json",
            out_dir=str(tmp_path / "out"),
            plan={"eps": 0.1, "delta": 0.1, "dims": [1, 2, 5, 10]},
        )
        assert main(["plan", str(cfg)]) == 0
        lines = (tmp_path / "out" / "plan.csv").read_text().strip().splitlines()
        assert lines[0] == "d,gamma,K,R,gamma_R,w2,N_required,M_required"
        assert len(lines) == 5
        table = [line.split(",") for line in lines[1:]]
        Ns = [int(row[6]) for row in table]
        Ms = [int(row[7]) for row in table]
        assert Ns == sorted(Ns) and Ms == sorted(Ms)

    def test_balanced_h_unit_weight_column(self, tmp_path):
        cfg = write_config(
            tmp_path / "cfg.json",
            out_dir=str(tmp_path / "out"),
            ar={"rho": 0.9, "d": 2, "h": 0.5, "r": 1.5},
            plan={"eps": 0.1, "delta": 0.1, "dims": [1, 3, 9]},
        )
        assert main(["plan", str(cfg)]) == 0
        lines = (tmp_path / "out" / "plan.csv").read_text().strip().splitlines()
        for row in lines[1:]:
            assert float(row.split(",")[5]) == 1.0

    def test_reference_dimension_row(self, tmp_path):
        from mscmc.bounds import ar_drift_constants, plan_sizes

        cfg = write_config(
            tmp_path / "cfg.json",
            out_dir=str(tmp_path / "out"),
            plan={"eps": 0.1, "delta": 0.1, "dims": [2]},
        )
        assert main(["plan", str(cfg)]) == 0
        row = (tmp_path / "out" / "plan.csv").read_text().strip().splitlines()[1].split(",")
        gamma, K, R, w2, sup_v = ar_drift_constants(0.9, 2, 0.49, 1.5)
        N, M = plan_sizes(0.1, 0.1, gamma, K, R, w2, sup_v)
        assert int(row[6]) == N and int(row[7]) == M


class TestRunAr:
    def test_output_contract(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path / "cfg.json", out_dir=str(out))
        assert main(["run-ar", str(cfg)]) == 0
        rows = read_estimates(out)
        assert set(rows) == {"x0", "x1"}
        for est, se in rows.values():
            assert abs(est) <= 3 * se  # invariant mean is zero
        exc = (out / "excursions.csv").read_text().strip().splitlines()
        assert exc[0] == "chain,tau"
        taus = [int(line.split(",")[1]) for line in exc[1:]]
        assert len(taus) == 400 and all(t >= 0 for t in taus)
        diag = json.loads((out / "diagnostics.json").read_text())
        assert diag["schema_version"] == "msc-output-1"
        assert 0.0 <= diag["skip_fraction"] <= 1.0
        # mean return time sits below the excursion-length bound
        rate = 0.81 + 0.57 / 4.0
        assert diag["mean_tau"] <= (0.81 * 4.0 + 2 * 0.57 - 1) / (1 - rate)
        assert json.loads((out / "config.json").read_text())["master_seed"] == 7

    def test_byte_identical_reruns(self, tmp_path):
        couts = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            cfg = write_config(tmp_path / f"{tag}.json", out_dir=str(out))
            assert main(["run-ar", str(cfg)]) == 0
            couts.append(
                (out / "estimates.csv").read_bytes() + (out / "excursions.csv").read_bytes()
            )
        assert couts[0] == couts[1]

    def test_seed_flag_changes_results(self, tmp_path):
        outs = []
        for seed in (1, 2):
            out = tmp_path / f"s{seed}"
            cfg = write_config(tmp_path / f"s{seed}.json", out_dir=str(out))
            assert main(["run-ar", str(cfg), "--seed", str(seed)]) == 0
            outs.append((out / "estimates.csv").read_bytes())
        assert outs[0] != outs[1]

    def test_cap_error_exit_code(self, tmp_path):
        cfg = write_config(
            tmp_path / "cfg.json", out_dir=str(tmp_path / "out"), excursion_cap=1
        )
        assert main(["run-ar", str(cfg)]) == 1


class TestRunLogit:
    def test_output_contract(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path / "cfg.json",
            model="logit",
            out_dir=str(out),
            n_atoms=2_000,
            n_chains=50,
            logit={"data_path": HEART_PATH, "sigma_scale": 10.0, "h": 0.49, "r": 1.001},
        )
        assert main(["run-logit", str(cfg)]) == 0
        rows = read_estimates(out)
        assert len(rows) == 19 and "intercept" in rows
        diag = json.loads((out / "diagnostics.json").read_text())
        assert diag["mean_tau"] == pytest.approx(1.0, abs=0.05)

    def test_compare_report_after_baseline(self, tmp_path, capsys):
        out = tmp_path / "out"
        common = dict(
            model="logit",
            out_dir=str(out),
            n_atoms=500,
            n_chains=40,
            logit={"data_path": HEART_PATH, "sigma_scale": 10.0, "h": 0.49, "r": 1.001},
            baseline={"steps": 400, "burn_in": 40},
        )
        cfg = write_config(tmp_path / "cfg.json", **common)
        assert main(["run-logit", str(cfg)]) == 0
        assert main(["baseline-gibbs", str(cfg)]) == 0
        assert os.path.exists(out / "baseline_gibbs.csv")
        assert os.path.exists(out / "compare.csv")
        header = (out / "compare.csv").read_text().splitlines()[0]
        assert header.startswith("coordinate,")
        assert "msc_mean" in header and "gibbs_mean" in header
        assert "comparison across" in capsys.readouterr().out

    def test_baseline_rwm_reports_acceptance(self, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path / "cfg.json",
            model="logit",
            out_dir=str(out),
            n_atoms=300,
            logit={"data_path": HEART_PATH, "sigma_scale": 10.0, "h": 0.49, "r": 1.001},
            baseline={"steps": 500, "burn_in": 50},
        )
        assert main(["baseline-rwm", str(cfg)]) == 0
        assert "acceptance rate" in capsys.readouterr().out
        assert os.path.exists(out / "baseline_rwm.csv")

    def test_missing_data_file_exit_2(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "cfg.json",
            model="logit",
            out_dir=str(tmp_path / "out"),
            logit={"data_path": "/no/such/file.data"},
        )
        assert main(["run-logit", str(cfg)]) == 2
        assert "/no/such/file.data" in capsys.readouterr().err


class TestConfigHandling:
    def test_missing_config_file(self, capsys):
        assert main(["plan", "/no/such/config.json"]) == 2

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert main(["plan", str(path)]) == 2

    def test_invalid_chain_count(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json", out_dir=str(tmp_path / "o"), n_chains=1)
        assert main(["run-ar", str(cfg)]) == 2

    def test_worker_env_override_preserves_results(self, tmp_path, monkeypatch):
        outs = []
        for tag, env in (("a", "1"), ("b", "2")):
            monkeypatch.setenv("MSC_WORKERS", env)
            out = tmp_path / tag
            cfg = write_config(tmp_path / f"{tag}.json", out_dir=str(out))
            assert main(["run-ar", str(cfg)]) == 0
            outs.append((out / "estimates.csv").read_bytes())
        assert outs[0] == outs[1]


class TestPgSelftest:
    def test_passes(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json", out_dir=str(tmp_path / "o"))
        assert main(["pg-selftest", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "self-test passed" in out
        assert out.count("[ok]") == 2


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        cfg = write_config(
            tmp_path / "cfg.json",
            out_dir=str(tmp_path / "out"),
            plan={"eps": 0.1, "delta": 0.1, "dims": [1]},
        )
        proc = subprocess.run(
            [sys.executable, "-m", "mscmc.cli", "plan", str(cfg)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "N_required" in proc.stdout
