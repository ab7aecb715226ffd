import csv
import json

import numpy as np
import pytest
import yaml

from qeraser.cli import main
from qeraser.config import ConfigError, builtin_names, load_config, parse_config, with_override
from qeraser.gaussian import UnphysicalStateError
from qeraser.scenarios import run_scenario, run_sweep, run_tomography

CATALOG = [
    "erase-coherent",
    "erase-squeezed",
    "variance-budget",
    "gain-estimation",
    "average-fidelity",
    "qnd-criteria",
    "tomography-verify",
    "tradeoff-sweep",
]


def small(cfg, shots=2000):
    return cfg.model_copy(update={"monte_carlo": cfg.monte_carlo.model_copy(update={"shots": shots})})


class TestConfig:
    def test_catalog_present(self):
        assert set(CATALOG) <= set(builtin_names())

    @pytest.mark.parametrize("name", CATALOG + ["ideal-reversal", "ancilla-sweep"])
    def test_builtins_validate(self, name):
        assert load_config(name).scenario == name

    def test_seed_defaults_to_zero(self):
        assert parse_config({"scenario": "x"}).seed == 0

    def test_error_has_path(self):
        with pytest.raises(ConfigError, match=r"gate\.noise\.signal_x"):
            parse_config({"scenario": "x", "gate": {"variant": "noisy", "noise": {"signal_x": -1}}})

    def test_unknown_constructor(self):
        with pytest.raises(ConfigError, match=r"signal\.type"):
            parse_config({"scenario": "x", "signal": {"type": "cat"}})

    def test_unknown_field(self):
        with pytest.raises(ConfigError, match="probe.squeeze"):
            parse_config({"scenario": "x", "probe": {"type": "vacuum", "squeeze": 3}})

    def test_thermal_needs_physical_variances(self):
        with pytest.raises(ConfigError, match="1/16"):
            parse_config({"scenario": "x", "probe": {"type": "squeezed_thermal", "vx": 0.1, "vp": 0.1}})

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("no-such-scenario")

    def test_yaml_file(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text(yaml.safe_dump({"scenario": "mine", "seed": 7}))
        cfg = load_config(path)
        assert (cfg.scenario, cfg.seed) == ("mine", 7)

    def test_override(self):
        cfg = with_override(load_config("tradeoff-sweep"), "probe.squeezing_db", -2.0)
        assert cfg.probe.squeezing_db == -2.0
        with pytest.raises(ConfigError):
            with_override(cfg, "probe.nothing", 1)

    def test_digest_changes_with_seed(self):
        cfg = load_config("erase-coherent")
        assert cfg.digest() != cfg.model_copy(update={"seed": 1}).digest()


class TestRunScenario:
    def test_erase_coherent_targets(self):
        r = run_scenario(small(load_config("erase-coherent")))
        assert r.metrics["var_p_restored_c"] == pytest.approx(0.358, abs=0.005)
        assert r.metrics["fidelity_c"] == pytest.approx(0.86, abs=0.03)
        assert all(c["pass"] for c in r.checks.values())

    def test_ideal_reversal(self):
        cfg = small(load_config("ideal-reversal"))
        r = run_scenario(cfg)
        a = np.array(r.states["a"]["cov"])[:2, :2]
        np.testing.assert_allclose(np.array(r.states["c"]["cov"]), a, atol=1e-9)
        np.testing.assert_allclose(r.states["c"]["mean"], r.states["a"]["mean"][:2], atol=1e-9)

    def test_variance_budget(self):
        m = run_scenario(small(load_config("variance-budget"))).metrics
        assert m["var_x_P_b"] == pytest.approx(0.346, abs=0.01)
        assert m["var_p_S_b"] == pytest.approx(2.02, abs=0.03)
        assert m["var_p_restored_c"] == pytest.approx(0.358, abs=0.01)

    def test_deterministic_json(self):
        cfg = small(load_config("erase-squeezed"))
        assert run_scenario(cfg).to_json() == run_scenario(cfg).to_json()

    def test_report_is_json_with_provenance(self):
        cfg = small(load_config("qnd-criteria"))
        d = json.loads(run_scenario(cfg).to_json())
        assert d["provenance"]["config_hash"] == cfg.digest()
        assert d["provenance"]["seed"] == 0
        for step in ("a", "b", "c"):
            assert np.all(np.diag(d["states"][step]["cov"]) >= 0)

    def test_writes_plot_data(self, tmp_path):
        cfg = small(load_config("erase-coherent"))
        cfg = cfg.model_copy(update={"output": cfg.output.model_copy(update={"grid_points": 41, "phase_points": 8})})
        run_scenario(cfg, tmp_path)
        for name in ("report.json", "marginals.csv", "dm_cuts.csv", "wigner_c_mode0.csv", "wigner_b_mode1.csv"):
            assert (tmp_path / name).exists()
        with (tmp_path / "marginals.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert {r["step"] for r in rows} == {"a", "b", "c"}

    def test_physicality_failure_aborts(self, tmp_path, capsys):
        # attenuating gains without compensating noise break the uncertainty relation
        data = {"scenario": "bad", "gate": {"variant": "noisy", "signal_gains": [0.5, 0.5]}}
        with pytest.raises(UnphysicalStateError):
            run_scenario(parse_config(data))
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump(data))
        assert main(["run", str(path)]) == 1
        assert "symplectic eigenvalue" in capsys.readouterr().err


class TestSweep:
    def test_tradeoff_products(self, tmp_path):
        reports = run_sweep(small(load_config("tradeoff-sweep"), 500), tmp_path)
        assert len(reports) == 11
        for r in reports:
            assert r.metrics["product_back_action"] >= 0.25 - 1e-9
        with (tmp_path / "sweep.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 11 and "fisher_information" in rows[0]

    def test_ancilla_noise_monotone(self):
        reports = run_sweep(small(load_config("ancilla-sweep"), 500))
        sx = [r.metrics["erased_channel"]["sigma_x2"] for r in reports]
        sp = [r.metrics["erased_channel"]["sigma_p2"] for r in reports]
        assert np.all(np.diff(sx) < 0) and np.all(np.diff(sp) < 0)

    def test_single_point_equals_run(self):
        cfg = small(load_config("tradeoff-sweep"), 500)
        one = cfg.model_copy(update={"sweep": cfg.sweep.model_copy(update={"values": (-3.0,)})})
        swept = run_sweep(one)[0]
        direct = run_scenario(with_override(cfg, "probe.squeezing_db", -3.0).model_copy(update={"sweep": None}))
        assert swept.metrics == direct.metrics
        assert swept.monte_carlo == direct.monte_carlo

    def test_requires_sweep(self):
        with pytest.raises(ValueError):
            run_sweep(load_config("erase-coherent"))


class TestTomographyRun:
    def test_vacuum_and_post_erase(self, tmp_path):
        cfg = parse_config(
            {
                "scenario": "tomo",
                "signal": {"type": "coherent", "x0": 0.92, "p0": 0.90},
                "probe": {"type": "squeezed_thermal", "vx": 0.096, "vp": 1.662},
                "gate": {"variant": "noisy", "noise": {"signal_x": 0.045, "signal_p": 0.108}},
                "tomography": {"samples": 100000, "targets": [{"step": "c"}]},
            }
        )
        r = run_tomography(cfg, tmp_path)
        assert r.metrics["tomography"]["c"]["fock_mle_fidelity"] >= 0.99
        assert (tmp_path / "wigner_reconstructed_c.csv").exists()
        assert (tmp_path / "tomogram_c.csv").exists()

    def test_vacuum_variances(self):
        cfg = parse_config({"scenario": "vac", "tomography": {"samples": 64000, "targets": [{"step": "a_signal", "n_max": 8}]}})
        r = run_tomography(cfg)
        cov = np.array(r.metrics["tomography"]["a_signal"]["gaussian_mle"]["cov"])
        se = 0.25 * np.sqrt(2 / (64000 / 2))
        assert abs(cov[0, 0] - 0.25) < 3 * se and abs(cov[1, 1] - 0.25) < 3 * se


class TestCli:
    def test_list(self, capsys):
        assert main(["list-scenarios"]) == 0
        out = capsys.readouterr().out
        for name in CATALOG:
            assert name in out

    def test_run_json(self, capsys, tmp_path):
        assert main(["run", "qnd-criteria", "--seed", "3", "--out", str(tmp_path)]) == 0
        d = json.loads(capsys.readouterr().out)
        assert d["provenance"]["seed"] == 3
        assert (tmp_path / "report.json").exists()

    def test_run_csv(self, capsys):
        assert main(["run", "variance-budget", "--format", "csv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "scenario,point,metric,value"
        assert any(line.startswith("variance-budget,0,fisher_information,") for line in lines)

    def test_env_output_dir(self, monkeypatch, tmp_path, capsys):
        monkeypatch.setenv("QERASER_OUT", str(tmp_path))
        assert main(["run", "qnd-criteria"]) == 0
        assert (tmp_path / "report.json").exists()

    def test_config_error_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text("scenario: x\nloss: 2\n")
        assert main(["run", str(path)]) == 2
        assert "loss" in capsys.readouterr().err

    def test_seed_range(self, capsys):
        assert main(["run", "qnd-criteria", "--seed", str(2**64)]) == 2
