"""End-to-end checks of the command-line runner.

Runs subcommands in-process through cli.main so exit codes and stdio are
captured directly; one subprocess test exercises the installed console
script. File contents are parsed back from the artifacts, never from the
captured stdout echo.
"""

import json
import math
import shutil
import subprocess

import numpy as np
import pytest

from halodroplet import cli
from halodroplet import estimators as est
from halodroplet.model_constants import renewal_law


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[-1] == "# manifest: manifest.json"
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:-1]]
    return header, rows


def cell_map(path, row=0):
    header, rows = read_csv(path)
    return dict(zip(header, rows[row]))


class TestConfigValidation:
    def write(self, tmp_path, mapping):
        p = tmp_path / "config.json"
        p.write_text(json.dumps(mapping))
        return p

    def test_minimal_config_accepted(self, tmp_path):
        report = cli.validate_config(self.write(tmp_path, {"experiment": "constants"}))
        assert report.valid and report.violations == ()
        assert report.config.kappa == 2.0
        assert report.config.experiment == "constants"

    def test_kappa_below_one_rejected(self, tmp_path):
        p = self.write(tmp_path, {"experiment": "constants", "kappa": 0.5})
        report = cli.validate_config(p)
        assert not report.valid
        assert any("kappa must exceed 1" in v for v in report.violations)

    def test_side_vs_critical_radius_rejected(self, tmp_path):
        # kappa 2 gives critical radius 4; half of side 7 is below it
        p = self.write(tmp_path, {"experiment": "constants", "kappa": 2.0, "side": 7.0})
        report = cli.validate_config(p)
        assert not report.valid
        assert any("critical radius" in v for v in report.violations)

    def test_empty_required_grid_rejected(self, tmp_path):
        p = self.write(
            tmp_path, {"experiment": "renewal-asymptotics", "beta_grid": []}
        )
        report = cli.validate_config(p)
        assert not report.valid
        assert any("nonempty" in v for v in report.violations)

    def test_short_beta_grid_rejected_for_extrapolation(self, tmp_path):
        p = self.write(
            tmp_path,
            {"experiment": "renewal-asymptotics", "beta_grid": [10.0, 100.0]},
        )
        report = cli.validate_config(p)
        assert not report.valid
        assert any("at least 4" in v for v in report.violations)

    def test_unknown_key_and_bad_types_itemized(self, tmp_path):
        p = self.write(
            tmp_path,
            {
                "experiment": "constants",
                "kappa": "two",
                "replicas": True,
                "colour": "red",
            },
        )
        report = cli.validate_config(p)
        assert not report.valid
        text = " | ".join(report.violations)
        assert "kappa must be a number" in text
        assert "replicas must be an integer" in text
        assert "unknown config key 'colour'" in text

    def test_experiment_mismatch_rejected(self):
        with pytest.raises(cli.ConfigError, match="was requested"):
            cli.assemble_config("constants", {"experiment": "membership"}, {})

    def test_shift_outside_window_rejected(self):
        with pytest.raises(cli.ConfigError, match="2 beta"):
            cli.assemble_config(
                "membership", {"beta_grid": [100.0], "m_grid": [50.0]}, {}
            )

    def test_validation_has_no_side_effects(self, tmp_path):
        out = tmp_path / "never"
        p = self.write(
            tmp_path, {"experiment": "constants", "out_dir": str(out)}
        )
        before = sorted(x.name for x in tmp_path.iterdir())
        assert cli.validate_config(p).valid
        assert sorted(x.name for x in tmp_path.iterdir()) == before
        assert not out.exists()

    def test_missing_file_and_bad_json(self, tmp_path):
        report = cli.validate_config(tmp_path / "absent.json")
        assert not report.valid
        assert any("not found" in v for v in report.violations)
        p = tmp_path / "broken.json"
        p.write_text("{not json")
        report = cli.validate_config(p)
        assert not report.valid
        assert any("not valid JSON" in v for v in report.violations)

    def test_config_round_trips_through_json(self, tmp_path):
        cfg = cli.assemble_config(
            "membership", {"beta_grid": [50.0], "m_grid": [0.3]}, {"seed": 9}
        )
        p = self.write(tmp_path, cfg.to_dict())
        report = cli.validate_config(p)
        assert report.valid and report.config == cfg


class TestConstantsRun:
    def test_values_and_layout(self, tmp_path, capsys):
        rc = cli.main(["constants", "--kappa", "2", "--out", str(tmp_path)])
        assert rc == 0
        row = cell_map(tmp_path / "constants.csv")
        assert float(row["critical_radius"]) == 4.0
        assert round(float(row["profile_minimum"]), 5) == 25.13274
        assert round(float(row["c1"]), 5) == 0.66667
        assert float(row["profile_minimum"]) == pytest.approx(8 * math.pi, rel=1e-14)
        assert float(row["intensity_coefficient"]) == pytest.approx(
            4.0 ** (2.0 / 3.0), rel=1e-14
        )
        law = renewal_law()
        assert float(row["tau_star"]) == pytest.approx(law.tau_star, rel=1e-13)
        assert float(row["renewal_mean"]) == pytest.approx(law.mu, rel=1e-13)
        assert float(row["renewal_variance"]) == pytest.approx(law.sigma_sq, rel=1e-13)

    def test_manifest_contents(self, tmp_path, capsys):
        assert cli.main(["constants", "--seed", "11", "--out", str(tmp_path)]) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert set(manifest) == {
            "build",
            "config",
            "numpy",
            "outputs",
            "package",
            "python",
            "scipy",
            "seed",
            "version",
        }
        assert manifest["seed"] == 11
        assert manifest["outputs"] == ["constants.csv"]
        assert manifest["package"] == "halodroplet"
        assert manifest["numpy"] == np.__version__
        assert len(manifest["build"]) == 12
        # the echoed config reassembles to the exact run configuration
        echoed = dict(manifest["config"])
        exp = echoed.pop("experiment")
        cfg = cli.assemble_config(exp, {"experiment": exp, **echoed}, {})
        assert cfg.seed == 11 and cfg.out_dir == str(tmp_path)

    def test_run_is_pure_function_of_config(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["constants", "--out", str(a)]) == 0
        cfg = cli.ExperimentConfig(experiment="constants", out_dir=str(b))
        cli.run(cfg)
        assert (a / "constants.csv").read_bytes() == (b / "constants.csv").read_bytes()


class TestDeterminismAndSweep:
    def test_byte_identical_rerun(self, tmp_path, capsys):
        args = [
            "expansion-sweep",
            "--eps", "0.1,0.05",
            "--n", "6",
            "--seed", "7",
            "--out", str(tmp_path),
        ]
        assert cli.main(args) == 0
        first_csv = (tmp_path / "expansion_sweep.csv").read_bytes()
        first_manifest = (tmp_path / "manifest.json").read_bytes()
        assert cli.main(args) == 0
        assert (tmp_path / "expansion_sweep.csv").read_bytes() == first_csv
        assert (tmp_path / "manifest.json").read_bytes() == first_manifest

    def test_eps_alias_matches_eps_grid(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        base = ["expansion-sweep", "--n", "4", "--seed", "3"]
        assert cli.main(base + ["--eps", "0.1,0.05", "--out", str(a)]) == 0
        assert cli.main(base + ["--eps-grid", "0.1,0.05", "--out", str(b)]) == 0
        assert (a / "expansion_sweep.csv").read_bytes() == (
            b / "expansion_sweep.csv"
        ).read_bytes()

    def test_residual_column_shrinks(self, tmp_path, capsys):
        rc = cli.main(
            [
                "expansion-sweep",
                "--kappa", "2",
                "--eps", "0.1,0.05,0.025",
                "--n", "64",
                "--seed", "7",
                "--out", str(tmp_path),
            ]
        )
        assert rc == 0
        header, rows = read_csv(tmp_path / "expansion_sweep.csv")
        idx = header.index("max_scaled_residual")
        residuals = [float(r[idx]) for r in rows]
        assert len(residuals) == 3
        assert residuals[0] > residuals[1] > residuals[2]

    def test_flag_overrides_config_file(self, tmp_path, capsys):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"experiment": "constants", "kappa": 3.0}))
        out = tmp_path / "out"
        rc = cli.main(
            ["constants", "--config", str(p), "--kappa", "2", "--out", str(out)]
        )
        assert rc == 0
        assert float(cell_map(out / "constants.csv")["kappa"]) == 2.0
        rc = cli.main(["constants", "--config", str(p), "--out", str(out)])
        assert rc == 0
        assert float(cell_map(out / "constants.csv")["kappa"]) == 3.0


class TestLocalityAgreement:
    def test_both_routes_fully_agree(self, tmp_path, capsys):
        rc = cli.main(
            [
                "locality-agreement",
                "--replicas", "400",
                "--seed", "3",
                "--out", str(tmp_path),
            ]
        )
        assert rc == 0
        header, rows = read_csv(tmp_path / "locality_agreement.csv")
        assert [r[0] for r in rows] == [
            "angular-vs-region",
            "angular-vs-extraction",
        ]
        for row in rows:
            record = dict(zip(header, row))
            assert int(record["cases"]) >= 1
            assert int(record["agreements"]) == int(record["cases"])
            assert record["all_agree"] == "true"


class TestRenewalAsymptotics:
    def test_extrapolation_close_to_prediction(self, tmp_path, capsys):
        rc = cli.main(
            [
                "renewal-asymptotics",
                "--beta-grid", "10,100,1000,10000",
                "--out", str(tmp_path),
            ]
        )
        assert rc == 0
        header, rows = read_csv(tmp_path / "renewal_asymptotics.csv")
        assert len(rows) == 4
        record = dict(zip(header, rows[0]))
        extrapolated = float(record["extrapolated_limit"])
        predicted = float(record["predicted_limit"])
        assert extrapolated == pytest.approx(predicted, rel=1e-3)
        assert float(record["refinement_defect"]) < 0.005
        scaled = [float(dict(zip(header, r))["scaled_log_expectation"]) for r in rows]
        assert all(math.isfinite(s) for s in scaled)


class TestMembershipRun:
    def test_diagnostic_tables(self, tmp_path, capsys):
        rc = cli.main(
            [
                "membership",
                "--beta-grid", "100",
                "--m-grid", "0.25",
                "--replicas", "40",
                "--seed", "5",
                "--out", str(tmp_path),
            ]
        )
        assert rc == 0
        row = cell_map(tmp_path / "membership.csv")
        assert float(row["beta"]) == 100.0
        assert float(row["ess"]) == 40.0
        assert 50.0 < float(row["mean_count"]) < 140.0
        hits = int(row["hits"])
        assert 0 <= hits <= 40
        assert 0.0 <= float(row["estimate"]) <= 1.0
        assert 0.0 < float(row["upper_95"]) < 1.0
        assert float(row["tau_hat"]) >= 0.0
        if hits == 0:
            assert math.isnan(float(row["c3_scaled_log"]))
        shift = cell_map(tmp_path / "membership_shift.csv")
        assert float(shift["m"]) == 0.25
        assert float(shift["scaled_abs_log_ratio"]) >= 0.0
        assert math.isfinite(float(shift["p_shifted"]))
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["outputs"] == ["membership.csv", "membership_shift.csv"]


class TestGibbsValidateRun:
    def test_chain_versus_reference_table(self, tmp_path, capsys):
        rc = cli.main(
            [
                "gibbs-validate",
                "--steps", "30000",
                "--burn-in", "2000",
                "--seed", "1",
                "--out", str(tmp_path),
            ]
        )
        assert rc == 0
        header, rows = read_csv(tmp_path / "gibbs_validate.csv")
        assert [int(r[0]) for r in rows] == [0, 1, 2]
        records = [dict(zip(header, r)) for r in rows]
        chain = [float(r["chain_probability"]) for r in records]
        assert sum(chain) == pytest.approx(1.0, abs=1e-9)
        oracle = est.small_system_oracle(2.0, 0.05, 10.0, n_max=2, mode="conditional")
        for record, ref in zip(records, oracle.probabilities):
            assert float(record["oracle_probability"]) == pytest.approx(ref, rel=1e-12)
            assert abs(float(record["oracle_z"])) < 8.0


class TestExitCodes:
    def test_config_error_emits_json_and_2(self, capsys):
        rc = cli.main(["constants", "--kappa", "0.5"])
        assert rc == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "config" and err["exit_code"] == 2
        assert any("kappa must exceed 1" in m for m in err["messages"])

    def test_membership_window_config_error(self, capsys):
        rc = cli.main(["membership", "--beta-grid", "100", "--m-grid", "50"])
        assert rc == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "config"

    def test_numeric_failure_emits_json_and_3(self, tmp_path, capsys):
        rc = cli.main(
            [
                "renewal-asymptotics",
                "--beta-grid", "10,30,100,300",
                "--nodes", "1",
                "--out", str(tmp_path),
            ]
        )
        assert rc == 3
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "numeric" and err["exit_code"] == 3
        assert any("grid too coarse" in m for m in err["messages"])

    def test_validate_subcommand_exit_codes(self, tmp_path, capsys):
        good = tmp_path / "good.json"
        good.write_text(json.dumps({"experiment": "constants"}))
        assert cli.main(["validate", "--config", str(good)]) == 0
        out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert out["valid"] is True
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"experiment": "constants", "kappa": 0.5}))
        assert cli.main(["validate", "--config", str(bad)]) == 2
        out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert out["valid"] is False and out["violations"]
        assert cli.main(["validate", "--config", str(tmp_path / "nope.json")]) == 2


class TestConsoleScript:
    def test_installed_entry_point(self, tmp_path):
        exe = shutil.which("halodroplet")
        assert exe is not None
        proc = subprocess.run(
            [exe, "constants", "--kappa", "2", "--out", str(tmp_path)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert (tmp_path / "constants.csv").exists()
        assert "critical_radius" in proc.stdout
