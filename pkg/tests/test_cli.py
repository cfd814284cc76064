import json

import numpy as np
import pytest

from penseq import MultiresSequence
from penseq.cli import PRESETS, ExperimentConfig, main


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def base_config(**overrides):
    doc = {
        "gamma": {"alpha": 1.0, "p": 2.0, "q": 2.0, "beta": 0.5},
        "radius": 1.0,
        "penalty": {"zeta": 2.0, "nu": 40.0, "xi1": 1.0},
        "noise": {"covariance": "identity"},
        "signal": {"kind": "shell_dense"},
        "epsilons": [2.0 ** -6, 2.0 ** -7, 2.0 ** -8, 2.0 ** -9],
        "replicates": 5,
        "seed": 4242,
    }
    doc.update(overrides)
    return doc


class TestExperimentConfig:
    def test_presets_all_parse(self):
        for name, doc in PRESETS.items():
            cfg = ExperimentConfig.from_dict(json.loads(json.dumps(doc)))
            assert cfg.resolved_dict()["schema_version"] == 1

    def test_unknown_field_rejected(self):
        from penseq import ValidationError
        with pytest.raises(ValidationError):
            ExperimentConfig.from_dict(base_config(bogus=1))

    def test_cross_validation(self):
        from penseq import ValidationError
        with pytest.raises(ValidationError):
            ExperimentConfig.from_dict(base_config(epsilons=[2.0]))
        with pytest.raises(ValidationError):
            doc = base_config()
            doc["signal"]["kind"] = "shell_sparse"     # p = 2
            ExperimentConfig.from_dict(doc)
        with pytest.raises(ValidationError):
            doc = base_config()
            doc["penalty"]["beta"] = 0.0               # mismatch with gamma
            ExperimentConfig.from_dict(doc)


class TestEstimate:
    def test_zero_sequence(self, tmp_path):
        seq = MultiresSequence.zeros(1, 4)
        inp = tmp_path / "seq.json"
        inp.write_text(seq.to_json())
        cfg = write_config(tmp_path, base_config(epsilon=2.0 ** -6))
        code = main(["estimate", str(inp), "--config", cfg, "--out", str(tmp_path)])
        assert code == 0
        doc = json.loads((tmp_path / "fit.json").read_text())
        assert doc["schema_version"] == 1
        assert all(not any(level) for level in doc["fit"]["levels"])
        assert all(m["k_hat"] == 0 for m in doc["fit"]["per_level"])
        # input file untouched
        assert inp.read_text() == seq.to_json()

    def test_malformed_level_length(self, tmp_path, capsys):
        inp = tmp_path / "seq.json"
        inp.write_text(json.dumps({"j0": 1, "levels": [[0.0, 1.0, 2.0]]}))
        cfg = write_config(tmp_path, base_config(epsilon=2.0 ** -6))
        code = main(["estimate", str(inp), "--config", cfg, "--out", str(tmp_path)])
        assert code == 2
        assert "level length" in capsys.readouterr().err

    def test_missing_input(self, tmp_path):
        cfg = write_config(tmp_path, base_config(epsilon=2.0 ** -6))
        code = main(["estimate", str(tmp_path / "nope.json"), "--config", cfg,
                     "--out", str(tmp_path)])
        assert code == 2


class TestSweep:
    def test_deterministic_rerun(self, tmp_path):
        cfg = write_config(tmp_path, base_config())
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["sweep", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["sweep", "--config", cfg, "--out", str(out2)]) == 0
        assert (out1 / "sweep.csv").read_text() == (out2 / "sweep.csv").read_text()
        assert (out1 / "sweep.json").read_text() == (out2 / "sweep.json").read_text()

    def test_summary_fields_and_rows_sorted(self, tmp_path):
        cfg = write_config(tmp_path, base_config())
        out = tmp_path / "o"
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
        doc = json.loads((out / "sweep.json").read_text())
        assert {"slope", "intercept", "r_hat", "r_theory", "relative_error",
                "log_corrected"} <= set(doc["summary"])
        eps = [row["epsilon"] for row in doc["rows"]]
        assert eps == sorted(eps)
        assert doc["config"]["seed"] == 4242

    def test_threads_do_not_change_results(self, tmp_path):
        cfg = write_config(tmp_path, base_config())
        out1, out2 = tmp_path / "s", tmp_path / "t"
        assert main(["sweep", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["sweep", "--config", cfg, "--out", str(out2),
                     "--threads", "4"]) == 0
        assert (out1 / "sweep.json").read_text() == (out2 / "sweep.json").read_text()

    def test_single_epsilon_rejected(self, tmp_path):
        cfg = write_config(tmp_path, base_config(epsilons=[2.0 ** -6]))
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_seed_override(self, tmp_path):
        cfg = write_config(tmp_path, base_config())
        out = tmp_path / "o"
        assert main(["sweep", "--config", cfg, "--out", str(out), "--seed", "7"]) == 0
        doc = json.loads((out / "sweep.json").read_text())
        assert doc["config"]["seed"] == 7


class TestRates:
    def test_critical_report(self, tmp_path):
        doc = base_config(gamma={"alpha": 1.0, "p": 1.0, "q": 2.0, "beta": 0.5},
                          epsilon=2.0 ** -8)
        doc["signal"]["kind"] = "critical_prior"
        cfg = write_config(tmp_path, doc)
        out = tmp_path / "o"
        assert main(["rates", "--config", cfg, "--out", str(out)]) == 0
        rep = json.loads((out / "rate_report.json").read_text())["report"]
        assert rep["zone"] == "Critical"
        assert rep["r"] == pytest.approx(0.5)

    def test_profile_shape(self, tmp_path):
        cfg = write_config(tmp_path, base_config(epsilon=2.0 ** -8))
        out = tmp_path / "o"
        assert main(["rates", "--config", cfg, "--out", str(out)]) == 0
        lines = (out / "shell_profile.csv").read_text().strip().splitlines()
        assert lines[0] == "j,R_j,zone_label"
        vals = np.array([float(line.split(",")[1]) for line in lines[1:]])
        peak = int(np.argmax(vals))
        assert 0 < peak < vals.size - 1
        assert np.all(np.diff(vals[:peak + 1]) > 0)
        assert np.all(np.diff(vals[peak + 1:]) < 0)

    def test_invalid_gamma_exit_2(self, tmp_path):
        doc = base_config(gamma={"alpha": 0.4, "p": 1.0, "q": 1.0, "beta": 0.2},
                          epsilon=2.0 ** -8)
        doc["signal"]["kind"] = "zero"
        cfg = write_config(tmp_path, doc)
        assert main(["rates", "--config", cfg, "--out", str(tmp_path)]) == 2


class TestOracleCheck:
    def test_passes_with_seed_echo(self, tmp_path):
        doc = base_config(epsilon=2.0 ** -6, replicates=5)
        cfg = write_config(tmp_path, doc)
        out = tmp_path / "o"
        assert main(["oracle-check", "--config", cfg, "--out", str(out),
                     "--instances", "240"]) == 0
        rep = json.loads((out / "oracle_check.json").read_text())
        assert rep["seed"] == 4242
        assert rep["equivalence"]["mismatches"] == 0
        assert rep["oracle_inequality"]["ratio"] <= 1.0

    def test_preset_runs(self, tmp_path):
        out = tmp_path / "o"
        assert main(["oracle-check", "--preset", "zero", "--out", str(out),
                     "--instances", "120", "--replicates", "5"]) == 0

    def test_unknown_preset(self, tmp_path):
        assert main(["sweep", "--preset", "nope", "--out", str(tmp_path)]) == 2
