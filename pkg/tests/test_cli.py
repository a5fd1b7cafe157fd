import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from lagsurv import ExposurePanel, SurvivalOutcomes, ingest, simulate_dataset
from lagsurv.cli import run
from lagsurv.data import write_exposures, write_outcomes
from lagsurv.errors import DataError


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def tiny_files(tmp_path):
    ds = simulate_dataset("S1", n=40, horizon=12, event_rate=0.5, seed=5)
    exposures = tmp_path / "exposures.csv"
    outcomes = tmp_path / "outcomes.csv"
    write_exposures(exposures, ds.panel)
    write_outcomes(outcomes, ds.panel, ds.outcomes)
    return ds, exposures, outcomes


class TestIngest:
    def test_round_trip_is_bit_exact(self, tiny_files, tmp_path):
        ds, exposures, outcomes = tiny_files
        panel, out, scale = ingest(exposures, outcomes, normalize=False)
        assert np.array_equal(panel.values, ds.panel.values)
        assert np.array_equal(out.time, ds.outcomes.time)
        assert np.array_equal(out.event, ds.outcomes.event)
        assert scale == 1.0

    def test_horizon_inferred_from_max_t(self, tmp_path):
        write_lines(
            tmp_path / "e.csv",
            ["subject_id,t,exposure", "a,1,0.5", "a,2,0.25", "b,1,1.0", "b,3,0.75"],
        )
        write_lines(tmp_path / "o.csv", ["subject_id,time,event", "a,2,1", "b,3,0"])
        with pytest.warns(UserWarning, match="missing day"):
            panel, out, _ = ingest(tmp_path / "e.csv", tmp_path / "o.csv", normalize=False)
        assert panel.horizon == 3
        assert panel.values[0].tolist() == [0.5, 0.25, 0.0]  # zero-filled tail
        assert panel.values[1].tolist() == [1.0, 0.0, 0.75]  # zero-filled gap

    def test_normalization_records_scale(self, tmp_path):
        write_lines(
            tmp_path / "e.csv",
            ["subject_id,t,exposure", "a,1,5", "a,2,5", "b,1,5", "b,2,5"],
        )
        write_lines(tmp_path / "o.csv", ["subject_id,time,event", "a,2,1", "b,1,0"])
        panel, _, scale = ingest(tmp_path / "e.csv", tmp_path / "o.csv", normalize=True)
        assert np.all(panel.values == 1.0)
        assert scale == 5.0

    def test_duplicate_day_reports_both_lines(self, tmp_path):
        write_lines(
            tmp_path / "e.csv",
            ["subject_id,t,exposure", "a,1,0.5", "a,1,0.6"],
        )
        write_lines(tmp_path / "o.csv", ["subject_id,time,event", "a,1,1"])
        with pytest.raises(DataError, match="line 2"):
            ingest(tmp_path / "e.csv", tmp_path / "o.csv")

    def test_subject_mismatch(self, tmp_path):
        write_lines(tmp_path / "e.csv", ["subject_id,t,exposure", "a,1,0.5"])
        write_lines(tmp_path / "o.csv", ["subject_id,time,event", "b,1,1"])
        with pytest.raises(DataError, match="mismatch"):
            ingest(tmp_path / "e.csv", tmp_path / "o.csv")

    def test_non_numeric_field(self, tmp_path):
        write_lines(tmp_path / "e.csv", ["subject_id,t,exposure", "a,1,apple"])
        write_lines(tmp_path / "o.csv", ["subject_id,time,event", "a,1,1"])
        with pytest.raises(DataError, match="parse error"):
            ingest(tmp_path / "e.csv", tmp_path / "o.csv")

    def test_outcome_beyond_horizon(self, tmp_path):
        write_lines(tmp_path / "e.csv", ["subject_id,t,exposure", "a,1,0.5"])
        write_lines(tmp_path / "o.csv", ["subject_id,time,event", "a,4,1"])
        with pytest.raises(DataError, match="horizon"):
            ingest(tmp_path / "e.csv", tmp_path / "o.csv")


def tree_digests(out: Path) -> dict:
    return {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(out.iterdir())
        if p.is_file()
    }


class TestCommands:
    def test_simulate_outputs(self, tmp_path):
        out = tmp_path / "sim"
        code = run(
            ["simulate", "--scenario", "S1", "--n", "30", "--horizon", "10", "--seed", "3", "--out", str(out)]
        )
        assert code == 0
        for name in ("exposures.csv", "outcomes.csv", "truth_grid.csv", "manifest.json"):
            assert (out / name).exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert manifest["seed"] == 3

    def test_simulate_rerun_bit_identical(self, tmp_path):
        args = ["simulate", "--scenario", "S2", "--n", "25", "--horizon", "8", "--seed", "9"]
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run(args + ["--out", str(out_a)]) == 0
        assert run(args + ["--out", str(out_b)]) == 0
        assert tree_digests(out_a) == tree_digests(out_b)

    def test_full_pipeline(self, tmp_path):
        sim = tmp_path / "sim"
        assert run(
            ["simulate", "--scenario", "S1", "--n", "60", "--horizon", "15", "--seed", "4",
             "--lag", "3", "--out", str(sim)]
        ) == 0
        train = tmp_path / "train"
        assert run(
            ["train", "--exposures", str(sim / "exposures.csv"), "--outcomes", str(sim / "outcomes.csv"),
             "--truth", str(sim / "truth_grid.csv"), "--lag", "3", "--hidden", "6,6",
             "--max-epochs", "6", "--seed", "4", "--out", str(train)]
        ) == 0
        for name in ("model.json", "history.csv", "metrics.json", "manifest.json"):
            assert (train / name).exists()
        metrics = json.loads((train / "metrics.json").read_text())
        assert "gmse" in metrics and "test_c_index" in metrics

        ev = tmp_path / "eval"
        assert run(
            ["evaluate", "--model", str(train / "model.json"),
             "--exposures", str(sim / "exposures.csv"), "--outcomes", str(sim / "outcomes.csv"),
             "--truth", str(sim / "truth_grid.csv"), "--out", str(ev)]
        ) == 0
        assert "gmse" in json.loads((ev / "metrics.json").read_text())

        surf = tmp_path / "surface"
        assert run(
            ["export-surface", "--model", str(train / "model.json"), "--out", str(surf)]
        ) == 0
        header = (surf / "surface.csv").read_text().splitlines()[0]
        assert header == "x,l,value"
        assert (surf / "slices.csv").read_text().splitlines()[0] == "l,x,value"

    def test_sweep_outputs_rows(self, tmp_path):
        sim = tmp_path / "sim"
        run(["simulate", "--scenario", "S1", "--n", "60", "--horizon", "15", "--seed", "6",
             "--lag", "3", "--out", str(sim)])
        sweep = tmp_path / "sweep"
        assert run(
            ["sweep", "--exposures", str(sim / "exposures.csv"), "--outcomes", str(sim / "outcomes.csv"),
             "--lambdas", "0,1,5,10", "--lag", "3", "--hidden", "6,6",
             "--max-epochs", "5", "--seed", "6", "--out", str(sweep)]
        ) == 0
        lines = (sweep / "sweep.csv").read_text().splitlines()
        assert lines[0] == "lambda,test_loss,test_c_index"
        assert len(lines) == 5
        for lam in ("0", "1", "5", "10"):
            assert (sweep / f"model_lambda{lam}.json").exists()

    def test_bootstrap_bands_files(self, tmp_path):
        sim = tmp_path / "sim"
        run(["simulate", "--scenario", "S1", "--n", "50", "--horizon", "12", "--seed", "8",
             "--lag", "2", "--out", str(sim)])
        boot = tmp_path / "boot"
        assert run(
            ["bootstrap", "--exposures", str(sim / "exposures.csv"), "--outcomes", str(sim / "outcomes.csv"),
             "--b", "3", "--lag", "2", "--hidden", "5,4", "--max-epochs", "4",
             "--seed", "8", "--out", str(boot)]
        ) == 0
        for name in ("bands_f.csv", "bands_w.csv"):
            lines = (boot / name).read_text().splitlines()
            assert lines[0] == "grid,point,lo,hi"

    def test_grad_check_command(self, tmp_path):
        out = tmp_path / "gc"
        assert run(["grad-check", "--seed", "1", "--out", str(out)]) == 0
        report = json.loads((out / "grad_report.json").read_text())
        assert report["passed"] is True
        assert report["max_rel_error"] < 1e-4

    def test_grad_check_tolerance_breach_exit_code(self, tmp_path):
        out = tmp_path / "gc"
        code = run(["grad-check", "--seed", "1", "--fd-tol", "1e-12", "--out", str(out)])
        assert code == 4

    def test_exit_codes(self, tmp_path, capsys):
        # usage error: unknown config key in YAML
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("unknown_key: 1\n")
        code = run(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x")])
        assert code == 2
        # data error: missing file contents
        bad = tmp_path / "bad.csv"
        bad.write_text("wrong,header\n")
        code = run(["train", "--exposures", str(bad), "--outcomes", str(bad), "--out", str(tmp_path / "y")])
        assert code == 3

    def test_yaml_config_drives_run(self, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("scenario: S3\nn: 20\nhorizon: 9\nseed: 12\nlag: 4\n")
        out = tmp_path / "sim"
        assert run(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["scenario"] == "S3"
        assert manifest["config"]["lag"] == 4

    def test_flags_override_yaml(self, tmp_path):
        cfg = tmp_path / "run.yaml"
        cfg.write_text("scenario: S3\nn: 20\nhorizon: 9\nseed: 12\n")
        out = tmp_path / "sim"
        assert run(["simulate", "--config", str(cfg), "--scenario", "S1", "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["scenario"] == "S1"

    def test_train_rerun_bit_identical(self, tmp_path):
        sim = tmp_path / "sim"
        run(["simulate", "--scenario", "S1", "--n", "50", "--horizon", "12", "--seed", "2",
             "--lag", "2", "--out", str(sim)])
        args = ["train", "--exposures", str(sim / "exposures.csv"), "--outcomes", str(sim / "outcomes.csv"),
                "--lag", "2", "--hidden", "5,4", "--max-epochs", "5", "--seed", "2"]
        a, b = tmp_path / "t1", tmp_path / "t2"
        assert run(args + ["--out", str(a)]) == 0
        assert run(args + ["--out", str(b)]) == 0
        assert tree_digests(a) == tree_digests(b)
