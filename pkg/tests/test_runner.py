#!/usr/bin/env python3
"""
Integration tests for the experiment runner.
Each test runs one small task end to end into a temporary directory.
"""

import csv

import pytest

from src.config.experiment import parse_experiment
from src.core.records import RunRecord
from src.experiments.runner import exit_status, model_predictor, prepare_data, run_experiment
from src.fuzzy.neurofuzzy import NFTrainResult
from src.ui.display import display

SMALL_SERIES = {"mackey_glass": {"n": 120, "washout": 10, "sample_every": 10}}


def small_config(tmp_path, task, **sections):
    data = {"task": task, "seed": 11, "output_dir": str(tmp_path / task), "dataset": SMALL_SERIES, **sections}
    return parse_experiment(data)


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


@pytest.mark.integration
class TestDataPreparation:
    """Test dataset construction for data tasks."""

    def test_normalized_splits(self, tmp_path):
        """Test embedding, normalization and split sizes."""
        data = prepare_data(small_config(tmp_path, "train-nn"))

        assert data.full.n_rows == 120 - 18 - 6
        assert data.full.n_inputs == 4
        assert data.full.inputs.min() >= 0.0 and data.full.inputs.max() <= 1.0
        assert data.train.n_rows + data.valid.n_rows + data.test.n_rows == data.full.n_rows
        assert data.scaling is not None


@pytest.mark.integration
class TestTasks:
    """Test every task writes its files."""

    def test_gen_series(self, tmp_path, quiet_display):
        """Test the series file and its time column."""
        cfg = small_config(tmp_path, "gen-series")
        record = run_experiment(cfg)
        rows = read_rows(tmp_path / "gen-series" / "series.csv")

        assert rows[0] == ["t", "x"]
        assert len(rows) == 121
        assert float(rows[1][0]) == pytest.approx(10 * 10 * 0.1)
        assert record.extra["samples"] == 120
        assert exit_status(record) == 0

    def test_train_nn(self, tmp_path, quiet_display):
        """Test history, predictions and the record of a network run."""
        cfg = small_config(tmp_path, "train-nn", trainer={"algorithm": "LM", "epochs": 5},
                           network={"hidden": [3], "transfer": ["tanh"]})
        record = run_experiment(cfg)
        out = tmp_path / "train-nn"
        history = read_rows(out / "history.csv")
        predictions = read_rows(out / "predictions.csv")

        assert history[0] == ["epoch", "sse"]
        assert 2 <= len(history) <= 7
        assert predictions[0] == ["x1", "x2", "x3", "x4", "target", "prediction"]
        assert len(predictions) == 1 + 24
        loaded = RunRecord.load(str(out))
        assert loaded.config["trainer"]["algorithm"] == "LM"
        assert loaded.dataset_fingerprint == record.dataset_fingerprint
        assert loaded.parameter_count == 3 * 5 + 1 * 4

    def test_anfis(self, tmp_path, quiet_display):
        """Test a Takagi-Sugeno grid system run."""
        cfg = small_config(tmp_path, "anfis", neurofuzzy={"epochs": 2})
        record = run_experiment(cfg)

        assert len(record.model["system"]["rules"]) == 2 ** 4
        assert record.test_rmse is not None
        predictor = model_predictor(RunRecord.load(str(tmp_path / "anfis")))
        assert predictor([[0.5, 0.5, 0.5, 0.5]]).shape == (1, 1)

    def test_anfis_progress_line(self, tmp_path, quiet_display):
        """Test the rule count and sse endpoints in the progress line."""
        display.clear_content()
        record = run_experiment(small_config(tmp_path, "anfis", neurofuzzy={"epochs": 2}))

        line = next(line for line in display.content_lines if "rules, sse" in line)
        assert f"{len(record.model['system']['rules'])} rules" in line
        assert f"-> {record.history[-1][1]:.6g}" in line

    def test_anfis_empty_curve_line(self, tmp_path, quiet_display, mocker):
        """Test the progress line when training produced no losses."""
        def no_epochs(fs, train_ds, cfg):
            return NFTrainResult(fs, (), diverged=True)

        mocker.patch("src.experiments.runner.hybrid_train_ts", side_effect=no_epochs)
        display.clear_content()
        record = run_experiment(small_config(tmp_path, "anfis", neurofuzzy={"epochs": 2}))

        assert "🌫️ training diverged at the start" in display.content_lines
        assert record.diverged
        assert exit_status(record) == 1

    def test_ea_bench(self, tmp_path, quiet_display):
        """Test both sphere runs are tagged in the history."""
        cfg = small_config(tmp_path, "ea-bench", ea={"population_size": 6, "generations": 3})
        record = run_experiment(cfg)
        history = read_rows(tmp_path / "ea-bench" / "history.csv")

        assert history[0][0] == "controlled"
        assert {row[0] for row in history[1:]} == {"0.0", "1.0"}
        assert len(history) == 1 + 2 * 4
        assert record.extra["uncontrolled_best"] >= 0.0
        assert set(record.model) == {"uncontrolled", "controlled"}

    def test_same_seed_same_record(self, tmp_path, quiet_display):
        """Test that reruns reproduce errors and histories."""
        first = run_experiment(small_config(tmp_path / "a", "train-nn", trainer={"epochs": 3}))
        second = run_experiment(small_config(tmp_path / "b", "train-nn", trainer={"epochs": 3}))

        assert first.history == second.history
        assert first.test_rmse == second.test_rmse


@pytest.mark.slow
@pytest.mark.integration
class TestHybridTasks:
    """Test the evolutionary hybrids end to end."""

    def test_mleann(self, tmp_path, quiet_display):
        """Test a short MLEANN run."""
        cfg = small_config(tmp_path, "mleann", ea={"population_size": 4, "generations": 2},
                           mleann={"max_hidden": 3, "epochs_min": 2, "epochs_max": 4})
        record = run_experiment(cfg)

        assert record.task == "mleann"
        assert len(record.history) == 3
        assert (tmp_path / "mleann" / "predictions.csv").exists()

    def test_evonf(self, tmp_path, quiet_display):
        """Test a short EvoNF run with the fuzzy controller."""
        cfg = small_config(tmp_path, "evonf", ea={"population_size": 4, "generations": 2,
                                                  "adapter": "fuzzy_controller"},
                           evonf={"epochs_max": 2})
        record = run_experiment(cfg)

        assert record.task == "evonf"
        assert record.extra["rules_active"] >= 1
        assert (tmp_path / "evonf" / "history.csv").exists()
