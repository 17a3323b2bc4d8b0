"""End-to-end smoke tests for the python bindings."""

import json
import math
import tempfile
from pathlib import Path

import pytest

cctrain = pytest.importorskip("cctrain")


def tiny_config(out_dir):
    return {
        "dataset": {
            "source": "synthetic",
            "class_count": 2,
            "synthetic": {
                "n_series": 24,
                "length": 6,
                "feature_dim": 1,
                "ar_coeff": 0.5,
                "regimes": [
                    {"class_means": [-0.4, 0.4], "class_stds": [1.0, 1.0]},
                    {"class_means": [-1.4, 1.4], "class_stds": [1.0, 1.0]},
                ],
            },
            "split": {"train": 0.60, "valid": 0.15, "test": 0.25},
        },
        "model": {"hidden": 4, "keep_rate": 0.9, "learning_rate": 0.05, "batch_size": 8},
        "uncertainty": {"mc_passes": 3, "patience": 2, "min_delta": 1e-3, "epoch_cap": 2},
        "curriculum": {"buckets": 2, "bucket_mode": "quantile", "order": "confidence_asc"},
        "evaluation": {"baseline_models": 2, "pi_alpha": 0.1, "pi_passes": 12},
        "output_dir": out_dir,
    }


def test_auc_hand_case():
    assert cctrain.auc_roc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)


def test_transfer_hand_case():
    bwt, fwt = cctrain.transfer_metrics([[0.9, 0.6], [0.8, 0.85]], [0.5, 0.5])
    assert bwt == pytest.approx(-0.1)
    assert fwt == pytest.approx(0.1)


def test_data_uncertainty_hand_cases():
    assert cctrain.data_uncertainty([0.5, 0.5], 1.0, 2) == pytest.approx(-math.log(2.0) / 2.0)
    assert cctrain.data_uncertainty([0.9, 0.1], 0.0, 2) == 0.0


def test_prediction_interval_grid():
    lo, hi = cctrain.prediction_interval([i / 100.0 for i in range(100)], 0.1)
    assert lo == pytest.approx(0.0495)
    assert hi == pytest.approx(0.9405)


def test_should_stop_traces():
    assert not cctrain.should_stop([1.0, 2.0, 3.0], patience=3)
    assert cctrain.should_stop([1.0, 1.0, 1.0, 1.0], patience=3, min_delta=1e-4)
    assert cctrain.should_stop([1.0, 2.0, 1.9, 1.95, 1.99], patience=3)


def test_bad_config_raises_value_error():
    with tempfile.TemporaryDirectory() as tmp:
        cfg = tiny_config(tmp)
        cfg["model"]["hidden"] = -1
        with pytest.raises(ValueError):
            cctrain.run_pipeline(cfg)


def test_pipeline_runs_and_is_deterministic():
    with tempfile.TemporaryDirectory() as tmp:
        cfg = tiny_config(str(Path(tmp) / "a"))
        first = cctrain.run_pipeline(cfg)
        assert first["epochs"] >= 2
        assert len(first["prefix_auc"]) == 10
        run_dir = Path(first["run_dir"])
        assert (run_dir / "metrics.jsonl").exists()
        assert (run_dir / "config.json").exists()

        again = cctrain.evaluate_run(str(run_dir))
        assert again["bwt"] == pytest.approx(first["bwt"])
        assert again["prefix_auc"] == pytest.approx(first["prefix_auc"])

        cfg_b = tiny_config(str(Path(tmp) / "b"))
        second = cctrain.run_pipeline(cfg_b)
        a_lines = (Path(tmp) / "a" / "metrics.jsonl").read_text()
        b_lines = (Path(tmp) / "b" / "metrics.jsonl").read_text()
        assert a_lines == b_lines
        assert second["accuracy"] == pytest.approx(first["accuracy"])


def test_gen_data_writes_csv():
    with tempfile.TemporaryDirectory() as tmp:
        cfg = tiny_config(tmp)
        path = cctrain.gen_data(json.dumps(cfg))
        header = Path(path).read_text().splitlines()[0]
        assert header == "series_id,t,label,f1"
