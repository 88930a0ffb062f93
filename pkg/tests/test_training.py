import math

import numpy as np
import pytest

from dflab.datasets import Batch, scan_dataset, stratified_split
from dflab.errors import ShapeError
from dflab.imaging import PreprocessConfig
from dflab.models import ModelSpec, forward, init_params, save_checkpoint, zero_params
from dflab.numerics import RngStream
from dflab.training import (
    EpochStats,
    TrainConfig,
    backprop,
    bce_loss,
    grad_check,
    history_to_csv,
    sgd_step,
    train_loop,
)

PP = PreprocessConfig(zoom=0.0, out_h=8, out_w=8)


def make_batch(images, labels) -> Batch:
    return Batch(np.asarray(images, dtype=np.float64), np.asarray(labels, dtype=np.int64))


def toy_mlp(seed: int) -> tuple[ModelSpec, dict, Batch]:
    spec = ModelSpec("mlp", 2, 2, mlp_units=4)
    p = init_params(spec, RngStream(seed, "init"))
    rng = np.random.default_rng(seed)
    batch = make_batch(rng.random((2, 2, 2)), rng.integers(0, 2, 2))
    return spec, p, batch


def toy_lstm(seed: int) -> tuple[ModelSpec, dict, Batch]:
    spec = ModelSpec("lstm", 3, 2, lstm_hidden=3)
    p = init_params(spec, RngStream(seed, "init"))
    rng = np.random.default_rng(seed)
    batch = make_batch(rng.random((2, 3, 2)), rng.integers(0, 2, 2))
    return spec, p, batch


class TestBceLoss:
    def test_half_probability(self):
        assert bce_loss(np.array([0.5]), np.array([1])) == pytest.approx(math.log(2), abs=1e-12)

    def test_clamp_bounds_perfect_predictions(self):
        eps = 1e-7
        loss = bce_loss(np.array([1.0, 0.0]), np.array([1, 0]), eps)
        assert loss == pytest.approx(-math.log(1.0 - eps), abs=1e-12)
        assert loss < 1e-6

    def test_hand_computed_batch(self):
        loss = bce_loss(np.array([0.9, 0.2]), np.array([1, 0]))
        expected = (-math.log(0.9) - math.log(0.8)) / 2.0
        assert loss == pytest.approx(expected, abs=1e-12)
        assert loss == pytest.approx(0.164252, abs=1e-6)

    def test_finite_for_extreme_inputs(self):
        assert math.isfinite(bce_loss(np.array([0.0, 1.0, 0.5]), np.array([1, 0, 1])))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            bce_loss(np.array([0.5, 0.5]), np.array([1]))


class TestBackprop:
    def test_gradient_zero_at_clamped_optimum(self):
        # Saturate the output head so p == y up to the clamp.
        spec = ModelSpec("mlp", 2, 2, mlp_units=4)
        p = zero_params(spec)
        p["b3"] = np.array([50.0])  # sigmoid(50) saturates past 1 - eps_clamp
        batch = make_batch(np.random.default_rng(0).random((1, 2, 2)), [1])
        _, grads = backprop(spec, p, batch)
        total = sum(float(np.abs(g).sum()) for g in grads.values())
        assert total <= 1e-6

    def test_mlp_matches_finite_differences(self):
        spec, p, batch = toy_mlp(11)
        assert grad_check(spec, p, batch) <= 1e-5

    def test_lstm_matches_finite_differences(self):
        spec, p, batch = toy_lstm(12)
        assert grad_check(spec, p, batch) <= 1e-5

    def test_corrupted_gradient_detected(self):
        spec, p, batch = toy_mlp(13)
        _, grads = backprop(spec, p, batch)
        bad = {k: v.copy() for k, v in grads.items()}
        flat_index = np.unravel_index(np.argmax(np.abs(bad["w1"])), bad["w1"].shape)
        bad["w1"][flat_index] *= 2.0
        assert grad_check(spec, p, batch, analytic=bad) > 1e-3

    def test_loss_decreases_along_negative_gradient(self):
        for builder in (toy_mlp, toy_lstm):
            spec, p, batch = builder(14)
            loss, grads = backprop(spec, p, batch)
            improved = False
            for eps in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
                stepped = sgd_step(p, grads, eps)
                if bce_loss(forward(spec, stepped, batch), batch.labels) < loss:
                    improved = True
                    break
            assert improved

    def test_shape_error_on_wrong_batch(self):
        spec, p, _ = toy_mlp(15)
        with pytest.raises(ShapeError):
            backprop(spec, p, make_batch(np.zeros((1, 3, 3)), [0]))


class TestSgdStep:
    def test_zero_rate_is_identity(self):
        spec, p, batch = toy_mlp(16)
        _, grads = backprop(spec, p, batch)
        stepped = sgd_step(p, grads, 0.0)
        assert all(np.array_equal(stepped[k], p[k]) for k in p)

    def test_hand_arithmetic(self):
        p = {"w": np.array([1.0, 2.0])}
        g = {"w": np.array([0.5, -1.0])}
        assert np.allclose(sgd_step(p, g, 0.1)["w"], [0.95, 2.1], atol=1e-15)

    def test_two_steps_equal_summed_deltas(self):
        p = {"w": np.array([1.0, -2.0, 3.0])}
        g1 = {"w": np.array([0.3, 0.1, -0.2])}
        g2 = {"w": np.array([-0.1, 0.4, 0.5])}
        two = sgd_step(sgd_step(p, g1, 0.2), g2, 0.2)
        summed = sgd_step(p, {"w": g1["w"] + g2["w"]}, 0.2)
        assert np.allclose(two["w"], summed["w"], atol=1e-12)

    def test_gradient_shape_mismatch(self):
        with pytest.raises(ShapeError):
            sgd_step({"w": np.zeros(3)}, {"w": np.zeros(2)}, 0.1)


@pytest.fixture
def split_manifest(separable_tree):
    return stratified_split(scan_dataset(separable_tree), 0.75, seed=5)


class TestTrainLoop:
    def test_zero_rate_keeps_initial_parameters(self, split_manifest):
        spec = ModelSpec("mlp", 8, 8, mlp_units=8)
        cfg = TrainConfig(learning_rate=0.0, epochs=1, batch_size=16, seed=3)
        params, history = train_loop(spec, cfg, split_manifest, PP)
        init = init_params(spec, RngStream(3, "init"))
        assert all(np.array_equal(params[k], init[k]) for k in params)
        assert len(history) == 1

    def test_identical_config_gives_identical_checkpoints(self, split_manifest, tmp_path):
        spec = ModelSpec("mlp", 8, 8, mlp_units=8)
        cfg = TrainConfig(learning_rate=0.5, epochs=2, batch_size=16, seed=3)
        for name in ("a", "b"):
            params, _ = train_loop(spec, cfg, split_manifest, PP)
            save_checkpoint(spec, params, tmp_path / f"{name}.dfl")
        assert (tmp_path / "a.dfl").read_bytes() == (tmp_path / "b.dfl").read_bytes()

    def test_mlp_separates_brightness_classes(self, split_manifest):
        spec = ModelSpec("mlp", 8, 8, mlp_units=16)
        cfg = TrainConfig(learning_rate=0.5, epochs=20, batch_size=16, seed=3)
        _, history = train_loop(spec, cfg, split_manifest, PP)
        assert max(h.train_acc for h in history) >= 0.99

    def test_history_one_record_per_epoch(self, split_manifest):
        spec = ModelSpec("mlp", 8, 8, mlp_units=8)
        cfg = TrainConfig(learning_rate=0.1, epochs=3, batch_size=32, seed=0)
        _, history = train_loop(spec, cfg, split_manifest, PP)
        assert [h.epoch for h in history] == [1, 2, 3]
        assert all(0.0 <= h.train_acc <= 1.0 and h.train_loss >= 0 for h in history)

    def test_eval_test_records_accuracy(self, split_manifest):
        spec = ModelSpec("mlp", 8, 8, mlp_units=8)
        cfg = TrainConfig(learning_rate=0.1, epochs=1, batch_size=32, seed=0)
        _, history = train_loop(spec, cfg, split_manifest, PP, eval_test=True)
        assert history[0].test_acc is not None


class TestHistoryCsv:
    def test_format(self, tmp_path):
        history = [EpochStats(1, 0.5, 0.75, None), EpochStats(2, 0.25, 0.875, 0.8125)]
        path = tmp_path / "history.csv"
        history_to_csv(history, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,train_loss,train_acc,test_acc"
        assert lines[1] == "1,0.5,0.75,"
        assert lines[2] == "2,0.25,0.875,0.8125"
