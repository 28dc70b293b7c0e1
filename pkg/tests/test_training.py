#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

from __future__ import annotations

import numpy as np
import pytest

from DeReverb.core import FeatureNormalizer, HddaeSpec, TrainConfig, build_hddae, train
from DeReverb.core._errors import EmptyDatasetError, ShapeMismatchError, TrainingDivergedError
from DeReverb.core._optim import Adam, dataset_loss, split_validation

from helpers import random_pairs

SPEC = HddaeSpec(input_dim=15, hidden=16, output_dim=5, n_layers=3)


def test_adam_first_step_moves_by_learning_rate():
    params = {"w": np.zeros(3)}
    Adam(lr=0.01).step(params, {"w": np.array([1.0, -2.0, 0.5])})
    np.testing.assert_allclose(params["w"], [-0.01, 0.01, -0.01], rtol=1e-6)


def test_training_reduces_loss():
    x, y = random_pairs(SPEC, 256, seed=0)
    model = build_hddae(SPEC, 0)
    model.normalizer = FeatureNormalizer.fit(x, y)
    initial = model.loss(x, y)
    cfg = TrainConfig(epochs=30, minibatch_size=32, learning_rate=1e-2, validation_fraction=0.0)
    result = train(model, x, y, cfg)
    assert result.history.epochs_run == 30
    assert result.history.train_loss[-1] < 0.5 * initial
    assert result.model.meta["final_loss"] == result.history.train_loss[-1]


def test_linear_toy_task_converges():
    rng = np.random.default_rng(12)
    spec = SPEC.model_copy(update={"activation": "linear"})
    x = rng.standard_normal((256, spec.input_dim))
    y = x @ rng.standard_normal((spec.input_dim, spec.output_dim))
    model = build_hddae(spec, 0)
    model.normalizer = FeatureNormalizer.fit(x, y)
    initial = model.loss(x, y)
    cfg = TrainConfig(epochs=200, minibatch_size=32, learning_rate=5e-3, validation_fraction=0.0)
    result = train(model, x, y, cfg)
    assert result.history.epochs_run == 200
    assert result.history.train_loss[-1] < 0.01 * initial


def test_zero_learning_rate_keeps_loss_constant():
    x, y = random_pairs(SPEC, 64, seed=1)
    cfg = TrainConfig(epochs=4, minibatch_size=16, learning_rate=0.0, validation_fraction=0.0)
    result = train(build_hddae(SPEC, 1), x, y, cfg)
    assert len(set(result.history.train_loss)) == 1


def test_training_is_deterministic():
    x, y = random_pairs(SPEC, 96, seed=2)
    cfg = TrainConfig(epochs=3, minibatch_size=16, learning_rate=1e-3, seed=7)
    a = train(build_hddae(SPEC, 3), x, y, cfg)
    b = train(build_hddae(SPEC, 3), x, y, cfg)
    assert a.history.train_loss == b.history.train_loss
    assert a.history.val_loss == b.history.val_loss
    for name in a.model.params:
        np.testing.assert_array_equal(a.model.params[name], b.model.params[name])


def test_early_stopping_restores_best_epoch():
    x, y = random_pairs(SPEC, 80, seed=3)
    cfg = TrainConfig(epochs=10, minibatch_size=16, learning_rate=0.0, validation_fraction=0.25, patience=2)
    result = train(build_hddae(SPEC, 0), x, y, cfg)
    history = result.history
    # a frozen model never improves after the first epoch
    assert history.stopped_early
    assert history.best_epoch == 1
    assert history.epochs_run == 3
    assert result.model.meta["best_epoch"] == 1


def test_restored_parameters_match_best_validation_loss():
    x, y = random_pairs(SPEC, 120, seed=4)
    cfg = TrainConfig(epochs=6, minibatch_size=16, learning_rate=5e-3, validation_fraction=0.2, patience=2, seed=9)
    result = train(build_hddae(SPEC, 2), x, y, cfg)
    history = result.history
    _, val_idx = split_validation(x.shape[0], cfg, np.random.default_rng(cfg.seed))
    best = dataset_loss(result.model, x[val_idx], y[val_idx])
    assert best == pytest.approx(history.val_loss[history.best_epoch - 1], rel=1e-12)
    assert history.val_loss[history.best_epoch - 1] == min(history.val_loss)
    if history.stopped_early:
        assert history.epochs_run - history.best_epoch == cfg.patience


def test_non_finite_validation_loss_is_an_error():
    x, y = random_pairs(SPEC, 40, seed=6)
    cfg = TrainConfig(epochs=3, minibatch_size=16, learning_rate=1e-3, validation_fraction=0.25, seed=5)
    _, val_idx = split_validation(x.shape[0], cfg, np.random.default_rng(cfg.seed))
    y[val_idx[0]] = np.nan
    with pytest.raises(TrainingDivergedError, match="non-finite validation loss"):
        train(build_hddae(SPEC, 0), x, y, cfg)


def test_validation_split_is_disjoint():
    cfg = TrainConfig(validation_fraction=0.1)
    train_idx, val_idx = split_validation(50, cfg, np.random.default_rng(0))
    assert len(val_idx) == 5
    assert not set(train_idx) & set(val_idx)
    assert sorted(set(train_idx) | set(val_idx)) == list(range(50))


def test_empty_dataset():
    with pytest.raises(EmptyDatasetError):
        train(build_hddae(SPEC, 0), np.zeros((0, 15)), np.zeros((0, 5)), TrainConfig())


def test_mismatched_targets():
    with pytest.raises(ShapeMismatchError):
        train(build_hddae(SPEC, 0), np.zeros((4, 15)), np.zeros((3, 5)), TrainConfig())


def test_nan_loss_aborts():
    x, y = random_pairs(SPEC, 32, seed=5)
    y[3, 2] = np.nan
    with pytest.raises(TrainingDivergedError, match="non-finite") as info:
        train(build_hddae(SPEC, 0), x, y, TrainConfig(epochs=2, minibatch_size=8, validation_fraction=0.0))
    assert info.value.code == 3
