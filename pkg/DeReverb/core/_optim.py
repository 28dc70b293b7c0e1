#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from DeReverb.logger import LOGGER
from ._dataclass import TrainConfig
from ._errors import EmptyDatasetError, ShapeMismatchError, TrainingDivergedError
from ._nn import FeatureNormalizer, Network

EVAL_CHUNK = 1024


class Adam:
    """Adaptive moment estimation over a dict of named parameter arrays, updated in place."""

    def __init__(self, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> "Adam":
        return cls(lr=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2, epsilon=cfg.epsilon)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        step_size = self.lr / bc1

        for k in params:
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(params[k])
                self.v[k] = np.zeros_like(params[k])

            self.m[k] *= self.beta1
            self.m[k] += (1.0 - self.beta1) * g
            self.v[k] *= self.beta2
            self.v[k] += (1.0 - self.beta2) * (g * g)

            denom = np.sqrt(self.v[k] * (1.0 / bc2)) + self.epsilon
            params[k] -= step_size * self.m[k] / denom


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[Optional[float]] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)

    def rows(self) -> list[tuple[int, float, Optional[float]]]:
        return [(i + 1, t, v) for i, (t, v) in enumerate(zip(self.train_loss, self.val_loss))]


@dataclass
class TrainResult:
    model: Network
    history: TrainHistory


def dataset_loss(model: Network, inputs: np.ndarray, targets: np.ndarray) -> float:
    """Loss over the whole set, reduced chunk by chunk in a fixed order."""
    total = 0.0
    for start in range(0, inputs.shape[0], EVAL_CHUNK):
        residual = model.forward(inputs[start : start + EVAL_CHUNK]) - targets[start : start + EVAL_CHUNK]
        total += float(np.sum(residual * residual))
    return total / inputs.shape[0]


def split_validation(n_rows: int, cfg: TrainConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    n_val = int(round(n_rows * cfg.validation_fraction))
    if cfg.validation_fraction > 0 and n_rows >= 2:
        n_val = min(max(n_val, 1), n_rows - 1)
    else:
        n_val = 0
    order = rng.permutation(n_rows)
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def train(
    model: Network,
    inputs: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
    label: str = "",
) -> TrainResult:
    """Minibatch Adam on (inputs, targets) frame pairs.

    The normalizer is fitted on the training split when the model has none. History
    holds the full-pass training loss after every epoch; when a validation split
    exists, training stops after ``cfg.patience`` epochs without improvement and
    the best-validation parameters are restored.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.shape[0] == 0:
        raise EmptyDatasetError(f"no training frames for {label or model.kind}")
    if targets.shape[0] != inputs.shape[0]:
        raise ShapeMismatchError(f"{inputs.shape[0]} input frames but {targets.shape[0]} targets")

    rng = np.random.default_rng(cfg.seed)
    train_idx, val_idx = split_validation(inputs.shape[0], cfg, rng)
    x_train, y_train = inputs[train_idx], targets[train_idx]
    x_val, y_val = inputs[val_idx], targets[val_idx]
    if model.normalizer is None:
        model.normalizer = FeatureNormalizer.fit(x_train, y_train)

    optimizer = Adam.from_config(cfg)
    history = TrainHistory()
    best_val, best_params, wait = np.inf, None, 0
    name = label or model.kind

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(x_train.shape[0]) if cfg.shuffle else np.arange(x_train.shape[0])
        for start in range(0, order.size, cfg.minibatch_size):
            batch = order[start : start + cfg.minibatch_size]
            loss, grads = model.loss_and_grad(x_train[batch], y_train[batch])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"{name}: non-finite loss at epoch {epoch}, batch {start // cfg.minibatch_size}"
                )
            optimizer.step(model.params, grads)

        train_loss = dataset_loss(model, x_train, y_train)
        if not np.isfinite(train_loss):
            raise TrainingDivergedError(f"{name}: non-finite training loss after epoch {epoch}")
        val_loss = dataset_loss(model, x_val, y_val) if x_val.shape[0] else None
        if val_loss is not None and not np.isfinite(val_loss):
            raise TrainingDivergedError(f"{name}: non-finite validation loss after epoch {epoch}")
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        LOGGER.info(
            "%s epoch %d/%d train=%.6f val=%s",
            name, epoch, cfg.epochs, train_loss, f"{val_loss:.6f}" if val_loss is not None else "-",
        )

        if val_loss is None:
            history.best_epoch = epoch
            continue
        if val_loss < best_val:
            best_val, best_params, wait = val_loss, model.copy_params(), 0
            history.best_epoch = epoch
        else:
            wait += 1
            if wait >= cfg.patience:
                history.stopped_early = True
                LOGGER.warning(
                    "%s: early stop at epoch %d, restoring epoch %d", name, epoch, history.best_epoch
                )
                break

    if best_params is not None:
        model.params = best_params
    model.meta.update(
        epochs_run=history.epochs_run,
        best_epoch=history.best_epoch,
        final_loss=history.train_loss[history.best_epoch - 1],
    )
    return TrainResult(model=model, history=history)
