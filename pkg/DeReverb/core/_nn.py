#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

"""Highway-DDAE and fusion CNN written directly against numpy, with exact reverse-mode gradients."""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._dataclass import CnnSpec, HddaeSpec
from ._errors import DataError, ShapeMismatchError

Grads = dict[str, np.ndarray]


@dataclass(eq=False)
class FeatureNormalizer:
    """Per-dimension input/output statistics; inputs are standardized, outputs de-standardized."""

    in_mean: np.ndarray
    in_std: np.ndarray
    out_mean: np.ndarray
    out_std: np.ndarray

    @classmethod
    def fit(cls, inputs: np.ndarray, targets: np.ndarray, min_std: float = 1e-5) -> "FeatureNormalizer":
        inputs = np.asarray(inputs, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        return cls(
            in_mean=inputs.mean(axis=0),
            in_std=np.maximum(inputs.std(axis=0), min_std),
            out_mean=targets.mean(axis=0),
            out_std=np.maximum(targets.std(axis=0), min_std),
        )

    @classmethod
    def from_lps_moments(cls, moments: np.ndarray, context: int, min_std: float = 1e-5) -> "FeatureNormalizer":
        """Normalizer for spliced rows from per-bin moments.

        ``moments`` is ``(2, 3, bins)``: clean then reverberant, each holding
        (count, sum, sum of squares). Input statistics are tiled over the
        ``2 * context + 1`` spliced blocks.
        """
        count = moments[:, 0, :1]
        mean = moments[:, 1] / count
        std = np.sqrt(np.maximum(moments[:, 2] / count - mean * mean, 0.0))
        std = np.maximum(std, min_std)
        blocks = 2 * context + 1
        return cls(
            in_mean=np.tile(mean[1], blocks),
            in_std=np.tile(std[1], blocks),
            out_mean=mean[0],
            out_std=std[0],
        )

    @classmethod
    def identity(cls, in_shape: tuple[int, ...], out_dim: int) -> "FeatureNormalizer":
        return cls(
            in_mean=np.zeros(in_shape),
            in_std=np.ones(in_shape),
            out_mean=np.zeros(out_dim),
            out_std=np.ones(out_dim),
        )

    def normalize_input(self, x: np.ndarray) -> np.ndarray:
        return (x - self.in_mean) / self.in_std

    def denormalize_output(self, y: np.ndarray) -> np.ndarray:
        return y * self.out_std + self.out_mean

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "norm.in_mean": self.in_mean,
            "norm.in_std": self.in_std,
            "norm.out_mean": self.out_mean,
            "norm.out_std": self.out_std,
        }

    def astype(self, dtype) -> "FeatureNormalizer":
        return FeatureNormalizer(**{k.split(".")[1]: v.astype(dtype) for k, v in self.arrays().items()})


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    return np.maximum(z, 0.0) if kind == "relu" else z


def _activate_grad(dh: np.ndarray, z: np.ndarray, kind: str) -> np.ndarray:
    return dh * (z > 0) if kind == "relu" else dh


def _he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def _xavier_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Network(ABC):
    """A trainable regressor from feature rows to LPS rows."""

    kind: str = ""

    def __init__(self, spec: Any, params: dict[str, np.ndarray], normalizer: Optional[FeatureNormalizer] = None):
        self.spec = spec
        self.params = params
        self.normalizer = normalizer
        self.meta: dict[str, Any] = {}

    @abstractmethod
    def forward(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def loss_and_grad(self, x: np.ndarray, target: np.ndarray) -> tuple[float, Grads]: ...

    @property
    @abstractmethod
    def output_dim(self) -> int: ...

    def require_normalizer(self) -> FeatureNormalizer:
        if self.normalizer is None:
            raise DataError(f"{self.kind} feature normalizer has not been fitted")
        return self.normalizer

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def astype(self, dtype) -> "Network":
        clone = type(self)(
            self.spec,
            {k: v.astype(dtype) for k, v in self.params.items()},
            self.normalizer.astype(dtype) if self.normalizer is not None else None,
        )
        clone.meta = dict(self.meta)
        return clone

    def loss(self, x: np.ndarray, target: np.ndarray) -> float:
        return mse(self.forward(x), target)


def mse(prediction: np.ndarray, target: np.ndarray) -> float:
    """(1/I) * sum_i ||prediction_i - target_i||^2 over rows."""
    residual = prediction - target
    return float(np.sum(residual * residual) / residual.shape[0])


# --------------------------------------------------------------------------- HDDAE


class HddaeModel(Network):
    kind = "hddae"

    @property
    def output_dim(self) -> int:
        return self.spec.output_dim

    def forward(self, x: np.ndarray) -> np.ndarray:
        return hddae_forward(self, x)

    def loss_and_grad(self, x: np.ndarray, target: np.ndarray) -> tuple[float, Grads]:
        return hddae_grad(self, x, target)


def hddae_param_shapes(spec: HddaeSpec) -> dict[str, tuple[int, ...]]:
    """Parameter names and shapes in initialisation order.

    Layer L receives ``W_L h_{L-1}`` concatenated with ``h_{highway_from}``, so its
    bias and the output layer's fan-in are both ``2 * hidden``.
    """
    h, n_layers = spec.hidden, spec.n_layers
    shapes: dict[str, tuple[int, ...]] = {}
    fan_in = spec.input_dim
    for layer in range(1, n_layers + 1):
        shapes[f"dense{layer}.w"] = (h, fan_in)
        shapes[f"dense{layer}.b"] = (2 * h if layer == n_layers else h,)
        fan_in = h
    shapes[f"dense{n_layers + 1}.w"] = (spec.output_dim, 2 * h)
    shapes[f"dense{n_layers + 1}.b"] = (spec.output_dim,)
    return shapes


def build_hddae(spec: HddaeSpec, seed: int) -> HddaeModel:
    """He-uniform hidden layers, Xavier output layer, zero biases."""
    rng = np.random.default_rng(seed)
    top = f"dense{spec.n_layers + 1}.w"
    params: dict[str, np.ndarray] = {}
    for name, shape in hddae_param_shapes(spec).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        elif name == top:
            params[name] = _xavier_uniform(rng, shape, shape[1], shape[0])
        else:
            params[name] = _he_uniform(rng, shape, shape[1])
    return HddaeModel(spec, params)


def _hddae_pass(m: HddaeModel, x: np.ndarray):
    spec, p = m.spec, m.params
    norm = m.require_normalizer()
    x = np.asarray(x, dtype=p["dense1.w"].dtype)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ShapeMismatchError(f"HDDAE expects rows of width {spec.input_dim}, got {x.shape}")

    n_layers, act = spec.n_layers, spec.activation
    hs = [norm.normalize_input(x)]
    zs: list[Optional[np.ndarray]] = [None]
    for layer in range(1, n_layers):
        z = hs[-1] @ p[f"dense{layer}.w"].T + p[f"dense{layer}.b"]
        zs.append(z)
        hs.append(_activate(z, act))

    z_top = np.concatenate([hs[-1] @ p[f"dense{n_layers}.w"].T, hs[spec.highway_from]], axis=1)
    z_top += p[f"dense{n_layers}.b"]
    h_top = _activate(z_top, act)
    out = h_top @ p[f"dense{n_layers + 1}.w"].T + p[f"dense{n_layers + 1}.b"]
    return out, (hs, zs, z_top, h_top)


def hddae_forward(m: HddaeModel, x: np.ndarray) -> np.ndarray:
    out, _ = _hddae_pass(m, x)
    return m.normalizer.denormalize_output(out)


def hddae_hidden(m: HddaeModel, x: np.ndarray) -> list[np.ndarray]:
    """Activations h_1..h_L, for inspecting the highway wiring."""
    _, (hs, _, _, h_top) = _hddae_pass(m, x)
    return hs[1:] + [h_top]


def hddae_grad(m: HddaeModel, x: np.ndarray, target: np.ndarray) -> tuple[float, Grads]:
    spec, p = m.spec, m.params
    out, (hs, zs, z_top, h_top) = _hddae_pass(m, x)
    target = np.asarray(target, dtype=out.dtype)
    if target.shape != out.shape:
        raise ShapeMismatchError(f"target {target.shape} does not match output {out.shape}")

    n_rows, n_layers, act = out.shape[0], spec.n_layers, spec.activation
    residual = m.normalizer.denormalize_output(out) - target
    loss = float(np.sum(residual * residual) / n_rows)
    d_out = (2.0 / n_rows) * residual * m.normalizer.out_std

    grads: Grads = {}
    top = n_layers + 1
    grads[f"dense{top}.w"] = d_out.T @ h_top
    grads[f"dense{top}.b"] = d_out.sum(axis=0)
    dz_top = _activate_grad(d_out @ p[f"dense{top}.w"], z_top, act)
    grads[f"dense{n_layers}.b"] = dz_top.sum(axis=0)

    width = spec.hidden
    dz_main, dz_skip = dz_top[:, :width], dz_top[:, width:]
    grads[f"dense{n_layers}.w"] = dz_main.T @ hs[n_layers - 1]
    dh = dz_main @ p[f"dense{n_layers}.w"]

    for layer in range(n_layers - 1, 0, -1):
        if layer == spec.highway_from:
            # h_k feeds both layer k+1 and the concat at layer L
            dh = dh + dz_skip
        dz = _activate_grad(dh, zs[layer], act)
        grads[f"dense{layer}.w"] = dz.T @ hs[layer - 1]
        grads[f"dense{layer}.b"] = dz.sum(axis=0)
        if layer > 1:
            dh = dz @ p[f"dense{layer}.w"]
    return loss, grads


# --------------------------------------------------------------------------- fusion CNN


class FusionCnnModel(Network):
    kind = "cnn"

    @property
    def output_dim(self) -> int:
        return self.spec.n_bins

    def forward(self, x: np.ndarray) -> np.ndarray:
        return cnn_forward(self, x)

    def loss_and_grad(self, x: np.ndarray, target: np.ndarray) -> tuple[float, Grads]:
        return cnn_grad(self, x, target)


def cnn_param_shapes(spec: CnnSpec) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    channels = spec.in_channels
    for layer in range(1, spec.n_conv + 1):
        shapes[f"conv{layer}.w"] = (spec.conv_channels, channels, spec.kernel)
        shapes[f"conv{layer}.b"] = (spec.conv_channels,)
        channels = spec.conv_channels
    shapes["fc.w"] = (spec.fc_hidden, spec.conv_channels * spec.n_bins)
    shapes["fc.b"] = (spec.fc_hidden,)
    shapes["out.w"] = (spec.n_bins, spec.fc_hidden)
    shapes["out.b"] = (spec.n_bins,)
    return shapes


def build_cnn(spec: CnnSpec, seed: int) -> FusionCnnModel:
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in cnn_param_shapes(spec).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        elif name == "out.w":
            params[name] = _xavier_uniform(rng, shape, shape[1], shape[0])
        else:
            # fan-in of a conv kernel is channels x width
            params[name] = _he_uniform(rng, shape, int(np.prod(shape[1:])))
    return FusionCnnModel(spec, params)


def conv1d_same(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Stride-1 cross-correlation along the last axis with zero same-padding.

    x: (N, C, B), kernel: (T, C, k), bias: (T,) -> (N, T, B).
    """
    pad = kernel.shape[2] // 2
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    windows = sliding_window_view(padded, kernel.shape[2], axis=2)
    return np.einsum("ncbk,tck->ntb", windows, kernel, optimize=True) + bias[None, :, None]


def _conv1d_backward(d_out: np.ndarray, x: np.ndarray, kernel: np.ndarray):
    k = kernel.shape[2]
    pad = k // 2
    n_bins = x.shape[2]
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    windows = sliding_window_view(padded, k, axis=2)
    d_kernel = np.einsum("ntb,ncbk->tck", d_out, windows, optimize=True)
    d_bias = d_out.sum(axis=(0, 2))
    d_padded = np.zeros_like(padded)
    for offset in range(k):
        d_padded[:, :, offset : offset + n_bins] += np.einsum(
            "ntb,tc->ncb", d_out, kernel[:, :, offset], optimize=True
        )
    return d_padded[:, :, pad : pad + n_bins], d_kernel, d_bias


def _cnn_pass(m: FusionCnnModel, x: np.ndarray):
    spec, p = m.spec, m.params
    norm = m.require_normalizer()
    x = np.asarray(x, dtype=p["fc.w"].dtype)
    if x.ndim != 3 or x.shape[1:] != (spec.in_channels, spec.n_bins):
        raise ShapeMismatchError(
            f"fusion CNN expects (frames, {spec.in_channels}, {spec.n_bins}), got {x.shape}"
        )
    act = spec.activation
    maps = [norm.normalize_input(x)]
    pre: list[np.ndarray] = []
    for layer in range(1, spec.n_conv + 1):
        z = conv1d_same(maps[-1], p[f"conv{layer}.w"], p[f"conv{layer}.b"])
        pre.append(z)
        maps.append(_activate(z, act))
    flat = maps[-1].reshape(x.shape[0], -1)
    z_fc = flat @ p["fc.w"].T + p["fc.b"]
    h_fc = _activate(z_fc, act)
    out = h_fc @ p["out.w"].T + p["out.b"]
    return out, (maps, pre, flat, z_fc, h_fc)


def cnn_feature_maps(m: FusionCnnModel, x: np.ndarray) -> list[np.ndarray]:
    """Post-activation outputs of every convolution layer."""
    _, (maps, _, _, _, _) = _cnn_pass(m, x)
    return maps[1:]


def cnn_forward(m: FusionCnnModel, x: np.ndarray) -> np.ndarray:
    out, _ = _cnn_pass(m, x)
    return m.normalizer.denormalize_output(out)


def cnn_grad(m: FusionCnnModel, x: np.ndarray, target: np.ndarray) -> tuple[float, Grads]:
    spec, p = m.spec, m.params
    out, (maps, pre, flat, z_fc, h_fc) = _cnn_pass(m, x)
    target = np.asarray(target, dtype=out.dtype)
    if target.shape != out.shape:
        raise ShapeMismatchError(f"target {target.shape} does not match output {out.shape}")

    n_rows, act = out.shape[0], spec.activation
    residual = m.normalizer.denormalize_output(out) - target
    loss = float(np.sum(residual * residual) / n_rows)
    d_out = (2.0 / n_rows) * residual * m.normalizer.out_std

    grads: Grads = {
        "out.w": d_out.T @ h_fc,
        "out.b": d_out.sum(axis=0),
    }
    dz_fc = _activate_grad(d_out @ p["out.w"], z_fc, act)
    grads["fc.w"] = dz_fc.T @ flat
    grads["fc.b"] = dz_fc.sum(axis=0)
    d_map = (dz_fc @ p["fc.w"]).reshape(maps[-1].shape)

    for layer in range(spec.n_conv, 0, -1):
        dz = _activate_grad(d_map, pre[layer - 1], act)
        d_map, grads[f"conv{layer}.w"], grads[f"conv{layer}.b"] = _conv1d_backward(
            dz, maps[layer - 1], p[f"conv{layer}.w"]
        )
    return loss, grads


MODEL_KINDS: dict[str, type[Network]] = {
    HddaeModel.kind: HddaeModel,
    FusionCnnModel.kind: FusionCnnModel,
}
SPEC_KINDS: dict[str, type] = {
    HddaeModel.kind: HddaeSpec,
    FusionCnnModel.kind: CnnSpec,
}
PARAM_SHAPES: dict[str, Callable[[Any], dict[str, tuple[int, ...]]]] = {
    HddaeModel.kind: hddae_param_shapes,
    FusionCnnModel.kind: cnn_param_shapes,
}
