"""Bias-free fully connected networks with a linear output layer.

Parameters live in one flat array. Layer ``k`` occupies a contiguous slice
holding its weight matrix in row-major ``(fan_out, fan_in)`` order, layers
concatenated from input to output. The dtype of the flat array is the working
precision; every input to :func:`forward`, :func:`mse` and :func:`gradient`
must share it.
"""

from __future__ import annotations

import dataclasses
import enum
from typing import Sequence

import numpy as np


class ActivationName(str, enum.Enum):
    SYMMETRIC_SIGMOID = "symmetric_sigmoid"
    LEAKY_SIGMOID = "leaky_sigmoid"


@dataclasses.dataclass(frozen=True)
class ActivationKind:
    name: ActivationName = ActivationName.SYMMETRIC_SIGMOID
    h: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "name", ActivationName(self.name))
        if self.name is ActivationName.LEAKY_SIGMOID:
            if not 0.0 < self.h < 1.0:
                raise ValueError(f"leak coefficient must lie in (0, 1), got {self.h}")
        elif self.h != 0.0:
            raise ValueError("symmetric sigmoid takes no leak coefficient")

    @classmethod
    def symmetric(cls) -> ActivationKind:
        return cls(ActivationName.SYMMETRIC_SIGMOID)

    @classmethod
    def leaky(cls, h: float = 0.05) -> ActivationKind:
        return cls(ActivationName.LEAKY_SIGMOID, h)

    def to_dict(self) -> dict:
        return {"name": self.name.value, "h": self.h}

    @classmethod
    def from_dict(cls, d: dict) -> ActivationKind:
        return cls(ActivationName(d["name"]), float(d.get("h", 0.0)))


def activation_value(kind: ActivationKind, x):
    """``2 / (1 + exp(-2x)) - 1`` (computed as tanh), plus ``h*x`` when leaky."""
    x = np.asarray(x) if not isinstance(x, (np.ndarray, np.floating)) else x
    s = np.tanh(x)
    if kind.name is ActivationName.SYMMETRIC_SIGMOID:
        return s
    return (1.0 - kind.h) * s + kind.h * x


def activation_derivative(kind: ActivationKind, x):
    x = np.asarray(x) if not isinstance(x, (np.ndarray, np.floating)) else x
    s = np.tanh(x)
    if kind.name is ActivationName.SYMMETRIC_SIGMOID:
        return 1.0 - s * s
    return (1.0 - kind.h) * (1.0 - s * s) + kind.h


def _derivative_from_tanh(kind: ActivationKind, s):
    if kind.name is ActivationName.SYMMETRIC_SIGMOID:
        return 1.0 - s * s
    return (1.0 - kind.h) * (1.0 - s * s) + kind.h


@dataclasses.dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    output_dim: int
    hidden_sizes: tuple[int, ...]
    activation: ActivationKind = dataclasses.field(default_factory=ActivationKind.symmetric)

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(n) for n in self.hidden_sizes))
        if len(self.hidden_sizes) < 1:
            raise ValueError("at least one hidden layer is required")
        if min(self.input_dim, self.output_dim, *self.hidden_sizes) < 1:
            raise ValueError("all layer dimensions must be >= 1")

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_sizes, self.output_dim)

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        """``(fan_out, fan_in)`` for every weight matrix, input side first."""
        w = self.widths
        return [(w[k + 1], w[k]) for k in range(len(w) - 1)]

    @property
    def offsets(self) -> list[int]:
        """Start offset of each layer plus the total length as the last entry."""
        out = [0]
        for fo, fi in self.layer_shapes:
            out.append(out[-1] + fo * fi)
        return out

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "hidden_sizes": list(self.hidden_sizes),
            "activation": self.activation.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> NetworkConfig:
        return cls(
            int(d["input_dim"]),
            int(d["output_dim"]),
            tuple(d["hidden_sizes"]),
            ActivationKind.from_dict(d["activation"]),
        )


def param_count(config: NetworkConfig) -> int:
    return sum(fo * fi for fo, fi in config.layer_shapes)


def layer_weights(config: NetworkConfig, params: np.ndarray) -> list[np.ndarray]:
    """Views of the flat parameter array as per-layer weight matrices."""
    if params.ndim != 1 or params.shape[0] != param_count(config):
        raise ValueError(
            f"parameter vector has shape {params.shape}, expected ({param_count(config)},)"
        )
    offs = config.offsets
    return [
        params[offs[k]:offs[k + 1]].reshape(shape)
        for k, shape in enumerate(config.layer_shapes)
    ]


@dataclasses.dataclass
class EvaluatedBatch:
    """Loss (and optionally gradient) with its cost in epoch equivalents."""

    mse: np.floating
    gradient: np.ndarray | None = None

    @property
    def epoch_equivalents_charged(self) -> int:
        return 1 if self.gradient is None else 2


def _check_inputs(config, params, inputs, targets=None):
    if not isinstance(params, np.ndarray) or params.dtype not in (np.float32, np.float64):
        raise TypeError("params must be a float32 or float64 array")
    if inputs.ndim != 2 or inputs.shape[1] != config.input_dim:
        raise ValueError(f"inputs have shape {inputs.shape}, expected (P, {config.input_dim})")
    if inputs.dtype != params.dtype:
        raise TypeError(f"inputs are {inputs.dtype} but params are {params.dtype}")
    if targets is not None:
        if targets.shape != (inputs.shape[0], config.output_dim):
            raise ValueError(
                f"targets have shape {targets.shape}, expected ({inputs.shape[0]}, {config.output_dim})"
            )
        if targets.dtype != params.dtype:
            raise TypeError(f"targets are {targets.dtype} but params are {params.dtype}")
        if inputs.shape[0] < 1:
            raise ValueError("dataset is empty")
    return layer_weights(config, params)


def _forward_cached(config, weights, inputs):
    """Return the output and, per hidden layer, (layer input, tanh of pre-activation)."""
    act = config.activation
    a = inputs
    cache = []
    for W in weights[:-1]:
        z = a @ W.T
        s = np.tanh(z)
        cache.append((a, s))
        if act.name is ActivationName.SYMMETRIC_SIGMOID:
            a = s
        else:
            a = (1.0 - act.h) * s + act.h * z
    return a @ weights[-1].T, cache, a


def forward(config: NetworkConfig, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    weights = _check_inputs(config, params, inputs)
    out, _, _ = _forward_cached(config, weights, inputs)
    return out


def hidden_preactivations(config: NetworkConfig, params: np.ndarray, inputs: np.ndarray, layer: int = 0):
    """Arguments of the activation function in hidden layer ``layer``."""
    weights = _check_inputs(config, params, inputs)
    a = inputs
    for k, W in enumerate(weights[:-1]):
        z = a @ W.T
        if k == layer:
            return z
        a = activation_value(config.activation, z)
    raise IndexError(f"network has {len(weights) - 1} hidden layers")


def _mean_square(residual: np.ndarray):
    n = residual.size
    return np.sum(residual * residual) / residual.dtype.type(n)


def mse(config: NetworkConfig, params: np.ndarray, inputs: np.ndarray, targets: np.ndarray) -> EvaluatedBatch:
    """Mean over patterns and output components of the squared residual."""
    weights = _check_inputs(config, params, inputs, targets)
    out, _, _ = _forward_cached(config, weights, inputs)
    return EvaluatedBatch(_mean_square(out - targets))


def gradient(config: NetworkConfig, params: np.ndarray, inputs: np.ndarray, targets: np.ndarray) -> EvaluatedBatch:
    weights = _check_inputs(config, params, inputs, targets)
    out, cache, last_hidden = _forward_cached(config, weights, inputs)
    residual = out - targets
    dt = params.dtype.type
    loss = _mean_square(residual)

    grad = np.empty_like(params)
    grads = layer_weights(config, grad)
    delta = residual * dt(2.0 / residual.size)
    grads[-1][...] = delta.T @ last_hidden
    for k in range(len(weights) - 2, -1, -1):
        a_in, s = cache[k]
        delta = (delta @ weights[k + 1]) * _derivative_from_tanh(config.activation, s)
        grads[k][...] = delta.T @ a_in
    return EvaluatedBatch(loss, grad)


def fd_gradient(
    config: NetworkConfig,
    params: np.ndarray,
    inputs: np.ndarray,
    targets: np.ndarray,
    step: float = 1e-5,
) -> np.ndarray:
    """Central-difference gradient of the MSE, evaluated in double precision."""
    if step <= 0:
        raise ValueError("step must be positive")
    w = np.asarray(params, dtype=np.float64).copy()
    x = np.asarray(inputs, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    g = np.empty_like(w)
    for i in range(w.size):
        orig = w[i]
        w[i] = orig + step
        fp = mse(config, w, x, t).mse
        w[i] = orig - step
        fm = mse(config, w, x, t).mse
        w[i] = orig
        g[i] = (fp - fm) / (2.0 * step)
    return g


def central_difference(f, x: float, step: float) -> float:
    return (f(x + step) - f(x - step)) / (2.0 * step)

