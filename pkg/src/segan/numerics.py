"""Dense MLP layers with analytic gradients, inverted dropout and Adam.

Matrices follow the column-sample convention: a batch of n samples with d
features is a ``(d, n)`` float64 array, and a layer computes
``act(W @ x + b)`` with ``W`` of shape ``(out, in)`` and ``b`` of shape
``(out, 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, DivergenceError, SeganError, ShapeError

ACTIVATIONS = ("relu", "sigmoid", "softmax", "identity")


@dataclass
class MlpLayer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.bias.shape != (self.weight.shape[0], 1):
            raise ShapeError(
                f"bias shape {self.bias.shape} does not match weight rows {self.weight.shape[0]}"
            )

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


def init_layer(in_dim: int, out_dim: int, activation: str, rng: np.random.Generator,
               zero: bool = False) -> MlpLayer:
    """Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases."""
    if zero:
        weight = np.zeros((out_dim, in_dim))
    else:
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        weight = rng.uniform(-limit, limit, size=(out_dim, in_dim))
    return MlpLayer(weight, np.zeros((out_dim, 1)), activation)


def sigmoid(z):
    # exp(-|z|) form: exp never overflows
    return kernels.sigmoid(z)


def softmax(z):
    """Column-wise softmax."""
    e = np.exp(z - z.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def activate(z, activation):
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "sigmoid":
        return sigmoid(z)
    if activation == "softmax":
        return softmax(z)
    return z.copy()


def _activation_backward(grad_out, pre, out, activation, drop=None):
    """Gradient w.r.t. the pre-activation; ``drop`` is the layer's dropout mask."""
    if activation == "relu":
        return kernels.relu_backward(grad_out, pre, drop)
    if drop is not None:
        grad_out = grad_out * drop
    if activation == "sigmoid":
        return kernels.sigmoid_backward(grad_out, out)
    if activation == "softmax":
        return out * (grad_out - np.sum(grad_out * out, axis=0, keepdims=True))
    return grad_out


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: 0 with probability ``rate``, else 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


@dataclass
class LayerCache:
    inputs: np.ndarray
    pre: np.ndarray
    act: np.ndarray
    out: np.ndarray
    drop: np.ndarray | None = None


def mlp_forward(layers, x, dropout_rate: float = 0.0, rng=None, drop_masks=None):
    """Run ``x`` through ``layers``; returns ``(output, cache)``.

    Dropout (training only) follows every rectifier layer. Pass ``drop_masks``
    (one entry per layer, ``None`` for no dropout) to replay fixed masks.
    """
    if x.ndim != 2 or x.shape[0] != layers[0].in_dim:
        raise ShapeError(
            f"input has {x.shape[0] if x.ndim == 2 else x.shape} rows, "
            f"layer 0 expects {layers[0].in_dim}"
        )
    cache = []
    h = x
    for i, layer in enumerate(layers):
        if i > 0 and layers[i - 1].out_dim != layer.in_dim:
            raise ShapeError(
                f"layer {i - 1} outputs {layers[i - 1].out_dim} units "
                f"but layer {i} expects {layer.in_dim}"
            )
        pre = layer.weight @ h + layer.bias
        drop = drop_masks[i] if drop_masks is not None else None
        if drop is None and dropout_rate > 0.0 and layer.activation == "relu":
            if rng is None:
                raise ConfigError("dropout requires an rng")
            if not dropout_rate < 1.0:
                raise ConfigError(f"dropout rate must lie in [0, 1), got {dropout_rate}")
            # same draw as dropout_mask, fused with the rectifier
            out, drop, post = kernels.relu_dropout(pre, rng.random(pre.shape), dropout_rate)
        else:
            out = activate(pre, layer.activation)
            post = out * drop if drop is not None else out
        cache.append(LayerCache(h, pre, out, post, drop))
        h = post
    return h, cache


def mlp_backward(layers, cache, output_gradient):
    """Backpropagate ``output_gradient`` (d loss / d output).

    Returns ``(grads, input_gradient)`` where ``grads`` is a list of
    ``(d_weight, d_bias)`` pairs aligned with ``layers``.
    """
    if len(cache) != len(layers):
        raise SeganError(f"cache holds {len(cache)} layers, network has {len(layers)}")
    if output_gradient.shape != cache[-1].out.shape:
        raise ShapeError(
            f"output gradient shape {output_gradient.shape} != output shape {cache[-1].out.shape}"
        )
    grads = [None] * len(layers)
    g = output_gradient
    for i in range(len(layers) - 1, -1, -1):
        layer, c = layers[i], cache[i]
        gz = _activation_backward(g, c.pre, c.act, layer.activation, c.drop)
        grads[i] = (gz @ c.inputs.T, gz.sum(axis=1, keepdims=True))
        g = layer.weight.T @ gz
    return grads, g


def named_params(prefix: str, layers) -> dict:
    params = {}
    for i, layer in enumerate(layers):
        params[f"{prefix}.{i}.weight"] = layer.weight
        params[f"{prefix}.{i}.bias"] = layer.bias
    return params


def named_grads(prefix: str, grads) -> dict:
    out = {}
    for i, (gw, gb) in enumerate(grads):
        out[f"{prefix}.{i}.weight"] = gw
        out[f"{prefix}.{i}.bias"] = gb
    return out


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, learning_rate: float) -> None:
    """Bias-corrected Adam update applied in place.

    Only parameters named in ``grads`` move; the step counter advances once
    per call. Every gradient is checked before any parameter changes.
    """
    if learning_rate <= 0:
        raise ConfigError(f"learning rate must be positive, got {learning_rate}")
    for name, g in grads.items():
        if name not in params:
            raise SeganError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise ShapeError(f"gradient {name} has shape {g.shape}, parameter {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient for parameter {name!r}")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name, g in grads.items():
        p = params[name]
        if name not in state.first_moment:
            state.first_moment[name] = np.zeros_like(p)
            state.second_moment[name] = np.zeros_like(p)
        bad = kernels.adam_update(
            p, g, state.first_moment[name], state.second_moment[name],
            learning_rate, state.beta1, state.beta2, state.epsilon, bc1, bc2,
        )
        if bad >= 0:
            raise DivergenceError(f"non-finite gradient for parameter {name!r}")
