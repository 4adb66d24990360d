"""Minimal dense feed-forward networks with exact reverse-mode gradients.

Gradients are computed with respect to both parameters and inputs; the input
gradient is what drives the mask search elsewhere in the package.  Everything
is plain numpy, float64 throughout.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError

ACTIVATIONS = ("sigmoid", "relu", "linear", "softmax")
LOSS_KINDS = ("mse", "binary_cross_entropy", "categorical_cross_entropy")

# cross-entropy probability clamp; keeps log() finite for any network output
PROB_EPS = 1e-12

CHECKPOINT_VERSION = 1


@dataclass
class Layer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]


@dataclass
class Network:
    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("network needs at least one layer")
        for k, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {layer.activation!r}")
            if layer.activation == "softmax" and k != len(self.layers) - 1:
                raise ConfigError("softmax is only permitted as the final activation")
            if layer.bias.shape != (layer.out_dim,):
                raise ConfigError(f"bias shape mismatch in layer {k}")
            if k > 0 and layer.in_dim != self.layers[k - 1].out_dim:
                raise ConfigError(
                    f"layer {k} expects {layer.in_dim} inputs, "
                    f"layer {k - 1} provides {self.layers[k - 1].out_dim}"
                )
            if not (np.isfinite(layer.weights).all() and np.isfinite(layer.bias).all()):
                raise ConfigError(f"non-finite parameters in layer {k}")

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    def parameters(self):
        """Flat list [W0, b0, W1, b1, ...]; arrays are the live tensors."""
        out = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.bias)
        return out

    def copy(self):
        return copy.deepcopy(self)


def init_network(dims, activations, rng):
    """Build a network with Glorot-uniform weights and zero biases.

    dims: [input_dim, h1, ..., output_dim]; activations: one per layer.
    """
    if len(activations) != len(dims) - 1:
        raise ConfigError("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(dims[:-1], dims[1:], activations):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(Layer(w, np.zeros(fan_out), act))
    return Network(layers)


def _apply_activation(z, activation):
    if activation == "linear":
        return z
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "sigmoid":
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    # softmax with max-subtraction for stability
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(net: Network, batch):
    """Run the network on a batch; returns (outputs, cache) for backprop.

    cache holds, per layer, the layer input and the post-activation output.
    """
    x = np.asarray(batch, dtype=float)
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ConfigError(
            f"batch width {x.shape[-1] if x.ndim else '?'} != input_dim {net.input_dim}"
        )
    if not np.isfinite(x).all():
        raise NumericError("non-finite batch entries")
    cache = []
    a = x
    for k, layer in enumerate(net.layers):
        z = a @ layer.weights.T + layer.bias
        out = _apply_activation(z, layer.activation)
        if not np.isfinite(out).all():
            raise NumericError("non-finite activation", layer=k)
        cache.append((a, out))
        a = out
    return a, cache


def backprop(net: Network, cache, d_out):
    """Propagate dL/d(output) back through the network.

    Returns (param_grads, input_grads) with param_grads ordered like
    net.parameters().
    """
    param_grads = [None] * (2 * len(net.layers))
    grad = np.asarray(d_out, dtype=float)
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        a_in, a_out = cache[k]
        if layer.activation == "linear":
            dz = grad
        elif layer.activation == "relu":
            dz = grad * (a_out > 0)
        elif layer.activation == "sigmoid":
            dz = grad * a_out * (1.0 - a_out)
        else:  # softmax Jacobian applied row-wise
            dz = a_out * (grad - (grad * a_out).sum(axis=1, keepdims=True))
        param_grads[2 * k] = dz.T @ a_in
        param_grads[2 * k + 1] = dz.sum(axis=0)
        grad = dz @ layer.weights
    return param_grads, grad


def instance_losses(outputs, targets, loss_kind):
    """Per-instance loss values, one per row of outputs."""
    n = outputs.shape[0]
    if loss_kind == "mse":
        t = np.asarray(targets, dtype=float).reshape(outputs.shape)
        return np.mean((outputs - t) ** 2, axis=1)
    if loss_kind == "binary_cross_entropy":
        t = np.asarray(targets, dtype=float).reshape(outputs.shape)
        p = np.clip(outputs, PROB_EPS, 1.0 - PROB_EPS)
        return -np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p), axis=1)
    if loss_kind == "categorical_cross_entropy":
        idx = np.asarray(targets)
        if idx.ndim != 1 or idx.shape[0] != n:
            raise ConfigError("cce targets must be a vector of class indices")
        if idx.max(initial=0) >= outputs.shape[1] or idx.min(initial=0) < 0:
            raise ConfigError("class index out of range")
        p = np.clip(outputs, PROB_EPS, 1.0 - PROB_EPS)
        return -np.log(p[np.arange(n), idx])
    raise ConfigError(f"unknown loss kind {loss_kind!r}")


def _loss_and_output_grad(outputs, targets, loss_kind):
    """Mean instance-level loss and its gradient wrt the network outputs."""
    n = outputs.shape[0]
    loss = float(np.mean(instance_losses(outputs, targets, loss_kind)))
    if loss_kind == "mse":
        t = np.asarray(targets, dtype=float).reshape(outputs.shape)
        return loss, 2.0 * (outputs - t) / outputs.size
    if loss_kind == "binary_cross_entropy":
        t = np.asarray(targets, dtype=float).reshape(outputs.shape)
        p = np.clip(outputs, PROB_EPS, 1.0 - PROB_EPS)
        return loss, (p - t) / (p * (1.0 - p)) / p.size
    p = np.clip(outputs, PROB_EPS, 1.0 - PROB_EPS)
    idx = np.asarray(targets)
    rows = np.arange(n)
    d = np.zeros_like(outputs)
    d[rows, idx] = -1.0 / (p[rows, idx] * n)
    return loss, d


def loss_and_gradients(net: Network, batch, targets, loss_kind):
    """Mean loss over the batch plus exact parameter and input gradients."""
    outputs, cache = forward(net, batch)
    loss, d_out = _loss_and_output_grad(outputs, targets, loss_kind)
    param_grads, input_grads = backprop(net, cache, d_out)
    return loss, param_grads, input_grads


def batch_loss(net: Network, batch, targets, loss_kind):
    outputs, _ = forward(net, batch)
    loss, _ = _loss_and_output_grad(outputs, targets, loss_kind)
    return loss


def output_input_gradient(net: Network, batch):
    """Gradient of the scalar network output with respect to each input row."""
    if net.output_dim != 1:
        raise ConfigError("input gradient of the raw output requires a scalar head")
    _, cache = forward(net, batch)
    n = np.asarray(batch).shape[0]
    _, input_grads = backprop(net, cache, np.ones((n, 1)))
    return input_grads


@dataclass
class AdamState:
    """Adam / Adam-with-Nesterov-momentum optimizer state for one network."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    nesterov: bool = False
    step_count: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)

    def _ensure_moments(self, params):
        if not self.first_moment:
            self.first_moment = [np.zeros_like(p) for p in params]
            self.second_moment = [np.zeros_like(p) for p in params]


def adam_step(params, grads, state: AdamState):
    """Apply one optimizer step in place; returns the updated params."""
    state._ensure_moments(params)
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ConfigError("params/grads/state length mismatch")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise ConfigError("gradient shape mismatch")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g**2
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        if state.nesterov:
            m_hat = b1 * m_hat + (1.0 - b1) * g / (1.0 - b1**t)
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
        if not np.isfinite(p).all():
            raise NumericError("non-finite parameters after optimizer step")
    return params


def network_to_dict(net: Network):
    return {
        "format_version": CHECKPOINT_VERSION,
        "layers": [
            {
                "in_dim": layer.in_dim,
                "out_dim": layer.out_dim,
                "activation": layer.activation,
                "weights": layer.weights.reshape(-1).tolist(),  # row-major
                "bias": layer.bias.tolist(),
            }
            for layer in net.layers
        ],
    }


def network_from_dict(doc):
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    layers = []
    for spec in doc["layers"]:
        w = np.array(spec["weights"], dtype=float).reshape(spec["out_dim"], spec["in_dim"])
        layers.append(Layer(w, np.array(spec["bias"], dtype=float), spec["activation"]))
    return Network(layers)


def save_network(net: Network, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net), fh)


def load_network(path):
    with open(path, encoding="utf-8") as fh:
        return network_from_dict(json.load(fh))
