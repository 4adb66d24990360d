"""The selector network: regresses the operator's mean loss for a mask.

Its input gradient is the feature-importance signal; we negate it so that
larger importance means inclusion lowers the predicted loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ConfigError
from .masks import Mask

# loss weights: best mask from the previous step, the fresh optimal mask,
# everything else
WEIGHT_BEST = 10.0
WEIGHT_OPT = 5.0
WEIGHT_OTHER = 1.0


@dataclass
class SelectorModel:
    net: nn.Network  # input_dim == d, scalar output
    optimizer: nn.AdamState

    @property
    def d(self):
        return self.net.input_dim

    def __post_init__(self):
        if self.net.output_dim != 1:
            raise ConfigError("selector output must be scalar")


@dataclass(frozen=True)
class SelectorExample:
    mask: Mask
    target_loss: float
    weight: float = WEIGHT_OTHER


def _inputs_targets_weights(examples):
    examples = list(examples)
    if not examples:
        raise ConfigError("empty example set")
    x = np.stack([e.mask.as_floats() for e in examples])
    t = np.array([e.target_loss for e in examples], dtype=float)
    w = np.array([e.weight for e in examples], dtype=float)
    return x, t, w


def selector_loss(model: SelectorModel, examples):
    """(1 / 2n) * sum of w * (prediction - target)^2."""
    x, t, w = _inputs_targets_weights(examples)
    preds, _ = nn.forward(model.net, x)
    err = preds[:, 0] - t
    return float(np.sum(w * err**2) / (2 * len(t)))


def selector_train_step(model: SelectorModel, examples):
    """One optimizer step on the weighted squared-error loss."""
    x, t, w = _inputs_targets_weights(examples)
    preds, cache = nn.forward(model.net, x)
    err = preds[:, 0] - t
    loss = float(np.sum(w * err**2) / (2 * len(t)))
    d_out = (w * err / len(t))[:, None]
    param_grads, _ = nn.backprop(model.net, cache, d_out)
    nn.adam_step(model.net.parameters(), param_grads, model.optimizer)
    return loss


def importance_at(model: SelectorModel, point):
    """Negated input gradient of the predicted loss at an arbitrary point in [0,1]^d."""
    point = np.asarray(point, dtype=float)
    return -nn.output_input_gradient(model.net, point[None, :])[0]


def predict(model: SelectorModel, mask: Mask):
    """Predicted operator loss for a mask."""
    out, _ = nn.forward(model.net, mask.as_floats()[None, :])
    return float(out[0, 0])
