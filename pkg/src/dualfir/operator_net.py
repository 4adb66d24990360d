"""The supervised-task network trained on masked inputs.

The network sees 2d inputs: the masked features x*m concatenated with the
mask itself, so a selected feature whose value happens to be zero stays
distinguishable from a masked-out feature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ConfigError
from .masks import Mask


@dataclass
class OperatorModel:
    net: nn.Network  # input_dim == 2*d
    loss_kind: str
    optimizer: nn.AdamState

    @property
    def d(self):
        return self.net.input_dim // 2

    def __post_init__(self):
        if self.net.input_dim % 2 != 0:
            raise ConfigError("operator input_dim must be 2*d")
        if self.loss_kind not in nn.LOSS_KINDS:
            raise ConfigError(f"unknown loss kind {self.loss_kind!r}")


def masked_input(x, mask: Mask):
    """[x*m ; m] for a single instance."""
    x = np.asarray(x, dtype=float)
    if x.shape != (mask.d,):
        raise ConfigError(f"feature vector length {x.shape} != mask d {mask.d}")
    m = mask.as_floats()
    return np.concatenate([x * m, m])


def masked_batch(batch, mask: Mask):
    """[X*m ; m-broadcast] for a whole batch, shape (n, 2d)."""
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[1] != mask.d:
        raise ConfigError(f"batch width {batch.shape} != mask d {mask.d}")
    m = mask.as_floats()
    return np.concatenate([batch * m, np.tile(m, (batch.shape[0], 1))], axis=1)


def _stacked(batch, targets, masks):
    """Every example paired with every mask; targets tiled to match."""
    batch = np.asarray(batch, dtype=float)
    targets = np.asarray(targets)
    if batch.shape[0] == 0:
        raise ConfigError("empty batch")
    if not masks:
        raise ConfigError("empty mask set")
    xs = np.concatenate([masked_batch(batch, m) for m in masks], axis=0)
    ys = np.concatenate([targets] * len(masks), axis=0)
    return xs, ys


def per_mask_loss(model: OperatorModel, batch, targets, mask: Mask):
    """Mean instance loss for one mask."""
    if np.asarray(batch).shape[0] == 0:
        raise ConfigError("empty batch")
    return nn.batch_loss(model.net, masked_batch(batch, mask), targets, model.loss_kind)


def operator_loss(model: OperatorModel, batch, targets, masks):
    """Double mean over masks and instances of the instance-level loss."""
    xs, ys = _stacked(batch, targets, list(masks))
    return nn.batch_loss(model.net, xs, ys, model.loss_kind)


def operator_train_step(model: OperatorModel, batch, targets, masks):
    """One optimizer step on the double-mean loss restricted to the batch."""
    loss, _ = train_step_with_mask_losses(model, batch, targets, masks)
    return loss


def train_step_with_mask_losses(model: OperatorModel, batch, targets, masks):
    """Optimizer step plus the per-mask mean batch losses from the same pass."""
    masks = list(masks)
    n = np.asarray(batch).shape[0]
    xs, ys = _stacked(batch, targets, masks)
    outputs, cache = nn.forward(model.net, xs)
    per_instance = nn.instance_losses(outputs, ys, model.loss_kind)
    loss, d_out = nn._loss_and_output_grad(outputs, ys, model.loss_kind)
    param_grads, _ = nn.backprop(model.net, cache, d_out)
    nn.adam_step(model.net.parameters(), param_grads, model.optimizer)
    return loss, per_instance.reshape(len(masks), n).mean(axis=1)
