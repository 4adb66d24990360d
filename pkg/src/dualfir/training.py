"""The alternate learning algorithm: exploration warm-up, then joint
operator/selector training with gradient-guided candidate masks.

One phase-2 "step" = `selector_update_period` operator batches on a fixed
candidate set, one weighted selector update, best-mask bookkeeping, a fresh
candidate set, and one early-stopping evaluation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .datasets import Dataset, train_val_split
from .errors import ConfigError, NumericError
from .masks import Mask, generate_optimal_mask, perturb, random_mask
from .operator_net import (
    OperatorModel,
    operator_loss,
    operator_train_step,
    per_mask_loss,
    train_step_with_mask_losses,
)
from .selector_net import (
    WEIGHT_BEST,
    WEIGHT_OPT,
    WEIGHT_OTHER,
    SelectorExample,
    SelectorModel,
    selector_train_step,
)

HISTORY_COLUMNS = (
    "batch",
    "operator_train_loss",
    "operator_val_loss",
    "m_opt_val_loss",
    "selector_loss",
)


@dataclass
class TrainConfig:
    d: int
    s: int
    task: str  # regression | binary | multiclass
    n_classes: int = 0
    operator_hidden: tuple = (60, 30, 20)
    selector_hidden: tuple = (100, 50, 10)
    e1: int = 6000  # phase-1 operator batches
    candidate_count: int = 32
    exploit_fraction: float = 0.5
    s_p: int = 2
    batch_size: int = 32
    selector_update_period: int = 8
    max_phase2_batches: int = 20000
    patience: int = 50  # non-improving steps before stopping
    operator_lr: float = 1e-3
    selector_lr: float = 1e-3
    val_fraction: float = 0.2
    full_train_eval: bool = False  # per-mask losses on the full training set
    seed: int = 0

    def validate(self):
        if not 0 < self.s < self.d:
            raise ConfigError(f"need 0 < s < d, got s={self.s}, d={self.d}")
        if not 0 <= self.s_p < self.s:
            raise ConfigError(f"need 0 <= s_p < s, got s_p={self.s_p}")
        if not 0.0 < self.exploit_fraction < 1.0:
            raise ConfigError("exploit_fraction must be in (0, 1)")
        if int(self.exploit_fraction * self.candidate_count) < 2:
            raise ConfigError("exploit_fraction * candidate_count must be >= 2")
        if self.task == "multiclass" and self.n_classes < 2:
            raise ConfigError("multiclass needs n_classes >= 2")
        if self.e1 < 0 or self.candidate_count < 2 or self.batch_size < 1:
            raise ConfigError("bad size parameter")
        if self.selector_update_period < 1 or self.patience < 0:
            raise ConfigError("bad cadence parameter")


def _loss_kind(task):
    return {
        "regression": "mse",
        "binary": "binary_cross_entropy",
        "multiclass": "categorical_cross_entropy",
    }[task]


def build_operator(config: TrainConfig, rng) -> OperatorModel:
    out_dim = config.n_classes if config.task == "multiclass" else 1
    out_act = {"regression": "linear", "binary": "sigmoid", "multiclass": "softmax"}[config.task]
    dims = [2 * config.d, *config.operator_hidden, out_dim]
    acts = ["sigmoid"] * len(config.operator_hidden) + [out_act]
    net = nn.init_network(dims, acts, rng)
    return OperatorModel(net, _loss_kind(config.task),
                         nn.AdamState(config.operator_lr, nesterov=True))


def build_selector(config: TrainConfig, rng) -> SelectorModel:
    dims = [config.d, *config.selector_hidden, 1]
    acts = ["sigmoid"] * len(config.selector_hidden) + ["linear"]
    net = nn.init_network(dims, acts, rng)
    return SelectorModel(net, nn.AdamState(config.selector_lr))


@dataclass
class TrainerState:
    operator: OperatorModel
    selector: SelectorModel
    m_best: Mask
    m_opt: Mask
    candidates: list  # list[Mask], m_best/m_opt identified by equality
    batch_counter: int = 0
    best_val_loss: float = float("inf")
    best_checkpoint: dict | None = None
    bad_steps: int = 0
    stop_flag: bool = False


@dataclass
class TrainedModel:
    operator: OperatorModel
    selector: SelectorModel
    m_opt: Mask
    m_best: Mask
    best_val_loss: float
    history: list = field(default_factory=list)  # dict rows, HISTORY_COLUMNS keys


def _draw_batch(data: Dataset, size, rng):
    rows = rng.choice(data.n, size=min(size, data.n), replace=False)
    return data.features[rows], data.targets[rows]


def phase1(config: TrainConfig, train_data: Dataset, operator: OperatorModel,
           selector: SelectorModel | None, rng):
    """Warm up both nets on fresh random mask sets; returns the best mask.

    Each batch trains the operator on all masks of a fresh random set and, when
    a selector is given, fits it to the per-mask batch losses (unweighted).
    The best mask is the argmin of the per-mask loss over the final mask set,
    evaluated on the full training set.
    """
    mask_set = [random_mask(config.d, config.s, rng) for _ in range(config.candidate_count)]
    for _ in range(config.e1):
        mask_set = [random_mask(config.d, config.s, rng) for _ in range(config.candidate_count)]
        xb, yb = _draw_batch(train_data, config.batch_size, rng)
        _, mask_losses = train_step_with_mask_losses(operator, xb, yb, mask_set)
        if selector is not None:
            selector_train_step(selector, [
                SelectorExample(m, t) for m, t in zip(mask_set, mask_losses)])
    losses = [per_mask_loss(operator, train_data.features, train_data.targets, m)
              for m in mask_set]
    return mask_set[int(np.argmin(losses))]


def build_candidates(config: TrainConfig, m_best: Mask, m_opt: Mask, rng):
    """Assemble the next candidate set: exploration randoms, the carried-over
    best mask, the fresh optimal mask and its perturbations.  Duplicates are
    replaced with fresh random masks so the set size stays fixed."""
    n_exploit = int(config.exploit_fraction * config.candidate_count)
    n_explore = config.candidate_count - n_exploit
    seen = set()
    out = []

    def add(mask, resample=True):
        tries = 0
        while mask in seen and resample and tries < 200:
            mask = random_mask(config.d, config.s, rng)
            tries += 1
        seen.add(mask)
        out.append(mask)

    for _ in range(n_explore):
        add(random_mask(config.d, config.s, rng))
    add(m_best, resample=False)  # must stay in the set even if duplicated
    add(m_opt)
    for _ in range(n_exploit - 2):
        add(perturb(m_opt, config.s_p, rng))
    # m_best may have collided with an earlier mask; the list can be one short
    while len(out) < config.candidate_count:
        add(random_mask(config.d, config.s, rng))
    return out[: config.candidate_count]


def _checkpoint(state: TrainerState):
    return {
        "operator": nn.network_to_dict(state.operator.net),
        "selector": nn.network_to_dict(state.selector.net),
        "m_opt": state.m_opt.to_bitstring(),
        "m_best": state.m_best.to_bitstring(),
    }


def _restore(state: TrainerState):
    ck = state.best_checkpoint
    state.operator.net = nn.network_from_dict(ck["operator"])
    state.selector.net = nn.network_from_dict(ck["selector"])
    state.m_opt = Mask.from_bitstring(ck["m_opt"])
    state.m_best = Mask.from_bitstring(ck["m_best"])


def phase2_step(state: TrainerState, config: TrainConfig, train_data: Dataset,
                val_data: Dataset, rng, history=None):
    """One alternate-learning step; mutates state and appends a history row."""
    op_loss = float("nan")
    for _ in range(config.selector_update_period):
        xb, yb = _draw_batch(train_data, config.batch_size, rng)
        op_loss = operator_train_step(state.operator, xb, yb, state.candidates)
        state.batch_counter += 1

    # per-mask losses feed both the selector targets and the best-mask update
    if config.full_train_eval:
        ex, ey = train_data.features, train_data.targets
    else:
        ex, ey = _draw_batch(train_data, config.batch_size, rng)
    mask_losses = [per_mask_loss(state.operator, ex, ey, m) for m in state.candidates]

    examples = []
    for m, target in zip(state.candidates, mask_losses):
        if m == state.m_best:
            w = WEIGHT_BEST
        elif m == state.m_opt:
            w = WEIGHT_OPT
        else:
            w = WEIGHT_OTHER
        examples.append(SelectorExample(m, target, w))
    sel_loss = selector_train_step(state.selector, examples)

    state.m_best = state.candidates[int(np.argmin(mask_losses))]

    # early stopping watches only the optimal-mask validation loss
    m_opt_val = per_mask_loss(state.operator, val_data.features, val_data.targets, state.m_opt)
    if not np.isfinite(m_opt_val) or not np.isfinite(sel_loss):
        raise NumericError("non-finite loss during training")
    if m_opt_val < state.best_val_loss:
        state.best_val_loss = m_opt_val
        state.best_checkpoint = _checkpoint(state)
        state.bad_steps = 0
    else:
        state.bad_steps += 1
        if state.bad_steps > config.patience:
            state.stop_flag = True

    if history is not None:
        history.append({
            "batch": state.batch_counter,
            "operator_train_loss": op_loss,
            "operator_val_loss": operator_loss(
                state.operator, val_data.features, val_data.targets, state.candidates),
            "m_opt_val_loss": m_opt_val,
            "selector_loss": sel_loss,
        })

    # next candidate set, exploiting the freshly updated selector
    state.m_opt, _ = generate_optimal_mask(state.selector.net, config.d, config.s)
    state.candidates = build_candidates(config, state.m_best, state.m_opt, rng)
    return state


def train(config: TrainConfig, data: Dataset) -> TrainedModel:
    """Run the full alternate learning algorithm on one dataset."""
    config.validate()
    if data.d != config.d:
        raise ConfigError(f"dataset has d={data.d}, config expects {config.d}")
    if data.task != config.task:
        raise ConfigError(f"dataset task {data.task!r} != config task {config.task!r}")

    seq = np.random.SeedSequence(config.seed)
    init_rng, split_rng, train_rng = [np.random.default_rng(s) for s in seq.spawn(3)]
    train_data, val_data = train_val_split(data, config.val_fraction, split_rng)

    operator = build_operator(config, init_rng)
    selector = build_selector(config, init_rng)

    m_best = phase1(config, train_data, operator, selector, train_rng)
    m_opt, _ = generate_optimal_mask(selector.net, config.d, config.s)
    state = TrainerState(
        operator, selector, m_best, m_opt,
        build_candidates(config, m_best, m_opt, train_rng),
    )

    history = []
    while not state.stop_flag and state.batch_counter < config.max_phase2_batches:
        phase2_step(state, config, train_data, val_data, train_rng, history)

    if state.best_checkpoint is not None:
        _restore(state)
    return TrainedModel(state.operator, state.selector, state.m_opt, state.m_best,
                        state.best_val_loss, history)


def write_history_csv(history, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_COLUMNS)
        writer.writeheader()
        for row in history:
            writer.writerow({k: repr(float(row[k])) if k != "batch" else row[k]
                             for k in HISTORY_COLUMNS})
