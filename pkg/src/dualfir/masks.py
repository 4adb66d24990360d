"""Binary feature masks and the gradient-guided local search over them.

A mask selects exactly s of d features.  The search reads feature importance
off a scalar-output network that predicts the operator's loss for a mask:
importance is the NEGATED input gradient, so larger importance means that
including the feature lowers the predicted loss.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .errors import ConfigError

# the validation loop may restart (re-sort / replace / swap) at most this often
MAX_VALIDATION_RESTARTS = 5


class Mask:
    """Immutable d-dimensional 0/1 indicator with a fixed popcount."""

    __slots__ = ("_bits", "_hash")

    def __init__(self, bits):
        arr = np.asarray(bits, dtype=bool).copy()
        if arr.ndim != 1 or arr.size == 0:
            raise ConfigError("mask bits must be a non-empty 1-D array")
        arr.setflags(write=False)
        self._bits = arr
        self._hash = hash(arr.tobytes())

    @classmethod
    def from_indices(cls, d, indices):
        bits = np.zeros(d, dtype=bool)
        bits[list(indices)] = True
        return cls(bits)

    @classmethod
    def from_bitstring(cls, text):
        if not text or set(text) - {"0", "1"}:
            raise ConfigError(f"bad mask bitstring {text!r}")
        return cls(np.fromiter((c == "1" for c in text), dtype=bool, count=len(text)))

    @property
    def bits(self):
        return self._bits

    @property
    def d(self):
        return self._bits.size

    @property
    def s(self):
        return int(self._bits.sum())

    @property
    def indices(self):
        return np.flatnonzero(self._bits)

    def as_floats(self):
        return self._bits.astype(float)

    def complement(self):
        return Mask(~self._bits)

    def to_bitstring(self):
        return "".join("1" if b else "0" for b in self._bits)

    def hamming(self, other: "Mask"):
        return int(np.sum(self._bits != other._bits))

    def __eq__(self, other):
        return isinstance(other, Mask) and np.array_equal(self._bits, other._bits)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Mask({self.to_bitstring()})"


def random_mask(d, s, rng) -> Mask:
    """Uniform random mask with exactly s of d bits set."""
    if not 0 < s < d:
        raise ConfigError(f"need 0 < s < d, got s={s}, d={d}")
    return Mask.from_indices(d, rng.choice(d, size=s, replace=False))


def perturb(mask: Mask, s_p, rng) -> Mask:
    """Swap s_p random selected/unselected feature pairs; popcount preserved."""
    s, d = mask.s, mask.d
    if not 0 <= s_p < s:
        raise ConfigError(f"need 0 <= s_p < s, got s_p={s_p}, s={s}")
    if s_p > d - s:
        raise ConfigError(f"s_p={s_p} exceeds the {d - s} unselected positions")
    if s_p == 0:
        return mask
    ones = mask.indices
    zeros = np.flatnonzero(~mask.bits)
    drop = rng.choice(ones, size=s_p, replace=False)
    add = rng.choice(zeros, size=s_p, replace=False)
    bits = mask.bits.copy()
    bits[drop] = False
    bits[add] = True
    return Mask(bits)


def top_s_from_scores(scores, s):
    """Masks for the s most / (d-s) least important features.

    Ties break toward the lower index (stable sort on descending score).
    """
    scores = np.asarray(scores, dtype=float)
    d = scores.size
    if not 0 < s < d:
        raise ConfigError(f"need 0 < s < d, got s={s}, d={d}")
    order = np.argsort(-scores, kind="stable")
    m_opt = Mask.from_indices(d, order[:s])
    return m_opt, m_opt.complement()


def swap_extremes(m_opt: Mask, m_bar: Mask, scores) -> Mask:
    """Swap the least-important selected feature with the most-important unselected one."""
    if m_opt.d != m_bar.d or np.any(m_opt.bits == m_bar.bits):
        raise ConfigError("masks are not complementary")
    scores = np.asarray(scores, dtype=float)
    sel = m_opt.indices
    unsel = m_bar.indices
    worst_in = sel[np.argmin(scores[sel])]
    best_out = unsel[np.argmax(scores[unsel])]
    bits = m_opt.bits.copy()
    bits[worst_in] = False
    bits[best_out] = True
    return Mask(bits)


def _importance(selector: nn.Network, point):
    return -nn.output_input_gradient(selector, np.asarray(point, dtype=float)[None, :])[0]


def _predicted_loss(selector: nn.Network, mask: Mask):
    out, _ = nn.forward(selector, mask.as_floats()[None, :])
    return float(out[0, 0])


def generate_optimal_mask(selector: nn.Network, d, s, max_restarts=MAX_VALIDATION_RESTARTS):
    """Gradient-guided search for the mask with the lowest predicted loss.

    Starts from the all-halves point (every feature equally likely), takes the
    top-s features by importance, then runs the validation loop: re-sort at
    the current mask, replace negative-importance selected features, and test
    a swap of the selected/unselected extremes.  Any change restarts the loop;
    restarts are capped.  Returns (mask, importance scores at the mask).
    """
    if selector.input_dim != d:
        raise ConfigError(f"selector input_dim {selector.input_dim} != d {d}")
    if selector.output_dim != 1:
        raise ConfigError("selector must have a scalar output")
    if not 0 < s < d:
        raise ConfigError(f"need 0 < s < d, got s={s}, d={d}")

    scores = _importance(selector, np.full(d, 0.5))
    m_opt, m_bar = top_s_from_scores(scores, s)
    restarts = 0
    while True:
        # step (i): re-evaluate importance at the current mask and re-sort
        scores = _importance(selector, m_opt.as_floats())
        m_opt, m_bar = top_s_from_scores(scores, s)

        # step (ii): try replacing negative-importance selected features,
        # most negative first, each with the next-best unselected feature
        sel = m_opt.indices
        unsel = m_bar.indices
        negative = sel[scores[sel] < 0.0]
        negative = negative[np.argsort(scores[negative], kind="stable")]
        candidates = unsel[np.argsort(-scores[unsel], kind="stable")]
        restarted = False
        for rank, i in enumerate(negative):
            if rank >= candidates.size:
                break
            j = candidates[rank]
            bits = m_opt.bits.copy()
            bits[i] = False
            bits[j] = True
            m_try = Mask(bits)
            if _predicted_loss(selector, m_try) < _predicted_loss(selector, m_opt):
                m_opt, m_bar = m_try, m_try.complement()
                restarts += 1
                restarted = True
                break
        if restarted:
            if restarts >= max_restarts:
                return _finish_at_local_min(selector, m_opt)
            continue

        # step (iii): swap test.  The gradient-extreme pair is tried first;
        # if it does not improve, sweep the remaining one-swap neighbours so
        # acceptance certifies local optimality over the whole swap
        # neighbourhood, not just the extreme pair.
        m_swap = swap_extremes(m_opt, m_bar, scores)
        current_loss = _predicted_loss(selector, m_opt)
        if _predicted_loss(selector, m_swap) < current_loss:
            m_opt, m_bar = m_swap, m_swap.complement()
        else:
            m_best_neigh, best_loss = _best_swap_neighbor(selector, m_opt)
            if best_loss >= current_loss:
                return m_opt, scores
            m_opt, m_bar = m_best_neigh, m_best_neigh.complement()
        restarts += 1
        if restarts >= max_restarts:
            return _finish_at_local_min(selector, m_opt)


def _finish_at_local_min(selector: nn.Network, m_opt: Mask):
    """Steepest descent over one-swap neighbours until none improves.

    Used when the restart cap fires so that the returned mask still carries
    the local-optimality guarantee of the acceptance exit.  Terminates
    because the predicted loss strictly decreases at every move.
    """
    while True:
        current = _predicted_loss(selector, m_opt)
        neighbour, loss = _best_swap_neighbor(selector, m_opt)
        if loss >= current:
            return m_opt, _importance(selector, m_opt.as_floats())
        m_opt = neighbour


def _best_swap_neighbor(selector: nn.Network, mask: Mask):
    """Lowest predicted loss over all masks one selected/unselected swap away."""
    sel = mask.indices
    unsel = np.flatnonzero(~mask.bits)
    rows = []
    for i in sel:
        for j in unsel:
            bits = mask.bits.copy()
            bits[i] = False
            bits[j] = True
            rows.append(bits)
    batch = np.asarray(rows, dtype=float)
    preds, _ = nn.forward(selector, batch)
    k = int(np.argmin(preds[:, 0]))
    return Mask(rows[k]), float(preds[k, 0])
