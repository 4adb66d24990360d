"""Shared helpers for the test suite."""

import itertools

import numpy as np
import pytest

from dualfir import nn
from dualfir.masks import Mask
from dualfir.selector_net import SelectorModel, SelectorExample, selector_train_step


_capture_manager = None


@pytest.fixture(autouse=True, scope="session")
def _remember_capture_manager(request):
    global _capture_manager
    _capture_manager = request.config.pluginmanager.getplugin("capturemanager")


def uncaptured_print(text):
    """Print past pytest's output capture so audit lines from passing tests
    still reach the terminal (and any tee'd log)."""
    if _capture_manager is None:
        print(text, flush=True)
    else:
        with _capture_manager.global_and_fixture_disabled():
            print(text, flush=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_net(rng, in_dim, out_dim, hidden, hidden_act="sigmoid", out_act="linear"):
    dims = [in_dim, *hidden, out_dim]
    acts = [hidden_act] * len(hidden) + [out_act]
    return nn.init_network(dims, acts, rng)


def memorize_table(d, table, rng, hidden=(32, 32), lr=1e-2, steps=2000):
    """Fit a selector to an explicit {mask: loss} table by full-batch descent.

    Returns the selector model; predictions typically match the table to ~1e-3,
    which is enough for argmin/ordering oracles on well-separated tables.
    """
    net = random_net(rng, d, 1, hidden)
    model = SelectorModel(net, nn.AdamState(lr))
    examples = [SelectorExample(m, t) for m, t in table.items()]
    for _ in range(steps):
        selector_train_step(model, examples)
    return model


def all_masks(d, s):
    return [Mask.from_indices(d, c) for c in itertools.combinations(range(d), s)]


def finite_difference_gradients(f, arrays, h=1e-5):
    """Central finite differences of a scalar function of several arrays."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            hi = f()
            arr[idx] = orig - h
            lo = f()
            arr[idx] = orig
            g[idx] = (hi - lo) / (2 * h)
            it.iternext()
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric, scale_floor=1e-6):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), scale_floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
