"""Central-difference oracle for the classifier gradients."""

from __future__ import annotations

import numpy as np

from predeval.core import CLASSIFIER_WINDOW
from predeval.scenarionn.graph import GraphSequence, build_adjacency
from predeval.scenarionn.model import backward, forward_batch, init_model, loss_from_logits

STEP = 1e-5
# a central difference is only an oracle where the function is smooth; if a
# +-h nudge flips some ReLU on or off, h is shrunk tenfold (down to MIN_STEP)
# until the activation pattern on both sides matches the unperturbed one
MIN_STEP = 1e-8
# relative error is |a - n| / max(|a| + |n|, FLOOR); the floor keeps
# parameters whose true gradient is ~0 from dividing round-off by round-off
FLOOR = 1e-6


def random_sequence(rng, n_nodes=8, n_features=14, n_real=None) -> GraphSequence:
    n_real = n_nodes if n_real is None else n_real
    x = np.zeros((CLASSIFIER_WINDOW, n_nodes, n_features))
    x[:, :n_real] = rng.normal(size=(CLASSIFIER_WINDOW, n_real, n_features))
    adj = np.eye(n_nodes)
    adj[:n_real, :n_real] = build_adjacency(rng.uniform(-6, 6, size=(n_real, 2)))
    return GraphSequence(x, adj)


def _loss_and_pattern(model, x, a, label):
    logit, cache = forward_batch(model, x, a, keep=True)
    pattern = np.concatenate([(cache["z1"] > 0).ravel(), (cache["z2"] > 0).ravel()])
    return float(loss_from_logits(logit, label).mean()), pattern


def numeric_gradient(model, seq, label, name, idx, base_pattern=None):
    """Central difference; returns (gradient, step actually used)."""
    x = seq.features[None]
    a = seq.adjacency[None]
    if base_pattern is None:
        _, base_pattern = _loss_and_pattern(model, x, a, label)
    p = model.params[name]
    old = p[idx]
    h = STEP
    try:
        while True:
            p[idx] = old + h
            up, pat_up = _loss_and_pattern(model, x, a, label)
            p[idx] = old - h
            down, pat_down = _loss_and_pattern(model, x, a, label)
            smooth = np.array_equal(pat_up, base_pattern) and np.array_equal(pat_down, base_pattern)
            if smooth or h <= MIN_STEP:
                return (up - down) / (2 * h), h
            h /= 10.0
    finally:
        p[idx] = old


def gradient_report(model, seq, label) -> tuple[float, int]:
    """Worst relative error over every parameter, and how many needed a smaller step."""
    analytic = backward(model, seq, label)
    _, base = _loss_and_pattern(model, seq.features[None], seq.adjacency[None], label)
    worst, shrunk = 0.0, 0
    for name, p in model.params.items():
        for idx in np.ndindex(p.shape):
            num, h = numeric_gradient(model, seq, label, name, idx, base)
            shrunk += h < STEP
            a = float(analytic[name][idx])
            worst = max(worst, abs(a - num) / max(abs(a) + abs(num), FLOOR))
    return worst, shrunk


def max_relative_error(model, seq, label) -> float:
    return gradient_report(model, seq, label)[0]


def random_pair(seed, full=False):
    rng = np.random.default_rng(seed)
    if full:
        model = init_model(seed)
        n_features = 14
    else:
        n_features = int(rng.integers(3, 8))
        model = init_model(seed, n_features=n_features, gcn_width=int(rng.integers(3, 9)),
                           hidden=int(rng.integers(2, 6)))
    # nonzero biases so every gate path is exercised
    for name in ("lstm_b", "head_b"):
        model.params[name] = np.asarray(rng.normal(scale=0.3, size=model.params[name].shape))
    seq = random_sequence(rng, n_nodes=8 if full else int(rng.integers(2, 6)), n_features=n_features,
                          n_real=None)
    return model, seq, int(rng.integers(0, 2))
