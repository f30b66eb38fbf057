"""Class-balanced training of the criticality classifier."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .graph import GraphSequence
from .model import CriticalityModel, backward_batch, forward_batch, init_model, loss_from_logits, _sigmoid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabeledSample:
    sequence: GraphSequence
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0


@dataclass
class TrainResult:
    model: CriticalityModel
    loss_trace: list[float] = field(default_factory=list)


class WeightedSampler:
    """Draws sample indices with probability inversely proportional to class frequency."""

    def __init__(self, labels, rng: np.random.Generator):
        labels = np.asarray(labels, dtype=int)
        counts = np.bincount(labels, minlength=2)
        if (counts == 0).any():
            raise ValueError("weighted sampling undefined: both classes must be present")
        w = 1.0 / counts[labels]
        self.probs = w / w.sum()
        self.rng = rng

    def draw(self, n: int) -> np.ndarray:
        return self.rng.choice(self.probs.shape[0], size=n, replace=True, p=self.probs)


class Adam:
    def __init__(self, params: dict, lr: float, beta1: float, beta2: float, eps: float):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            update = self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            params[k] = np.asarray(params[k] - update)


def stack_samples(samples) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.stack([s.sequence.features for s in samples])
    a = np.stack([s.sequence.adjacency for s in samples])
    y = np.array([s.label for s in samples], dtype=float)
    return x, a, y


def train(samples, config: TrainConfig = TrainConfig(), init: CriticalityModel | None = None) -> TrainResult:
    """Mini-batch Adam on binary cross-entropy with class-balanced batches.

    One epoch is ``ceil(n / batch_size)`` batches drawn with replacement by
    the weighted sampler. The returned trace holds the mean batch loss of
    every epoch.
    """
    samples = list(samples)
    x, a, y = stack_samples(samples)
    rng = np.random.default_rng(config.seed)
    sampler = WeightedSampler(y.astype(int), rng)
    model = init.copy() if init is not None else init_model(config.seed)
    opt = Adam(model.params, config.lr, config.beta1, config.beta2, config.eps)
    steps = int(np.ceil(len(samples) / config.batch_size))
    trace = []
    for epoch in range(config.epochs):
        losses = []
        for _ in range(steps):
            idx = sampler.draw(config.batch_size)
            logit, cache = forward_batch(model, x[idx], a[idx], keep=True)
            losses.append(float(loss_from_logits(logit, y[idx]).mean()))
            dlogit = (_sigmoid(logit) - y[idx]) / idx.shape[0]
            opt.step(model.params, backward_batch(model, cache, dlogit))
        trace.append(float(np.mean(losses)))
        log.debug("epoch %d loss %.4f", epoch, trace[-1])
    return TrainResult(model, trace)


def predict_proba(model: CriticalityModel, samples, batch_size: int = 256) -> np.ndarray:
    seqs = [s.sequence if isinstance(s, LabeledSample) else s for s in samples]
    out = []
    for i in range(0, len(seqs), batch_size):
        chunk = seqs[i:i + batch_size]
        x = np.stack([s.features for s in chunk])
        a = np.stack([s.adjacency for s in chunk])
        out.append(_sigmoid(forward_batch(model, x, a)))
    return np.concatenate(out) if out else np.zeros(0)


def precision_recall(probs, labels, threshold: float = 0.5) -> tuple[float, float]:
    pred = np.asarray(probs) >= threshold
    labels = np.asarray(labels).astype(bool)
    tp = float(np.sum(pred & labels))
    precision = tp / pred.sum() if pred.sum() else float("nan")
    recall = tp / labels.sum() if labels.sum() else float("nan")
    return precision, recall
