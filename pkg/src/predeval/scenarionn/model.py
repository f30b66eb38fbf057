"""Two GCN layers, node mean-pool, LSTM and a logistic head, in numpy.

Forward and reverse passes are written out by hand and operate on a batch
of sequences: features ``(B, T, N, F)`` and adjacencies ``(B, N, N)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import N_FEATURES, GraphSequence

GCN_WIDTH = 64
LSTM_HIDDEN = 32
PROB_CLAMP = 1e-7

PARAM_NAMES = ("gcn0", "gcn1", "lstm_wx", "lstm_wh", "lstm_b", "head_w", "head_b")


def param_shapes(n_features: int = N_FEATURES, gcn_width: int = GCN_WIDTH, hidden: int = LSTM_HIDDEN) -> dict:
    return {
        "gcn0": (n_features, gcn_width),
        "gcn1": (gcn_width, gcn_width),
        "lstm_wx": (gcn_width, 4 * hidden),
        "lstm_wh": (hidden, 4 * hidden),
        "lstm_b": (4 * hidden,),
        "head_w": (hidden,),
        "head_b": (),
    }


@dataclass(eq=False)
class CriticalityModel:
    """Parameter container. LSTM gate blocks are ordered input, forget, cell, output."""

    params: dict[str, np.ndarray]

    def __post_init__(self):
        f, g = np.shape(self.params["gcn0"])
        h = np.shape(self.params["lstm_wh"])[0]
        expected = param_shapes(f, g, h)
        for name in PARAM_NAMES:
            if name not in self.params:
                raise ValueError(f"missing parameter {name!r}")
            arr = np.asarray(self.params[name], dtype=float)
            if arr.shape != expected[name]:
                raise ValueError(f"parameter {name!r} has shape {arr.shape}, expected {expected[name]}")
            if not np.isfinite(arr).all():
                raise ValueError(f"parameter {name!r} is not finite")
            self.params[name] = arr

    @property
    def hidden(self) -> int:
        return self.params["lstm_wh"].shape[0]

    def copy(self) -> "CriticalityModel":
        return CriticalityModel({k: v.copy() for k, v in self.params.items()})

    def equals(self, other: "CriticalityModel") -> bool:
        return all(np.array_equal(self.params[k], other.params[k]) for k in PARAM_NAMES)


def init_model(seed: int = 0, n_features: int = N_FEATURES, gcn_width: int = GCN_WIDTH,
               hidden: int = LSTM_HIDDEN) -> CriticalityModel:
    """Glorot-uniform weight matrices, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(n_features, gcn_width, hidden).items():
        if len(shape) == 2:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, size=shape)
        elif name == "head_w":
            limit = np.sqrt(6.0 / (shape[0] + 1))
            params[name] = rng.uniform(-limit, limit, size=shape)
        else:
            params[name] = np.zeros(shape)
    return CriticalityModel(params)


def zero_model(**dims) -> CriticalityModel:
    return CriticalityModel({k: np.zeros(s) for k, s in param_shapes(**dims).items()})


def _sigmoid(z):
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _as_batch(seqs) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(seqs, GraphSequence):
        seqs = [seqs]
    x = np.stack([s.features for s in seqs])
    a = np.stack([s.adjacency for s in seqs])
    return x, a


def _check_shapes(model: CriticalityModel, x: np.ndarray, a: np.ndarray) -> None:
    if x.ndim != 4:
        raise ValueError(f"features must be (B, T, N, F), got {x.shape}")
    if x.shape[-1] != model.params["gcn0"].shape[0]:
        raise ValueError(
            f"feature width {x.shape[-1]} does not match model input {model.params['gcn0'].shape[0]}"
        )
    if a.shape != (x.shape[0], x.shape[2], x.shape[2]):
        raise ValueError(f"adjacency shape {a.shape} does not match features {x.shape}")


def forward_batch(model: CriticalityModel, x: np.ndarray, a: np.ndarray, keep: bool = False):
    """Logits for a batch; with ``keep`` also the activations needed by backprop."""
    _check_shapes(model, x, a)
    p = model.params
    b, t_len, n, _ = x.shape
    hd = model.hidden

    ax = np.einsum("bij,btjf->btif", a, x)
    z1 = ax @ p["gcn0"]
    h1 = np.maximum(z1, 0.0)
    ah1 = np.einsum("bij,btjf->btif", a, h1)
    z2 = ah1 @ p["gcn1"]
    h2 = np.maximum(z2, 0.0)
    g = h2.mean(axis=2)  # (B, T, dg)

    h = np.zeros((b, hd))
    c = np.zeros((b, hd))
    steps = []
    for t in range(t_len):
        z = g[:, t] @ p["lstm_wx"] + h @ p["lstm_wh"] + p["lstm_b"]
        i_g = _sigmoid(z[:, :hd])
        f_g = _sigmoid(z[:, hd:2 * hd])
        c_g = np.tanh(z[:, 2 * hd:3 * hd])
        o_g = _sigmoid(z[:, 3 * hd:])
        c_prev, h_prev = c, h
        c = f_g * c_prev + i_g * c_g
        tc = np.tanh(c)
        h = o_g * tc
        if keep:
            steps.append((h_prev, c_prev, i_g, f_g, c_g, o_g, tc))
    logit = h @ p["head_w"] + p["head_b"]
    if not keep:
        return logit
    cache = dict(x=x, a=a, ax=ax, z1=z1, h1=h1, ah1=ah1, z2=z2, g=g, steps=steps, h_last=h)
    return logit, cache


def forward(model: CriticalityModel, seq) -> float | np.ndarray:
    """Criticality probability for one sequence (float) or a list of them (array)."""
    single = isinstance(seq, GraphSequence)
    x, a = _as_batch(seq)
    prob = _sigmoid(forward_batch(model, x, a))
    return float(prob[0]) if single else prob


def loss_bce(p, label) -> float | np.ndarray:
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(label, dtype=float)
    out = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return float(out) if np.ndim(out) == 0 else out


def loss_from_logits(logit, label) -> np.ndarray:
    """BCE written on the logit; equal to ``loss_bce(sigmoid(logit))`` away from the clamp."""
    y = np.asarray(label, dtype=float)
    return np.logaddexp(0.0, logit) - y * logit


def backward_batch(model: CriticalityModel, cache: dict, dlogit: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of ``sum(dlogit * logit)`` with respect to every parameter."""
    p = model.params
    hd = model.hidden
    x, a, g = cache["x"], cache["a"], cache["g"]
    b, t_len, n, _ = x.shape
    grads = {k: np.zeros_like(v) for k, v in p.items()}

    grads["head_w"] = cache["h_last"].T @ dlogit
    grads["head_b"] = np.asarray(dlogit.sum())
    dh = np.outer(dlogit, p["head_w"])
    dc = np.zeros((b, hd))
    dg = np.zeros_like(g)
    for t in reversed(range(t_len)):
        h_prev, c_prev, i_g, f_g, c_g, o_g, tc = cache["steps"][t]
        do = dh * tc
        dc = dc + dh * o_g * (1.0 - tc**2)
        di = dc * c_g
        dcg = dc * i_g
        df = dc * c_prev
        dz = np.concatenate([
            di * i_g * (1.0 - i_g),
            df * f_g * (1.0 - f_g),
            dcg * (1.0 - c_g**2),
            do * o_g * (1.0 - o_g),
        ], axis=1)
        grads["lstm_wx"] += g[:, t].T @ dz
        grads["lstm_wh"] += h_prev.T @ dz
        grads["lstm_b"] += dz.sum(axis=0)
        dg[:, t] = dz @ p["lstm_wx"].T
        dh = dz @ p["lstm_wh"].T
        dc = dc * f_g

    dz2 = np.broadcast_to(dg[:, :, None, :] / n, cache["z2"].shape) * (cache["z2"] > 0)
    grads["gcn1"] = np.einsum("btif,btig->fg", cache["ah1"], dz2)
    dh1 = np.einsum("bji,btjf->btif", a, dz2 @ p["gcn1"].T)
    dz1 = dh1 * (cache["z1"] > 0)
    grads["gcn0"] = np.einsum("btif,btig->fg", cache["ax"], dz1)
    return grads


def backward(model: CriticalityModel, seq, label, scale: float = 1.0) -> dict[str, np.ndarray]:
    """Exact gradient of ``scale * mean BCE`` over the given sequence(s)."""
    x, a = _as_batch(seq)
    y = np.atleast_1d(np.asarray(label, dtype=float))
    logit, cache = forward_batch(model, x, a, keep=True)
    dlogit = scale * (_sigmoid(logit) - y) / x.shape[0]
    return backward_batch(model, cache, dlogit)


def batch_loss(model: CriticalityModel, seq, label) -> float:
    x, a = _as_batch(seq)
    return float(loss_from_logits(forward_batch(model, x, a), label).mean())
