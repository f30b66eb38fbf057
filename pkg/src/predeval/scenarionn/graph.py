"""Scene graphs for the criticality classifier.

A window of ``T = 15`` frames becomes a sequence of 8-node graphs (ego in
slot 0, then its nearest neighbours by distance at the first frame). The
adjacency is built once from the first frame and shared by every frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import CLASSIFIER_WINDOW, EGO_ID, ScenarioLog

N_NODES = 8
N_FEATURES = 14
ADJ_DISTANCE = 5.0
TTC_CLIP = 10.0
CONFLICT_RADIUS = 2.0

# Divisors bringing raw features to order one before they reach the network:
# position(3), velocity(3), acceleration(3), rel_motion(5).
FEATURE_SCALE = np.array(
    [20.0, 20.0, 1.0, 10.0, 10.0, 1.0, 3.0, 3.0, 1.0, 20.0, 20.0, 5.0, TTC_CLIP, 1.0]
)


@dataclass(frozen=True, eq=False)
class SceneGraph:
    features: np.ndarray  # (N, F)
    adjacency: np.ndarray  # (N, N), row-stochastic


@dataclass(frozen=True, eq=False)
class GraphSequence:
    """``features`` (T, N, F) over one shared ``adjacency`` (N, N)."""

    features: np.ndarray
    adjacency: np.ndarray
    node_ids: tuple[str | None, ...] = ()

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        a = np.asarray(self.adjacency, dtype=float)
        if x.ndim != 3 or x.shape[0] != CLASSIFIER_WINDOW:
            raise ValueError(f"sequence must hold {CLASSIFIER_WINDOW} frames, got shape {x.shape}")
        if a.shape != (x.shape[1], x.shape[1]):
            raise ValueError("adjacency shape does not match node count")
        if not np.isfinite(x).all():
            raise ValueError("non-finite node features")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "adjacency", a)

    def __len__(self):
        return self.features.shape[0]

    def graphs(self) -> list[SceneGraph]:
        return [SceneGraph(x, self.adjacency) for x in self.features]


def build_adjacency(positions, d_th: float = ADJ_DISTANCE) -> np.ndarray:
    """Row-normalized proximity graph with self-loops.

    ``A_ij = (1{|p_i - p_j| < d_th} + delta_ij) / row sum``. The indicator
    also fires on the diagonal, so a node's own weight numerator is 2.
    """
    p = np.asarray(positions, dtype=float)[:, :2]
    if p.shape[0] < 1:
        raise ValueError("need at least one node")
    if not d_th > 0:
        raise ValueError("d_th must be positive")
    dist = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
    raw = (dist < d_th).astype(float) + np.eye(p.shape[0])
    return raw / raw.sum(axis=1, keepdims=True)


def time_to_collision(dp, dv, radius: float = CONFLICT_RADIUS) -> float:
    """Time of closest approach under constant velocity, if it is a conflict.

    ``dp``/``dv`` are the other agent's position and velocity relative to
    this one. Returns ``inf`` when the pair is separating or the predicted
    miss distance is at least ``radius``; 0 when already within it.
    """
    dp = np.asarray(dp, dtype=float)[:2]
    dv = np.asarray(dv, dtype=float)[:2]
    if np.linalg.norm(dp) < radius:
        return 0.0
    vv = float(dv @ dv)
    if vv <= 1e-12:
        return float("inf")
    t_star = -float(dp @ dv) / vv
    if t_star <= 0:
        return float("inf")
    miss = np.linalg.norm(dp + dv * t_star)
    return t_star if miss < radius else float("inf")


def relative_motion(pos_i, vel_i, neighbor_pos, neighbor_vel) -> np.ndarray:
    """Five interaction scalars for one node against its neighbour set.

    [mean distance, min distance, mean closing speed, min TTC (clipped to
    10 s), neighbour count / 7]. An empty neighbour set gives zeros.
    """
    npos = np.asarray(neighbor_pos, dtype=float).reshape(-1, 3)
    nvel = np.asarray(neighbor_vel, dtype=float).reshape(-1, 3)
    if npos.shape[0] == 0:
        return np.zeros(5)
    dp = npos[:, :2] - np.asarray(pos_i, dtype=float)[:2]
    dv = nvel[:, :2] - np.asarray(vel_i, dtype=float)[:2]
    dist = np.linalg.norm(dp, axis=1)
    safe = np.where(dist > 1e-9, dist, 1.0)
    closing = np.where(dist > 1e-9, -(dp * dv).sum(axis=1) / safe, 0.0)
    ttc = min(TTC_CLIP, min(time_to_collision(a, b) for a, b in zip(dp, dv)))
    return np.array([dist.mean(), dist.min(), closing.mean(), ttc, npos.shape[0] / (N_NODES - 1)])


def node_features(state, neighbors=()) -> np.ndarray:
    """[position(3), velocity(3), acceleration(3), relative motion(5)].

    ``state`` is an AgentState; ``neighbors`` the AgentStates of the other
    real nodes at the same frame.
    """
    neighbors = list(neighbors)
    rel = relative_motion(
        state.position,
        state.velocity,
        [n.position for n in neighbors],
        [n.velocity for n in neighbors],
    )
    return np.concatenate([state.position, state.velocity, state.acceleration, rel])


def select_nodes(log: ScenarioLog, start: int, n_nodes: int = N_NODES) -> list[str]:
    """Ego followed by its nearest neighbours at frame ``start`` (ties by id)."""
    ego_p = log.agents[EGO_ID][start].position[:2]
    others = [a for a in log.agent_ids if a != EGO_ID]
    others.sort(key=lambda a: (float(np.linalg.norm(log.agents[a][start].position[:2] - ego_p)), a))
    return [EGO_ID] + others[: n_nodes - 1]


def build_sequence(log: ScenarioLog, end: int | None = None, scale: bool = True) -> GraphSequence:
    """Graph sequence over the 15 history frames ending at ``end`` (exclusive).

    Positions are re-expressed relative to the ego's position at the first
    frame, so the sequence does not depend on where the scene sits in the
    world. Missing neighbours are padded with zero-feature nodes that only
    connect to themselves.
    """
    t_h = log.history_length
    end = t_h if end is None else end
    start = end - CLASSIFIER_WINDOW
    if start < 0:
        raise ValueError(f"history shorter than classifier window ({t_h} < {CLASSIFIER_WINDOW})")
    ids = select_nodes(log, start)
    origin = log.agents[EGO_ID][start].position.copy()
    n_real = len(ids)

    x = np.zeros((CLASSIFIER_WINDOW, N_NODES, N_FEATURES))
    for k, t in enumerate(range(start, end)):
        states = [log.agents[a][t] for a in ids]
        for i, s in enumerate(states):
            feats = node_features(s, [o for j, o in enumerate(states) if j != i])
            feats[:3] -= origin
            x[k, i] = feats
    if scale:
        x[:, :n_real] /= FEATURE_SCALE

    first = np.stack([log.agents[a][start].position for a in ids])
    adj = np.eye(N_NODES)
    adj[:n_real, :n_real] = build_adjacency(first)
    return GraphSequence(x, adj, tuple(ids) + (None,) * (N_NODES - n_real))


def label_criticality(
    log: ScenarioLog,
    horizon: int | None = None,
    gap_threshold: float = 1.0,
    ttc_threshold: float = 3.0,
) -> int:
    """1 if any agent pair comes within ``gap_threshold`` or has TTC below
    ``ttc_threshold`` over the ground-truth future, else 0."""
    ids = [a for a in log.agent_ids if a in log.futures]
    if len(ids) < 2:
        return 0
    h = min(len(log.futures[a]) for a in ids)
    if horizon is not None:
        h = min(h, horizon)
    pos = []
    for a in ids:
        last = log.agents[a][-1].position[:2]
        pos.append(np.vstack([last, log.futures[a].points[:h]]))
    pos = np.stack(pos)  # (A, h + 1, 2)
    vel = np.diff(pos, axis=1) / log.dt  # (A, h, 2)
    pos = pos[:, 1:]
    n = len(ids)
    for i in range(n):
        for j in range(i + 1, n):
            dp = pos[j] - pos[i]
            if np.linalg.norm(dp, axis=1).min() < gap_threshold:
                return 1
            dv = vel[j] - vel[i]
            for t in range(h):
                if time_to_collision(dp[t], dv[t]) < ttc_threshold:
                    return 1
    return 0
