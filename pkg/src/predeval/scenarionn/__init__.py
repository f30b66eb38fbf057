"""Criticality classifier: scene graphs, GCN + LSTM model, training."""

from .graph import GraphSequence, SceneGraph, build_adjacency, build_sequence, label_criticality, node_features
from .model import CriticalityModel, backward, forward, init_model, loss_bce
from .train import LabeledSample, TrainConfig, WeightedSampler, precision_recall, predict_proba, train

__all__ = [
    "CriticalityModel", "GraphSequence", "LabeledSample", "SceneGraph", "TrainConfig", "WeightedSampler",
    "backward", "build_adjacency", "build_sequence", "forward", "init_model", "label_criticality", "loss_bce",
    "node_features", "precision_recall", "predict_proba", "train",
]
