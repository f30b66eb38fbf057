"""Desk-scale closed loop: scenarios, predictors, planner, performance."""

from .closed_loop import EpisodeResult, run_closed_loop, run_episode
from .performance import PerformanceConfig, driving_performance
from .planner import FrenetCandidate, PlannerConfig, ReferencePath, frenet_plan
from .predictors import PredictorKind, parse_predictor, predict
from .scenarios import generate_scenario, generate_suite

__all__ = [
    "EpisodeResult", "FrenetCandidate", "PerformanceConfig", "PlannerConfig", "PredictorKind", "ReferencePath",
    "driving_performance", "frenet_plan", "generate_scenario", "generate_suite", "parse_predictor", "predict",
    "run_closed_loop", "run_episode",
]
