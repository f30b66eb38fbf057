"""Scenario-aware evaluation of trajectory predictors.

Blends a diversity measure (GMM-area of predicted modes) with displacement
error, weighted by a learned probability that the scene is critical, and
checks the blend against closed-loop driving performance.
"""

from .core import (
    AgentState,
    EvaluationRecord,
    PerformanceRecord,
    PredictionSet,
    ScenarioKind,
    ScenarioLog,
    Trajectory,
    jerk_profile,
    validate_scenario,
)
from .fusion import Ablation, FusionConfig, ed_eva_score, evaluate_predictor, normalize
from .gmm import Gmm2D, GmmConstruction, collapse, diversity_area, eigen2, fit_em, modes_as_gmm
from .metrics import ErrorVariant, batch_metrics, displacement_error, gad

__version__ = "0.1.0"

__all__ = [
    "Ablation", "AgentState", "ErrorVariant", "EvaluationRecord", "FusionConfig", "Gmm2D", "GmmConstruction",
    "PerformanceRecord", "PredictionSet", "ScenarioKind", "ScenarioLog", "Trajectory", "batch_metrics",
    "collapse", "displacement_error", "diversity_area", "ed_eva_score", "eigen2", "evaluate_predictor",
    "fit_em", "gad", "jerk_profile", "modes_as_gmm", "normalize", "validate_scenario",
]
