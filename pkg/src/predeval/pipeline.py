"""File-based experiment stages: simulate, train, evaluate, correlate, ablate.

Each stage reads and writes plain files under a run directory so that any
stage can be re-run on its own. Outputs never carry timestamps or timing
information; a stage's bytes depend only on its inputs and the config.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io
from .analysis import CorrelationReport, auroc, auroc_pairwise, build_report
from .core import EGO_ID, ScenarioKind
from .fusion import Ablation, FusionConfig, evaluate_predictor
from .gmm import GmmConstruction
from .metrics import ERROR_VARIANTS, batch_metrics
from .scenarionn.graph import build_sequence, label_criticality
from .scenarionn.model import init_model
from .scenarionn.train import LabeledSample, TrainConfig, precision_recall, predict_proba, train
from .sim.closed_loop import run_closed_loop
from .sim.predictors import parse_predictor
from .sim.rng import rng_for
from .sim.scenarios import generate_suite

log = logging.getLogger(__name__)

ED_EVA = "ed_eva"
ERROR_METHODS = tuple(f"-{v.value}" for v in ERROR_VARIANTS)
ABLATIONS = ("full", "fixed_pc(0.5)", "error_only", "diversity_only")
DEFAULT_METHODS = (ED_EVA,) + ERROR_METHODS

SUITE_FILE = "suite.jsonl"
PREDICTIONS_FILE = "predictions.jsonl"
PERFORMANCE_FILE = "performance.csv"
FAILURES_FILE = "failures.csv"
CHECKPOINT_FILE = "model.ckpt"


class StageError(RuntimeError):
    """A stage could not run on the given inputs (missing files, bad joins)."""


@dataclass(frozen=True)
class RunConfig:
    seed: int = 7
    counts: dict = field(default_factory=lambda: {"highway": 70, "intersection": 70, "merge": 70})
    predictors: tuple[str, ...] = ("noisy_cv(0.5)", "noisy_cv(2)", "multimodal_maneuver(6)")
    n_agents: tuple[int, int] = (3, 8)
    train_counts: dict = field(default_factory=lambda: {"highway": 900, "intersection": 900, "merge": 900})
    holdout_fraction: float = 0.2
    epochs: int = 40
    batch_size: int = 32
    lr: float = 1e-3
    normalization: str = "minmax"
    error_variant: str = "ADE"
    ablation: str = "full"
    auroc_threshold: str | float = "median"
    workers: int = 1

    def __post_init__(self):
        for name in ("counts", "train_counts"):
            counts = dict(getattr(self, name))
            for kind, n in counts.items():
                ScenarioKind(kind)
                if int(n) < 0:
                    raise ValueError(f"{name}[{kind}] must be >= 0")
            object.__setattr__(self, name, {k: int(v) for k, v in sorted(counts.items())})
        object.__setattr__(self, "predictors", tuple(self.predictors))
        object.__setattr__(self, "n_agents", tuple(int(v) for v in self.n_agents))
        for p in self.predictors:
            parse_predictor(p)
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must be in (0, 1)")
        self.fusion()

    def fusion(self, ablation: str | None = None) -> FusionConfig:
        return FusionConfig(self.normalization, self.error_variant, Ablation.parse(ablation or self.ablation))

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size, lr=self.lr, seed=self.seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["predictors"] = list(self.predictors)
        d["n_agents"] = list(self.n_agents)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    def updated(self, **changes) -> "RunConfig":
        return replace(self, **changes)


def load_config_file(path) -> dict:
    """JSON, or TOML when the file ends in .toml."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".toml":
        try:
            import tomllib
        except ImportError:  # Python < 3.11
            import tomli as tomllib  # type: ignore[no-redef]
        return tomllib.loads(text)
    return json.loads(text)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_json_tree(obj), sort_keys=True, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return path


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise StageError(f"missing {what}: {path}")
    return path


# ------------------------------------------------------------------ simulate

def simulate(cfg: RunConfig, out) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    kinds = [parse_predictor(p) for p in cfg.predictors]
    logs = generate_suite(cfg.counts, cfg.seed, cfg.n_agents)
    if not logs:
        log.warning("all scenario counts are zero: writing an empty suite")
    h = io.config_hash(cfg.to_dict())
    io.save_suite(out / SUITE_FILE, logs, cfg.seed, h)
    results, failures = run_closed_loop(logs, kinds)
    preds = [(r.scenario_id, r.predictor_id, r.predictions[a]) for r in results for a in sorted(r.predictions)]
    io.save_predictions(out / PREDICTIONS_FILE, preds, cfg.seed, h)
    io.export_performances(out / PERFORMANCE_FILE,
                           [(r.scenario_id, r.predictor_id, r.performance, r.emergency_steps) for r in results])
    io.write_csv(out / FAILURES_FILE, ("scenario_id", "predictor_id", "message"), sorted(failures))
    write_json(out / "config.json", cfg.to_dict())
    return {"scenarios": len(logs), "episodes": len(results), "failures": len(failures)}


# --------------------------------------------------------------------- train

def labeled_samples(logs) -> list[LabeledSample]:
    return [LabeledSample(build_sequence(lg), label_criticality(lg)) for lg in logs]


def split_holdout(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    order = rng_for("holdout", seed).permutation(n)
    n_hold = int(round(n * fraction))
    return np.sort(order[n_hold:]), np.sort(order[:n_hold])


def train_classifier(cfg: RunConfig, out) -> dict:
    """Train on a suite drawn from its own seed stream; report held-out precision/recall."""
    out = Path(out)
    logs = generate_suite(cfg.train_counts, cfg.seed, cfg.n_agents, stream="train")
    samples = labeled_samples(logs)
    labels = np.array([s.label for s in samples], dtype=int)
    train_idx, hold_idx = split_holdout(len(samples), cfg.holdout_fraction, cfg.seed)
    train_set = [samples[i] for i in train_idx]
    tc = cfg.train_config()
    if tc.epochs == 0:
        model, trace = init_model(tc.seed), []
        # still reject data the sampler could not balance
        if len(set(labels[train_idx].tolist())) < 2:
            raise ValueError("weighted sampling undefined: both classes must be present")
    else:
        result = train(train_set, tc)
        model, trace = result.model, result.loss_trace
    probs = predict_proba(model, [samples[i] for i in hold_idx])
    precision, recall = precision_recall(probs, labels[hold_idx]) if len(hold_idx) else (float("nan"),) * 2
    out.mkdir(parents=True, exist_ok=True)
    io.save_checkpoint(out / CHECKPOINT_FILE, model, {"seed": cfg.seed, "epochs": tc.epochs})
    io.write_csv(out / "loss_trace.csv", ("epoch", "loss"), ([i, float(v)] for i, v in enumerate(trace)))
    summary = {
        "n_train": int(len(train_idx)),
        "n_holdout": int(len(hold_idx)),
        "positive_rate": float(labels.mean()) if labels.size else float("nan"),
        "precision": float(precision),
        "recall": float(recall),
        "threshold": 0.5,
    }
    write_json(out / "classifier.json", _json_tree(summary))
    return summary


# ------------------------------------------------------------------ evaluate

def _metric_rows(logs, predictions: dict, predictor_ids: Sequence[str]):
    inputs = []
    for lg in logs:
        others = [a for a in lg.agent_ids if a != EGO_ID]
        futures = {a: lg.futures[a] for a in others if a in lg.futures}
        for pid in predictor_ids:
            preds = predictions.get((lg.scenario_id, pid))
            if preds is None:
                continue
            inputs.append((lg.scenario_id, pid, preds, futures, others))
    return batch_metrics(inputs, GmmConstruction())


def criticality(model, logs) -> dict[str, float]:
    if not logs:
        return {}
    probs = predict_proba(model, [build_sequence(lg) for lg in logs])
    return {lg.scenario_id: float(p) for lg, p in zip(logs, probs)}


def evaluation_filename(ablation: str) -> str:
    label = Ablation.parse(ablation).label
    return "evaluation.csv" if label == "full" else f"evaluation_{label}.csv"


def evaluate(cfg: RunConfig, run_dir, checkpoint=None, ablation: str | None = None) -> dict:
    run_dir = Path(run_dir)
    ablation = ablation or cfg.ablation
    fusion = cfg.fusion(ablation)
    _, logs = io.load_suite(_require(run_dir / SUITE_FILE, "scenario suite"))
    _, predictions = io.load_predictions(_require(run_dir / PREDICTIONS_FILE, "predictions"))
    performances = io.import_performances(_require(run_dir / PERFORMANCE_FILE, "performance table"))
    predictor_ids = sorted({k[1] for k in predictions})

    rows = _metric_rows(logs, predictions, predictor_ids)
    io.export_metrics(run_dir / "metrics.csv", rows)

    p_crit = None
    if fusion.ablation.mode == "full":
        if checkpoint is None or not Path(checkpoint).exists():
            raise StageError(f"full fusion needs a classifier checkpoint (got {checkpoint})")
        model, _ = io.load_checkpoint(checkpoint)
        p_crit = criticality(model, logs)
        io.write_csv(run_dir / "p_critical.csv", ("scenario_id", "p_critical"),
                     ([k, v] for k, v in sorted(p_crit.items())))
    records = evaluate_predictor(rows, p_crit, fusion, performances)
    io.export_evaluations(run_dir / evaluation_filename(ablation), records)
    return {"rows": len(records), "ablation": fusion.ablation.label}


# ----------------------------------------------------------------- correlate

def method_values(run_dir, methods: Sequence[str]) -> dict[str, list[tuple[str, str, float]]]:
    """Per-method ``(scenario_id, predictor_id, value)`` rows, higher meaning better."""
    run_dir = Path(run_dir)
    out = {}
    metrics = None
    for m in methods:
        if m in ERROR_METHODS:
            if metrics is None:
                metrics = io.import_metrics(_require(run_dir / "metrics.csv", "metric table"))
            variant = m[1:]
            out[m] = [(r.scenario_id, r.predictor_id, -r.error(variant)) for r in metrics]
            continue
        ablation = "full" if m == ED_EVA else m
        try:
            name = evaluation_filename(ablation)
        except ValueError:
            raise StageError(f"unknown method {m!r}") from None
        recs = io.import_evaluations(_require(run_dir / name, f"evaluations for {m}"))
        out[m] = [(r.scenario_id, r.predictor_id, r.score) for r in recs]
    return out


def correlation_report(run_dir, methods: Sequence[str] = DEFAULT_METHODS, threshold="median",
                       performance_file=None) -> CorrelationReport:
    run_dir = Path(run_dir)
    perf_path = Path(performance_file) if performance_file else run_dir / PERFORMANCE_FILE
    performances = io.import_performances(_require(perf_path, "performance table"))
    report = build_report(method_values(run_dir, methods), performances, list(methods), threshold)
    if report.join_errors:
        shown = "; ".join(report.join_errors[:5])
        more = f" (+{len(report.join_errors) - 5} more)" if len(report.join_errors) > 5 else ""
        raise StageError(f"evaluation/performance join failed: {shown}{more}")
    return report


def sign_pattern(report: CorrelationReport, margin: float = 0.1) -> dict:
    """ED-Eva overall r > 0 for every predictor and above -ADE by ``margin``."""
    rows = {}
    ok = True
    for pid in report.predictors:
        r_ed = report.cell(pid, ED_EVA).r["overall"]
        r_ade = report.cell(pid, "-ADE").r["overall"]
        good = bool(r_ed > 0 and r_ed - r_ade >= margin)
        ok &= good
        rows[pid] = {"r_ed_eva": r_ed, "r_neg_ade": r_ade, "pass": good}
    return {"pass": bool(ok and rows), "predictors": rows}


def auroc_dominance(report: CorrelationReport) -> dict:
    rows, ok = {}, True
    for pid in report.predictors:
        ed = report.cell(pid, ED_EVA).auroc
        others = {m: report.cell(pid, m).auroc for m in ERROR_METHODS}
        good = bool(all(ed >= v for v in others.values()))
        ok &= good
        rows[pid] = {"ed_eva": ed, "baselines": others, "pass": good}
    return {"pass": bool(ok and rows), "predictors": rows}


def correlate(run_dir, methods: Sequence[str] = DEFAULT_METHODS, threshold="median",
              performance_file=None) -> tuple[CorrelationReport, list[str]]:
    run_dir = Path(run_dir)
    report = correlation_report(run_dir, methods, threshold, performance_file)
    io.export_correlations(run_dir / "correlation.csv", report)
    io.export_roc(run_dir / "roc.csv", report)
    lines = []
    if ED_EVA in report.methods:
        for pid in report.predictors:
            r = report.cell(pid, ED_EVA).r["overall"]
            lines.append(f"{'PASS' if r > 0 else 'FAIL'} ED-Eva overall r > 0 [{pid}]: r = {r:+.4f}")
    if ED_EVA in report.methods and "-ADE" in report.methods:
        sp = sign_pattern(report)
        lines.append(f"{'PASS' if sp['pass'] else 'FAIL'} ED-Eva exceeds -ADE by >= 0.1 for every predictor")
    return report, lines


# -------------------------------------------------------------------- ablate

def ablate(cfg: RunConfig, run_dir, checkpoint) -> dict:
    run_dir = Path(run_dir)
    for mode in ABLATIONS:
        evaluate(cfg, run_dir, checkpoint, mode)
    methods = [ED_EVA] + [m for m in ABLATIONS if m != "full"]
    report = correlation_report(run_dir, methods, cfg.auroc_threshold)
    means = {m: report.mean_r(m) for m in methods}
    rows = [[m, float(means[m])] + [float(report.cell(p, m).r["overall"]) for p in report.predictors]
            for m in methods]
    io.write_csv(run_dir / "ablation.csv", ["method", "mean_r_overall"] + [f"r[{p}]" for p in report.predictors],
                 rows)
    ordered = bool(means[ED_EVA] > means["fixed_pc(0.5)"] > means["error_only"])
    return {"mean_r_overall": means, "ordered": ordered}


# ----------------------------------------------------------------- reproduce

def reproduce(cfg: RunConfig, out) -> dict:
    """simulate -> train -> evaluate -> correlate -> ablate, all under ``out``."""
    out = Path(out)
    sim = simulate(cfg, out)
    cls = train_classifier(cfg, out / "classifier")
    ckpt = out / "classifier" / CHECKPOINT_FILE
    evaluate(cfg, out, ckpt)
    report, lines = correlate(out, DEFAULT_METHODS, cfg.auroc_threshold)
    abl = ablate(cfg, out, ckpt)
    summary = {
        "simulate": sim,
        "classifier": cls,
        "sign_pattern": sign_pattern(report),
        "auroc_dominance": auroc_dominance(report),
        "ablation": abl,
        "checks": lines,
    }
    write_json(out / "summary.json", _json_tree(summary))
    return summary


def _json_tree(obj):
    """Plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {k: _json_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_tree(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, (np.integer, np.bool_)):
        return obj.item()
    return obj


def auroc_exactness(scores, labels, n: int = 500, seed: int = 0) -> tuple[float, float]:
    """Rank-statistic and pairwise AUROC on a deterministic subsample of ``n`` items."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    idx = rng_for("auroc-subsample", seed).permutation(scores.size)[:n]
    return auroc(scores[idx], labels[idx]), auroc_pairwise(scores[idx], labels[idx])
