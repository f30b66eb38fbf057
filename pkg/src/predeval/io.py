"""Persistence for every pipeline artifact.

Scenario suites and prediction sets are line-delimited JSON: a manifest
line followed by one record per line. Floats go through ``repr`` so a
save/load pair is bit-exact. Model checkpoints use a small binary layout
(magic, JSON header, little-endian float64 tensors, SHA-256 trailer)
with no timestamps, so identical weights always give identical bytes.
Tables are CSV with a fixed header and 17 significant digits.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import AgentState, EvaluationRecord, PerformanceRecord, PredictionSet, ScenarioLog, Trajectory
from .scenarionn.model import PARAM_NAMES, CriticalityModel, param_shapes

FORMAT_VERSION = 1
CHECKPOINT_MAGIC = b"PDCKPT01"

EVALUATION_COLUMNS = ("scenario_id", "predictor_id", "p_critical", "gad", "e_error", "gad_norm",
                      "e_error_norm", "score", "efficiency", "discomfort", "unsafety", "overall")
PERFORMANCE_COLUMNS = ("scenario_id", "predictor_id", "efficiency", "discomfort", "unsafety", "overall",
                       "emergency_steps")
METRIC_COLUMNS = ("scenario_id", "predictor_id", "gad", "ADE", "FDE", "minADE", "minFDE", "aveADE", "aveFDE",
                  "flags")
CORRELATION_COLUMNS = ("predictor_id", "method", "n", "r_efficiency", "r_discomfort", "r_unsafety",
                       "r_overall", "auroc")
ROC_COLUMNS = ("predictor_id", "method", "fpr", "tpr")


class FormatError(ValueError):
    """Malformed, truncated or unrecognized file content."""


class ChecksumError(FormatError):
    pass


@dataclass(frozen=True)
class FileManifest:
    kind: str
    config_hash: str
    master_seed: int
    count: int = 0
    checksum: str = ""
    version: int = FORMAT_VERSION

    def to_json(self) -> str:
        return json.dumps({"format_version": self.version, "content_kind": self.kind,
                           "config_hash": self.config_hash, "master_seed": self.master_seed,
                           "count": self.count, "checksum": self.checksum}, sort_keys=True)


def config_hash(config) -> str:
    """SHA-256 of the canonical JSON form of a config mapping."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def fmt(x) -> str:
    """17 significant digits: enough to round-trip any float64."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


# ---------------------------------------------------------------- scenarios

def _arr(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def scenario_to_dict(log: ScenarioLog) -> dict:
    return {
        "scenario_id": log.scenario_id,
        "kind": log.kind.value,
        "seed": int(log.seed),
        "dt": log.dt,
        "nominal_speed": log.nominal_speed,
        "reference_path": _arr(log.reference_path),
        "agents": {
            aid: [{"t": s.timestep, "p": _arr(s.position), "v": _arr(s.velocity), "a": _arr(s.acceleration)}
                  for s in states]
            for aid, states in log.agents.items()
        },
        "futures": {aid: {"dt": f.dt, "points": _arr(f.points)} for aid, f in log.futures.items()},
    }


def scenario_from_dict(d: dict) -> ScenarioLog:
    agents = {
        aid: tuple(AgentState(np.array(s["p"]), np.array(s["v"]), np.array(s["a"]), aid, int(s["t"]))
                   for s in states)
        for aid, states in d["agents"].items()
    }
    futures = {aid: Trajectory(np.array(f["points"]), f["dt"]) for aid, f in d["futures"].items()}
    return ScenarioLog(d["scenario_id"], d["kind"], int(d["seed"]), agents, futures,
                       np.array(d["reference_path"]), d["dt"], d["nominal_speed"])


def prediction_to_dict(scenario_id: str, predictor_id: str, pred: PredictionSet) -> dict:
    return {
        "scenario_id": scenario_id,
        "predictor_id": predictor_id,
        "agent_id": pred.agent_id,
        "dt": pred.dt,
        "modes": _arr(pred.modes),
        "mode_probs": None if pred.mode_probs is None else _arr(pred.mode_probs),
    }


def prediction_from_dict(d: dict) -> tuple[str, str, PredictionSet]:
    probs = None if d["mode_probs"] is None else np.array(d["mode_probs"])
    return d["scenario_id"], d["predictor_id"], PredictionSet(d["agent_id"], np.array(d["modes"]), probs, d["dt"])


def _write_records(path, kind: str, lines: list[str], master_seed: int, cfg_hash: str) -> Path:
    path = Path(path)
    body = "".join(line + "\n" for line in lines)
    manifest = FileManifest(kind, cfg_hash, int(master_seed), len(lines),
                            hashlib.sha256(body.encode()).hexdigest())
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(manifest.to_json() + "\n")
            fh.write(body)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _read_records(path, kind: str) -> tuple[FileManifest, list[dict]]:
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    lines = text.split("\n")
    if not lines or not lines[0]:
        raise FormatError(f"{path}: empty file, no manifest line")
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed manifest at line 1: {exc.msg}") from None
    if head.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {head.get('format_version')!r}")
    if head.get("content_kind") != kind:
        raise FormatError(f"{path}: expected content kind {kind!r}, found {head.get('content_kind')!r}")
    manifest = FileManifest(head["content_kind"], head["config_hash"], int(head["master_seed"]),
                            int(head["count"]), head["checksum"], head["format_version"])
    # a well-formed file ends with a newline, leaving one empty trailing piece
    body_lines = lines[1:]
    truncated = bool(body_lines) and body_lines[-1] != ""
    if not truncated and body_lines:
        body_lines = body_lines[:-1]
    records = []
    for i, line in enumerate(body_lines, start=2):
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: malformed record at line {i}: {exc.msg}") from None
    if truncated:
        raise FormatError(f"{path}: truncated record at line {len(lines)} (missing newline)")
    if len(records) != manifest.count:
        raise FormatError(f"{path}: manifest declares {manifest.count} records, found {len(records)}")
    body = "".join(line + "\n" for line in body_lines)
    if hashlib.sha256(body.encode()).hexdigest() != manifest.checksum:
        raise ChecksumError(f"{path}: checksum mismatch")
    return manifest, records


def save_suite(path, logs: Sequence[ScenarioLog], master_seed: int = 0, cfg_hash: str = "") -> Path:
    lines = [json.dumps(scenario_to_dict(log), sort_keys=True, separators=(",", ":")) for log in logs]
    return _write_records(path, "scenario_suite", lines, master_seed, cfg_hash)


def load_suite(path) -> tuple[FileManifest, list[ScenarioLog]]:
    manifest, records = _read_records(path, "scenario_suite")
    logs = []
    for i, rec in enumerate(records, start=2):
        try:
            logs.append(scenario_from_dict(rec))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: invalid scenario at line {i}: {exc}") from None
    return manifest, logs


def save_predictions(path, items: Iterable[tuple[str, str, PredictionSet]], master_seed: int = 0,
                     cfg_hash: str = "") -> Path:
    lines = [json.dumps(prediction_to_dict(s, p, pred), sort_keys=True, separators=(",", ":"))
             for s, p, pred in items]
    return _write_records(path, "prediction_sets", lines, master_seed, cfg_hash)


def load_predictions(path) -> tuple[FileManifest, dict[tuple[str, str], dict[str, PredictionSet]]]:
    """Predictions grouped as ``{(scenario_id, predictor_id): {agent_id: PredictionSet}}``."""
    manifest, records = _read_records(path, "prediction_sets")
    out: dict[tuple[str, str], dict[str, PredictionSet]] = {}
    for i, rec in enumerate(records, start=2):
        try:
            sid, pid, pred = prediction_from_dict(rec)
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: invalid prediction at line {i}: {exc}") from None
        group = out.setdefault((sid, pid), {})
        if pred.agent_id in group:
            raise FormatError(f"{path}: duplicate prediction for {(sid, pid, pred.agent_id)} at line {i}")
        group[pred.agent_id] = pred
    return manifest, out


# --------------------------------------------------------------- checkpoints

def save_checkpoint(path, model: CriticalityModel, meta: dict | None = None) -> Path:
    header = {
        "format_version": FORMAT_VERSION,
        "tensors": [[name, list(model.params[name].shape)] for name in PARAM_NAMES],
        "dtype": "<f8",
        "meta": meta or {},
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = b"".join(np.ascontiguousarray(model.params[n], dtype="<f8").tobytes() for n in PARAM_NAMES)
    payload = CHECKPOINT_MAGIC + struct.pack("<I", len(head)) + head + body
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload + hashlib.sha256(payload).digest())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def load_checkpoint(path, expected: dict | None = None) -> tuple[CriticalityModel, dict]:
    """Read a checkpoint and check every tensor against the declared architecture.

    ``expected`` maps tensor names to shapes; it defaults to the standard
    14 -> 64 -> 64, LSTM(32), 32 -> 1 layout.
    """
    data = Path(path).read_bytes()
    if len(data) < len(CHECKPOINT_MAGIC) + 4 + 32 or not data.startswith(CHECKPOINT_MAGIC):
        raise FormatError(f"{path}: not a checkpoint file")
    payload, digest = data[:-32], data[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise ChecksumError(f"{path}: checkpoint checksum mismatch")
    (n_head,) = struct.unpack("<I", payload[len(CHECKPOINT_MAGIC): len(CHECKPOINT_MAGIC) + 4])
    start = len(CHECKPOINT_MAGIC) + 4
    header = json.loads(payload[start: start + n_head])
    if header.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {header.get('format_version')!r}")
    expected = param_shapes() if expected is None else expected
    offset = start + n_head
    params = {}
    for name, shape in header["tensors"]:
        shape = tuple(shape)
        if name not in expected:
            raise FormatError(f"{path}: unexpected tensor {name!r}")
        if shape != tuple(expected[name]):
            raise FormatError(f"{path}: tensor {name!r} has shape {shape}, architecture expects "
                              f"{tuple(expected[name])}")
        n = int(np.prod(shape, dtype=int)) * 8
        params[name] = np.frombuffer(payload[offset: offset + n], dtype="<f8").reshape(shape).astype(float)
        offset += n
    missing = [n for n in expected if n not in params]
    if missing:
        raise FormatError(f"{path}: missing tensor {missing[0]!r}")
    if offset != len(payload):
        raise FormatError(f"{path}: trailing bytes after tensors")
    return CriticalityModel(params), header.get("meta", {})


# --------------------------------------------------------------------- CSV

def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path, columns: Sequence[str] | None = None) -> list[dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if columns is not None and tuple(reader.fieldnames or ()) != tuple(columns):
            raise FormatError(f"{path}: unexpected header {reader.fieldnames}")
        return list(reader)


def _perf_values(p: PerformanceRecord | None):
    if p is None:
        return [float("nan")] * 4
    return [p.efficiency, p.discomfort, p.unsafety, p.overall]


def export_evaluations(path, records: Sequence[EvaluationRecord]) -> Path:
    rows = sorted(records, key=lambda r: (r.scenario_id, r.predictor_id))
    return write_csv(path, EVALUATION_COLUMNS, (
        [r.scenario_id, r.predictor_id, float(r.p_critical), float(r.gad), float(r.e_error),
         float(r.gad_norm), float(r.e_error_norm), float(r.score), *map(float, _perf_values(r.performance))]
        for r in rows))


def import_evaluations(path) -> list[EvaluationRecord]:
    out = []
    for row in read_csv(path, EVALUATION_COLUMNS):
        perf_vals = [float(row[c]) for c in ("efficiency", "discomfort", "unsafety", "overall")]
        perf = None if any(math.isnan(v) for v in perf_vals) else PerformanceRecord(*perf_vals)
        out.append(EvaluationRecord(row["scenario_id"], row["predictor_id"], float(row["p_critical"]),
                                    float(row["gad"]), float(row["e_error"]), float(row["gad_norm"]),
                                    float(row["e_error_norm"]), float(row["score"]), perf))
    return out


def export_performances(path, rows: Iterable[tuple[str, str, PerformanceRecord, int]]) -> Path:
    rows = sorted(rows, key=lambda r: (r[0], r[1]))
    return write_csv(path, PERFORMANCE_COLUMNS, (
        [s, p, float(rec.efficiency), float(rec.discomfort), float(rec.unsafety), float(rec.overall), int(em)]
        for s, p, rec, em in rows))


def import_performances(path) -> dict[tuple[str, str], PerformanceRecord]:
    out = {}
    for row in read_csv(path, PERFORMANCE_COLUMNS):
        key = (row["scenario_id"], row["predictor_id"])
        if key in out:
            raise FormatError(f"{path}: duplicate performance key {key}")
        out[key] = PerformanceRecord(float(row["efficiency"]), float(row["discomfort"]),
                                     float(row["unsafety"]), float(row["overall"]))
    return out


def export_metrics(path, rows) -> Path:
    rows = sorted(rows, key=lambda r: (r.scenario_id, r.predictor_id))
    return write_csv(path, METRIC_COLUMNS, (
        [r.scenario_id, r.predictor_id, float(r.gad), *(float(r.errors[c]) for c in METRIC_COLUMNS[3:9]),
         "|".join(r.flags)]
        for r in rows))


def import_metrics(path):
    from .metrics import MetricRow

    out = []
    for row in read_csv(path, METRIC_COLUMNS):
        flags = tuple(f for f in row["flags"].split("|") if f)
        out.append(MetricRow(row["scenario_id"], row["predictor_id"], float(row["gad"]),
                             {c: float(row[c]) for c in METRIC_COLUMNS[3:9]}, flags))
    return out


def export_correlations(path, report) -> Path:
    cells = sorted(report.cells, key=lambda c: (c.method, c.predictor_id))
    return write_csv(path, CORRELATION_COLUMNS, (
        [c.predictor_id, c.method, c.n, float(c.r["efficiency"]), float(c.r["discomfort"]),
         float(c.r["unsafety"]), float(c.r["overall"]), float(c.auroc)]
        for c in cells))


def export_roc(path, report) -> Path:
    def rows():
        for c in sorted(report.cells, key=lambda c: (c.method, c.predictor_id)):
            roc = c.roc if c.roc is not None else np.zeros((0, 2))
            for fpr, tpr in roc:
                yield [c.predictor_id, c.method, float(fpr), float(tpr)]

    return write_csv(path, ROC_COLUMNS, rows())
