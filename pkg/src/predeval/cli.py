"""Command-line entry point: ``python -m predeval <command> ...``.

Exit codes: 0 success, 1 runtime/data failure, 2 usage error. The default
output root comes from ``PREDEVAL_OUT`` (``runs`` when unset). Values in a
``--config`` file take precedence over flags given on the command line.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import io, pipeline
from .core import validate_scenario
from .sim.predictors import parse_predictor

OUT_ENV = "PREDEVAL_OUT"

log = logging.getLogger("predeval")


class UsageError(Exception):
    pass


def _out_root() -> Path:
    return Path(os.environ.get(OUT_ENV, "runs"))


def _add_common(p: argparse.ArgumentParser, run: bool = True) -> None:
    p.add_argument("--config", help="JSON or TOML run config; its values override flags")
    p.add_argument("--seed", type=int, default=7, help="master seed (default 7)")
    if run:
        p.add_argument("--out", help=f"run directory (default ${OUT_ENV}/<command>-<seed>)")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def _add_counts(p: argparse.ArgumentParser) -> None:
    for kind in ("highway", "intersection", "merge"):
        p.add_argument(f"--{kind}", type=int, default=None, metavar="N", help=f"number of {kind} scenarios")


def _add_fusion(p: argparse.ArgumentParser) -> None:
    p.add_argument("--normalization", choices=("minmax", "zscore", "raw"), default=None)
    p.add_argument("--error-variant", choices=[v[1:] for v in pipeline.ERROR_METHODS], default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="predeval", description="Scenario-aware trajectory-prediction evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a scenario suite and run the closed loop")
    _add_common(p)
    _add_counts(p)
    p.add_argument("--predictors", help="semicolon-separated predictor specs, e.g. 'noisy_cv(2);multimodal_maneuver(6)'")

    p = sub.add_parser("train-scenario-nn", help="train the criticality classifier")
    _add_common(p)
    _add_counts(p)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)

    p = sub.add_parser("evaluate", help="score predictions of a simulated run")
    _add_common(p)
    p.add_argument("--run", help="run directory produced by simulate (default: --out)")
    p.add_argument("--checkpoint", help="classifier checkpoint (required for --ablation full)")
    p.add_argument("--ablation", default=None, help="full | fixed_pc(v) | error_only | diversity_only")
    _add_fusion(p)

    p = sub.add_parser("correlate", help="correlate evaluation methods with driving performance")
    _add_common(p)
    p.add_argument("--run", help="run directory with evaluations (default: --out)")
    p.add_argument("--performance", help="performance table to join (default: <run>/performance.csv)")
    p.add_argument("--methods", help="comma-separated, e.g. '-ADE,-FDE,ed_eva'")
    p.add_argument("--threshold", default=None, help="AUROC positive-class cut: 'median' or a number")

    p = sub.add_parser("ablate", help="evaluate every ablation and compare correlations")
    _add_common(p)
    p.add_argument("--run", help="run directory (default: --out)")
    p.add_argument("--checkpoint", help="classifier checkpoint")
    _add_fusion(p)

    p = sub.add_parser("reproduce", help="simulate, train, evaluate, correlate and ablate in one go")
    _add_common(p)

    p = sub.add_parser("validate", help="check a run directory's files and scenarios")
    _add_common(p, run=False)
    p.add_argument("run", help="run directory or suite file")
    return parser


def _config(args) -> pipeline.RunConfig:
    changes = {"seed": args.seed}
    counts = {k: getattr(args, k, None) for k in ("highway", "intersection", "merge")}
    if any(v is not None for v in counts.values()):
        target = "train_counts" if args.command == "train-scenario-nn" else "counts"
        changes[target] = {k: (v or 0) for k, v in counts.items()}
    if getattr(args, "predictors", None):
        changes["predictors"] = tuple(s.strip() for s in args.predictors.split(";") if s.strip())
    for flag, key in (("epochs", "epochs"), ("batch_size", "batch_size"), ("lr", "lr"),
                      ("normalization", "normalization"), ("error_variant", "error_variant"),
                      ("ablation", "ablation")):
        value = getattr(args, flag, None)
        if value is not None:
            changes[key] = value
    if getattr(args, "threshold", None) is not None:
        changes["auroc_threshold"] = args.threshold if args.threshold == "median" else float(args.threshold)
    if args.config:
        try:
            changes.update(pipeline.load_config_file(args.config))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
    try:
        for spec in changes.get("predictors", ()):
            parse_predictor(spec)
        return pipeline.RunConfig.from_dict({**pipeline.RunConfig().to_dict(), **changes})
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _out(args, cfg) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return _out_root() / f"{args.command}-{cfg.seed}"


def _run_dir(args, cfg) -> Path:
    return Path(args.run) if getattr(args, "run", None) else _out(args, cfg)


def cmd_simulate(args, cfg) -> int:
    out = _out(args, cfg)
    if sum(cfg.counts.values()) == 0:
        print("warning: all scenario counts are zero; writing an empty suite", file=sys.stderr)
    s = pipeline.simulate(cfg, out)
    print(f"simulated {s['scenarios']} scenarios, {s['episodes']} episodes, {s['failures']} failures -> {out}")
    return 0


def cmd_train(args, cfg) -> int:
    out = _out(args, cfg)
    try:
        s = pipeline.train_classifier(cfg, out)
    except ValueError as exc:
        if "weighted sampling undefined" in str(exc):
            raise UsageError(str(exc)) from None
        raise
    print(f"trained on {s['n_train']} sequences; held-out precision {s['precision']:.4f}, "
          f"recall {s['recall']:.4f} -> {out / pipeline.CHECKPOINT_FILE}")
    return 0


def cmd_evaluate(args, cfg) -> int:
    run = _run_dir(args, cfg)
    ablation = pipeline.Ablation.parse(cfg.ablation)
    if ablation.mode == "full" and (not args.checkpoint or not Path(args.checkpoint).exists()):
        raise UsageError(f"full fusion needs an existing --checkpoint (got {args.checkpoint!r})")
    s = pipeline.evaluate(cfg, run, args.checkpoint, cfg.ablation)
    print(f"evaluated {s['rows']} rows ({s['ablation']}) -> {run / pipeline.evaluation_filename(cfg.ablation)}")
    return 0


def cmd_correlate(args, cfg) -> int:
    run = _run_dir(args, cfg)
    methods = pipeline.DEFAULT_METHODS
    if args.methods:
        methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    report, lines = pipeline.correlate(run, methods, cfg.auroc_threshold, args.performance)
    for c in sorted(report.cells, key=lambda c: (c.method, c.predictor_id)):
        print(f"{c.method:>16s} {c.predictor_id:>24s}  r_overall {c.r['overall']:+.4f}  auroc {c.auroc:.4f}")
    for line in lines:
        print(line)
    return 0


def cmd_ablate(args, cfg) -> int:
    run = _run_dir(args, cfg)
    if not args.checkpoint or not Path(args.checkpoint).exists():
        raise UsageError(f"ablate needs an existing --checkpoint (got {args.checkpoint!r})")
    s = pipeline.ablate(cfg, run, args.checkpoint)
    for m, v in s["mean_r_overall"].items():
        print(f"{m:>16s} mean r_overall {v:+.4f}")
    print(f"{'PASS' if s['ordered'] else 'FAIL'} full > fixed_pc(0.5) > error_only")
    return 0


def cmd_reproduce(args, cfg) -> int:
    out = _out(args, cfg)
    s = pipeline.reproduce(cfg, out)
    print(f"classifier held-out precision {s['classifier']['precision']:.4f}")
    for line in s["checks"]:
        print(line)
    print(f"{'PASS' if s['auroc_dominance']['pass'] else 'FAIL'} ED-Eva AUROC >= every error baseline")
    print(f"{'PASS' if s['ablation']['ordered'] else 'FAIL'} ablation ordering full > fixed_pc(0.5) > error_only")
    print(f"outputs -> {out}")
    return 0


def cmd_validate(args, cfg) -> int:
    target = Path(args.run)
    suite = target if target.is_file() else target / pipeline.SUITE_FILE
    problems = []
    _, logs = io.load_suite(suite)
    for lg in logs:
        problems += [f"{lg.scenario_id}: {p}" for p in validate_scenario(lg)]
    preds_path = suite.parent / pipeline.PREDICTIONS_FILE
    n_pred = 0
    if preds_path.exists():
        _, preds = io.load_predictions(preds_path)
        for (sid, pid), group in sorted(preds.items()):
            n_pred += len(group)
            problems += [f"{sid}/{pid}: {p}" for g in group.values() for p in g.problems()]
    for p in problems:
        print(p)
    print(f"{len(logs)} scenarios, {n_pred} prediction sets, {len(problems)} problems")
    return 0 if not problems else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "train-scenario-nn": cmd_train,
    "evaluate": cmd_evaluate,
    "correlate": cmd_correlate,
    "ablate": cmd_ablate,
    "reproduce": cmd_reproduce,
    "validate": cmd_validate,
}


def _join_dash_values(argv):
    """Let ``--methods -ADE,-FDE`` through: argparse would read ``-ADE`` as a flag."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok == "--methods":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_dash_values(sys.argv[1:] if argv is None else list(argv)))
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (pipeline.StageError, io.FormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
