"""Command-line interface.

Subcommands mirror the pipeline stages: ``ingest``, ``split``,
``weights``, ``train``, ``evaluate``, ``experiment``, ``report``.  Every
command exits 0 on success and nonzero with a diagnostic on stderr
otherwise.  Relative input paths that do not exist are also tried under
``$MFRC_DATA_DIR``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import data, experiments, metrics, models, weighting

ENV_DATA_DIR = "MFRC_DATA_DIR"


def resolve_input(path: str) -> Path:
    """Resolve a readable input path, falling back to $MFRC_DATA_DIR."""
    p = Path(path)
    if p.exists():
        return p
    base = os.environ.get(ENV_DATA_DIR)
    if base:
        candidate = Path(base) / path
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"input file not found: {path}")


def _scale_args(parser):
    parser.add_argument("--rating-min", type=float, default=1.0,
                        help="rating scale lower bound for interchange CSVs")
    parser.add_argument("--rating-max", type=float, default=5.0,
                        help="rating scale upper bound for interchange CSVs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfrc",
        description="Reliability-weighted matrix factorization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a MovieLens file into interchange CSV")
    p.add_argument("--input", required=True, help="rating file")
    p.add_argument("--format", required=True, choices=data.FORMATS)
    p.add_argument("--out", required=True, help="interchange CSV to write")

    p = sub.add_parser("split", help="seeded train/test split of an interchange CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--alpha", type=float, required=True, help="training fraction in (0,1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    _scale_args(p)

    p = sub.add_parser("weights", help="dump per-rating reliability weights")
    p.add_argument("--train", required=True, help="training interchange CSV")
    p.add_argument("--norm", default="tanh", choices=weighting.NORMALIZATIONS)
    p.add_argument("--delta", type=float, default=weighting.DEFAULT_DELTA)
    p.add_argument("--out", required=True, help="audit CSV to write")
    _scale_args(p)

    p = sub.add_parser("train", help="train one model and save its snapshot")
    p.add_argument("--model", required=True, choices=models.MODEL_KINDS)
    p.add_argument("--train", required=True, help="training interchange CSV")
    p.add_argument("--out", required=True, help="model snapshot path (JSON)")
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lambda", dest="lam", type=float, default=0.05)
    p.add_argument("--eta", type=float, default=0.005)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--norm", default="tanh", choices=weighting.NORMALIZATIONS)
    p.add_argument("--delta", type=float, default=weighting.DEFAULT_DELTA)
    p.add_argument("--init-sigma", type=float, default=None)
    _scale_args(p)

    p = sub.add_parser("evaluate", help="score a saved model on a test CSV")
    p.add_argument("--model", required=True, help="model snapshot path")
    p.add_argument("--test", required=True, help="test interchange CSV")
    _scale_args(p)

    p = sub.add_parser("experiment", help="run a sweep described by a JSON config")
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", required=True, help="directory for results CSVs")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config's base_seed")

    p = sub.add_parser("report", help="pivot a results CSV into per-metric tables")
    p.add_argument("--rows", required=True, help="results CSV from 'experiment'")
    p.add_argument("--out-dir", required=True)
    return parser


def cmd_ingest(args) -> int:
    ds = data.ingest(resolve_input(args.input), args.format)
    data.write_interchange(ds, args.out)
    print(f"users={ds.num_users} items={ds.num_items} ratings={len(ds)} "
          f"sparsity={data.sparsity(ds):.4f}")
    return 0


def cmd_split(args) -> int:
    ds = data.read_interchange(resolve_input(args.input),
                               args.rating_min, args.rating_max)
    pair = data.split(ds, args.alpha, args.seed)
    data.write_interchange(pair.train, args.train_out)
    data.write_interchange(pair.test, args.test_out)
    print(f"train={len(pair.train)} test={len(pair.test)} alpha={args.alpha} seed={args.seed}")
    return 0


def cmd_weights(args) -> int:
    train = data.read_interchange(resolve_input(args.train),
                                  args.rating_min, args.rating_max)
    rw = weighting.build_weights(train, args.norm, args.delta)
    weighting.write_weight_dump(train, rw, args.out)
    print(f"ratings={len(train)} norm={args.norm} "
          f"w_min={rw.weights.min():.6f} w_max={rw.weights.max():.6f}")
    return 0


def cmd_train(args) -> int:
    train = data.read_interchange(resolve_input(args.train),
                                  args.rating_min, args.rating_max)
    cfg = models.TrainConfig(k=args.k, epochs=args.epochs, lam=args.lam,
                             eta=args.eta, seed=args.seed, norm=args.norm,
                             delta=args.delta, init_sigma=args.init_sigma)
    if args.model == "mfrc":
        rw = weighting.build_weights(train, cfg.norm, cfg.delta)
        model, trace = models.train_mfrc(train, rw, cfg)
    else:
        model, trace = models.TRAINERS[args.model](train, cfg)
    models.save_model(model, args.out)
    print(f"model={args.model} k={cfg.k} epochs={cfg.epochs} "
          f"final_train_rmse={trace.train_rmse[-1]:.6f} saved={args.out}")
    return 0


def cmd_evaluate(args) -> int:
    model = models.load_model(resolve_input(args.model))
    test = data.read_interchange(resolve_input(args.test),
                                 args.rating_min, args.rating_max)
    report = metrics.evaluate(model, test)
    fcp = repr(report.fcp) if report.fcp is not None else ""
    print("model,k,alpha,norm,seed,rmse,fcp,concordant,discordant,skipped,"
          "fallbacks,test_size")
    print(f"{model.kind},{model.k},-,-,{model.seed},{repr(report.rmse)},{fcp},"
          f"{report.concordant},{report.discordant},{report.skipped_pairs},"
          f"{report.fallback_predictions},{report.test_size}")
    return 0


def cmd_experiment(args) -> int:
    spec = experiments.ExperimentSpec.from_file(resolve_input(args.config))
    if args.seed is not None:
        spec.base_seed = args.seed
    spec.dataset = str(resolve_input(spec.dataset))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, aggs, failures = experiments.run_experiment(
        spec, log=lambda msg: print(msg, file=sys.stderr))
    experiments.write_rows_csv(rows, out / "results.csv")
    experiments.write_aggregates_csv(aggs, out / "aggregates.csv")
    if failures:
        with (out / "failures.csv").open("w", encoding="utf-8", newline="") as fh:
            fh.write("cell,error\n")
            for cell, message in failures:
                fh.write(f"\"{cell}\",\"{message}\"\n")
    print(f"rows={len(rows)} aggregates={len(aggs)} failures={len(failures)} out={out}")
    return 0


def cmd_report(args) -> int:
    rows = experiments.read_rows_csv(resolve_input(args.rows))
    written = experiments.write_report(rows, args.out_dir)
    for path in written:
        print(path)
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "split": cmd_split,
    "weights": cmd_weights,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, models.DivergenceError,
            models.SingularMatrixError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
