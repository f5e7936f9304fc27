"""Command-line entry point: simulate, train, eval, gradcheck.

Exit codes: 0 success, 1 validation error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .attention import TriThpModel
from .data_io import load_dataset
from .encodings import DataError
from .evaluator import evaluate
from .gradcheck import run_suite
from .hawkes import default_params, make_synthetic_dataset
from .likelihood import NumericError
from .trainer import TrainConfig, train, write_history


def _add_common(p):
    p.add_argument("--seed", type=int, default=None, help="override the seed")
    p.add_argument("--out", type=Path, required=True, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="trithp")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic Hawkes dataset")
    p.add_argument("--K", type=int, default=5)
    p.add_argument("--seqs", type=int, default=100)
    p.add_argument("--horizon", type=float, default=12.0)
    p.add_argument("--min-len", type=int, default=20)
    p.add_argument("--max-len", type=int, default=100)
    p.add_argument("--mu", type=float, default=0.2)
    p.add_argument("--branching", type=float, default=0.8)
    p.add_argument("--beta", type=float, default=1.0)
    _add_common(p)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--method", choices=["mc", "ni"], default=None)
    p.add_argument("--mc-samples", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--method", choices=["mc", "ni"], default="ni")
    p.add_argument("--mc-samples", type=int, default=20)
    _add_common(p)

    p = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=3, help="number of seeds to run")
    p.add_argument("--tol", type=float, default=1e-4)
    return parser


def cmd_simulate(args):
    params = default_params(K=args.K, mu=args.mu, total_branching=args.branching,
                            beta=args.beta)
    manifest = make_synthetic_dataset(
        params, args.seqs, args.out, seed=args.seed or 0, horizon=args.horizon,
        min_len=args.min_len, max_len=args.max_len,
    )
    print(json.dumps(manifest["counts"]))
    return 0


def cmd_train(args):
    config = TrainConfig.from_json(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.method is not None:
        config.method = args.method
    if args.mc_samples is not None:
        config.mc_samples = args.mc_samples
    train_ds = load_dataset(config.train_path, normalize_times=config.normalize_times)
    dev_ds = load_dataset(config.dev_path, K=train_ds.K,
                          normalize_times=config.normalize_times)
    model = TriThpModel(config.model_config(train_ds.K), seed=config.seed)
    model, history = train(model, train_ds, dev_ds, config, out_dir=args.out)
    write_history(history, Path(args.out) / "history.csv")
    if history:
        best = max(history, key=lambda r: r.dev_ll)
        print(f"best epoch {best.epoch}: dev ll/event {best.dev_ll:.6f}")
    return 0


def cmd_eval(args):
    model = TriThpModel.load(args.checkpoint)
    ds = load_dataset(args.data)
    report = evaluate(model, ds, method=args.method, O=args.mc_samples,
                      seed=args.seed or 0)
    args.out.mkdir(parents=True, exist_ok=True)
    report.to_json(args.out / "report.json")
    report.to_csv_row(args.out / "report.csv", dataset_name=ds.name)
    print(f"ll/event {report.ll_per_event:.6f} acc {report.accuracy:.4f} "
          f"rmse {report.rmse:.6f}")
    return 0


def cmd_gradcheck(args):
    ok = True
    print(f"{'seed':>6} {'method':>6} {'max rel err':>12}  worst parameter")
    for row in run_suite(range(args.seed, args.seed + args.seeds), tol=args.tol):
        ok &= row["passed"]
        print(f"{row['seed']:>6} {row['method']:>6} {row['max_rel_err']:>12.3e}  "
              f"{row['worst_param']}")
    print("PASS" if ok else "FAIL")
    return 0 if ok else 2


def main(argv=None):
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "train": cmd_train,
        "eval": cmd_eval,
        "gradcheck": cmd_gradcheck,
    }
    try:
        return handlers[args.command](args)
    except (DataError, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (NumericError, FloatingPointError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
