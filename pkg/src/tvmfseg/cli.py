"""Command-line harness: generate-data, train, evaluate, curves, report.

Exit codes: 0 success, 1 configuration error (bad flags, bad config file,
missing input paths), 2 data error (malformed dataset or checkpoint files,
I/O failures), 3 numerical error (non-finite losses or gradients).
"""

import argparse
import json
import os
import sys

from .config import load_config
from .data import DatasetSpec, generate_dataset, save_dataset
from .errors import (
    ConfigurationError,
    DataError,
    DegenerateInputError,
    DimensionError,
    DomainError,
    NumericalError,
)
from .experiment import (
    emit_similarity_curves,
    evaluate,
    read_record,
    run_training,
    summarize,
    write_report,
)
from .model import save_checkpoint

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; route through the
    # configuration-error path instead so exit codes stay consistent
    def error(self, message):
        raise ConfigurationError(message)


def _build_parser():
    parser = _Parser(prog="tvmfseg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate-data", help="write a synthetic dataset file")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--num-samples", type=int, default=250)
    gen.add_argument("--height", type=int, default=64)
    gen.add_argument("--width", type=int, default=64)
    gen.add_argument("--num-classes", type=int, default=4)
    gen.add_argument("--imbalance-ratio", type=float, default=16.0)
    gen.add_argument("--noise-sigma", type=float, default=0.15)
    gen.add_argument("--seed", type=int, default=0)

    train = sub.add_parser("train", help="run training and write reports")
    train.add_argument("--config", help="INI config file; flags override it")
    train.add_argument("--out", required=True, help="output directory")
    train.add_argument("--loss")
    train.add_argument("--gamma", type=float)
    train.add_argument("--kappa", type=float)
    train.add_argument("--lambda", dest="lam", type=float)
    train.add_argument("--alpha", type=float)
    train.add_argument("--beta", type=float)
    train.add_argument("--focal-gamma", type=float)
    train.add_argument("--epochs", type=int)
    train.add_argument("--batch-size", type=int)
    train.add_argument("--seed", type=int)
    train.add_argument("--train-fraction", type=float)
    train.add_argument("--val-fraction", type=float)
    train.add_argument("--test-fraction", type=float)
    train.add_argument("--augment", action=argparse.BooleanOptionalAction, default=None)
    train.add_argument("--in-channels", type=int)
    train.add_argument("--hidden-width", type=int)
    train.add_argument("--kernel-size", type=int)
    train.add_argument("--lr0", type=float)
    train.add_argument("--momentum", type=float)
    train.add_argument("--weight-decay", type=float)
    train.add_argument("--dataset", dest="dataset_path", help="existing dataset file")
    train.add_argument("--num-samples", type=int)
    train.add_argument("--height", type=int)
    train.add_argument("--width", type=int)
    train.add_argument("--num-classes", type=int)
    train.add_argument("--imbalance-ratio", type=float)
    train.add_argument("--noise-sigma", type=float)
    train.add_argument("--folds", type=int, help="repeat with re-seeded splits")
    train.add_argument("--verbose", "-v", action="count", default=0)

    ev = sub.add_parser("evaluate", help="score a checkpoint on a dataset split")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--split", default="test", choices=("train", "val", "test", "all"))
    ev.add_argument("--seed", type=int, default=0, help="split seed used in training")
    ev.add_argument("--train-fraction", type=float, default=0.8)
    ev.add_argument("--val-fraction", type=float, default=0.1)
    ev.add_argument("--test-fraction", type=float, default=0.1)
    ev.add_argument("--gamma", type=float, default=1.0)
    ev.add_argument("--batch-size", type=int, default=8)
    ev.add_argument("--out", help="directory for metrics.json (optional)")

    curves = sub.add_parser("curves", help="emit similarity-vs-cosine curve table")
    curves.add_argument("--kappas", default="0,2,32,128",
                        help="comma-separated kappa values")
    curves.add_argument("--num-points", type=int, default=101)
    curves.add_argument("--out", required=True, help="output directory")

    rep = sub.add_parser("report", help="summarize a saved run record")
    rep.add_argument("--record", required=True, help="path to record.json")
    rep.add_argument("--out", help="directory for summary.txt and epochs.csv")
    return parser


_TRAIN_OVERRIDE_FIELDS = (
    "loss", "gamma", "kappa", "lam", "alpha", "beta", "focal_gamma", "epochs",
    "batch_size", "seed", "train_fraction", "val_fraction", "test_fraction",
    "augment", "in_channels", "hidden_width", "kernel_size", "lr0", "momentum",
    "weight_decay", "dataset_path", "num_samples", "height", "width",
    "num_classes", "imbalance_ratio", "noise_sigma",
)


def _cmd_generate_data(args):
    spec = DatasetSpec(
        num_samples=args.num_samples,
        height=args.height,
        width=args.width,
        num_classes=args.num_classes,
        imbalance_ratio=args.imbalance_ratio,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
    )
    samples = generate_dataset(spec)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "dataset.tvmfd")
    save_dataset(path, samples, spec.num_classes)
    print(f"wrote {len(samples)} samples to {path}")
    return EXIT_OK


def _require_file(path, what):
    if not os.path.exists(path):
        raise ConfigurationError(f"{what} not found: {path}")


def _cmd_train(args):
    overrides = {
        name: getattr(args, name)
        for name in _TRAIN_OVERRIDE_FIELDS
        if getattr(args, name) is not None
    }
    config = load_config(args.config, overrides)
    if config.dataset_path is not None:
        _require_file(config.dataset_path, "dataset file")
    folds = [None] if args.folds is None else list(range(args.folds))
    if args.folds is not None and args.folds < 1:
        raise ConfigurationError(f"--folds must be >= 1, got {args.folds}")
    for fold in folds:
        out_dir = args.out if fold is None else os.path.join(args.out, f"fold_{fold}")
        record, estimator = run_training(config, fold=fold, verbose=args.verbose)
        os.makedirs(out_dir, exist_ok=True)
        write_report(record, out_dir)
        save_checkpoint(
            os.path.join(out_dir, "model.tvmf"),
            estimator.model_spec_,
            estimator.params_,
        )
        label = "" if fold is None else f"fold {fold}: "
        print(
            f"{label}best epoch {record.best_epoch}, "
            f"test mean DSC {record.test_report['mean_dsc']:.4f}, "
            f"reports in {out_dir}"
        )
    return EXIT_OK


def _cmd_evaluate(args):
    _require_file(args.checkpoint, "checkpoint file")
    _require_file(args.data, "dataset file")
    report = evaluate(
        args.checkpoint,
        args.data,
        args.split,
        (args.train_fraction, args.val_fraction, args.test_fraction),
        args.seed,
        gamma=args.gamma,
        batch_size=args.batch_size,
    )
    payload = json.dumps(report.to_dict(), sort_keys=True, indent=2)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "metrics.json")
        with open(path, "w") as fh:
            fh.write(payload + "\n")
        print(f"wrote {path}")
    print(payload)
    return EXIT_OK


def _cmd_curves(args):
    try:
        kappas = [float(v) for v in args.kappas.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigurationError(f"bad --kappas value {args.kappas!r}: {exc}") from exc
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "curves.csv")
    emit_similarity_curves(kappas, args.num_points, path)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_report(args):
    _require_file(args.record, "record file")
    record = read_record(args.record)
    text = summarize(record)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        summary_path = os.path.join(args.out, "summary.txt")
        with open(summary_path, "w") as fh:
            fh.write(text)
        write_report(record, args.out)
        print(f"wrote {summary_path}")
    print(text, end="")
    return EXIT_OK


_COMMANDS = {
    "generate-data": _cmd_generate_data,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "curves": _cmd_curves,
    "report": _cmd_report,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except DegenerateInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigurationError, DimensionError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
