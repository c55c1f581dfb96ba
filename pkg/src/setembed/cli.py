"""Command-line surface: train, toy2d, gradcheck, svmfit, eval, gen-data.

Exit codes are a stable contract: 0 success, 2 usage or config error,
3 numeric abort during training, 4 failed correctness check. Every command
that takes --out echoes its full effective configuration into that directory
so the run can be re-launched byte-for-byte.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import plots
from .config import (
    SCHEMA,
    build_train_config,
    format_config,
    format_value,
    load_config_file,
    resolve_config,
)
from .data import (
    gen_blobs,
    gen_rings,
    load_dataset_csv,
    make_verification_pairs,
    save_dataset_csv,
)
from .errors import NumericAbortError, SetEmbedError
from .evaluation import export_pair_scores, score_pairs, verification_metrics
from .model import forward, load_checkpoint, save_checkpoint
from .svm import fit_linear_svm, svm_kkt_residual
from .trainer import TOY_SELECTORS, grad_check, toy2d_experiment, train

GRADCHECK_TERMS = ("softmax", "max_margin", "center", "pushing")


def _ensure_out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _echo_args(out_dir, pairs):
    lines = [f"{key}={format_value(value)}" for key, value in sorted(pairs)]
    with open(os.path.join(out_dir, "effective_config.txt"), "w",
              encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _load_train_data(values):
    if values["data.train_csv"]:
        train_set = load_dataset_csv(values["data.train_csv"])
    elif values["data.generator"] == "blobs":
        train_set = gen_blobs(values["data.class_count"], values["data.per_class"],
                              values["data.dim"], values["data.spread"],
                              values["data.separation"], values["data.seed"])
    elif values["data.generator"] == "rings":
        train_set = gen_rings(values["data.class_count"], values["data.per_class"],
                              values["data.seed"])
    else:
        raise SetEmbedError(f"unknown generator {values['data.generator']!r}")

    if values["data.eval_csv"]:
        eval_set = load_dataset_csv(values["data.eval_csv"])
    elif values["data.generator"] == "blobs":
        eval_set = gen_blobs(values["data.eval_class_count"],
                             values["data.eval_per_class"], values["data.dim"],
                             values["data.spread"], values["data.separation"],
                             values["data.eval_seed"])
    else:
        eval_set = gen_rings(values["data.eval_class_count"],
                             values["data.eval_per_class"],
                             values["data.eval_seed"])
    pairs = make_verification_pairs(eval_set, values["eval.pair_count"],
                                    values["eval.pair_seed"])
    return train_set, eval_set, pairs


def cmd_train(args, overrides):
    file_values = load_config_file(args.config) if args.config else None
    values = resolve_config(file_values, overrides)
    out_dir = _ensure_out_dir(args.out)
    with open(os.path.join(out_dir, "effective_config.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(format_config(values))

    train_set, eval_set, pairs = _load_train_data(values)
    config = build_train_config(values, train_set.class_count)
    result, log = train(config, train_set, eval_pairs=(eval_set, pairs))

    log.to_csv(os.path.join(out_dir, "metrics.csv"))
    save_checkpoint(result.params, result.head,
                    os.path.join(out_dir, "model.ckpt"),
                    set_params=result.set_params)
    plots.save_loss_curves(os.path.join(out_dir, "loss_curves.svg"), log)
    if log.evals:
        plots.save_eval_curves(os.path.join(out_dir, "eval_metrics.svg"), log)
        final = log.evals[-1]
        eval_emb, _ = forward(result.params, eval_set.features)
        scores, flags = score_pairs(eval_emb, pairs)
        report = verification_metrics(scores, flags)
        with open(os.path.join(out_dir, "final_report.txt"), "w",
                  encoding="utf-8") as fh:
            fh.write(report.as_text() + "\n")
        print(report.as_text())
    print(f"wrote {out_dir}/metrics.csv and {out_dir}/model.ckpt")
    return 0


def cmd_toy2d(args):
    if args.selector not in TOY_SELECTORS:
        print(f"error: selector must be one of {sorted(TOY_SELECTORS)}",
              file=sys.stderr)
        return 2
    out_dir = _ensure_out_dir(args.out)
    _echo_args(out_dir, [("command", "toy2d"), ("selector", args.selector),
                         ("seed", args.seed), ("epochs", args.epochs),
                         ("pretrain_epochs", args.pretrain_epochs)])
    result = toy2d_experiment(args.selector, args.seed, epochs=args.epochs,
                              pretrain_epochs=args.pretrain_epochs)
    labels = result.dataset.labels
    for epoch, snapshot in enumerate(result.snapshots):
        path = os.path.join(out_dir, f"toy2d_{args.selector}_epoch{epoch}.svg")
        plots.save_embedding_scatter(path, snapshot, labels,
                                     title=f"{args.selector} epoch {epoch}")
    csv_path = os.path.join(out_dir, f"toy2d_{args.selector}_final.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        for label, row in zip(labels, result.final_embeddings):
            fh.write(f"{int(label)},{float(row[0])!r},{float(row[1])!r}\n")
    print(f"wrote {len(result.snapshots)} snapshots and {csv_path}")
    return 0


def cmd_gradcheck(args):
    report = grad_check(args.term, args.seed)
    print(f"term={report.term}")
    print(f"max_relative_error={report.max_relative_error!r}")
    print(f"worst_coordinate={report.worst_coordinate}")
    if report.excluded_coordinates:
        print(f"excluded_coordinates={len(report.excluded_coordinates)}")
    return 0 if report.max_relative_error < 1e-6 else 4


def cmd_svmfit(args):
    dataset = load_dataset_csv(args.data)
    if dataset.class_count != 2:
        print("error: svmfit expects exactly 2 classes", file=sys.stderr)
        return 2
    y = np.where(dataset.labels == 0, -1.0, 1.0)  # first-appearing label is -1
    plane = fit_linear_svm(dataset.features, y, C=args.C, tol=args.tol,
                           max_iter=args.max_iter)
    residual = svm_kkt_residual(plane, dataset.features, y, args.C)
    print("w=" + ",".join(repr(float(v)) for v in plane.w))
    print(f"b={plane.b!r}")
    print(f"dual_objective={plane.fit_info.dual_objective!r}")
    print(f"kkt_residual={residual!r}")
    print(f"converged={'true' if plane.fit_info.converged else 'false'}")
    print(f"iterations={plane.fit_info.iterations}")
    return 0


def cmd_eval(args):
    params, head, _ = load_checkpoint(args.checkpoint)
    dataset = load_dataset_csv(args.data)
    pairs = make_verification_pairs(dataset, args.pairs, args.pair_seed)
    embeddings, _ = forward(params, dataset.features)
    scores, flags = score_pairs(embeddings, pairs)
    report = verification_metrics(scores, flags)
    print(report.as_text())
    if args.scores_out:
        export_pair_scores(args.scores_out, scores, flags)
    if args.out:
        out_dir = _ensure_out_dir(args.out)
        _echo_args(out_dir, [("command", "eval"), ("checkpoint", args.checkpoint),
                             ("data", args.data), ("pairs", args.pairs),
                             ("pair_seed", args.pair_seed)])
        with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
            fh.write(report.as_text() + "\n")
    return 0


def cmd_gen_data(args):
    if args.generator == "blobs":
        dataset = gen_blobs(args.classes, args.per_class, args.dim,
                            args.spread, args.separation, args.seed)
    elif args.generator == "rings":
        dataset = gen_rings(args.classes, args.per_class, args.seed)
    else:
        print(f"error: unknown generator {args.generator!r}", file=sys.stderr)
        return 2
    save_dataset_csv(dataset, args.out_file)
    print(f"wrote {dataset.sample_count} samples to {args.out_file}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="setembed",
        description="Joint sample- and set-based embedding learning, desk scale.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write a run directory")
    p_train.add_argument("--config", default=None, help="key=value config file")
    p_train.add_argument("--out", required=True, help="output directory")
    for key in SCHEMA:
        p_train.add_argument(f"--{key}", dest=f"override:{key}", default=None,
                             metavar="VALUE", help=argparse.SUPPRESS)

    p_toy = sub.add_parser("toy2d", help="three-identity 2D embedding experiment")
    p_toy.add_argument("--selector", required=True,
                       help="one of " + ", ".join(sorted(TOY_SELECTORS)))
    p_toy.add_argument("--seed", type=int, default=0)
    p_toy.add_argument("--epochs", type=int, default=12)
    p_toy.add_argument("--pretrain-epochs", type=int, default=6)
    p_toy.add_argument("--out", required=True)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p_grad.add_argument("--term", required=True, choices=GRADCHECK_TERMS)
    p_grad.add_argument("--seed", type=int, default=0)

    p_svm = sub.add_parser("svmfit", help="fit one binary linear SVM from a CSV")
    p_svm.add_argument("--data", required=True, help="2-class dataset CSV")
    p_svm.add_argument("--C", type=float, default=1.0)
    p_svm.add_argument("--tol", type=float, default=1e-4)
    p_svm.add_argument("--max-iter", type=int, default=1000)

    p_eval = sub.add_parser("eval", help="verification metrics for a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True, help="dataset CSV to pair up")
    p_eval.add_argument("--pairs", type=int, default=200)
    p_eval.add_argument("--pair-seed", type=int, default=0)
    p_eval.add_argument("--scores-out", default=None,
                        help="write score,same_identity CSV here")
    p_eval.add_argument("--out", default=None)

    p_gen = sub.add_parser("gen-data", help="write a synthetic dataset CSV")
    p_gen.add_argument("--generator", default="blobs", choices=("blobs", "rings"))
    p_gen.add_argument("--classes", type=int, required=True)
    p_gen.add_argument("--per-class", type=int, required=True)
    p_gen.add_argument("--dim", type=int, default=2)
    p_gen.add_argument("--spread", type=float, default=1.0)
    p_gen.add_argument("--separation", type=float, default=6.0)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out-file", required=True)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            overrides = [(key.split(":", 1)[1], value)
                         for key, value in vars(args).items()
                         if key.startswith("override:") and value is not None]
            return cmd_train(args, overrides)
        if args.command == "toy2d":
            return cmd_toy2d(args)
        if args.command == "gradcheck":
            return cmd_gradcheck(args)
        if args.command == "svmfit":
            return cmd_svmfit(args)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "gen-data":
            return cmd_gen_data(args)
        parser.error(f"unknown command {args.command!r}")
    except NumericAbortError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SetEmbedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
