"""Command-line surface: train, predict, generate, and cross-validate.

Exit codes: 0 success, 2 usage, 3 I/O failure, 4 solver failure.
Metrics are flat ``key=value`` text; sweep results can additionally be
appended to a tab-separated table for side-by-side comparisons.
"""

import argparse
import itertools
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .admm import EnkParams
from .data import (DataFormatError, SyntheticSpec, generate_knowledge_synthetic,
                   preset_spec, read_knowledge, read_libsvm, write_knowledge,
                   write_libsvm, write_metadata)
from .driver import (MODE_ADMM_ONLY, MODE_HIPAD, MODE_HIPAD_ENK, TrainConfig,
                     TrainingError, train)
from .linalg import NotPositiveDefiniteError, PcgBreakdownError
from .model import accuracy_percent, read_model, write_model
from .qp import DegenerateModelError, SvmIpmConfig

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_SOLVER = 4

_SOLVER_ERRORS = (TrainingError, PcgBreakdownError, NotPositiveDefiniteError,
                  DegenerateModelError, FloatingPointError)


@dataclass
class RunMetrics:
    accuracy: float
    support_size: int
    phase1_iters: int
    phase2_iters: int
    phase1_time: float
    phase2_time: float
    total_time: float
    train_accuracy: float | None = None
    config: dict = field(default_factory=dict)

    def lines(self):
        out = [f"accuracy={self.accuracy!r}"]
        if self.train_accuracy is not None:
            out.append(f"train_accuracy={self.train_accuracy!r}")
        out.append(f"support_size={self.support_size}")
        out.append(f"phase1_iters={self.phase1_iters}")
        out.append(f"phase2_iters={self.phase2_iters}")
        out.append(f"phase1_time={self.phase1_time:.3f}")
        out.append(f"phase2_time={self.phase2_time:.3f}")
        out.append(f"total_time={self.total_time:.3f}")
        for key in sorted(self.config):
            out.append(f"config.{key}={self.config[key]}")
        return out


def write_metrics(metrics, path):
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(metrics.lines()) + "\n")


def read_metrics(path):
    """Metrics parse back losslessly as a key -> string mapping."""
    out = {}
    with open(path, "r", encoding="ascii") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            out[key] = value
    return out


def append_table_row(path, dataset, mode, accuracy, support_size, cpu_s):
    header = "dataset\tmode\taccuracy\tsupport_size\tcpu_s\n"
    fresh = not os.path.exists(path)
    with open(path, "a", encoding="ascii") as fh:
        if fresh:
            fh.write(header)
        fh.write(f"{dataset}\t{mode}\t{accuracy:.2f}\t{support_size}\t{cpu_s:.3f}\n")


def _add_solver_flags(p):
    p.add_argument("--lambda1", type=float, default=0.06, help="L1 weight")
    p.add_argument("--lambda2", type=float, default=1.0, help="ridge weight")
    p.add_argument("--rho", type=float, default=70.0,
                   help="shared knowledge penalty weight")
    p.add_argument("--mu", type=float, default=1.0,
                   help="shared augmented-Lagrangian penalty")
    p.add_argument("--eps1", type=float, default=1e-5)
    p.add_argument("--eps2", type=float, default=1e-3)
    p.add_argument("--eps-tol", type=float, default=1e-4,
                   help="phase-1 transition threshold")
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--svm-cost", type=float, default=None,
                   help="phase-2 hinge penalty (default 1/(N*lambda2))")
    p.add_argument("--kkt-tol", type=float, default=1e-8)
    p.add_argument("--ipm-max-iter", type=int, default=100)
    p.add_argument("--mode", choices=[MODE_HIPAD, MODE_HIPAD_ENK, MODE_ADMM_ONLY],
                   default=MODE_HIPAD)
    p.add_argument("--seed", type=int, default=0,
                   help="echoed into metrics; solvers are deterministic")


def _config_from_args(args):
    params = EnkParams.shared(rho=args.rho, knowledge_mu=args.mu,
                              lambda1=args.lambda1, lambda2=args.lambda2,
                              mu1=args.mu, mu2=args.mu,
                              eps1=args.eps1, eps2=args.eps2,
                              eps_tol=args.eps_tol, max_iter=args.max_iter)
    ipm = SvmIpmConfig(svm_cost=args.svm_cost, kkt_tol=args.kkt_tol,
                       max_iter=args.ipm_max_iter)
    return TrainConfig(admm=params, ipm=ipm,
                       skip_phase2=args.mode == MODE_ADMM_ONLY)


def _config_echo(args):
    keys = ("lambda1", "lambda2", "rho", "mu", "eps1", "eps2", "eps_tol",
            "max_iter", "svm_cost", "kkt_tol", "ipm_max_iter", "mode", "seed")
    return {k: getattr(args, k) for k in keys}


def _load_training_inputs(args):
    knowledge = read_knowledge(args.knowledge) if args.knowledge else None
    n_features = args.features
    if knowledge is not None and (n_features is None
                                  or n_features < knowledge.n_features):
        n_features = knowledge.n_features
    data = read_libsvm(args.data, n_features=n_features)
    if knowledge is not None and knowledge.n_features < data.n_features:
        raise DataFormatError(
            f"knowledge covers {knowledge.n_features} features but the data "
            f"has {data.n_features}")
    return data, knowledge


def cmd_train(args):
    data, knowledge = _load_training_inputs(args)
    if args.mode == MODE_HIPAD_ENK and knowledge is None:
        raise ValueError("--mode hipad-enk requires --knowledge")
    if args.mode == MODE_HIPAD:
        knowledge = None
    config = _config_from_args(args)

    t0 = time.perf_counter()
    model = train(data, config, knowledge=knowledge)
    total = time.perf_counter() - t0

    train_acc = accuracy_percent(model, data)
    if args.test_data:
        test = read_libsvm(args.test_data, n_features=data.n_features)
        accuracy = accuracy_percent(model, test)
    else:
        accuracy = train_acc
    write_model(model, args.model_out)
    metrics = RunMetrics(accuracy=accuracy, support_size=model.support_size,
                         phase1_iters=model.phase1_iters,
                         phase2_iters=model.phase2_iters,
                         phase1_time=model.phase1_time,
                         phase2_time=model.phase2_time,
                         total_time=total, train_accuracy=train_acc,
                         config=_config_echo(args))
    if args.metrics_out:
        write_metrics(metrics, args.metrics_out)
    if args.table_out:
        name = args.dataset_name or os.path.splitext(os.path.basename(args.data))[0]
        append_table_row(args.table_out, name, args.mode, accuracy,
                         model.support_size, total)
    print(f"accuracy {accuracy:.2f}% support {model.support_size} "
          f"time {total:.3f}s ({model.provenance})")
    return EXIT_OK


def cmd_predict(args):
    model = read_model(args.model)
    data = read_libsvm(args.data, allow_unlabeled=True)
    labels = model.predict(data.X)
    lines = ["+1" if v > 0 else "-1" for v in labels]
    if data.y is not None:
        acc = 100.0 * float(np.mean(labels == data.y))
        lines.append(f"accuracy={acc!r}")
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_generate(args):
    if args.preset:
        spec = preset_spec(args.preset, seed=args.seed)
    else:
        if not (args.n_train and args.n_test and args.features):
            raise ValueError("either --preset or --n-train/--n-test/--features")
        spec = SyntheticSpec(n_train=args.n_train, n_test=args.n_test,
                             n_features=args.features,
                             block_len=args.block_len, seed=args.seed)
    os.makedirs(args.outdir, exist_ok=True)
    train_set, test_set, knowledge = generate_knowledge_synthetic(spec)
    write_libsvm(train_set, os.path.join(args.outdir, "train.libsvm"))
    write_libsvm(test_set, os.path.join(args.outdir, "test.libsvm"))
    write_knowledge(knowledge, os.path.join(args.outdir, "knowledge.txt"))
    write_metadata(spec, os.path.join(args.outdir, "metadata.txt"))
    print(f"wrote train/test/knowledge/metadata under {args.outdir}")
    return EXIT_OK


def _parse_grid(text):
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ValueError(f"malformed grid {text!r}") from None
    if not values:
        raise ValueError(f"empty grid {text!r}")
    return values


def cmd_cv(args):
    data, knowledge = _load_training_inputs(args)
    if args.mode == MODE_HIPAD_ENK and knowledge is None:
        raise ValueError("--mode hipad-enk requires --knowledge")
    if args.mode == MODE_HIPAD:
        knowledge = None
    n = data.n_samples
    if args.folds < 2 or args.folds > n:
        raise ValueError(f"fold count must be in [2, {n}]")
    lambda1s = _parse_grid(args.lambda1_grid)
    lambda2s = _parse_grid(args.lambda2_grid)
    rhos = _parse_grid(args.rho_grid)

    rng = np.random.default_rng(args.seed)
    perm = rng.permutation(n)
    folds = [perm[i::args.folds] for i in range(args.folds)]

    rows = []
    for lam1, lam2, rho in itertools.product(lambda1s, lambda2s, rhos):
        args.lambda1, args.lambda2, args.rho = lam1, lam2, rho
        config = _config_from_args(args)
        accs = []
        for heldout in folds:
            mask = np.ones(n, dtype=bool)
            mask[heldout] = False
            model = train(data.select_rows(np.nonzero(mask)[0]), config,
                          knowledge=knowledge)
            accs.append(accuracy_percent(model, data.select_rows(heldout)))
        rows.append(((lam1, lam2, rho), float(np.mean(accs))))
        print(f"lambda1={lam1} lambda2={lam2} rho={rho} "
              f"mean_accuracy={rows[-1][1]:.2f}")

    best, best_acc = max(rows, key=lambda r: r[1])
    print(f"best lambda1={best[0]} lambda2={best[1]} rho={best[2]} "
          f"mean_accuracy={best_acc:.2f}")
    if args.table_out:
        for (lam1, lam2, rho), acc in rows:
            append_table_row(args.table_out,
                             f"cv(l1={lam1},l2={lam2},rho={rho})", args.mode,
                             acc, -1, 0.0)
    if args.retrain:
        if not args.model_out:
            raise ValueError("--retrain requires --model-out")
        args.lambda1, args.lambda2, args.rho = best
        model = train(data, _config_from_args(args), knowledge=knowledge)
        write_model(model, args.model_out)
        print(f"retrained model written to {args.model_out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hybridsvm",
        description="Two-phase sparse linear SVM trainer (ADMM + interior point)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a LIBSVM file")
    p.add_argument("--data", required=True)
    p.add_argument("--test-data", default=None)
    p.add_argument("--knowledge", default=None)
    p.add_argument("--features", type=int, default=None,
                   help="override the feature count inferred from the data")
    _add_solver_flags(p)
    p.add_argument("--model-out", required=True)
    p.add_argument("--metrics-out", default=None)
    p.add_argument("--table-out", default=None,
                   help="append a dataset/accuracy/support/time row")
    p.add_argument("--dataset-name", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write one label per input line")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("generate", help="write a synthetic benchmark")
    p.add_argument("--preset", choices=["ksvm-s-10k", "ksvm-s-50k"], default=None)
    p.add_argument("--n-train", type=int, default=None)
    p.add_argument("--n-test", type=int, default=None)
    p.add_argument("--features", type=int, default=None)
    p.add_argument("--block-len", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("cv", help="k-fold cross-validation over a grid")
    p.add_argument("--data", required=True)
    p.add_argument("--knowledge", default=None)
    p.add_argument("--features", type=int, default=None)
    p.add_argument("--folds", type=int, required=True)
    p.add_argument("--lambda1-grid", default="0.06")
    p.add_argument("--lambda2-grid", default="1.0")
    p.add_argument("--rho-grid", default="70.0")
    _add_solver_flags(p)
    p.add_argument("--retrain", action="store_true")
    p.add_argument("--model-out", default=None)
    p.add_argument("--table-out", default=None)
    p.set_defaults(func=cmd_cv)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _SOLVER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DataFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
