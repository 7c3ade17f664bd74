"""Command-line entry point: synth, train, evaluate, project, gradcheck.

Machine-readable results go to standard output as one JSON object per line;
diagnostics go to standard error through logging.
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from .config import build_train_config, get_settings, load_train_config, Mode, TrainConfig
from .data import Dataset, generate_synthetic, load_csv, write_csv
from .errors import DataError, LMDLError, TrainingAborted
from .evaluation import cross_validate, fit_model, holdout_report, point_loo_accuracy
from .gradcheck import check_gradients
from .model_io import load_model, save_model
from .objective import SampleGradients, sample_gradients

logger = logging.getLogger("lmdl")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_TRAINING_ABORTED = 2
EXIT_CHECK_FAILED = 3


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors reported as invalid input (exit 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def emit(payload: dict):
    """Write one JSON line to standard output."""
    sys.stdout.write(json.dumps(payload) + "\n")
    sys.stdout.flush()


def _split_list(values: Optional[list[str]]) -> list[str]:
    out = []
    for v in values or []:
        out.extend(part.strip() for part in v.split(",") if part.strip())
    return out


def _label_arg(value: str) -> str | int:
    return int(value) if value.isdigit() else value


def _load_dataset(args) -> Dataset:
    return load_csv(args.data, _label_arg(args.label), _split_list(args.categorical))


def _add_data_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--data", required=True, help="CSV file with a header row")
    parser.add_argument("--label", default="label", help="label column name or zero-based index")
    parser.add_argument(
        "--categorical", action="append",
        help="categorical column(s) to one-hot encode; repeat or comma-separate",
    )


def _add_train_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="TOML file with a [train] table")
    parser.add_argument("--prototypes-per-class", type=int)
    parser.add_argument("--rank", type=int)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--epsilon-converge", type=float)
    parser.add_argument("--max-epochs", type=int)
    parser.add_argument("--rho", type=float)
    parser.add_argument("--eps-ada", type=float)
    parser.add_argument("--init-noise", type=float)
    parser.add_argument("--seed", type=int, help="defaults to LMDL_SEED or 0")
    parser.add_argument("--mode", choices=[m.value for m in Mode])
    parser.add_argument("--kernel", choices=["linear", "rbf"])
    parser.add_argument("--sigma", type=float)
    parser.add_argument("--sigma-grid", help="'default' or comma-separated widths")
    parser.add_argument("--grid-folds", type=int)
    parser.add_argument("--no-standardize", action="store_true")
    parser.add_argument("--threads", type=int, help="defaults to LMDL_THREADS or 1")


_TRAIN_FIELDS = (
    "prototypes_per_class", "rank", "beta", "epsilon_converge", "max_epochs",
    "rho", "eps_ada", "init_noise", "mode",
)


def _train_config(args) -> TrainConfig:
    """TrainConfig from --config, overridden by explicit flags."""
    fields = load_train_config(args.config) if args.config else {}
    for name in _TRAIN_FIELDS:
        value = getattr(args, name)
        if value is not None:
            fields[name] = value
    fields["seed"] = args.seed if args.seed is not None else fields.get("seed", get_settings().seed)
    if args.no_standardize:
        fields["standardize"] = False

    kernel = dict(fields.get("kernel") or {})
    if args.kernel is not None:
        kernel["kind"] = args.kernel
    if args.sigma is not None:
        kernel["sigma"] = args.sigma
    if args.sigma_grid is not None and args.sigma_grid != "default":
        try:
            kernel["sigma_grid"] = [float(s) for s in _split_list([args.sigma_grid])]
        except ValueError:
            raise DataError(f"invalid --sigma-grid '{args.sigma_grid}'") from None
    if args.grid_folds is not None:
        kernel["grid_folds"] = args.grid_folds
    if kernel or fields.get("mode") == Mode.KERNEL.value:
        fields["kernel"] = kernel
    return build_train_config(**fields)


def _threads(args) -> int:
    return args.threads if args.threads is not None else get_settings().threads


def cmd_synth(args) -> int:
    ds = generate_synthetic(args.kind, args.n, args.noise, args.seed, classes=args.classes)
    write_csv(ds, args.out)
    emit({
        "command": "synth",
        "kind": args.kind,
        "rows": ds.size,
        "features": ds.dim,
        "classes": ds.class_count,
        "out": str(args.out),
    })
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _train_config(args)
    ds = _load_dataset(args)
    started = time.perf_counter()
    model = fit_model(ds, cfg)
    elapsed = time.perf_counter() - started
    save_model(model, args.out)
    logger.info(f"Wrote {args.out}")
    emit({
        "command": "train",
        "out": str(args.out),
        "mode": model.mode.value,
        "prototypes": model.prototype_set.size,
        "rank": model.prototype_set.rank,
        "sigma": model.kernel.sigma if model.kernel is not None else None,
        "initial_objective": model.summary.initial_objective,
        "final_objective": model.summary.final_objective,
        "epochs": model.summary.epochs,
        "converged": model.summary.converged,
        "elapsed_seconds": elapsed,
    })
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.model:
        model = load_model(args.model)
        ds = load_csv(
            args.data,
            _label_arg(args.label),
            _split_list(args.categorical),
            class_names=model.class_names,
            categories=model.categories or None,
        )
        report = holdout_report(ds, model, config={"model": str(args.model)})
    else:
        cfg = _train_config(args)
        ds = _load_dataset(args)
        seed = args.seed if args.seed is not None else cfg.seed
        report = cross_validate(ds, cfg, args.folds, args.repeats, seed, threads=_threads(args))
    payload = report.model_dump(mode="json")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(payload, indent=2))
    logger.info(f"mean error {report.mean_error:.4f} +- {report.std_error:.4f}")
    emit(payload)
    return EXIT_OK


def cmd_project(args) -> int:
    model = load_model(args.model)
    ds = load_csv(
        args.data,
        _label_arg(args.label),
        _split_list(args.categorical),
        class_names=model.class_names,
        categories=model.categories or None,
    )
    if ds.dim != model.input_dim:
        raise DataError(f"dataset has {ds.dim} features, model expects {model.input_dim}")

    ps = model.prototype_set
    points = model.transform(ds.features)
    nearest = model.nearest(ds.features)
    diff = points - ps.positions[:, nearest]
    coords = np.einsum("ndp,dn->np", ps.factors[nearest], diff)

    names = model.class_names or [str(k) for k in range(1, ps.labels.max() + 1)]
    frame = pd.DataFrame(coords, columns=[f"coord_{j + 1}" for j in range(ps.rank)])
    frame["label"] = [names[k - 1] for k in ds.labels]
    frame["predicted"] = [names[k - 1] for k in ps.labels[nearest]]
    frame["prototype"] = nearest
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(args.out, index=False, float_format="%.17g")

    emit({
        "command": "project",
        "out": str(args.out),
        "rows": ds.size,
        "rank": ps.rank,
        "raw_loo_accuracy": point_loo_accuracy(ds.features.T, ds.labels),
        "projected_loo_accuracy": point_loo_accuracy(coords, ds.labels),
    })
    return EXIT_OK


def _corrupted(x, label, ps, cfg) -> SampleGradients:
    g = sample_gradients(x, label, ps, cfg)
    return SampleGradients(
        grad_factor_same=g.grad_factor_same,
        grad_factor_diff=g.grad_factor_diff,
        grad_proto_same=g.grad_proto_same,
        grad_proto_diff=1.5 * g.grad_proto_diff,
        ratio=g.ratio,
        same_index=g.same_index,
        diff_index=g.diff_index,
    )


def cmd_gradcheck(args) -> int:
    if not 1 <= args.rank <= args.dim:
        raise DataError(f"rank must lie in 1..{args.dim}")
    if args.prototypes < 2:
        raise DataError("need at least two prototypes")
    seed = args.seed if args.seed is not None else get_settings().seed
    result = check_gradients(
        dim=args.dim,
        rank=args.rank,
        prototypes=args.prototypes,
        trials=args.trials,
        beta=args.beta,
        seed=seed,
        tolerance=args.tolerance,
        gradient_fn=_corrupted if args.corrupt else sample_gradients,
    )
    emit({"command": "gradcheck", **result.to_dict()})
    if not result.passed:
        logger.error(f"gradient check failed: {result.max_rel_error:.3e} > {args.tolerance:g}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="lmdl", description="Local Mahalanobis distance learning")
    parser.add_argument("--log-level", help="defaults to LMDL_LOG_LEVEL or WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--kind", required=True, help="two_gaussians | concentric_circles | helix")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--noise", type=float)
    p.add_argument("--classes", type=int, default=2, help="helix strands")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("train", help="train a model and write it as JSON")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("evaluate", help="cross-validate, or score a saved model")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--model", help="score this model instead of cross-validating")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", help="also write the report here")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("project", help="export per-point projections under the nearest prototype's metric")
    _add_data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_project)

    p = sub.add_parser("gradcheck", help="compare analytic gradients with finite differences")
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--rank", type=int, default=3)
    p.add_argument("--prototypes", type=int, default=4)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--beta", type=float, default=10.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(handler=cmd_gradcheck)
    return parser


def _configure_logging(level: Optional[str]):
    level = (level or get_settings().log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[list[str]] = None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.log_level)
    if getattr(args, "seed", None) is None and args.command == "synth":
        args.seed = get_settings().seed
    try:
        return args.handler(args)
    except TrainingAborted as e:
        logger.error(f"training aborted: {e}")
        return EXIT_TRAINING_ABORTED
    except (LMDLError, FileNotFoundError, ValidationError) as e:
        logger.error(str(e))
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
