"""Command-line entry point.

Commands: synth (generate a dataset), train (full pipeline to a checkpoint),
eval (metrics for a checkpoint on a dataset), saliency (attribution maps),
tune (hyperparameter grid search).  Exit codes: 0 success, 2 usage or config
error, 3 unreadable or malformed data, 4 training divergence, 5 checkpoint
mismatch.  Every command is deterministic given its inputs and seed, and no
command mutates its input dataset directory.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import hypertune, metrics, pipeline, saliency, synthdata, trainer
from .config import PipelineConfig, desk_config, load_config, parse_kv_lines
from .errors import (CheckpointMismatchError, ConfigError, DataError,
                     TrainingDivergedError)

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4
EXIT_MISMATCH = 5


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liftrisk",
                                     description="Lifting-risk classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--profile", choices=("default", "desk"), default="default")
    p.add_argument("--force", action="store_true",
                   help="write into an existing non-empty directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model and write checkpoint + reports")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--config", help="pipeline config file (defaults if omitted)")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--config", help="override the checkpoint's pipeline config")
    p.add_argument("--out", help="metrics CSV path (default: stdout summary only)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("saliency", help="gradient attribution maps for one class")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--class", dest="class_name", required=True,
                   choices=synthdata.RISK_CLASSES)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_saliency)

    p = sub.add_parser("tune", help="grid search over lambda, alpha, dropout")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--grid", required=True, help="grid file (lambdas/alphas/dropouts/repeats)")
    p.add_argument("--config", help="pipeline config file (defaults if omitted)")
    p.add_argument("--out", required=True, help="results CSV path")
    p.set_defaults(func=cmd_tune)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except CheckpointMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


def _load_cli_config(path: str | None, fallback: PipelineConfig | None = None) -> PipelineConfig:
    if path is None:
        return fallback if fallback is not None else PipelineConfig()
    return load_config(path)


def cmd_synth(args) -> int:
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise DataError(f"output directory {out} is not empty (use --force to overwrite)")
    if args.profile == "desk":
        profile = synthdata.desk_profile(seed=args.seed)
        config = desk_config(seed=args.seed)
    else:
        profile = synthdata.DatasetProfile(seed=args.seed)
        config = PipelineConfig(seed=args.seed)
    trials, manifest = synthdata.generate_dataset(profile)
    synthdata.save_dataset(out, trials, manifest)
    (out / "pipeline_config.txt").write_text(
        f"# generated by liftrisk synth --profile {args.profile} --seed {args.seed}\n"
        + "\n".join(config.to_lines()) + "\n")
    counts = profile.class_counts()
    print(f"wrote {len(trials)} trials to {out} "
          f"(low={counts['low']}, medium={counts['medium']}, high={counts['high']})")
    return 0


def _comment_header(config: PipelineConfig) -> list[str]:
    return ["liftrisk pipeline config:"] + config.to_lines()


def cmd_train(args) -> int:
    config = _load_cli_config(args.config)
    trials, manifest = synthdata.load_dataset(args.data)
    result = pipeline.run_training(trials, manifest, config)

    ckpt = Path(args.out)
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    pipeline.save_trained(ckpt, result, config)
    stem = ckpt.parent / ckpt.stem
    comments = _comment_header(config)
    trainer.write_history_csv(f"{stem}_history.csv", result.history, comments)
    metrics.write_report_csv(f"{stem}_metrics.csv", result.cm, comments)
    pipeline.write_manifest_csv(f"{stem}_manifest.csv", result.data.manifest, comments)

    acc = metrics.accuracy(result.cm)
    rk_value = float(metrics.rk(result.cm))
    print(f"trained {config.model_preset}: stopped epoch {result.history.stopped_epoch}, "
          f"restored epoch {result.history.restored_from_epoch}, "
          f"test accuracy {acc:.4f}, R_K {rk_value:.4f}")
    print(f"checkpoint: {ckpt}")
    return 0


def cmd_eval(args) -> int:
    model, ckpt_config, scaler = pipeline.load_trained(args.model)
    config = _load_cli_config(args.config, fallback=ckpt_config)
    trials, manifest = synthdata.load_dataset(args.data)
    cm, _ = pipeline.evaluate_checkpoint(model, config, scaler, trials, manifest)
    if args.out:
        metrics.write_report_csv(args.out, cm, _comment_header(config))
    acc = metrics.accuracy(cm)
    rk_value = float(metrics.rk(cm))
    print(f"test accuracy {acc:.4f}, R_K {rk_value:.4f}")
    for name, cls, value in metrics.report_rows(cm):
        if cls:
            print(f"{name}[{cls}] = {value:.4f}")
    return 0


def cmd_saliency(args) -> int:
    model, config, scaler = pipeline.load_trained(args.model)
    trials, manifest = synthdata.load_dataset(args.data)
    pipeline.check_geometry(model, config)
    data = pipeline.prepare(trials, manifest, config, scaler=scaler)
    outputs = pipeline.saliency_for_class(model, data, args.class_name)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    saliency.export_saliency(outputs.mean_magnitude,
                             out / f"saliency_{args.class_name}_mean.pgm")
    for i, smap in zip(outputs.image_indices, outputs.per_image):
        saliency.export_saliency(smap.magnitude,
                                 out / f"saliency_{args.class_name}_img{i:04d}.pgm")
    saliency.write_attribution_csv(out / f"attribution_{args.class_name}.csv",
                                   outputs.attribution, _comment_header(config))
    top = [outputs.attribution.sensor_names[s] for s in outputs.attribution.ranking[:4]]
    print(f"wrote {len(outputs.per_image)} per-image maps + mean map to {out}")
    print(f"top sensors for {args.class_name}: {', '.join(top)}")
    return 0


_GRID_PARSERS = {
    "lambdas": lambda v: tuple(float(x) for x in v.split(",")),
    "alphas": lambda v: tuple(float(x) for x in v.split(",")),
    "dropouts": lambda v: tuple(float(x) for x in v.split(",")),
    "repeats": int,
}


def load_grid(path, base: trainer.TrainConfig) -> hypertune.GridSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read grid file {path}: {exc}") from exc
    values = parse_kv_lines(text.splitlines(), _GRID_PARSERS, source=str(path))
    try:
        return hypertune.GridSpec(base=base, **values)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def cmd_tune(args) -> int:
    config = _load_cli_config(args.config)
    grid = load_grid(args.grid, pipeline.train_config_of(config))
    trials, manifest = synthdata.load_dataset(args.data)
    data = pipeline.prepare(trials, manifest, config)

    def builder(cfg: trainer.TrainConfig):
        model_config = PipelineConfig(**{**config.__dict__,
                                         "l2_lambda": cfg.l2_lambda,
                                         "learning_rate": cfg.learning_rate,
                                         "dropout_rate": cfg.dropout_rate,
                                         "seed": cfg.seed})
        return pipeline.build_model(model_config, data.images.shape[1:])

    results = hypertune.grid_search(
        grid,
        data.images[data.train_idx], data.labels[data.train_idx],
        data.images[data.test_idx], data.labels[data.test_idx],
        builder)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    hypertune.write_results_csv(out, results, _comment_header(config))
    for i, cell in enumerate(results):
        if cell.history is not None:
            trainer.write_history_csv(out.parent / f"{out.stem}_cell{i:03d}_history.csv",
                                      cell.history,
                                      [f"cell {i}: l2_lambda={cell.l2_lambda!r} "
                                       f"learning_rate={cell.learning_rate!r} "
                                       f"dropout_rate={cell.dropout_rate!r} seed={cell.seed}"])
    best = hypertune.ranked(results)
    if best:
        b = best[0]
        print(f"best cell: l2_lambda={b.l2_lambda!r} learning_rate={b.learning_rate!r} "
              f"dropout_rate={b.dropout_rate!r} R_K={b.rk:.4f}")
    print(f"results: {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
