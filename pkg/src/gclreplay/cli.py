"""Command-line entry points.

Subcommands:
  run               one method on one dataset, writes a RunReport JSON
  ablate            the full component grid under one config
  validate-dataset  check a dataset directory and print its counts

Exit codes: 0 ok, 2 configuration error, 3 dataset-format error,
4 numerical failure (non-finite loss).
"""

from __future__ import annotations

import argparse
import sys
import time

from .config import METHODS, ExperimentConfig
from .datasets import load_dataset, validate_dataset
from .errors import ConfigError, DatasetFormatError, NumericalError
from .experiments import run_ablation
from .reports import (
    build_comparison_report,
    build_report,
    format_summary_table,
    write_report_json,
)
from .streams import SplitSpec, build_task_stream
from .trainer import run_experiment

EXIT_CONFIG = 2
EXIT_DATASET = 3
EXIT_NUMERIC = 4


def _add_run_options(p: argparse.ArgumentParser) -> None:
    # every flag defaults to None so file values survive unless overridden
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--dataset", help="dataset directory")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--buffer", type=int, dest="buffer_size",
                   help="replay buffer capacity")
    p.add_argument("--beta", type=float)
    p.add_argument("--lambda", type=float, dest="lambda_",
                   help="link-vs-label loss mix")
    p.add_argument("--n-add", type=int, dest="n_add")
    p.add_argument("--k-cand", type=int, dest="k_cand")
    p.add_argument("--tau", type=float)
    p.add_argument("--r", type=float, help="coverage radius factor")
    p.add_argument("--sl-ratio", type=float, dest="sl_ratio")
    p.add_argument("--classes-per-task", type=int, dest="classes_per_task")
    p.add_argument("--num-tasks", type=int, dest="num_tasks")
    p.add_argument("--hidden-dim", type=int, dest="hidden_dim")
    p.add_argument("--num-layers", type=int, dest="num_layers")
    p.add_argument("--heads", type=int)
    p.add_argument("--epochs-cls", type=int, dest="epochs_cls")
    p.add_argument("--epochs-lp", type=int, dest="epochs_lp")
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--seeds", type=int, help="number of seeds")
    p.add_argument("--seed-base", type=int, dest="seed_base")
    p.add_argument("--output", help="report path")


_CONFIG_FIELDS = (
    "dataset", "method", "buffer_size", "beta", "lambda_", "n_add", "k_cand",
    "tau", "r", "sl_ratio", "classes_per_task", "num_tasks", "hidden_dim",
    "num_layers", "heads", "epochs_cls", "epochs_lp", "learning_rate",
    "seeds", "seed_base", "output",
)


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    base = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    cfg = base.override(**{f: getattr(args, f) for f in _CONFIG_FIELDS})
    if not cfg.dataset:
        raise ConfigError("no dataset given (flag --dataset or config key 'dataset')")
    return cfg.validate()


def _load_stream(cfg: ExperimentConfig):
    graph, manifest = load_dataset(cfg.dataset)
    stream = build_task_stream(graph, cfg.classes_per_task, cfg.num_tasks,
                               SplitSpec(seed=cfg.seed_base))
    info = {
        "name": manifest["name"],
        "num_nodes": graph.num_nodes,
        "num_edges": graph.num_edges,
        "num_features": graph.feature_dim,
        "num_classes": int(manifest["num_classes"]),
    }
    return stream, info


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    stream, info = _load_stream(cfg)
    result = run_experiment(stream, cfg, cfg.method)
    report = build_report(cfg.as_dict(), info, result)
    write_report_json(report, cfg.output)
    print(format_summary_table([result]))
    print(f"report written to {cfg.output}")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    stream, info = _load_stream(cfg)
    started = time.perf_counter()
    rows = run_ablation(stream, cfg)
    report = build_comparison_report(cfg.as_dict(), info, rows,
                                     time.perf_counter() - started)
    write_report_json(report, cfg.output)
    print(format_summary_table(rows))
    print(f"comparison written to {cfg.output}")
    return 0


def cmd_validate_dataset(args: argparse.Namespace) -> int:
    counts = validate_dataset(args.path)
    for key in ("name", "num_nodes", "num_edges", "num_features", "num_classes"):
        print(f"{key}: {counts[key]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gclreplay",
        description="Graph continual-learning benchmark with replay "
                    "selection and structure refinement",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one method, write a report")
    _add_run_options(run_p)
    run_p.set_defaults(func=cmd_run)

    abl_p = sub.add_parser("ablate", help="run the component ablation grid")
    _add_run_options(abl_p)
    abl_p.set_defaults(func=cmd_ablate)

    val_p = sub.add_parser("validate-dataset", help="check a dataset directory")
    val_p.add_argument("path")
    val_p.set_defaults(func=cmd_validate_dataset)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetFormatError as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_DATASET
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
