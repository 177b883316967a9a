"""
``lipbound train``: train a named architecture and save it as a model file.
"""

import argparse
import logging
from pathlib import Path

from lipbound.cli.dependencies import (
    add_common_arguments,
    add_dataset_arguments,
    effective_settings,
    resolve_dataset,
    sibling_path,
    stage_manifest,
)
from lipbound.domain.enums import Split
from lipbound.domain.schemas.training import TrainConfig
from lipbound.repositories.artifacts import ArtifactWriter
from lipbound.repositories.model_store import render_model
from lipbound.services.architectures import build_architecture
from lipbound.services.training_service import TrainingService, evaluate

logger = logging.getLogger(__name__)

LOG_HEADER = ("epoch", "train_loss", "test_acc")


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "train",
        help="Train a network and write a model file",
        description="Mini-batch Adam on the NLL loss; writes model, training log and manifest.",
    )
    parser.add_argument("--arch", default="mlp-default", help="mlp-default, mlp-small, cnn-default or mlp:W,...")
    parser.add_argument("--epochs", type=int, default=4)
    parser.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate")
    parser.add_argument("--batch", type=int, default=128, help="Mini-batch size")
    parser.add_argument(
        "--eval-split", type=Split, choices=list(Split), metavar="{train,test}", default=Split.TEST,
        help="Split evaluated after every epoch",
    )
    parser.add_argument("--no-eval", action="store_true", help="Skip per-epoch evaluation")
    parser.add_argument("--out", type=Path, required=True, help="Model file to write")
    add_dataset_arguments(parser, default_split=Split.TRAIN)
    add_common_arguments(parser)
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    cfg = effective_settings(args)
    train_cfg = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        batch_size=args.batch,
        seed=cfg.seed,
    )

    dataset = resolve_dataset(args, cfg)
    eval_dataset = None
    if not args.no_eval:
        eval_dataset = resolve_dataset(args, cfg, split=args.eval_split, dims=dataset.dims)

    template = build_architecture(args.arch, dataset.dims)
    logger.info(
        "Training %s on %s (%d samples) for %d epoch(s)",
        args.arch, dataset.name, len(dataset), train_cfg.epochs,
    )
    result = TrainingService(train_cfg).train(template, dataset, eval_dataset)

    log_path = sibling_path(args.out, ".train.csv")
    with ArtifactWriter() as artifacts:
        artifacts.write_text(args.out, render_model(result.network))
        artifacts.write_csv(
            log_path,
            LOG_HEADER,
            ((r.epoch, r.train_loss, r.test_acc) for r in result.history),
        )
        stage_manifest(
            artifacts, args.out, "train", args.argv, cfg,
            extra={"arch": args.arch, "train": train_cfg.model_dump(), "dataset": dataset.name},
        )

    if eval_dataset is not None:
        print(f"{eval_dataset.name} accuracy: {evaluate(result.network, eval_dataset):.4f}")
    print(f"model written to {args.out}")
    return 0
