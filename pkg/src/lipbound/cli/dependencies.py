"""
Shared plumbing for CLI subcommands: common flags, effective settings,
dataset resolution and run manifests.
"""

import argparse
import logging
from pathlib import Path

from pydantic import ValidationError

from lipbound.config import Settings, settings
from lipbound.domain.enums import Normalization, Split
from lipbound.domain.errors import ConfigurationError
from lipbound.domain.models.dataset import Dataset
from lipbound.domain.models.network import InputDims
from lipbound.domain.schemas.linalg import PowerIterationConfig
from lipbound.domain.schemas.manifest import RunManifest
from lipbound.repositories.artifacts import ArtifactWriter
from lipbound.repositories.datasets import (
    load_cifar10,
    load_dataset,
    load_mnist,
    synthetic_dataset,
)
from lipbound.repositories.model_store import MODEL_SUFFIX

logger = logging.getLogger(__name__)

DATASET_CHOICES = ("mnist", "cifar10", "synthetic")


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags every subcommand accepts."""
    parser.add_argument("--seed", type=int, default=None, help="Run seed (default: LIPBOUND_SEED)")
    parser.add_argument(
        "--threads", type=int, default=None,
        help="Worker threads; 1 forces deterministic single-threaded mode",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")


def add_dataset_arguments(parser: argparse.ArgumentParser, default_split: Split) -> None:
    """Flags selecting and preprocessing a dataset."""
    group = parser.add_argument_group("dataset")
    group.add_argument("--dataset", choices=DATASET_CHOICES, default="mnist")
    group.add_argument(
        "--split", type=Split, choices=list(Split), metavar="{train,test}", default=default_split,
        help=f"Split to load (default: {default_split.value})",
    )
    group.add_argument("--data-root", type=Path, default=None, help="Overrides LIPBOUND_DATA_ROOT")
    group.add_argument("--images", type=Path, default=None, help="Explicit MNIST image IDX file")
    group.add_argument("--labels", type=Path, default=None, help="Explicit MNIST label IDX file")
    group.add_argument(
        "--cifar-batch", type=Path, action="append", default=None,
        help="Explicit CIFAR-10 batch file (repeatable)",
    )
    group.add_argument(
        "--normalize", type=Normalization, choices=list(Normalization), metavar="{scale,standardize}",
        default=Normalization.SCALE,
    )
    group.add_argument("--synthetic-n", type=int, default=200, help="Samples of a synthetic dataset")
    group.add_argument(
        "--synthetic-dims", type=parse_dims, default=None,
        help="CxHxW of a synthetic dataset (default: the model's input dims, or 1x8x8)",
    )


def parse_dims(text: str) -> InputDims:
    """Parse ``CxHxW``."""
    try:
        c, h, w = (int(part) for part in text.lower().split("x"))
        return InputDims(channels=c, height=h, width=w)
    except (ValueError, ValidationError) as e:
        raise argparse.ArgumentTypeError(f"expected CxHxW with positive integers, got {text!r}") from e


def parse_set_sizes(text: str) -> list[int]:
    """Parse a comma-separated list of set sizes."""
    try:
        sizes = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e
    if not sizes:
        raise argparse.ArgumentTypeError("at least one set size is required")
    return sizes


def effective_settings(args: argparse.Namespace) -> Settings:
    """Global settings with the command-line overrides applied."""
    overrides = {}
    for field in ("seed", "threads", "data_root"):
        value = getattr(args, field, None)
        if value is not None:
            overrides[field] = value
    if getattr(args, "verbose", False):
        overrides["log_level"] = "DEBUG"
    try:
        return Settings.model_validate({**settings.model_dump(), **overrides})
    except ValidationError as e:
        raise ConfigurationError(f"invalid option: {e.errors()[0]['msg']}") from e


def power_config(cfg: Settings) -> PowerIterationConfig:
    """Power-iteration settings of a run."""
    return PowerIterationConfig(tol=cfg.power_tol, max_iters=cfg.power_max_iters, seed=cfg.seed)


def resolve_dataset(
    args: argparse.Namespace,
    cfg: Settings,
    split: Split | None = None,
    dims: InputDims | None = None,
) -> Dataset:
    """
    Load the dataset a command asked for.

    Explicit file flags win over the dataset root. Synthetic datasets use
    ``--synthetic-dims``, then ``dims``, then 1x8x8, and a seed derived
    from the run seed and the split.

    Raises:
        DatasetNotFoundError: With the expected path when a file is missing
    """
    split = Split(split or args.split)
    if args.dataset == "synthetic":
        synthetic_dims = args.synthetic_dims or dims or InputDims(channels=1, height=8, width=8)
        offset = 0 if split == Split.TRAIN else 1
        return synthetic_dataset(
            synthetic_dims, args.synthetic_n, seed=cfg.seed + offset, name=f"synthetic-{split.value}"
        )
    if args.dataset == "mnist" and (args.images or args.labels):
        if not (args.images and args.labels):
            raise ConfigurationError("--images and --labels must be given together")
        return load_mnist(args.images, args.labels, split, args.normalize)
    if args.dataset == "cifar10" and args.cifar_batch:
        return load_cifar10(args.cifar_batch, split, args.normalize)
    return load_dataset(args.dataset, split, cfg.data_root, args.normalize)


def sibling_path(out: Path, suffix: str) -> Path:
    """
    Path next to ``out`` sharing its stem.

    ``m.lbn.json`` with suffix ``.train.csv`` gives ``m.train.csv``.
    """
    out = Path(out)
    name = out.name
    for known in (MODEL_SUFFIX, ".json", ".csv"):
        if name.endswith(known) and len(name) > len(known):
            name = name[: -len(known)]
            break
    return out.with_name(name + suffix)


def manifest_path(out: Path) -> Path:
    """``<out>.manifest.json``."""
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def stage_manifest(
    artifacts: ArtifactWriter,
    out: Path,
    command: str,
    argv: list[str],
    cfg: Settings,
    extra: dict | None = None,
) -> Path:
    """Stage the run manifest listing every artifact staged so far."""
    path = manifest_path(out)
    config = cfg.model_dump(mode="json", exclude={"app_name"})
    config.update(extra or {})
    manifest = RunManifest(
        command=command,
        argv=list(argv),
        config=config,
        seed=cfg.seed,
        artifacts=[str(p) for p in artifacts.paths],
    )
    return artifacts.write_json(path, manifest.model_dump(mode="json"))
