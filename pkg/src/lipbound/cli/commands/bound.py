"""
``lipbound bound``: trivial Lipschitz bound of a model, with optional gaps.
"""

import argparse
import logging
from pathlib import Path

from lipbound.cli.dependencies import (
    add_common_arguments,
    effective_settings,
    power_config,
    stage_manifest,
)
from lipbound.domain.enums import ConvMethod
from lipbound.repositories.artifacts import ArtifactWriter
from lipbound.repositories.model_store import load_model
from lipbound.services.bound_service import BoundService, NonConvergenceError, with_gaps

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "bound",
        help="Compute the trivial bound of a model",
        description="Product of per-layer spectral norms, with optional tight/empirical gaps.",
    )
    parser.add_argument("model", type=Path, help="Model file")
    parser.add_argument(
        "--conv-method", type=ConvMethod, choices=list(ConvMethod), metavar="{toeplitz,fft}",
        default=ConvMethod.TOEPLITZ,
    )
    parser.add_argument("--tight", type=float, default=None, help="External tight bound")
    parser.add_argument(
        "--empirical-max", type=float, default=None,
        help="Empirical maximum to compute the gap ratios against",
    )
    parser.add_argument(
        "--force", action="store_true",
        help="Report non-converged power iterations instead of failing",
    )
    parser.add_argument("--out", type=Path, required=True, help="Bound report JSON to write")
    add_common_arguments(parser)
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    cfg = effective_settings(args)
    net = load_model(args.model)
    service = BoundService(power_config(cfg), threads=cfg.threads)

    try:
        report = service.trivial_bound(net, args.conv_method, force=args.force)
    except NonConvergenceError as e:
        logger.error("Per-layer norms so far: %s", [entry.to_dict() for entry in e.report.per_layer])
        raise
    report = with_gaps(report, args.tight, args.empirical_max)

    with ArtifactWriter() as artifacts:
        artifacts.write_json(args.out, report.to_dict())
        stage_manifest(
            artifacts, args.out, "bound", args.argv, cfg,
            extra={"model": str(args.model), "conv_method": args.conv_method.value},
        )

    for line in report.summary_lines():
        print(line)
    return 0
