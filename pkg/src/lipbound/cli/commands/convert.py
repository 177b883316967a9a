"""
``lipbound convert``: replace conv layers by their dense Toeplitz operators.
"""

import argparse
import logging
from pathlib import Path

from lipbound.cli.dependencies import (
    add_common_arguments,
    effective_settings,
    sibling_path,
    stage_manifest,
)
from lipbound.repositories.artifacts import ArtifactWriter
from lipbound.repositories.model_store import load_model, render_model
from lipbound.services.conv_conversion import (
    ConversionFailureError,
    contains_conv,
    convert_network,
)
from lipbound.services.network_service import max_forward_deviation

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "convert",
        help="Convert a CNN model to an equivalent dense-only model",
        description="Writes the dense-only model; --check verifies forward equivalence.",
    )
    parser.add_argument("model", type=Path, help="Model file")
    parser.add_argument(
        "--check", type=int, default=0, metavar="N",
        help="Compare outputs on N seeded random inputs",
    )
    parser.add_argument("--out", type=Path, required=True, help="Converted model file to write")
    add_common_arguments(parser)
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    cfg = effective_settings(args)
    net = load_model(args.model)
    if not contains_conv(net):
        logger.info("%s has no conv layers; writing an unchanged copy", args.model)
    converted = convert_network(net)

    report = None
    if args.check > 0:
        deviation = max_forward_deviation(net, converted, args.check, seed=cfg.seed)
        report = {
            "inputs": args.check,
            "seed": cfg.seed,
            "max_deviation": deviation,
            "tolerance": cfg.conversion_tolerance,
        }
        print(f"max deviation over {args.check} inputs: {deviation:.3e}")
        if deviation > cfg.conversion_tolerance:
            raise ConversionFailureError(
                f"converted model deviates by {deviation:.3e} "
                f"(tolerance {cfg.conversion_tolerance:.1e})"
            )

    with ArtifactWriter() as artifacts:
        artifacts.write_text(args.out, render_model(converted))
        if report is not None:
            artifacts.write_json(sibling_path(args.out, ".check.json"), report)
        stage_manifest(
            artifacts, args.out, "convert", args.argv, cfg,
            extra={"model": str(args.model), "check": args.check},
        )

    print(f"converted model written to {args.out}")
    return 0
