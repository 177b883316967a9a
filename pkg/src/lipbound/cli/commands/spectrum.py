"""
``lipbound spectrum``: per-frequency singular values of one conv layer.
"""

import argparse
import logging
from pathlib import Path

from lipbound.cli.dependencies import add_common_arguments, effective_settings, stage_manifest
from lipbound.domain.errors import ConfigurationError
from lipbound.domain.models.network import ConvLayer
from lipbound.repositories.artifacts import ArtifactWriter
from lipbound.repositories.model_store import load_model
from lipbound.services.conv_conversion import (
    conv_spectrum_fft,
    conv_to_toeplitz,
    kernel_matrix_norm,
    per_filter_norm,
)
from lipbound.services.linalg import spectral_norm_power

logger = logging.getLogger(__name__)

SPECTRUM_HEADER = ("u", "v", "sigma_index", "sigma")


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "spectrum",
        help="Singular values of a conv layer's circular convolution",
        description="Writes u,v,sigma_index,sigma rows and compares norm readings.",
    )
    parser.add_argument("model", type=Path, help="Model file")
    parser.add_argument("--layer", type=int, required=True, help="Index of a conv layer")
    parser.add_argument(
        "--skip-toeplitz", action="store_true",
        help="Do not build the zero-padded operator for comparison",
    )
    parser.add_argument("--out", type=Path, required=True, help="Spectrum CSV to write")
    add_common_arguments(parser)
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    cfg = effective_settings(args)
    net = load_model(args.model)
    if not 0 <= args.layer < len(net.layers):
        raise ConfigurationError(f"--layer {args.layer} out of range 0..{len(net.layers) - 1}")
    layer = net.layers[args.layer]
    if not isinstance(layer, ConvLayer):
        raise ConfigurationError(f"layer {args.layer} is not a conv layer")
    shape_in = net.layer_shapes()[args.layer][0]

    spectrum = conv_spectrum_fft(layer, shape_in)
    sigmas = spectrum.per_frequency_sigmas
    rows = (
        (u, v, k, float(sigmas[u, v, k]))
        for u in range(sigmas.shape[0])
        for v in range(sigmas.shape[1])
        for k in range(sigmas.shape[2])
    )

    summary = {
        "layer": args.layer,
        "grid": list(spectrum.grid),
        "sigma_max_fft": spectrum.sigma_max,
        "per_filter_norm": per_filter_norm(layer),
        "kernel_matrix_norm": kernel_matrix_norm(layer, seed=cfg.seed),
    }
    if not args.skip_toeplitz:
        operator = conv_to_toeplitz(layer, shape_in)
        estimate = spectral_norm_power(
            operator.matrix, tol=cfg.power_tol, max_iters=cfg.power_max_iters, seed=cfg.seed
        )
        summary["sigma_max_toeplitz"] = estimate.sigma_max

    with ArtifactWriter() as artifacts:
        artifacts.write_csv(args.out, SPECTRUM_HEADER, rows)
        stage_manifest(artifacts, args.out, "spectrum", args.argv, cfg, extra=summary)

    print(f"layer {args.layer} on {shape_in}, circulant grid {spectrum.grid[0]}x{spectrum.grid[1]}")
    print(f"sigma_max (fft, circulant):   {summary['sigma_max_fft']:.6g}")
    if "sigma_max_toeplitz" in summary:
        print(f"sigma_max (toeplitz, power):  {summary['sigma_max_toeplitz']:.6g}")
    print(f"per-filter norm (info):       {summary['per_filter_norm']:.6g}")
    print(f"kernel matrix norm (info):    {summary['kernel_matrix_norm']:.6g}")
    return 0
