"""
``lipbound empirical``: batched empirical Lipschitz estimation over a dataset.

Output directory layout::

    <out>/convergence.csv          N,avg_emp,max_emp
    <out>/metadata.json            per-N run metadata
    <out>/N<n>/histogram.csv       bin_lo,bin_hi,count
    <out>/N<n>/bounds_series.csv   only with --with-bounds
"""

import argparse
import logging
from pathlib import Path

from lipbound.cli.dependencies import (
    add_common_arguments,
    add_dataset_arguments,
    effective_settings,
    parse_set_sizes,
    power_config,
    resolve_dataset,
    stage_manifest,
)
from lipbound.domain.enums import ConvMethod, EmpiricalMode, Split, StopAt
from lipbound.domain.schemas.empirical import EmpiricalConfig
from lipbound.repositories.artifacts import ArtifactWriter
from lipbound.repositories.model_store import load_model
from lipbound.services.bound_service import BoundService
from lipbound.services.empirical_service import (
    EmpiricalService,
    bound_series,
    build_histogram,
    convergence_table,
)

logger = logging.getLogger(__name__)

CONVERGENCE_HEADER = ("N", "avg_emp", "max_emp")
HISTOGRAM_HEADER = ("bin_lo", "bin_hi", "count")
SERIES_HEADER = ("batch", "emp_max", "running_max", "trivial", "tight")


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "empirical",
        help="Estimate the empirical Lipschitz constant over dataset pairs",
        description="Runs the batched estimator for every set size and writes tables.",
    )
    parser.add_argument("model", type=Path, help="Model file")
    parser.add_argument(
        "--set-size", type=parse_set_sizes, required=True,
        help="Comma-separated batch sizes N, e.g. 50,250,500",
    )
    parser.add_argument(
        "--mode", type=EmpiricalMode, choices=list(EmpiricalMode), metavar="{per-batch,cumulative}",
        default=EmpiricalMode.PER_BATCH_RESET,
    )
    parser.add_argument(
        "--output-space", type=StopAt, choices=list(StopAt), metavar="{logits,full}",
        default=StopAt.LOGITS,
    )
    parser.add_argument("--bins", type=int, default=None, help="Histogram bins (default: 50)")
    parser.add_argument("--max-pairs", type=int, default=None, help="Subsample pairs per batch")
    parser.add_argument(
        "--with-bounds", action="store_true",
        help="Also compute the trivial bound and write per-batch bound series",
    )
    parser.add_argument(
        "--conv-method", type=ConvMethod, choices=list(ConvMethod), metavar="{toeplitz,fft}",
        default=ConvMethod.TOEPLITZ, help="Conv norm method for --with-bounds",
    )
    parser.add_argument("--tight", type=float, default=None, help="External tight bound for the series")
    parser.add_argument("--out", type=Path, required=True, help="Output directory")
    add_dataset_arguments(parser, default_split=Split.TEST)
    add_common_arguments(parser)
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    cfg = effective_settings(args)
    n_bins = args.bins if args.bins is not None else cfg.histogram_bins
    net = load_model(args.model)
    dataset = resolve_dataset(args, cfg, dims=net.input_dims)

    trivial = None
    if args.with_bounds:
        service = BoundService(power_config(cfg), threads=cfg.threads)
        trivial = service.trivial_bound(net, args.conv_method).trivial

    estimator = EmpiricalService(net)
    runs = []
    histograms = {}
    for set_size in args.set_size:
        run_cfg = EmpiricalConfig(
            set_size=set_size,
            mode=args.mode,
            output_space=args.output_space,
            seed=cfg.seed,
            max_pairs_per_batch=args.max_pairs,
        )
        result = estimator.run(dataset, run_cfg)
        if result.all_quotients.size:
            histograms[set_size] = build_histogram(result.all_quotients, n_bins)
        # Quotients are dropped once binned
        runs.append(result.model_copy(update={"all_quotients": None}))

    table = convergence_table(runs)
    out: Path = args.out
    with ArtifactWriter() as artifacts:
        artifacts.write_csv(
            out / "convergence.csv",
            CONVERGENCE_HEADER,
            ((row.set_size, row.avg_emp, row.max_emp) for row in table),
        )
        for run_result in runs:
            run_dir = out / f"N{run_result.set_size}"
            histogram = histograms.get(run_result.set_size)
            if histogram is not None:
                artifacts.write_csv(run_dir / "histogram.csv", HISTOGRAM_HEADER, histogram.rows())
            else:
                logger.warning("N=%d: every pair had zero distance, no histogram", run_result.set_size)
            if args.with_bounds:
                artifacts.write_csv(
                    run_dir / "bounds_series.csv",
                    SERIES_HEADER,
                    (
                        (r.batch, r.emp_max, r.running_max, r.trivial, r.tight)
                        for r in bound_series(run_result, trivial, args.tight)
                    ),
                )
        artifacts.write_json(
            out / "metadata.json",
            {
                "model": str(args.model),
                "dataset": dataset.name,
                "trivial": trivial,
                "tight_external": args.tight,
                "histogram_bins": n_bins,
                "runs": [r.metadata() for r in runs],
            },
        )
        stage_manifest(
            artifacts, out, "empirical", args.argv, cfg,
            extra={"model": str(args.model), "set_sizes": args.set_size, "mode": args.mode.value},
        )

    print("N,avg_emp,max_emp")
    for row in table:
        print(f"{row.set_size},{row.avg_emp:.6g},{row.max_emp:.6g}")
    return 0
