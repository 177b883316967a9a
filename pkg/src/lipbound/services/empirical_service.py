"""
Batched empirical Lipschitz estimation over a dataset.

The dataset is shuffled with a seed and cut into full batches of N
samples. Within every batch all unordered pairs (x, y) are scored with
‖f(x) − f(y)‖₂ / ‖x − y‖₂ and the batch maximum is recorded. Network
outputs are computed once per image and reused for every pair.
"""

import logging
from typing import Sequence

import numpy as np

from lipbound.domain.enums import EmpiricalMode
from lipbound.domain.errors import ConfigurationError, DomainError, ShapeError
from lipbound.domain.models.dataset import Dataset
from lipbound.domain.models.network import Network
from lipbound.domain.schemas.empirical import (
    BoundSeriesRow,
    ConvergenceRow,
    EmpiricalConfig,
    EmpiricalRun,
    Histogram,
)
from lipbound.services.network_service import forward

logger = logging.getLogger(__name__)


def row_norms(diffs: np.ndarray) -> np.ndarray:
    """Euclidean norm of every row of a 2-D array."""
    return np.sqrt(np.sum(diffs * diffs, axis=1))


class EmpiricalService:
    """Runs the batched estimator for one network."""

    def __init__(self, net: Network):
        self.net = net

    def run(self, dataset: Dataset, cfg: EmpiricalConfig, literal: bool = False) -> EmpiricalRun:
        """
        Empirical Lipschitz estimation over ``dataset``.

        Args:
            dataset: Samples matching the network input dims
            cfg: Run configuration
            literal: Recompute f for both images of every pair instead of
                using cached outputs (reference path, same quotients)

        Returns:
            EmpiricalRun

        Raises:
            ConfigurationError: If the dataset yields no full batch
            ShapeError: If dataset and network dims differ
        """
        if dataset.dims != self.net.input_dims:
            raise ShapeError(
                f"dataset dims {dataset.dims} do not match network input {self.net.input_dims}"
            )
        if len(dataset) < 2:
            raise ConfigurationError("empirical estimation needs at least 2 samples")
        n_batches = len(dataset) // cfg.set_size
        if n_batches == 0:
            raise ConfigurationError(
                f"set size N={cfg.set_size} exceeds dataset size {len(dataset)}"
            )

        rng = np.random.default_rng(cfg.seed)
        order = rng.permutation(len(dataset))[: n_batches * cfg.set_size]
        batches = order.reshape(n_batches, cfg.set_size)
        flat = dataset.flat_images()

        per_batch_max: list[float] = []
        retained: list[np.ndarray] = []
        running_max = 0.0
        total_sum = 0.0
        total_count = 0
        pairs_evaluated = 0
        skipped = 0

        for batch_index, members in enumerate(batches):
            first, second = self._pairs(cfg, rng)
            x = flat[members]
            if literal:
                quotients, zero = self._literal_quotients(x, first, second, cfg)
            else:
                outputs = np.stack([forward(self.net, image, cfg.output_space) for image in x])
                quotients, zero = _pair_quotients(x, outputs, first, second)

            pairs_evaluated += len(first)
            skipped += zero
            batch_max = float(quotients.max()) if quotients.size else 0.0
            total_sum += float(quotients.sum())
            total_count += quotients.size
            if cfg.retain_quotients:
                retained.append(quotients)

            if cfg.mode == EmpiricalMode.CUMULATIVE:
                running_max = max(running_max, batch_max)
                per_batch_max.append(running_max)
            else:
                per_batch_max.append(batch_max)
            logger.debug(
                "Batch %d/%d: max=%.6g skipped=%d", batch_index + 1, n_batches, batch_max, zero
            )

        if skipped:
            logger.info("Skipped %d zero-distance pairs", skipped)

        all_quotients = None
        if cfg.retain_quotients:
            all_quotients = np.concatenate(retained)
            retained.clear()
            all_quotients.sort()

        run = EmpiricalRun(
            set_size=cfg.set_size,
            mode=cfg.mode,
            output_space=cfg.output_space,
            seed=cfg.seed,
            per_batch_max=per_batch_max,
            global_max=max(per_batch_max),
            avg_of_batch_values=float(np.mean(per_batch_max)),
            avg_all_quotients=total_sum / total_count if total_count else None,
            all_quotients=all_quotients,
            pairs_evaluated=pairs_evaluated,
            skipped_identical=skipped,
        )
        logger.info(
            "N=%d: %d batches, avg %.4f, max %.4f",
            cfg.set_size, run.batches, run.avg_of_batch_values, run.global_max,
        )
        return run

    def _pairs(self, cfg: EmpiricalConfig, rng: np.random.Generator):
        """Index pairs (i < j) within a batch, optionally subsampled."""
        first, second = np.triu_indices(cfg.set_size, k=1)
        limit = cfg.max_pairs_per_batch
        if limit is not None and limit < len(first):
            keep = np.sort(rng.choice(len(first), size=limit, replace=False))
            first, second = first[keep], second[keep]
        return first, second

    def _literal_quotients(self, x, first, second, cfg: EmpiricalConfig):
        """Pair quotients recomputing both network outputs for every pair."""
        quotients = []
        zero = 0
        for i, j in zip(first, second):
            image1, image2 = x[i], x[j]
            output1 = forward(self.net, image1, cfg.output_space)
            output2 = forward(self.net, image2, cfg.output_space)
            distance = row_norms((image2 - image1)[np.newaxis])[0]
            if distance == 0.0:
                zero += 1
                continue
            quotients.append(row_norms((output2 - output1)[np.newaxis])[0] / distance)
        return np.asarray(quotients, dtype=np.float64), zero


def _pair_quotients(x, outputs, first, second, block: int = 8192):
    """Pair quotients from cached outputs, processed in blocks of pairs."""
    chunks = []
    zero = 0
    for start in range(0, len(first), block):
        i = first[start:start + block]
        j = second[start:start + block]
        distances = row_norms(x[j] - x[i])
        numerators = row_norms(outputs[j] - outputs[i])
        nonzero = distances > 0.0
        zero += int((~nonzero).sum())
        chunks.append(numerators[nonzero] / distances[nonzero])
    if not chunks:
        return np.empty(0), zero
    return np.concatenate(chunks), zero


def estimate_lipschitz(
    net: Network,
    dataset: Dataset,
    cfg: EmpiricalConfig,
    literal: bool = False,
) -> EmpiricalRun:
    """Batched empirical estimation; see :meth:`EmpiricalService.run`."""
    return EmpiricalService(net).run(dataset, cfg, literal=literal)


def convergence_table(runs: Sequence[EmpiricalRun]) -> list[ConvergenceRow]:
    """
    Rows of (N, average of batch values, global maximum), ordered by N.

    Args:
        runs: At least one run

    Returns:
        Table rows
    """
    if not runs:
        raise DomainError("convergence table needs at least one run")
    return [
        ConvergenceRow(set_size=run.set_size, avg_emp=run.avg_of_batch_values, max_emp=run.global_max)
        for run in sorted(runs, key=lambda r: r.set_size)
    ]


def build_histogram(
    values: Sequence[float] | np.ndarray,
    n_bins: int,
    value_range: tuple[float, float] | None = None,
) -> Histogram:
    """
    Equal-width histogram.

    Bins span [min, max] of the values unless ``value_range`` is given;
    values equal to the upper edge fall in the last bin and values outside
    an explicit range are not counted. A degenerate range is widened to
    [v − ε, v + ε].

    Raises:
        DomainError: On empty input, ``n_bins < 1`` or an inverted range
    """
    data = np.asarray(values, dtype=np.float64)
    if data.size == 0:
        raise DomainError("cannot build a histogram of no values")
    if n_bins < 1:
        raise DomainError(f"n_bins must be at least 1, got {n_bins}")

    if value_range is None:
        lo, hi = float(data.min()), float(data.max())
    else:
        lo, hi = map(float, value_range)
        if hi < lo:
            raise DomainError(f"histogram range ({lo}, {hi}) is inverted")
    if lo == hi:
        eps = 1e-9 * max(1.0, abs(lo))
        lo, hi = lo - eps, hi + eps

    counts, edges = np.histogram(data, bins=n_bins, range=(lo, hi))
    return Histogram(bin_edges=edges.tolist(), counts=counts.tolist())


def bound_series(
    run: EmpiricalRun,
    trivial: float | None = None,
    tight: float | None = None,
) -> list[BoundSeriesRow]:
    """Per-batch values with the running maximum and the constant bound lines."""
    rows = []
    running = 0.0
    for index, value in enumerate(run.per_batch_max, start=1):
        running = max(running, value)
        rows.append(
            BoundSeriesRow(
                batch=index, emp_max=value, running_max=running, trivial=trivial, tight=tight
            )
        )
    return rows
