"""
Trivial Lipschitz bound (product of per-layer spectral norms) and gap
reports against external tight bounds and empirical maxima.

Biases never enter a bound: the difference of two affine maps with the
same weights cancels them.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor

from lipbound.domain.enums import ActivationKind, ConvMethod, NormKind
from lipbound.domain.errors import (
    DomainError,
    NumericalFailureError,
    UnsupportedConfigurationError,
)
from lipbound.domain.models.network import (
    ActivationLayer,
    ConvLayer,
    DenseLayer,
    InputDims,
    Layer,
    Network,
)
from lipbound.domain.schemas.bounds import BoundReport, GapReport, LayerNorm
from lipbound.domain.schemas.linalg import PowerIterationConfig, SpectralEstimate
from lipbound.services.conv_conversion import conv_spectrum_fft, conv_to_toeplitz
from lipbound.services.linalg import spectral_norm_power

logger = logging.getLogger(__name__)


class NonConvergenceError(NumericalFailureError):
    """Raised when a layer norm did not converge and forcing is off."""

    def __init__(self, message: str, report: BoundReport):
        super().__init__(message)
        self.report = report


class BoundService:
    """
    Computes the trivial bound of a network layer by layer.

    Per-layer norms may run on several threads; the report always lists
    them in layer order and the result does not depend on the schedule.
    """

    def __init__(
        self,
        power: PowerIterationConfig | None = None,
        threads: int = 1,
    ):
        """
        Initialize the service.

        Args:
            power: Power-iteration settings (defaults from settings)
            threads: Worker threads for per-layer norms
        """
        self.power = power or PowerIterationConfig()
        self.threads = max(1, threads)

    def trivial_bound(
        self,
        net: Network,
        conv_method: ConvMethod = ConvMethod.TOEPLITZ,
        force: bool = False,
    ) -> BoundReport:
        """
        Product of the per-layer spectral norms.

        ReLU/Identity contribute a factor 1. LogSoftmax is excluded from the
        product and listed in ``excluded_layers``: the bound is certified for
        the logits map only.

        Args:
            net: Network
            conv_method: Toeplitz (power iteration) or FFT (circulant spectrum)
            force: Return a report even if some power iteration did not converge

        Returns:
            BoundReport without gaps

        Raises:
            UnsupportedConfigurationError: FFT method with a strided conv layer
            NonConvergenceError: Non-converged layer norm without ``force``
        """
        shapes = net.layer_shapes()
        if conv_method == ConvMethod.FFT:
            for index, layer in enumerate(net.layers):
                if isinstance(layer, ConvLayer) and tuple(layer.stride) != (1, 1):
                    raise UnsupportedConfigurationError(
                        f"layer {index}: fft conv method requires stride (1, 1), "
                        f"got {tuple(layer.stride)}"
                    )

        jobs = [
            (index, layer, shape_in)
            for index, (layer, (shape_in, _)) in enumerate(zip(net.layers, shapes))
            if not _is_excluded(layer)
        ]
        excluded = [index for index, layer in enumerate(net.layers) if _is_excluded(layer)]
        if excluded:
            logger.warning(
                "LogSoftmax layer(s) %s excluded from the bound; it covers the logits map",
                excluded,
            )

        def run(job) -> LayerNorm:
            index, layer, shape_in = job
            return self.layer_norm(index, layer, shape_in, conv_method)

        if self.threads > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                per_layer = list(pool.map(run, jobs))
        else:
            per_layer = [run(job) for job in jobs]

        trivial = math.prod(entry.sigma.sigma_max for entry in per_layer)
        report = BoundReport(
            per_layer=per_layer,
            trivial=trivial,
            conv_method=conv_method,
            excluded_layers=excluded,
        )
        logger.info("Trivial bound %.6g over %d factors", trivial, len(per_layer))

        if not report.converged:
            stalled = [e.layer_index for e in per_layer if not e.sigma.converged]
            message = (
                f"power iteration did not converge for layer(s) {stalled} "
                f"within {self.power.max_iters} iterations"
            )
            if not force:
                raise NonConvergenceError(message, report)
            logger.warning("%s; continuing because force is set", message)
        return report

    def layer_norm(
        self,
        index: int,
        layer: Layer,
        shape_in,
        conv_method: ConvMethod,
    ) -> LayerNorm:
        """Spectral norm (Lipschitz factor) of one layer."""
        if isinstance(layer, DenseLayer):
            sigma = self._power(layer.weights, index)
            kind = NormKind.DENSE
        elif isinstance(layer, ConvLayer):
            if not isinstance(shape_in, InputDims):
                raise UnsupportedConfigurationError(f"layer {index}: conv without spatial input")
            if conv_method == ConvMethod.FFT:
                sigma = SpectralEstimate.exact(conv_spectrum_fft(layer, shape_in).sigma_max)
                kind = NormKind.CONV_FFT
            else:
                operator = conv_to_toeplitz(layer, shape_in)
                sigma = self._power(operator.matrix, index)
                kind = NormKind.CONV_TOEPLITZ
        else:
            sigma = SpectralEstimate.exact(1.0)
            kind = NormKind.ACTIVATION
        logger.debug(
            "Layer %d (%s): sigma_max=%.6g iterations=%d converged=%s",
            index, kind.value, sigma.sigma_max, sigma.iterations, sigma.converged,
        )
        return LayerNorm(layer_index=index, kind=kind, sigma=sigma)

    def _power(self, matrix, index: int) -> SpectralEstimate:
        return spectral_norm_power(
            matrix,
            tol=self.power.tol,
            max_iters=self.power.max_iters,
            seed=self.power.seed + index,
        )


def _is_excluded(layer: Layer) -> bool:
    return isinstance(layer, ActivationLayer) and layer.kind == ActivationKind.LOG_SOFTMAX


def trivial_bound(
    net: Network,
    method_for_conv: ConvMethod = ConvMethod.TOEPLITZ,
    cfg: PowerIterationConfig | None = None,
    force: bool = False,
    threads: int = 1,
) -> BoundReport:
    """Trivial bound of ``net``; see :meth:`BoundService.trivial_bound`."""
    return BoundService(cfg, threads=threads).trivial_bound(net, method_for_conv, force=force)


def gap_report(trivial: float, tight: float | None, empirical_max: float) -> GapReport:
    """
    Ratios of the trivial and (optional) tight bound over the empirical maximum.

    Raises:
        DomainError: If ``empirical_max`` is not positive or ``trivial`` is negative
    """
    if not empirical_max > 0:
        raise DomainError(f"empirical maximum must be positive, got {empirical_max}")
    if trivial < 0:
        raise DomainError(f"trivial bound must be nonnegative, got {trivial}")
    if tight is not None and tight < 0:
        raise DomainError(f"tight bound must be nonnegative, got {tight}")
    return GapReport(
        trivial=trivial,
        tight_external=tight,
        empirical_max=empirical_max,
        gap_trivial_over_emp=trivial / empirical_max,
        gap_tight_over_emp=None if tight is None else tight / empirical_max,
    )


def with_gaps(report: BoundReport, tight: float | None, empirical_max: float | None) -> BoundReport:
    """Attach an external tight bound and an empirical maximum to a report."""
    if empirical_max is None:
        return report.model_copy(update={"tight_external": tight})
    gaps = gap_report(report.trivial, tight, empirical_max)
    return report.model_copy(update=gaps.model_dump(exclude={"trivial"}))
