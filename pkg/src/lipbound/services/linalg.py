"""
Dense linear algebra used by every bound computation.

Matrices are 2-D float64 numpy arrays, complex matrices complex128.
All functions are pure and safe to call from several threads.
"""

import logging

import numpy as np

from lipbound.config import settings
from lipbound.domain.errors import (
    DomainError,
    InvalidInputError,
    ShapeError,
    SizeLimitError,
)
from lipbound.domain.schemas.linalg import SpectralEstimate

logger = logging.getLogger(__name__)


def as_matrix(data, name: str = "matrix", dtype=np.float64) -> np.ndarray:
    """
    Validate and convert array-like data to a finite 2-D matrix.

    Args:
        data: Array-like input
        name: Name used in error messages
        dtype: Target dtype (float64 or complex128)

    Returns:
        2-D numpy array of the requested dtype

    Raises:
        ShapeError: If the input is not a non-empty 2-D array
        InvalidInputError: If any entry is NaN or infinite
    """
    m = np.asarray(data, dtype=dtype)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return m


def spectral_norm_power(
    m,
    tol: float = settings.power_tol,
    max_iters: int = settings.power_max_iters,
    seed: int = settings.seed,
) -> SpectralEstimate:
    """
    Largest singular value of ``m`` by power iteration on MᵀM.

    MᵀM is never formed: each step applies M then Mᵀ. The estimate at
    step k is σ = ‖M v_k‖ and iteration stops once the eigen-residual
    ‖MᵀM v_k − σ² v_k‖ drops to ``tol``·σ². The error of σ² is at most the
    residual times √(1−c²)/c² for the top component c of v_k, so once that
    component dominates σ is within ``tol`` relative of σ_max. Close top
    singular values keep the residual up and cost iterations, not accuracy.

    Args:
        m: Matrix (rows × cols)
        tol: Relative accuracy of the returned estimate
        max_iters: Iteration cap
        seed: Seed of the uniform start vector

    Returns:
        SpectralEstimate; ``converged`` is False when the cap was hit

    Raises:
        InvalidInputError: If ``m`` is not finite
        DomainError: If ``tol`` or ``max_iters`` are out of range
    """
    if tol <= 0:
        raise DomainError(f"tol must be positive, got {tol}")
    if max_iters < 1:
        raise DomainError(f"max_iters must be at least 1, got {max_iters}")
    m = as_matrix(m)

    if not np.any(m):
        return SpectralEstimate(sigma_max=0.0, iterations=0, converged=True, residual=0.0, tol=tol)

    rng = np.random.default_rng(seed)
    v = _unit_start_vector(rng, m.shape[1])

    sigma = 0.0
    residual = np.inf
    for iteration in range(1, max_iters + 1):
        u = m @ v
        sigma_new = float(np.linalg.norm(u))
        if sigma_new == 0.0:
            # Start vector fell into the null space
            v = _unit_start_vector(rng, m.shape[1])
            continue
        sigma = sigma_new
        w = m.T @ u
        lam = sigma * sigma
        residual = float(np.linalg.norm(w - lam * v)) / lam
        if residual <= tol:
            logger.debug("Power iteration converged after %d iterations", iteration)
            return SpectralEstimate(
                sigma_max=sigma,
                iterations=iteration,
                converged=True,
                residual=residual,
                tol=tol,
            )
        v = w / np.linalg.norm(w)

    logger.debug("Power iteration hit max_iters=%d (residual %.3e)", max_iters, residual)
    return SpectralEstimate(
        sigma_max=sigma,
        iterations=max_iters,
        converged=False,
        residual=float(residual) if np.isfinite(residual) else 1.0,
        tol=tol,
    )


def _unit_start_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw a uniform start vector on [-1, 1]^n and normalize it."""
    v = rng.uniform(-1.0, 1.0, size=n)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        v = np.ones(n)
        norm = np.sqrt(n)
    return v / norm


def singular_values_exact(m, max_entries: int | None = None) -> list[float]:
    """
    Full singular spectrum by a dense LAPACK SVD.

    Args:
        m: Matrix
        max_entries: Size cap on rows × cols (defaults to ``settings.svd_size_cap``)

    Returns:
        Singular values, non-increasing and nonnegative

    Raises:
        SizeLimitError: If the matrix is above the size cap
    """
    m = as_matrix(m)
    cap = settings.svd_size_cap if max_entries is None else max_entries
    if m.size > cap:
        raise SizeLimitError(
            f"exact SVD is limited to {cap} entries, matrix is {m.shape[0]}x{m.shape[1]}"
        )
    sigmas = np.linalg.svd(m, compute_uv=False)
    return [float(s) for s in np.maximum(sigmas, 0.0)]


def dft2(m) -> np.ndarray:
    """
    Unnormalized 2-D discrete Fourier transform of any size.

    Args:
        m: Complex (or real) matrix

    Returns:
        complex128 matrix of the same shape
    """
    m = as_matrix(m, name="complex matrix", dtype=np.complex128)
    return np.fft.fft2(m)


def idft2(m) -> np.ndarray:
    """Inverse of :func:`dft2`, including the 1/(rows·cols) scaling."""
    m = as_matrix(m, name="complex matrix", dtype=np.complex128)
    return np.fft.ifft2(m)
