"""
Acceptance-scale suites.

Property suites over seeded random cases run everywhere (marked ``slow``).
Suites on real MNIST/CIFAR-10 files are also marked ``dataset`` and skip
when the files are not under ``LIPBOUND_DATA_ROOT``.
"""

import numpy as np
import pytest

from lipbound.config import settings
from lipbound.domain.enums import ConvMethod, Split, StopAt
from lipbound.domain.models.network import InputDims, Network
from lipbound.domain.schemas.empirical import EmpiricalConfig
from lipbound.domain.schemas.training import TrainConfig
from lipbound.repositories.datasets import (
    cifar10_paths,
    load_dataset,
    mnist_paths,
    synthetic_dataset,
)
from lipbound.services.architectures import build_architecture
from lipbound.services.bound_service import trivial_bound
from lipbound.services.conv_conversion import (
    circulant_grid,
    conv_spectrum_fft,
    conv_to_toeplitz,
    unroll_forward,
)
from lipbound.services.empirical_service import EmpiricalService, convergence_table, row_norms
from lipbound.services.linalg import singular_values_exact, spectral_norm_power
from lipbound.services.network_service import forward_batch
from lipbound.services.training_service import TrainingService
from tests.conftest import circulant_matrix, direct_conv, random_conv, random_dense, relu

pytestmark = pytest.mark.slow


def have_mnist() -> bool:
    return all(
        path.is_file() for split in Split for path in mnist_paths(split, settings.data_root)
    )


def have_cifar10() -> bool:
    return all(
        path.is_file() for split in Split for path in cifar10_paths(split, settings.data_root)
    )


needs_mnist = pytest.mark.skipif(not have_mnist(), reason="MNIST files not under data root")
needs_cifar10 = pytest.mark.skipif(not have_cifar10(), reason="CIFAR-10 files not under data root")


# ============================================================================
# CONV CONVERSION
# ============================================================================


class TestToeplitzEquivalence:
    """Toeplitz and unroll paths against nested loops on 200 seeded cases."""

    def test_seeded_cases(self):
        """Test max |T·vec(x) - conv(x)| <= 1e-9 and unroll == Toeplitz."""
        rng = np.random.default_rng(2024)
        checked = 0
        while checked < 200:
            in_ch, out_ch = rng.integers(1, 5, size=2)
            k = int(rng.integers(1, 5))
            stride = int(rng.integers(1, 3))
            padding = int(rng.integers(0, 3))
            h, w = rng.integers(1, 13, size=2)
            if h + 2 * padding < k or w + 2 * padding < k:
                continue
            layer = random_conv(rng, int(out_ch), int(in_ch), k=k, stride=stride, padding=padding)
            dims = InputDims(channels=int(in_ch), height=int(h), width=int(w))
            x = rng.normal(size=dims.shape)

            operator = conv_to_toeplitz(layer, dims)
            expected = direct_conv(layer, x)
            toeplitz_out = (operator.matrix @ x.ravel()).reshape(expected.shape)
            assert np.max(np.abs(toeplitz_out - expected)) <= 1e-9

            _, unrolled = unroll_forward(layer, x)
            with_bias = toeplitz_out + layer.bias[:, None, None]
            assert np.max(np.abs(unrolled - with_bias)) <= 1e-9
            checked += 1


class TestSpectrumCrossCheck:
    """Circulant spectrum against the explicit matrix on 50 seeded cases."""

    def test_seeded_cases(self):
        """Test fft sigma_max against SVD of the circulant and Toeplitz domination."""
        rng = np.random.default_rng(77)
        for _ in range(50):
            in_ch, out_ch = (int(v) for v in rng.integers(1, 4, size=2))
            k = int(rng.integers(1, 4))
            padding = int(rng.integers(0, 2))
            layer = random_conv(rng, out_ch, in_ch, k=k, padding=padding)
            dims = InputDims(channels=in_ch, height=8, width=8)

            spectrum = conv_spectrum_fft(layer, dims)
            matrix = circulant_matrix(layer, circulant_grid(layer, dims))
            exact = singular_values_exact(matrix, max_entries=matrix.size)[0]
            assert spectrum.sigma_max == pytest.approx(exact, rel=1e-6)

            toeplitz = conv_to_toeplitz(layer, dims).matrix
            zero_pad = singular_values_exact(toeplitz, max_entries=toeplitz.size)[0]
            assert zero_pad <= spectrum.sigma_max * (1 + 1e-6)


# ============================================================================
# LINEAR ALGEBRA
# ============================================================================


class TestPowerIterationOracle:
    """Power iteration against the exact SVD on 500 seeded matrices."""

    def test_seeded_matrices(self):
        """Test convergence rate and 1e-6 accuracy on every converged case up to 200x60."""
        rng = np.random.default_rng(5)
        errors = []
        converged = 0
        for case in range(500):
            rows, cols = int(rng.integers(1, 201)), int(rng.integers(1, 61))
            m = rng.normal(size=(rows, cols))
            estimate = spectral_norm_power(m, seed=case)
            if not estimate.converged:
                continue
            converged += 1
            exact = singular_values_exact(m, max_entries=m.size)[0]
            errors.append(abs(estimate.sigma_max - exact) / exact)

        assert converged >= 495
        assert max(errors) <= 1e-6


# ============================================================================
# BOUNDS
# ============================================================================


class TestBoundValidity:
    """Sampled quotients never exceed the trivial bound."""

    def random_network(self, rng: np.random.Generator, index: int) -> Network:
        if index % 4 == 3:
            dims = InputDims(channels=2, height=6, width=6)
            conv = random_conv(rng, 3, 2, k=3, padding=1)
            return Network(
                input_dims=dims,
                layers=[conv, relu(), random_dense(rng, 5, 3 * 6 * 6)],
            )
        widths = [int(w) for w in rng.integers(2, 20, size=int(rng.integers(2, 5)))]
        layers = []
        for i in range(1, len(widths)):
            layers.append(random_dense(rng, widths[i], widths[i - 1]))
            if i < len(widths) - 1:
                layers.append(relu())
        return Network(input_dims=InputDims(channels=1, height=1, width=widths[0]), layers=layers)

    def test_twenty_networks(self):
        """Test 10⁴ random pairs on each of 20 seeded ReLU networks."""
        rng = np.random.default_rng(11)
        for index in range(20):
            net = self.random_network(rng, index)
            bound = trivial_bound(net, ConvMethod.TOEPLITZ).trivial
            size = net.input_dims.size
            x = rng.normal(size=(10_000, size))
            y = x + rng.normal(size=(10_000, size)) * rng.uniform(1e-3, 1.0, size=(10_000, 1))
            diff = forward_batch(net, x, StopAt.LOGITS) - forward_batch(net, y, StopAt.LOGITS)
            quotients = row_norms(diff) / row_norms(x - y)
            assert quotients.max() <= bound * (1 + 1e-6), f"network {index}"


# ============================================================================
# EMPIRICAL
# ============================================================================


class TestCachedForwardOracle:
    """Cached-forward estimation equals literal per-pair recomputation."""

    def test_conv_network(self):
        """Test 20 batches of 12 on a small CNN."""
        rng = np.random.default_rng(8)
        dims = InputDims(channels=1, height=5, width=5)
        net = Network(
            input_dims=dims,
            layers=[random_conv(rng, 2, 1, k=3), relu(), random_dense(rng, 4, 2 * 3 * 3)],
        )
        dataset = synthetic_dataset(dims, 240, seed=4)
        service = EmpiricalService(net)
        cfg = EmpiricalConfig(set_size=12, seed=1)
        cached, literal = service.run(dataset, cfg), service.run(dataset, cfg, literal=True)
        assert cached.batches == 20
        np.testing.assert_array_equal(cached.all_quotients, literal.all_quotients)


# ============================================================================
# REAL DATASETS
# ============================================================================


@pytest.fixture(scope="module")
def trained_mnist():
    """Default MLP trained for 4 epochs on MNIST."""
    train_set = load_dataset("mnist", Split.TRAIN, settings.data_root)
    test_set = load_dataset("mnist", Split.TEST, settings.data_root)
    template = build_architecture("mlp-default", train_set.dims)
    cfg = TrainConfig(epochs=4, learning_rate=1e-3, batch_size=128, seed=1)
    result = TrainingService(cfg).train(template, train_set, eval_dataset=test_set)
    return result, test_set


@pytest.mark.dataset
@needs_mnist
class TestMnistWorkflow:
    """Train, bound and estimate on MNIST."""

    def test_test_accuracy(self, trained_mnist):
        """Test at least 95% test accuracy after 4 epochs."""
        result, _ = trained_mnist
        assert result.history[-1].test_acc >= 0.95

    def test_gap_order_of_magnitude(self, trained_mnist):
        """Test trivial bound / empirical maximum >= 10 at N=500."""
        result, test_set = trained_mnist
        trivial = trivial_bound(result.network).trivial
        run = EmpiricalService(result.network).run(
            test_set, EmpiricalConfig(set_size=500, retain_quotients=False)
        )
        assert trivial / run.global_max >= 10

    def test_convergence_shape(self, trained_mnist):
        """Test that the average column increases with N and stays below the maximum."""
        result, test_set = trained_mnist
        service = EmpiricalService(result.network)
        runs = [
            service.run(test_set, EmpiricalConfig(set_size=n, retain_quotients=False))
            for n in (50, 250, 500, 1000, 2000)
        ]
        rows = convergence_table(runs)
        averages = [row.avg_emp for row in rows]
        assert all(a < b for a, b in zip(averages, averages[1:]))
        assert all(row.avg_emp <= row.max_emp for row in rows)


@pytest.mark.dataset
@needs_cifar10
class TestCifar10Workflow:
    """Train the default CNN on CIFAR-10."""

    def test_test_accuracy(self):
        """Test at least 45% test accuracy after 4 epochs."""
        train_set = load_dataset("cifar10", Split.TRAIN, settings.data_root)
        test_set = load_dataset("cifar10", Split.TEST, settings.data_root)
        template = build_architecture("cnn-default", train_set.dims)
        cfg = TrainConfig(epochs=4, learning_rate=1e-3, batch_size=128, seed=1)
        result = TrainingService(cfg).train(template, train_set, eval_dataset=test_set)
        assert result.history[-1].test_acc >= 0.45
