"""
Desk-scale supervised training: mini-batch Adam on the negative log
likelihood of LogSoftmax outputs, with hand-written backpropagation
through dense, conv and activation layers.

Training is single-threaded and bit-reproducible for a given seed.
"""

import logging
from typing import Callable

import numpy as np

from lipbound.domain.enums import ActivationKind, StopAt
from lipbound.domain.errors import ConfigurationError, ShapeError
from lipbound.domain.models.dataset import Dataset
from lipbound.domain.models.network import (
    ActivationLayer,
    ConvLayer,
    DenseLayer,
    Network,
)
from lipbound.domain.schemas.training import EpochRecord, TrainConfig
from lipbound.services.conv_conversion import col2im, im2col
from lipbound.services.network_service import forward_batch

logger = logging.getLogger(__name__)

Params = dict[str, np.ndarray]


class Adam:
    """Adam optimizer over a dict of parameter arrays, updated in place."""

    def __init__(self, lr: float, beta1: float, beta2: float, epsilon: float):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: Params = {}
        self.v: Params = {}
        self.t = 0

    def step(self, params: Params, grads: Params) -> None:
        """Apply one update."""
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        step_size = self.lr / bc1

        for key in sorted(params):
            g = grads[key]
            if key not in self.m:
                self.m[key] = np.zeros_like(params[key])
                self.v[key] = np.zeros_like(params[key])
            self.m[key] *= self.beta1
            self.m[key] += (1.0 - self.beta1) * g
            self.v[key] *= self.beta2
            self.v[key] += (1.0 - self.beta2) * (g * g)
            params[key] -= step_size * self.m[key] / (np.sqrt(self.v[key] / bc2) + self.epsilon)


def parameters_of(net: Network) -> Params:
    """Writable copies of all weights, keyed ``"<layer>.<field>"``."""
    params: Params = {}
    for index, layer in enumerate(net.layers):
        if isinstance(layer, DenseLayer):
            params[f"{index}.weights"] = layer.weights.copy()
            params[f"{index}.bias"] = layer.bias.copy()
        elif isinstance(layer, ConvLayer):
            params[f"{index}.kernel"] = layer.kernel.copy()
            params[f"{index}.bias"] = layer.bias.copy()
    return params


def network_with(net: Network, params: Params) -> Network:
    """Copy of ``net`` carrying the given weights."""
    layers = []
    for index, layer in enumerate(net.layers):
        if isinstance(layer, DenseLayer):
            layers.append(
                DenseLayer(weights=params[f"{index}.weights"], bias=params[f"{index}.bias"])
            )
        elif isinstance(layer, ConvLayer):
            layers.append(
                ConvLayer(
                    kernel=params[f"{index}.kernel"],
                    bias=params[f"{index}.bias"],
                    stride=layer.stride,
                    padding=layer.padding,
                )
            )
        else:
            layers.append(layer)
    return net.with_layers(layers)


def initialize_network(template: Network, seed: int) -> Network:
    """
    Seeded uniform initialization in ±1/√fan_in for weights and biases.

    fan_in is in_dim for dense layers and in_ch·k_h·k_w for conv layers.
    """
    rng = np.random.default_rng(seed)
    params: Params = {}
    for index, layer in enumerate(template.layers):
        if isinstance(layer, DenseLayer):
            bound = 1.0 / np.sqrt(layer.in_dim)
            params[f"{index}.weights"] = rng.uniform(-bound, bound, size=layer.weights.shape)
            params[f"{index}.bias"] = rng.uniform(-bound, bound, size=layer.bias.shape)
        elif isinstance(layer, ConvLayer):
            _, ic, kh, kw = layer.kernel.shape
            bound = 1.0 / np.sqrt(ic * kh * kw)
            params[f"{index}.kernel"] = rng.uniform(-bound, bound, size=layer.kernel.shape)
            params[f"{index}.bias"] = rng.uniform(-bound, bound, size=layer.bias.shape)
    return network_with(template, params)


def nll_loss(log_probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log likelihood."""
    return float(-np.mean(log_probs[np.arange(labels.shape[0]), labels]))


def loss_and_gradients(
    net: Network,
    params: Params,
    images: np.ndarray,
    labels: np.ndarray,
) -> tuple[float, Params]:
    """
    NLL of the network outputs and its gradient for every parameter.

    Args:
        net: Network whose structure is used (its weights are ignored)
        params: Weights, see :func:`parameters_of`
        images: Batch of shape (n, c, h, w)
        labels: Integer labels of shape (n,)

    Returns:
        (loss, gradients keyed like ``params``)
    """
    n = images.shape[0]
    z = images
    caches = []

    for index, layer in enumerate(net.layers):
        if isinstance(layer, DenseLayer):
            flat = z.reshape(n, -1)
            caches.append((z.shape, flat))
            z = flat @ params[f"{index}.weights"].T + params[f"{index}.bias"]
        elif isinstance(layer, ConvLayer):
            patches, out = im2col(z, layer)
            kernel = params[f"{index}.kernel"]
            kmat = kernel.reshape(kernel.shape[0], -1).T
            caches.append((z.shape, patches, kmat))
            y = patches @ kmat + params[f"{index}.bias"]
            z = y.transpose(0, 2, 1).reshape(n, *out.shape)
        elif layer.kind == ActivationKind.RELU:
            caches.append(z > 0)
            z = np.maximum(z, 0.0)
        elif layer.kind == ActivationKind.LOG_SOFTMAX:
            flat = z.reshape(n, -1)
            shifted = flat - flat.max(axis=1, keepdims=True)
            z = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
            caches.append((flat.shape, z))
        else:
            caches.append(None)

    log_probs = z.reshape(n, -1)
    loss = nll_loss(log_probs, labels)

    grad = np.zeros_like(log_probs)
    grad[np.arange(n), labels] = -1.0 / n
    grads: Params = {}

    for index in range(len(net.layers) - 1, -1, -1):
        layer, cache = net.layers[index], caches[index]
        if isinstance(layer, DenseLayer):
            in_shape, flat = cache
            grads[f"{index}.weights"] = grad.T @ flat
            grads[f"{index}.bias"] = grad.sum(axis=0)
            if index > 0:
                grad = (grad @ params[f"{index}.weights"]).reshape(in_shape)
        elif isinstance(layer, ConvLayer):
            in_shape, patches, kmat = cache
            g = grad.reshape(n, layer.out_channels, -1).transpose(0, 2, 1)
            dkmat = np.einsum("npf,npo->fo", patches, g)
            grads[f"{index}.kernel"] = dkmat.T.reshape(layer.kernel.shape)
            grads[f"{index}.bias"] = g.sum(axis=(0, 1))
            if index > 0:
                grad = col2im(g @ kmat.T, in_shape, layer)
        elif layer.kind == ActivationKind.RELU:
            grad = grad * cache
        elif layer.kind == ActivationKind.LOG_SOFTMAX:
            in_shape, out = cache
            grad = grad.reshape(in_shape)
            grad = grad - np.exp(out) * grad.sum(axis=1, keepdims=True)

    return loss, grads


def evaluate(net: Network, dataset: Dataset, chunk: int = 1000) -> float:
    """
    Fraction of samples whose largest output equals the label.

    Ties go to the lowest class index.

    Raises:
        ShapeError: If dataset and network dims differ
    """
    _check_dims(net, dataset)
    correct = 0
    for start in range(0, len(dataset), chunk):
        outputs = forward_batch(net, dataset.images[start:start + chunk], StopAt.LOGITS)
        correct += int((outputs.argmax(axis=1) == dataset.labels[start:start + chunk]).sum())
    return correct / len(dataset)


def dataset_loss(net: Network, dataset: Dataset, chunk: int = 1000) -> float:
    """Mean NLL of the network over a dataset."""
    _check_dims(net, dataset)
    total = 0.0
    for start in range(0, len(dataset), chunk):
        log_probs = forward_batch(net, dataset.images[start:start + chunk], StopAt.FULL)
        labels = dataset.labels[start:start + chunk]
        total += nll_loss(log_probs, labels) * labels.shape[0]
    return total / len(dataset)


def _check_dims(net: Network, dataset: Dataset) -> None:
    if dataset.dims != net.input_dims:
        raise ShapeError(
            f"dataset dims {dataset.dims} do not match network input {net.input_dims}"
        )


class TrainingResult:
    """Trained network and its per-epoch log."""

    def __init__(self, network: Network, history: list[EpochRecord]):
        self.network = network
        self.history = history

    def __repr__(self) -> str:
        return f"<TrainingResult: {len(self.history)} epochs>"


class TrainingService:
    """Trains a network template on a labelled dataset."""

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg

    def train(
        self,
        template: Network,
        dataset: Dataset,
        eval_dataset: Dataset | None = None,
        on_epoch: Callable[[EpochRecord], None] | None = None,
    ) -> TrainingResult:
        """
        Train ``template`` from a seeded initialization.

        Args:
            template: Architecture; its weights are replaced by the initialization
            dataset: Training samples
            eval_dataset: Optional split evaluated after every epoch
            on_epoch: Optional callback receiving each epoch record

        Returns:
            TrainingResult

        Raises:
            ShapeError: If the architecture does not fit the dataset
            ConfigurationError: If the head is not a 10-way LogSoftmax
        """
        self._check_architecture(template, dataset)
        cfg = self.cfg
        net = initialize_network(template, cfg.seed)
        params = parameters_of(net)
        optimizer = Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
        history: list[EpochRecord] = []

        for epoch in range(1, cfg.epochs + 1):
            order = np.random.default_rng(cfg.seed + epoch).permutation(len(dataset))
            epoch_loss = 0.0
            for start in range(0, len(dataset), cfg.batch_size):
                batch = order[start:start + cfg.batch_size]
                loss, grads = loss_and_gradients(
                    template, params, dataset.images[batch], dataset.labels[batch]
                )
                optimizer.step(params, grads)
                epoch_loss += loss * batch.shape[0]

            net = network_with(template, params)
            test_acc = evaluate(net, eval_dataset) if eval_dataset is not None else None
            record = EpochRecord(
                epoch=epoch, train_loss=epoch_loss / len(dataset), test_acc=test_acc
            )
            history.append(record)
            logger.info(
                "Epoch %d/%d: train_loss=%.4f test_acc=%s",
                epoch, cfg.epochs, record.train_loss,
                "n/a" if test_acc is None else f"{test_acc:.4f}",
            )
            if on_epoch is not None:
                on_epoch(record)

        return TrainingResult(network_with(template, params), history)

    @staticmethod
    def _check_architecture(template: Network, dataset: Dataset) -> None:
        _check_dims(template, dataset)
        last = template.layers[-1]
        if not (isinstance(last, ActivationLayer) and last.kind == ActivationKind.LOG_SOFTMAX):
            raise ConfigurationError("training needs a final LogSoftmax layer")
        if template.output_size != 10:
            raise ShapeError(f"training needs 10 outputs, architecture has {template.output_size}")


def train(template: Network, dataset: Dataset, cfg: TrainConfig) -> Network:
    """Train and return the network; see :meth:`TrainingService.train`."""
    return TrainingService(cfg).train(template, dataset).network
