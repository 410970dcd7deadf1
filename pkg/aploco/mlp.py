"""One-hidden-layer perceptron: tanh hidden units, identity output, SSE loss.

Training is plain full-batch gradient descent so a ``(seed, config, dataset)``
triple always produces the same network.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from aploco.config import TrainingConfig
from aploco.encoding import PRNG_NAME, EncodedDataset, Partition
from aploco.errors import (
    DimensionMismatch,
    EmptyPartition,
    NonFiniteLoss,
    NonFiniteValue,
    ReportFormatError,
    ZeroVariance,
)
from aploco.report import to_json, write_atomic

logger = logging.getLogger(__name__)

NETWORK_FORMAT = "aploco-mlp"
NETWORK_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class MlpNetwork:
    hidden_weights: np.ndarray  # (inputs, hidden)
    hidden_bias: np.ndarray  # (hidden,)
    output_weights: np.ndarray  # (hidden,)
    output_bias: float
    hidden_activation: str = "tanh"
    output_activation: str = "identity"

    def __post_init__(self) -> None:
        d, h = self.hidden_weights.shape
        if self.hidden_bias.shape != (h,) or self.output_weights.shape != (h,):
            raise DimensionMismatch(
                f"inconsistent layer shapes: hidden {self.hidden_weights.shape}, "
                f"hidden bias {self.hidden_bias.shape}, output {self.output_weights.shape}"
            )

    @property
    def input_units(self) -> int:
        return int(self.hidden_weights.shape[0])

    @property
    def hidden_units(self) -> int:
        return int(self.hidden_weights.shape[1])

    def flat(self) -> np.ndarray:
        return np.concatenate(
            [
                self.hidden_weights.ravel(),
                self.hidden_bias,
                self.output_weights,
                [self.output_bias],
            ]
        )

    @classmethod
    def from_flat(cls, vector: np.ndarray, input_units: int, hidden_units: int) -> MlpNetwork:
        vector = np.asarray(vector, dtype=np.float64)
        d, h = input_units, hidden_units
        expected = d * h + 2 * h + 1
        if vector.shape != (expected,):
            raise DimensionMismatch(f"expected {expected} parameters, got {vector.shape}")
        return cls(
            hidden_weights=vector[: d * h].reshape(d, h).copy(),
            hidden_bias=vector[d * h : d * h + h].copy(),
            output_weights=vector[d * h + h : d * h + 2 * h].copy(),
            output_bias=float(vector[-1]),
        )

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.flat())))


@dataclass(frozen=True)
class NetworkGradient:
    """Partial derivatives laid out like ``MlpNetwork``."""

    hidden_weights: np.ndarray
    hidden_bias: np.ndarray
    output_weights: np.ndarray
    output_bias: float

    def flat(self) -> np.ndarray:
        return np.concatenate(
            [self.hidden_weights.ravel(), self.hidden_bias, self.output_weights, [self.output_bias]]
        )


@dataclass(frozen=True)
class TrainReport:
    train_sse: float
    test_sse: float | None
    train_relative_error: float | None
    test_relative_error: float | None
    epochs: int
    seed: int
    prng: str
    train_rows: int
    test_rows: int
    config: TrainingConfig
    sse_history: tuple[float, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "train_sse": self.train_sse,
            "test_sse": self.test_sse,
            "train_relative_error": self.train_relative_error,
            "test_relative_error": self.test_relative_error,
            "epochs": self.epochs,
            "seed": self.seed,
            "prng": self.prng,
            "train_rows": self.train_rows,
            "test_rows": self.test_rows,
            "config": self.config.to_dict(),
        }


def initialize(
    input_units: int, hidden_units: int, init_scale: float, rng: np.random.Generator
) -> MlpNetwork:
    """Uniform parameters in ``[-init_scale, init_scale]``, drawn in ``flat()`` order."""
    count = input_units * hidden_units + 2 * hidden_units + 1
    return MlpNetwork.from_flat(
        rng.uniform(-init_scale, init_scale, size=count), input_units, hidden_units
    )


def _check_inputs(net: MlpNetwork, inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != net.input_units:
        raise DimensionMismatch(
            f"network expects (n, {net.input_units}) inputs, got {inputs.shape}"
        )
    return inputs


def _hidden(net: MlpNetwork, inputs: np.ndarray) -> np.ndarray:
    return np.tanh(inputs @ net.hidden_weights + net.hidden_bias)


def predict(net: MlpNetwork, inputs: np.ndarray) -> np.ndarray:
    inputs = _check_inputs(net, inputs)
    return _hidden(net, inputs) @ net.output_weights + net.output_bias


def forward(net: MlpNetwork, x: np.ndarray) -> float:
    vector = np.asarray(x, dtype=np.float64)
    if vector.shape != (net.input_units,):
        raise DimensionMismatch(f"network expects {net.input_units} inputs, got {vector.shape}")
    return float(predict(net, vector[None, :])[0])


def parameter_gradients(
    net: MlpNetwork, inputs: np.ndarray, output_grad: np.ndarray
) -> NetworkGradient:
    """Backpropagate ``output_grad`` (one value per row) to every parameter.

    With ``output_grad = prediction - target`` this is the gradient of half the SSE.
    """
    inputs = _check_inputs(net, inputs)
    g = np.asarray(output_grad, dtype=np.float64).reshape(-1)
    if g.shape[0] != inputs.shape[0]:
        raise DimensionMismatch(f"{g.shape[0]} output gradients for {inputs.shape[0]} rows")
    hidden = _hidden(net, inputs)
    delta = np.outer(g, net.output_weights) * (1.0 - hidden**2)
    return NetworkGradient(
        hidden_weights=inputs.T @ delta,
        hidden_bias=delta.sum(axis=0),
        output_weights=hidden.T @ g,
        output_bias=float(g.sum()),
    )


def input_gradients(net: MlpNetwork, inputs: np.ndarray) -> np.ndarray:
    """``d output / d input`` for every row, shape ``(n, inputs)``."""
    inputs = _check_inputs(net, inputs)
    hidden = _hidden(net, inputs)
    return ((1.0 - hidden**2) * net.output_weights) @ net.hidden_weights.T


def sum_squared_error(net: MlpNetwork, inputs: np.ndarray, targets: np.ndarray) -> float:
    residual = predict(net, inputs) - targets
    return float(residual @ residual)


def relative_error(net: MlpNetwork, dataset: EncodedDataset, part: Partition) -> float:
    """SSE over the partition divided by its total sum of squares about its own mean."""
    inputs, targets = dataset.rows(part)
    deviations = targets - targets.mean()
    total = float(deviations @ deviations)
    if total == 0.0:
        raise ZeroVariance(f"targets in the {part.value} partition are constant")
    return sum_squared_error(net, inputs, targets) / total


def _descend(net: MlpNetwork, grad: NetworkGradient, step: float) -> MlpNetwork:
    return MlpNetwork(
        hidden_weights=net.hidden_weights - step * grad.hidden_weights,
        hidden_bias=net.hidden_bias - step * grad.hidden_bias,
        output_weights=net.output_weights - step * grad.output_weights,
        output_bias=net.output_bias - step * grad.output_bias,
    )


def _partition_errors(
    net: MlpNetwork, dataset: EncodedDataset, part: Partition
) -> tuple[float | None, float | None]:
    try:
        inputs, targets = dataset.rows(part)
    except EmptyPartition:
        return None, None
    sse = sum_squared_error(net, inputs, targets)
    try:
        rel = relative_error(net, dataset, part)
    except ZeroVariance:
        logger.warning("Relative error undefined for the %s partition (constant target)", part.value)
        rel = None
    return sse, rel


def train(dataset: EncodedDataset, config: TrainingConfig) -> tuple[MlpNetwork, TrainReport]:
    """Fit the network to the Train rows by full-batch gradient descent.

    Each step moves the parameters by ``learning_rate`` times the gradient of
    half the training SSE divided by the number of training rows.
    """
    config.validate()
    inputs, targets = dataset.rows(Partition.TRAIN)
    rng = np.random.default_rng(config.seed)
    net = initialize(dataset.schema.input_units, config.hidden_units, config.init_scale, rng)
    step = config.learning_rate / len(targets)

    logger.info(
        "Training %d-%d-1 network on %d rows for %d epochs (lr=%g, seed=%d)",
        net.input_units,
        net.hidden_units,
        len(targets),
        config.epochs,
        config.learning_rate,
        config.seed,
    )
    history: list[float] = []
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.epochs + 1):
            residual = predict(net, inputs) - targets
            loss = float(residual @ residual)
            if not math.isfinite(loss):
                raise NonFiniteLoss(epoch, loss)
            history.append(loss)
            if epoch % 100 == 0:
                logger.debug("epoch %d: train SSE %.6f", epoch, loss)
            net = _descend(net, parameter_gradients(net, inputs, residual), step)
            if not net.is_finite():
                raise NonFiniteLoss(epoch, math.inf)

        train_sse, train_rel = _partition_errors(net, dataset, Partition.TRAIN)
        if train_sse is None or not math.isfinite(train_sse):
            raise NonFiniteLoss(config.epochs, math.nan if train_sse is None else train_sse)
        test_sse, test_rel = _partition_errors(net, dataset, Partition.TEST)
    history.append(train_sse)

    report = TrainReport(
        train_sse=train_sse,
        test_sse=test_sse,
        train_relative_error=train_rel,
        test_relative_error=test_rel,
        epochs=config.epochs,
        seed=config.seed,
        prng=PRNG_NAME,
        train_rows=dataset.count(Partition.TRAIN),
        test_rows=dataset.count(Partition.TEST),
        config=config,
        sse_history=tuple(history),
    )
    logger.info(
        "Training finished: train SSE %.4f, relative error train=%s test=%s",
        train_sse,
        "n/a" if train_rel is None else f"{train_rel:.4f}",
        "n/a" if test_rel is None else f"{test_rel:.4f}",
    )
    return net, report


@dataclass(frozen=True, eq=False)
class SavedNetwork:
    network: MlpNetwork
    schema_hash: str
    rescale: dict[str, Any]
    seed: int
    config: dict[str, Any]


def network_to_dict(
    net: MlpNetwork, dataset: EncodedDataset, config: TrainingConfig
) -> dict[str, Any]:
    return {
        "format": NETWORK_FORMAT,
        "format_version": NETWORK_FORMAT_VERSION,
        "schema_hash": dataset.schema.fingerprint,
        "dimensions": {"inputs": net.input_units, "hidden": net.hidden_units, "outputs": 1},
        "activation": {"hidden": net.hidden_activation, "output": net.output_activation},
        "hidden_weights": net.hidden_weights.tolist(),
        "hidden_bias": net.hidden_bias.tolist(),
        "output_weights": net.output_weights.tolist(),
        "output_bias": net.output_bias,
        "rescale": dataset.rescale_params(),
        "seed": config.seed,
        "prng": PRNG_NAME,
        "config": config.to_dict(),
    }


def save_network(
    path: str | Path, net: MlpNetwork, dataset: EncodedDataset, config: TrainingConfig
) -> Path:
    return write_atomic(path, to_json(network_to_dict(net, dataset, config)))


def network_from_dict(raw: Any) -> SavedNetwork:
    if not isinstance(raw, dict) or raw.get("format") != NETWORK_FORMAT:
        raise ReportFormatError("not an aploco network document")
    try:
        dims = raw["dimensions"]
        d, h = int(dims["inputs"]), int(dims["hidden"])
        net = MlpNetwork(
            hidden_weights=np.array(raw["hidden_weights"], dtype=np.float64).reshape(d, h),
            hidden_bias=np.array(raw["hidden_bias"], dtype=np.float64),
            output_weights=np.array(raw["output_weights"], dtype=np.float64),
            output_bias=float(raw["output_bias"]),
        )
        saved = SavedNetwork(
            network=net,
            schema_hash=str(raw["schema_hash"]),
            rescale=dict(raw["rescale"]),
            seed=int(raw["seed"]),
            config=dict(raw["config"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ReportFormatError(f"malformed network document: {exc!r}") from None
    if not net.is_finite():
        raise NonFiniteValue("network document holds non-finite parameters")
    return saved


def load_network(path: str | Path) -> SavedNetwork:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ReportFormatError(f"cannot read network {path}: {exc}") from None
    return network_from_dict(raw)
