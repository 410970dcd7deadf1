"""Predictor schema, dataset encoding and the train/test partition."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any

import numpy as np
from sklearn.preprocessing import MinMaxScaler, OneHotEncoder

from aploco.errors import (
    ConfigError,
    EmptyDataset,
    EmptyPartition,
    MissingField,
    SchemaViolation,
    UnknownLevel,
    ZeroVariance,
)

logger = logging.getLogger(__name__)

PRNG_NAME = "numpy.PCG64"


@dataclass(frozen=True)
class Factor:
    name: str
    levels: tuple[str, ...]

    @property
    def width(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class Covariate:
    name: str


@dataclass(frozen=True)
class PredictorSchema:
    """Factors (one-hot encoded), covariates (rescaled) and one numeric target."""

    factors: tuple[Factor, ...]
    covariates: tuple[Covariate, ...]
    target: str

    def __post_init__(self) -> None:
        names = [f.name for f in self.factors] + [c.name for c in self.covariates] + [self.target]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise SchemaViolation(f"field names must be unique, repeated: {duplicates}")
        for factor in self.factors:
            if len(factor.levels) < 2:
                raise SchemaViolation(
                    f"factor {factor.name!r} needs at least 2 levels, has {len(factor.levels)}"
                )
            if len(set(factor.levels)) != len(factor.levels):
                raise SchemaViolation(f"factor {factor.name!r} repeats a level label")
        if not self.factors and not self.covariates:
            raise SchemaViolation("schema declares no predictors")

    @property
    def input_units(self) -> int:
        return sum(f.width for f in self.factors) + len(self.covariates)

    @property
    def predictor_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors) + tuple(c.name for c in self.covariates)

    def to_dict(self) -> dict[str, Any]:
        return {
            "factors": [{"name": f.name, "levels": list(f.levels)} for f in self.factors],
            "covariates": [{"name": c.name} for c in self.covariates],
            "target": {"name": self.target},
        }

    @property
    def fingerprint(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> PredictorSchema:
        try:
            factors = tuple(
                Factor(name=str(f["name"]), levels=tuple(str(level) for level in f["levels"]))
                for f in raw.get("factors", [])
            )
            covariates = tuple(Covariate(name=str(c["name"])) for c in raw.get("covariates", []))
            target = str(raw["target"]["name"])
        except (KeyError, TypeError) as exc:
            raise SchemaViolation(f"malformed schema: missing or invalid {exc}") from None
        return cls(factors=factors, covariates=covariates, target=target)


@dataclass(frozen=True)
class PredictorColumns:
    """Input columns ``[start, stop)`` that belong to one predictor."""

    name: str
    start: int
    stop: int


@dataclass(frozen=True)
class CovariateRange:
    name: str
    minimum: float
    maximum: float


class Partition(str, Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True, eq=False)
class EncodedDataset:
    schema: PredictorSchema
    inputs: np.ndarray
    targets: np.ndarray
    columns: tuple[PredictorColumns, ...]
    covariate_ranges: tuple[CovariateRange, ...]
    target_mean: float
    target_sd: float
    partition: tuple[Partition, ...] | None = None

    @property
    def n_rows(self) -> int:
        return int(self.inputs.shape[0])

    def mask(self, part: Partition) -> np.ndarray:
        if self.partition is None:
            raise EmptyPartition("dataset has not been partitioned")
        return np.array([label is part for label in self.partition], dtype=bool)

    def rows(self, part: Partition) -> tuple[np.ndarray, np.ndarray]:
        selected = self.mask(part)
        if not selected.any():
            raise EmptyPartition(f"the {part.value} partition is empty")
        return self.inputs[selected], self.targets[selected]

    def count(self, part: Partition) -> int:
        return int(self.mask(part).sum())

    def destandardize(self, values: np.ndarray | float) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.target_sd + self.target_mean

    def rescale_params(self) -> dict[str, Any]:
        return {
            "covariates": [
                {"name": r.name, "min": r.minimum, "max": r.maximum} for r in self.covariate_ranges
            ],
            "target": {"name": self.schema.target, "mean": self.target_mean, "sd": self.target_sd},
        }


def _numeric(row_index: int, field: str, value: Any) -> float:
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise SchemaViolation(f"row {row_index}: field {field!r} is not numeric: {value!r}") from None
    if not math.isfinite(number):
        raise SchemaViolation(f"row {row_index}: field {field!r} is not finite: {value!r}")
    return number


def _field(row_index: int, row: Mapping[str, Any], name: str) -> Any:
    if name not in row:
        raise MissingField(f"row {row_index}: missing field {name!r}")
    return row[name]


def _one_hot(records: Sequence[Mapping[str, Any]], factor: Factor) -> np.ndarray:
    levels = [str(_field(i, row, factor.name)) for i, row in enumerate(records)]
    for i, level in enumerate(levels):
        if level not in factor.levels:
            raise UnknownLevel(
                f"row {i}: factor {factor.name!r} has undeclared level {level!r} "
                f"(declared: {list(factor.levels)})"
            )
    encoder = OneHotEncoder(
        categories=[list(factor.levels)], handle_unknown="error", sparse_output=False, dtype=np.float64
    )
    return encoder.fit_transform(np.array(levels, dtype=object).reshape(-1, 1))


def _rescale(raw: np.ndarray, covariates: Sequence[Covariate]) -> tuple[np.ndarray, list[CovariateRange]]:
    for k, covariate in enumerate(covariates):
        low, high = float(raw[:, k].min()), float(raw[:, k].max())
        if high == low:
            raise ZeroVariance(f"covariate {covariate.name!r} is constant ({low!r})")
    scaler = MinMaxScaler(feature_range=(-1.0, 1.0), clip=True)
    scaled = scaler.fit_transform(raw)
    ranges = [
        CovariateRange(c.name, float(low), float(high))
        for c, low, high in zip(covariates, scaler.data_min_, scaler.data_max_)
    ]
    return scaled, ranges


def encode(records: Sequence[Mapping[str, Any]], schema: PredictorSchema) -> EncodedDataset:
    """One-hot the factors, map covariates onto [-1, 1] and standardize the target.

    Covariates use ``2 (x - min) / (max - min) - 1``; the target uses the sample
    standard deviation. Both sets of parameters are recorded for inversion.
    """
    if not records:
        raise EmptyDataset("no records to encode")
    n = len(records)
    blocks: list[np.ndarray] = []
    columns: list[PredictorColumns] = []

    offset = 0
    for factor in schema.factors:
        blocks.append(_one_hot(records, factor))
        columns.append(PredictorColumns(factor.name, offset, offset + factor.width))
        offset += factor.width

    ranges: list[CovariateRange] = []
    if schema.covariates:
        raw = np.array(
            [
                [_numeric(i, c.name, _field(i, row, c.name)) for c in schema.covariates]
                for i, row in enumerate(records)
            ],
            dtype=np.float64,
        )
        scaled, ranges = _rescale(raw, schema.covariates)
        blocks.append(scaled)
        for covariate in schema.covariates:
            columns.append(PredictorColumns(covariate.name, offset, offset + 1))
            offset += 1
    inputs = np.ascontiguousarray(np.hstack(blocks), dtype=np.float64)

    target = np.array([_numeric(i, schema.target, _field(i, row, schema.target)) for i, row in enumerate(records)])
    if n < 2:
        raise ZeroVariance("target standardization needs at least two rows")
    mean = float(target.mean())
    sd = float(target.std(ddof=1))
    if sd == 0.0:
        raise ZeroVariance(f"target {schema.target!r} is constant")
    standardized = (target - mean) / sd

    inputs.setflags(write=False)
    standardized.setflags(write=False)
    logger.debug("Encoded %d rows into %d input units", n, schema.input_units)
    return EncodedDataset(
        schema=schema,
        inputs=inputs,
        targets=standardized,
        columns=tuple(columns),
        covariate_ranges=tuple(ranges),
        target_mean=mean,
        target_sd=sd,
    )


def train_count(n: int, train_fraction: float) -> int:
    """``ceil(n * fraction)``, kept inside ``[1, n - 1]``."""
    # round() guards products like 200 * 0.71 that land a hair above an integer
    wanted = math.ceil(round(n * train_fraction, 9))
    return min(max(wanted, 1), n - 1)


def partition(dataset: EncodedDataset, train_fraction: float, seed: int) -> EncodedDataset:
    """Label rows Train/Test with a seeded uniform shuffle."""
    n = dataset.n_rows
    if n < 2:
        raise EmptyDataset(f"partitioning needs at least 2 rows, got {n}")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction!r}")
    n_train = train_count(n, train_fraction)
    order = np.random.default_rng(seed).permutation(n)
    labels = [Partition.TEST] * n
    for i in order[:n_train]:
        labels[int(i)] = Partition.TRAIN
    logger.info("Partitioned %d rows: %d train / %d test (seed=%d)", n, n_train, n - n_train, seed)
    return replace(dataset, partition=tuple(labels))
