"""Predictor importance from a trained network, and its use as criterion weights."""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from aploco.decision import CriterionSpec
from aploco.encoding import EncodedDataset
from aploco.errors import DegenerateImportance, IdMismatch, NegativeWeight, UnmappedCriterion
from aploco.mlp import MlpNetwork, input_gradients

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictorImportance:
    name: str
    importance: float
    normalized: float
    rank: int


@dataclass(frozen=True)
class ImportanceReport:
    predictors: tuple[PredictorImportance, ...]

    @classmethod
    def from_values(cls, names: Sequence[str], values: Sequence[float]) -> ImportanceReport:
        """Normalize raw nonnegative scores to sum 1 and rank them (ties keep input order)."""
        if len(names) != len(values):
            raise IdMismatch(f"{len(names)} predictor names for {len(values)} values")
        if len(set(names)) != len(names):
            raise IdMismatch("predictor names must be unique")
        raw = [float(v) for v in values]
        if any(not math.isfinite(v) or v < 0 for v in raw):
            raise NegativeWeight("importances must be finite and nonnegative")
        total = math.fsum(raw)
        if total <= 0:
            raise DegenerateImportance("all predictor sensitivities are zero")
        shares = [v / total for v in raw]
        peak = max(shares)
        order = sorted(range(len(shares)), key=lambda k: -shares[k])
        ranks = [0] * len(shares)
        for position, k in enumerate(order, start=1):
            ranks[k] = position
        return cls(
            predictors=tuple(
                PredictorImportance(name=n, importance=s, normalized=s / peak, rank=r)
                for n, s, r in zip(names, shares, ranks)
            )
        )

    def as_dict(self) -> dict[str, float]:
        return {p.name: p.importance for p in self.predictors}

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": "mean absolute input gradient, one-hot blocks summed",
            "predictors": [
                {
                    "name": p.name,
                    "importance": p.importance,
                    "normalized_importance": p.normalized,
                    "rank": p.rank,
                }
                for p in self.predictors
            ],
        }


def importance(net: MlpNetwork, dataset: EncodedDataset) -> ImportanceReport:
    """Mean ``|d output / d input|`` over all rows, summed per predictor and normalized."""
    sensitivity = np.abs(input_gradients(net, dataset.inputs)).mean(axis=0)
    raw = [float(sensitivity[col.start : col.stop].sum()) for col in dataset.columns]
    if not any(v > 0 for v in raw):
        raise DegenerateImportance("the network output does not depend on any input")
    return ImportanceReport.from_values([col.name for col in dataset.columns], raw)


def importances_to_weights(
    report: ImportanceReport,
    mapping: Mapping[str, str],
    criteria: Sequence[CriterionSpec],
) -> list[CriterionSpec]:
    """Give every criterion the importance of the predictor mapped onto it.

    ``mapping`` goes predictor -> criterion id. Predictors left out of the
    mapping are dropped and the remaining weights rescaled to sum to 1.
    """
    shares = report.as_dict()
    unknown = sorted(set(mapping) - set(shares))
    if unknown:
        raise IdMismatch(f"mapping names predictors the report does not have: {unknown}")
    criterion_ids = [c.id for c in criteria]
    strays = sorted(set(mapping.values()) - set(criterion_ids))
    if strays:
        raise IdMismatch(f"mapping targets unknown criteria: {strays}")

    by_criterion: dict[str, float] = {}
    for predictor, criterion_id in mapping.items():
        if criterion_id in by_criterion:
            raise IdMismatch(f"criterion {criterion_id!r} is mapped from more than one predictor")
        by_criterion[criterion_id] = shares[predictor]
    missing = [cid for cid in criterion_ids if cid not in by_criterion]
    if missing:
        raise UnmappedCriterion(f"no predictor is mapped to criteria {missing}")

    total = math.fsum(by_criterion.values())
    if total <= 0:
        raise DegenerateImportance("mapped predictors carry no importance")
    dropped = sorted(set(shares) - set(mapping))
    if dropped:
        logger.warning(
            "Predictors %s are not mapped to any criterion; rescaling the remaining weights", dropped
        )
    return [replace(c, weight=by_criterion[c.id] / total) for c in criteria]
