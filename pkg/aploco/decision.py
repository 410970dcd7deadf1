"""APLOCO ranking core.

A decision problem is a criteria-by-alternatives matrix. Ranking runs five
steps, each a pure function over immutable values:

1. ``build_problem``  validate the matrix, directions and weights
2. ``compute_spc``    deviation of every cell from its row's best value
3. ``compute_lc``     ``1 / ln(p + 2)``, so the row's best cell maps to ``1 / ln 2``
4. ``apply_weights``  scale each row by its criterion weight
5. ``score``          row maxima, their sum, column sums, ratio and rank

``rank_pipeline`` chains them; ``run_stages`` keeps the intermediate matrices
for reporting.
"""

from __future__ import annotations

import hashlib
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from aploco.errors import (
    DimensionMismatch,
    DuplicateId,
    IdMismatch,
    InvariantViolation,
    NegativeWeight,
    NonFiniteValue,
    StageMismatch,
    WeightSumViolation,
)

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOLERANCE = 1e-9
LC_SHIFT = 2.0
LC_MAX = 1.0 / math.log(LC_SHIFT)


class Direction(str, Enum):
    MAXIMIZE = "max"
    MINIMIZE = "min"

    @classmethod
    def parse(cls, text: str) -> Direction:
        """Accept ``max``/``min`` in any case, or the spelled-out forms."""
        key = text.strip().lower()
        if key in ("max", "maximize", "maximum"):
            return cls.MAXIMIZE
        if key in ("min", "minimize", "minimum"):
            return cls.MINIMIZE
        raise ValueError(f"unknown direction {text!r}; expected 'max' or 'min'")


class Stage(str, Enum):
    SPC = "SPC"
    LC = "LC"
    WLC = "WLC"


@dataclass(frozen=True)
class CriterionSpec:
    id: str
    name: str
    direction: Direction
    weight: float


@dataclass(frozen=True)
class Alternative:
    id: str
    name: str = ""


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class DecisionProblem:
    """Validated decision matrix; criteria are rows, alternatives are columns."""

    criteria: tuple[CriterionSpec, ...]
    alternatives: tuple[Alternative, ...]
    values: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.criteria), len(self.alternatives)

    @property
    def criterion_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.criteria)

    @property
    def alternative_ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.alternatives)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.criteria], dtype=np.float64)

    @property
    def fingerprint(self) -> str:
        """Identity of the matrix a stage was derived from. Weights are excluded."""
        digest = hashlib.sha256()
        for criterion in self.criteria:
            digest.update(f"{criterion.id}\x1f{criterion.direction.value}\x1e".encode())
        for alternative in self.alternatives:
            digest.update(f"{alternative.id}\x1e".encode())
        digest.update(np.ascontiguousarray(self.values).tobytes())
        return digest.hexdigest()


@dataclass(frozen=True, eq=False)
class StageMatrix:
    stage: Stage
    data: np.ndarray
    source: str
    criterion_ids: tuple[str, ...]
    alternative_ids: tuple[str, ...]


@dataclass(frozen=True)
class AlternativeScore:
    alternative_id: str
    alpha: float
    theta: float
    distance: float
    rank: int


@dataclass(frozen=True, eq=False)
class ScoreReport:
    """Scores of every alternative, kept in input order."""

    criterion_ids: tuple[str, ...]
    beta: np.ndarray
    beta_s: float
    scores: tuple[AlternativeScore, ...]

    @property
    def alpha(self) -> np.ndarray:
        return np.array([s.alpha for s in self.scores])

    @property
    def theta(self) -> np.ndarray:
        return np.array([s.theta for s in self.scores])

    @property
    def distance(self) -> np.ndarray:
        return np.array([s.distance for s in self.scores])

    @property
    def ranks(self) -> np.ndarray:
        return np.array([s.rank for s in self.scores], dtype=int)

    @property
    def best(self) -> AlternativeScore:
        return min(self.scores, key=lambda s: s.rank)

    def ranking(self) -> list[str]:
        """Alternative ids from rank 1 downwards."""
        return [s.alternative_id for s in sorted(self.scores, key=lambda s: s.rank)]

    def by_id(self, alternative_id: str) -> AlternativeScore:
        for s in self.scores:
            if s.alternative_id == alternative_id:
                return s
        raise KeyError(alternative_id)


@dataclass(frozen=True, eq=False)
class PipelineResult:
    problem: DecisionProblem
    spc: StageMatrix
    lc: StageMatrix
    wlc: StageMatrix
    report: ScoreReport


def _check_unique(ids: Sequence[str], what: str) -> None:
    seen: set[str] = set()
    for item in ids:
        if item in seen:
            raise DuplicateId(f"duplicate {what} id {item!r}")
        seen.add(item)


def _checked_weights(criteria: Sequence[CriterionSpec], normalize: bool) -> list[float]:
    weights = [float(c.weight) for c in criteria]
    for criterion, weight in zip(criteria, weights):
        if not math.isfinite(weight):
            raise NonFiniteValue(f"weight of criterion {criterion.id!r} is not finite: {weight!r}")
        if weight < 0:
            raise NegativeWeight(f"weight of criterion {criterion.id!r} is negative: {weight!r}")
    total = math.fsum(weights)
    if normalize:
        if total <= 0:
            raise WeightSumViolation("cannot normalize weights that sum to 0")
        return [w / total for w in weights]
    if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise WeightSumViolation(
            f"weights sum to {total!r}, expected 1 (use weight normalization to rescale)"
        )
    return weights


def build_problem(
    criteria: Sequence[CriterionSpec],
    alternatives: Sequence[str | Alternative],
    values: Sequence[Sequence[float]] | np.ndarray,
    *,
    normalize_weights: bool = False,
) -> DecisionProblem:
    """Validate and freeze a decision matrix."""
    alts = tuple(a if isinstance(a, Alternative) else Alternative(id=a) for a in alternatives)
    crits = tuple(criteria)
    if not crits or not alts:
        raise DimensionMismatch(
            f"a problem needs at least one criterion and one alternative, got {len(crits)}x{len(alts)}"
        )
    try:
        matrix = np.array(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise DimensionMismatch(f"values do not form a rectangular numeric matrix: {exc}") from None
    if matrix.shape != (len(crits), len(alts)):
        raise DimensionMismatch(
            f"values have shape {matrix.shape}, expected ({len(crits)}, {len(alts)}) "
            "(criteria x alternatives)"
        )
    bad = np.argwhere(~np.isfinite(matrix))
    if bad.size:
        i, j = (int(k) for k in bad[0])
        raise NonFiniteValue(
            f"value for criterion {crits[i].id!r}, alternative {alts[j].id!r} is not finite: {matrix[i, j]!r}"
        )
    with np.errstate(over="ignore"):
        span = matrix.max(axis=1) - matrix.min(axis=1)
    wide = np.flatnonzero(~np.isfinite(span))
    if wide.size:
        i = int(wide[0])
        raise NonFiniteValue(
            f"values of criterion {crits[i].id!r} span more than the float range: "
            f"{matrix[i].min()!r} to {matrix[i].max()!r}"
        )
    _check_unique([c.id for c in crits], "criterion")
    _check_unique([a.id for a in alts], "alternative")

    weights = _checked_weights(crits, normalize_weights)
    crits = tuple(
        CriterionSpec(id=c.id, name=c.name, direction=c.direction, weight=w)
        for c, w in zip(crits, weights)
    )
    return DecisionProblem(criteria=crits, alternatives=alts, values=_frozen(matrix))


def with_weights(
    problem: DecisionProblem,
    weights: Mapping[str, float] | Sequence[float],
    *,
    normalize: bool = False,
) -> DecisionProblem:
    """Return a copy of ``problem`` with replaced criterion weights."""
    if isinstance(weights, Mapping):
        expected = set(problem.criterion_ids)
        given = set(weights)
        if given != expected:
            missing = sorted(expected - given)
            extra = sorted(given - expected)
            raise IdMismatch(f"weights do not match criteria (missing: {missing}, unknown: {extra})")
        ordered = [float(weights[cid]) for cid in problem.criterion_ids]
    else:
        ordered = [float(w) for w in weights]
        if len(ordered) != len(problem.criteria):
            raise DimensionMismatch(
                f"got {len(ordered)} weights for {len(problem.criteria)} criteria"
            )
    criteria = [
        CriterionSpec(id=c.id, name=c.name, direction=c.direction, weight=w)
        for c, w in zip(problem.criteria, ordered)
    ]
    return build_problem(
        criteria, problem.alternatives, problem.values, normalize_weights=normalize
    )


def _stage(stage: Stage, data: np.ndarray, problem: DecisionProblem) -> StageMatrix:
    return StageMatrix(
        stage=stage,
        data=_frozen(data),
        source=problem.fingerprint,
        criterion_ids=problem.criterion_ids,
        alternative_ids=problem.alternative_ids,
    )


def _expect(matrix: StageMatrix, stage: Stage) -> None:
    if matrix.stage is not stage:
        raise StageMismatch(f"expected a {stage.value} matrix, got {matrix.stage.value}")


def compute_spc(problem: DecisionProblem) -> StageMatrix:
    """Deviation of each cell from the best value of its criterion row."""
    values = problem.values
    maximize = np.array([c.direction is Direction.MAXIMIZE for c in problem.criteria])
    best_high = values.max(axis=1, keepdims=True)
    best_low = values.min(axis=1, keepdims=True)
    data = np.where(maximize[:, None], best_high - values, values - best_low)
    return _stage(Stage.SPC, data, problem)


def compute_lc(spc: StageMatrix) -> StageMatrix:
    _expect(spc, Stage.SPC)
    data = 1.0 / np.log(spc.data + LC_SHIFT)
    return StageMatrix(
        stage=Stage.LC,
        data=_frozen(data),
        source=spc.source,
        criterion_ids=spc.criterion_ids,
        alternative_ids=spc.alternative_ids,
    )


def apply_weights(lc: StageMatrix, problem: DecisionProblem) -> StageMatrix:
    _expect(lc, Stage.LC)
    if lc.data.shape != problem.shape:
        raise DimensionMismatch(
            f"LC matrix has shape {lc.data.shape}, problem has shape {problem.shape}"
        )
    if lc.source != problem.fingerprint:
        raise StageMismatch("LC matrix was derived from a different decision problem")
    data = lc.data * problem.weights[:, None]
    return _stage(Stage.WLC, data, problem)


def score(wlc: StageMatrix) -> ScoreReport:
    """Score alternatives against the sum of the weighted row maxima.

    Sums use ``math.fsum`` so a column is never larger than the sum of the row
    maxima it is bounded by, which keeps every ratio inside ``(0, 1]``.
    """
    _expect(wlc, Stage.WLC)
    data = wlc.data
    beta = data.max(axis=1)
    beta_s = math.fsum(beta.tolist())
    if not beta_s > 0:
        raise InvariantViolation(f"sum of row maxima must be positive, got {beta_s!r}")

    alpha = [math.fsum(data[:, j].tolist()) for j in range(data.shape[1])]
    theta = [a / beta_s for a in alpha]
    distance = [beta_s - a for a in alpha]

    # stable: equal ratios keep input order
    order = sorted(range(len(alpha)), key=lambda j: -theta[j])
    ranks = [0] * len(alpha)
    for position, j in enumerate(order, start=1):
        ranks[j] = position

    scores = tuple(
        AlternativeScore(
            alternative_id=alt_id,
            alpha=alpha[j],
            theta=theta[j],
            distance=distance[j],
            rank=ranks[j],
        )
        for j, alt_id in enumerate(wlc.alternative_ids)
    )
    report = ScoreReport(
        criterion_ids=wlc.criterion_ids,
        beta=_frozen(beta),
        beta_s=beta_s,
        scores=scores,
    )
    _check_report(report)
    return report


def _check_report(report: ScoreReport) -> None:
    for s in report.scores:
        if not 0.0 < s.theta <= 1.0:
            raise InvariantViolation(f"score of {s.alternative_id!r} outside (0, 1]: {s.theta!r}")
        if s.distance < 0.0:
            raise InvariantViolation(f"negative distance for {s.alternative_id!r}: {s.distance!r}")
    if sorted(s.rank for s in report.scores) != list(range(1, len(report.scores) + 1)):
        raise InvariantViolation("ranks are not a permutation of 1..r")


def run_stages(problem: DecisionProblem) -> PipelineResult:
    """Run every step and keep the intermediate matrices."""
    spc = compute_spc(problem)
    lc = compute_lc(spc)
    wlc = apply_weights(lc, problem)
    report = score(wlc)
    c, r = problem.shape
    logger.debug(
        "Ranked %d alternatives on %d criteria: best=%s theta=%.6f beta_s=%.6f",
        r,
        c,
        report.best.alternative_id,
        report.best.theta,
        report.beta_s,
    )
    return PipelineResult(problem=problem, spc=spc, lc=lc, wlc=wlc, report=report)


def rank_pipeline(problem: DecisionProblem) -> ScoreReport:
    return run_stages(problem).report
