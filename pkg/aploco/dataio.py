"""CSV/JSON ingestion for decision problems, weights and predictor datasets.

Every file is read as text first and each cell is converted on its own, so any
malformed value is reported with its file, row and column (1-based, header row
included). Nothing is coerced silently.
"""

from __future__ import annotations

import json
import logging
import math
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from aploco.decision import (
    Alternative,
    CriterionSpec,
    DecisionProblem,
    Direction,
    build_problem,
)
from aploco.encoding import PredictorSchema
from aploco.errors import (
    DuplicateId,
    EmptyDataset,
    IdMismatch,
    MissingField,
    ParseError,
    SchemaViolation,
    UnknownLevel,
)
from aploco.importance import ImportanceReport
from aploco.report import write_atomic

logger = logging.getLogger(__name__)

CRITERIA_HEADER = ("id", "name", "direction", "weight")
WEIGHTS_HEADER = ("criterion_id", "weight")
ALTERNATIVES_HEADER = ("id", "name")
MAPPING_HEADER = ("predictor", "criterion_id")
IMPORTANCE_HEADER = ("predictor", "importance")
MATRIX_KEY = "criterion_id"

_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_PARSER_LINE = re.compile(r"line (\d+)")
_PARSER_SAW = re.compile(r"saw (\d+)")


@dataclass(frozen=True)
class ProblemFileSet:
    matrix: Path
    criteria: Path
    weights: Path | None = None
    alternatives: Path | None = None


@dataclass(frozen=True)
class _Table:
    """A CSV file as strings: header cells plus data rows, with the source path."""

    path: str
    header: list[str]
    rows: list[list[str]]

    def cell(self, i: int, j: int) -> str:
        return self.rows[i][j]

    def coords(self, i: int, j: int) -> tuple[int, int]:
        # data row i sits on file line i + 2 (header is line 1)
        return i + 2, j + 1


def _read_table(path: str | Path, *, decimal_comma: bool = False) -> _Table:
    name = str(path)
    sep = ";" if decimal_comma else ","
    try:
        frame = pd.read_csv(
            path,
            sep=sep,
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
            encoding="utf-8",
        )
    except FileNotFoundError:
        raise ParseError(name, 0, 0, "file not found") from None
    except pd.errors.EmptyDataError:
        raise ParseError(name, 1, 1, "file is empty") from None
    except pd.errors.ParserError as exc:
        line = _PARSER_LINE.search(str(exc))
        saw = _PARSER_SAW.search(str(exc))
        raise ParseError(
            name,
            int(line.group(1)) if line else 0,
            int(saw.group(1)) if saw else 0,
            f"ragged row: {exc}",
        ) from None
    except UnicodeDecodeError as exc:
        raise ParseError(name, 0, 0, f"not UTF-8 text: {exc.reason}") from None

    cells: list[list[str]] = []
    for i, record in enumerate(frame.itertuples(index=False, name=None)):
        row: list[str] = []
        for j, value in enumerate(record):
            if not isinstance(value, str):
                raise ParseError(name, i + 1, j + 1, "missing value")
            row.append(value.strip())
        cells.append(row)
    header, rows = cells[0], cells[1:]
    for j, label in enumerate(header):
        if not label:
            raise ParseError(name, 1, j + 1, "empty header cell")
    return _Table(path=name, header=header, rows=rows)


def _expect_header(table: _Table, expected: Sequence[str]) -> None:
    got = tuple(h.lower() for h in table.header)
    if got != tuple(expected):
        raise ParseError(
            table.path, 1, 1, f"expected header {','.join(expected)}, got {','.join(table.header)}"
        )


def _expect_rows(table: _Table) -> None:
    if not table.rows:
        raise ParseError(table.path, 2, 1, "no data rows")


def parse_number(text: str, path: str, row: int, col: int, *, decimal_comma: bool = False) -> float:
    value = text.strip()
    if decimal_comma:
        if "." in value:
            raise ParseError(path, row, col, f"unexpected '.' in decimal-comma number {text!r}")
        value = value.replace(",", ".")
    if not _NUMBER.fullmatch(value):
        raise ParseError(path, row, col, f"expected a decimal number, got {text!r}")
    number = float(value)
    if not math.isfinite(number):
        raise ParseError(path, row, col, f"number out of range: {text!r}")
    return number


def _number(table: _Table, i: int, j: int, decimal_comma: bool) -> float:
    row, col = table.coords(i, j)
    return parse_number(table.cell(i, j), table.path, row, col, decimal_comma=decimal_comma)


def _unique_column(table: _Table, j: int, what: str) -> list[str]:
    seen: dict[str, int] = {}
    values = []
    for i in range(len(table.rows)):
        value = table.cell(i, j)
        row, col = table.coords(i, j)
        if not value:
            raise ParseError(table.path, row, col, f"empty {what}")
        if value in seen:
            raise DuplicateId(f"{table.path}:{row}:{col}: duplicate {what} {value!r}")
        seen[value] = i
        values.append(value)
    return values


def _same_ids(expected: Sequence[str], given: Sequence[str], where: str) -> None:
    if set(expected) != set(given):
        missing = sorted(set(expected) - set(given))
        extra = sorted(set(given) - set(expected))
        raise IdMismatch(f"{where}: ids do not match the matrix (missing: {missing}, unknown: {extra})")


def load_weights(path: str | Path, *, decimal_comma: bool = False) -> dict[str, float]:
    """Read a ``criterion_id,weight`` file."""
    table = _read_table(path, decimal_comma=decimal_comma)
    _expect_header(table, WEIGHTS_HEADER)
    _expect_rows(table)
    ids = _unique_column(table, 0, "criterion id")
    return {cid: _number(table, i, 1, decimal_comma) for i, cid in enumerate(ids)}


def load_mapping(path: str | Path, *, decimal_comma: bool = False) -> dict[str, str]:
    """Read a ``predictor,criterion_id`` file."""
    table = _read_table(path, decimal_comma=decimal_comma)
    _expect_header(table, MAPPING_HEADER)
    _expect_rows(table)
    predictors = _unique_column(table, 0, "predictor")
    mapping: dict[str, str] = {}
    for i, predictor in enumerate(predictors):
        criterion_id = table.cell(i, 1)
        if not criterion_id:
            row, col = table.coords(i, 1)
            raise ParseError(table.path, row, col, "empty criterion id")
        mapping[predictor] = criterion_id
    return mapping


def load_importance(path: str | Path, *, decimal_comma: bool = False) -> ImportanceReport:
    """Read a pasted ``predictor,importance`` table."""
    table = _read_table(path, decimal_comma=decimal_comma)
    _expect_header(table, IMPORTANCE_HEADER)
    _expect_rows(table)
    names = _unique_column(table, 0, "predictor")
    values = [_number(table, i, 1, decimal_comma) for i in range(len(names))]
    return ImportanceReport.from_values(names, values)


def _load_alternatives(path: Path, ids: Sequence[str], decimal_comma: bool) -> list[Alternative]:
    table = _read_table(path, decimal_comma=decimal_comma)
    _expect_header(table, ALTERNATIVES_HEADER)
    _expect_rows(table)
    listed = _unique_column(table, 0, "alternative id")
    _same_ids(ids, listed, str(path))
    names = {aid: table.cell(i, 1) for i, aid in enumerate(listed)}
    return [Alternative(id=aid, name=names[aid]) for aid in ids]


def load_criteria(path: str | Path, *, decimal_comma: bool = False) -> list[CriterionSpec]:
    """Read an ``id,name,direction,weight`` file in file order."""
    table = _read_table(path, decimal_comma=decimal_comma)
    _expect_header(table, CRITERIA_HEADER)
    _expect_rows(table)
    ids = _unique_column(table, 0, "criterion id")
    criteria = []
    for i, cid in enumerate(ids):
        try:
            direction = Direction.parse(table.cell(i, 2))
        except ValueError as exc:
            row, col = table.coords(i, 2)
            raise ParseError(table.path, row, col, str(exc)) from None
        criteria.append(
            CriterionSpec(
                id=cid,
                name=table.cell(i, 1),
                direction=direction,
                weight=_number(table, i, 3, decimal_comma),
            )
        )
    return criteria


def load_problem(
    files: ProblemFileSet,
    *,
    decimal_comma: bool = False,
    normalize_weights: bool = False,
    weights: Mapping[str, float] | None = None,
) -> DecisionProblem:
    """Read matrix, criteria and optional weights/alternatives files into a problem.

    ``weights`` replaces the criteria file's weight column the same way a
    weights file does; it wins over ``files.weights``.
    """
    matrix = _read_table(files.matrix, decimal_comma=decimal_comma)
    if len(matrix.header) < 2:
        raise ParseError(matrix.path, 1, 2, "matrix header lists no alternatives")
    if matrix.header[0].lower() != MATRIX_KEY:
        raise ParseError(
            matrix.path, 1, 1, f"expected first header cell {MATRIX_KEY}, got {matrix.header[0]!r}"
        )
    _expect_rows(matrix)
    alternative_ids = matrix.header[1:]
    criterion_rows = _unique_column(matrix, 0, "criterion id")
    values = [
        [_number(matrix, i, j, decimal_comma) for j in range(1, len(matrix.header))]
        for i in range(len(matrix.rows))
    ]

    listed = {c.id: c for c in load_criteria(files.criteria, decimal_comma=decimal_comma)}
    _same_ids(criterion_rows, list(listed), str(files.criteria))
    criteria = [listed[cid] for cid in criterion_rows]

    override: Mapping[str, float] | None = weights
    where = "derived weights"
    if override is None and files.weights is not None:
        override = load_weights(files.weights, decimal_comma=decimal_comma)
        where = str(files.weights)
    if override is not None:
        _same_ids(criterion_rows, list(override), where)
        criteria = [replace(c, weight=float(override[c.id])) for c in criteria]

    if files.alternatives is not None:
        alternatives = _load_alternatives(files.alternatives, alternative_ids, decimal_comma)
    else:
        alternatives = [Alternative(id=aid) for aid in alternative_ids]

    problem = build_problem(criteria, alternatives, values, normalize_weights=normalize_weights)
    logger.info(
        "Loaded decision problem from %s: %d criteria x %d alternatives",
        files.matrix,
        *problem.shape,
    )
    return problem


def _csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, lineterminator="\n")


def render_weights_csv(criteria: Sequence[CriterionSpec]) -> str:
    frame = pd.DataFrame(
        {"criterion_id": [c.id for c in criteria], "weight": [repr(float(c.weight)) for c in criteria]}
    )
    return _csv(frame)


def save_problem(problem: DecisionProblem, directory: str | Path) -> ProblemFileSet:
    """Write matrix, criteria and alternatives CSVs that load back bit-exactly."""
    directory = Path(directory)
    matrix = pd.DataFrame(
        [[repr(float(v)) for v in row] for row in problem.values.tolist()],
        columns=list(problem.alternative_ids),
    )
    matrix.insert(0, MATRIX_KEY, list(problem.criterion_ids))
    criteria = pd.DataFrame(
        {
            "id": [c.id for c in problem.criteria],
            "name": [c.name for c in problem.criteria],
            "direction": [c.direction.value for c in problem.criteria],
            "weight": [repr(float(c.weight)) for c in problem.criteria],
        }
    )
    alternatives = pd.DataFrame(
        {"id": list(problem.alternative_ids), "name": [a.name for a in problem.alternatives]}
    )
    files = ProblemFileSet(
        matrix=directory / "matrix.csv",
        criteria=directory / "criteria.csv",
        alternatives=directory / "alternatives.csv",
    )
    write_atomic(files.matrix, _csv(matrix))
    write_atomic(files.criteria, _csv(criteria))
    write_atomic(files.alternatives, _csv(alternatives))
    return files


def load_schema(path: str | Path) -> PredictorSchema:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ParseError(str(path), 0, 0, "file not found") from None
    except json.JSONDecodeError as exc:
        raise ParseError(str(path), exc.lineno, exc.colno, exc.msg) from None
    if not isinstance(raw, dict):
        raise SchemaViolation(f"{path}: schema must be a JSON object")
    return PredictorSchema.from_dict(raw)


def load_raw_dataset(
    data_path: str | Path,
    schema_path: str | Path,
    *,
    decimal_comma: bool = False,
) -> tuple[list[dict[str, Any]], PredictorSchema]:
    """Read a predictor dataset and type every field by its schema."""
    schema = load_schema(schema_path)
    table = _read_table(data_path, decimal_comma=decimal_comma)
    if not table.rows:
        raise EmptyDataset(f"{table.path}: no data rows")

    position = {name: j for j, name in enumerate(table.header)}
    wanted = [*schema.predictor_names, schema.target]
    missing = [name for name in wanted if name not in position]
    if missing:
        raise MissingField(f"{table.path}: header lacks schema fields {missing}")
    numeric = [c.name for c in schema.covariates] + [schema.target]

    rows: list[dict[str, Any]] = []
    for i in range(len(table.rows)):
        record: dict[str, Any] = {}
        for factor in schema.factors:
            j = position[factor.name]
            level = table.cell(i, j)
            if level not in factor.levels:
                row, col = table.coords(i, j)
                raise UnknownLevel(
                    f"{table.path}:{row}:{col}: factor {factor.name!r} has undeclared level "
                    f"{level!r} (declared: {list(factor.levels)})"
                )
            record[factor.name] = level
        for name in numeric:
            record[name] = _number(table, i, position[name], decimal_comma)
        rows.append(record)
    logger.info("Loaded %d rows from %s (%d input units)", len(rows), table.path, schema.input_units)
    return rows, schema


@dataclass(frozen=True)
class VariableStats:
    name: str
    n: int
    minimum: float
    maximum: float
    mean: float
    sd: float
    degenerate: bool = False


@dataclass(frozen=True)
class LevelCount:
    level: str
    count: int
    percent: float


@dataclass(frozen=True)
class FactorFrequencies:
    name: str
    levels: tuple[LevelCount, ...]


@dataclass(frozen=True)
class DescriptiveStats:
    variables: tuple[VariableStats, ...]
    factors: tuple[FactorFrequencies, ...] = ()

    def variable(self, name: str) -> VariableStats:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "variables": [
                {
                    "name": v.name,
                    "n": v.n,
                    "min": v.minimum,
                    "max": v.maximum,
                    "mean": v.mean,
                    "sd": v.sd,
                    "degenerate": v.degenerate,
                }
                for v in self.variables
            ],
            "factors": [
                {
                    "name": f.name,
                    "levels": [
                        {"level": c.level, "count": c.count, "percent": c.percent} for c in f.levels
                    ],
                }
                for f in self.factors
            ],
        }


def _stats(name: str, values: np.ndarray) -> VariableStats:
    low, high = float(values.min()), float(values.max())
    # a rounded mean can step just outside [min, max] on near-constant data
    mean = min(max(float(values.mean()), low), high)
    n = int(values.size)
    if n == 1:
        return VariableStats(name, n, low, high, mean, 0.0, degenerate=True)
    return VariableStats(name, n, low, high, mean, float(values.std(ddof=1)))


def describe(rows: Sequence[Mapping[str, Any]], schema: PredictorSchema) -> DescriptiveStats:
    """n, min, max, mean and sample standard deviation per covariate and target,
    plus level frequencies per factor."""
    if not rows:
        raise EmptyDataset("cannot describe an empty dataset")
    variables = []
    for name in [*(c.name for c in schema.covariates), schema.target]:
        try:
            values = np.array([float(row[name]) for row in rows], dtype=np.float64)
        except KeyError:
            raise MissingField(f"rows lack field {name!r}") from None
        except (TypeError, ValueError):
            raise SchemaViolation(f"field {name!r} holds non-numeric values") from None
        variables.append(_stats(name, values))

    n = len(rows)
    factors = []
    for factor in schema.factors:
        counts = {level: 0 for level in factor.levels}
        for row in rows:
            level = str(row.get(factor.name))
            if level not in counts:
                raise UnknownLevel(f"factor {factor.name!r} has undeclared level {level!r}")
            counts[level] += 1
        factors.append(
            FactorFrequencies(
                name=factor.name,
                levels=tuple(LevelCount(lv, c, 100.0 * c / n) for lv, c in counts.items()),
            )
        )
    return DescriptiveStats(variables=tuple(variables), factors=tuple(factors))
