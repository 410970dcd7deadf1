"""Report documents and rendered outputs: JSON, aligned text, TSV and SVG."""

from __future__ import annotations

import io
import json
import logging
import os
import tempfile
import time
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from aploco import __version__
from aploco.decision import CriterionSpec, PipelineResult, StageMatrix
from aploco.errors import ReportFormatError

if TYPE_CHECKING:
    from aploco.dataio import DescriptiveStats
    from aploco.importance import ImportanceReport
    from aploco.mlp import TrainReport

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def write_atomic(path: str | Path, content: str | bytes) -> Path:
    """Write ``content`` to a temp file next to ``path``, then rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = content.encode("utf-8") if isinstance(content, str) else content
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    logger.info("Wrote %s", path)
    return path


def write_all(outputs: dict[Path, str | bytes]) -> list[Path]:
    """Write every rendered artifact; nothing is rendered after the first write."""
    return [write_atomic(path, content) for path, content in outputs.items()]


def to_json(payload: Any) -> str:
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def round_half_up(value: float, places: int) -> str:
    """Format ``value`` with ``places`` decimals, ties rounded away from zero."""
    quantum = Decimal(1).scaleb(-places)
    rounded = Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP)
    if rounded == 0:
        rounded = abs(rounded)
    return f"{rounded:f}"


def report_timestamp() -> str:
    """UTC timestamp, pinned by ``SOURCE_DATE_EPOCH`` when it is set."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    moment = float(epoch) if epoch else time.time()
    return datetime.fromtimestamp(moment, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class AlternativeRow:
    id: str
    name: str
    alpha: float
    theta: float
    distance: float
    rank: int


@dataclass(frozen=True)
class RankReportDocument:
    """Serializable record of one ranking run, stage matrices included."""

    criteria: list[dict[str, Any]]
    alternatives: list[AlternativeRow]
    stages: dict[str, list[list[float]]]
    beta: list[float]
    beta_s: float
    tool_version: str
    timestamp: str
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_result(cls, result: PipelineResult) -> RankReportDocument:
        problem = result.problem
        report = result.report
        rows = [
            AlternativeRow(
                id=alt.id,
                name=alt.name,
                alpha=s.alpha,
                theta=s.theta,
                distance=s.distance,
                rank=s.rank,
            )
            for alt, s in zip(problem.alternatives, report.scores)
        ]
        return cls(
            criteria=[
                {"id": c.id, "name": c.name, "direction": c.direction.value, "weight": c.weight}
                for c in problem.criteria
            ],
            alternatives=rows,
            stages={m.stage.value: m.data.tolist() for m in (result.spc, result.lc, result.wlc)},
            beta=report.beta.tolist(),
            beta_s=report.beta_s,
            tool_version=__version__,
            timestamp=report_timestamp(),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
            "criteria": self.criteria,
            "stages": self.stages,
            "beta": self.beta,
            "beta_s": self.beta_s,
            "alternatives": [
                {
                    "id": a.id,
                    "name": a.name,
                    "alpha": a.alpha,
                    "theta": a.theta,
                    "distance": a.distance,
                    "rank": a.rank,
                }
                for a in self.alternatives
            ],
        }

    @classmethod
    def from_dict(cls, raw: Any) -> RankReportDocument:
        if not isinstance(raw, dict):
            raise ReportFormatError("report must be a JSON object")
        version = raw.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ReportFormatError(
                f"unsupported report schema_version {version!r} (expected {SCHEMA_VERSION})"
            )
        try:
            alternatives = [
                AlternativeRow(
                    id=str(a["id"]),
                    name=str(a.get("name", "")),
                    alpha=float(a["alpha"]),
                    theta=float(a["theta"]),
                    distance=float(a["distance"]),
                    rank=int(a["rank"]),
                )
                for a in raw["alternatives"]
            ]
            doc = cls(
                criteria=list(raw["criteria"]),
                alternatives=alternatives,
                stages={str(k): v for k, v in raw["stages"].items()},
                beta=[float(b) for b in raw["beta"]],
                beta_s=float(raw["beta_s"]),
                tool_version=str(raw["tool_version"]),
                timestamp=str(raw["timestamp"]),
                schema_version=int(version),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ReportFormatError(f"malformed rank report: {exc!r}") from None
        if not alternatives:
            raise ReportFormatError("rank report lists no alternatives")
        if sorted(a.rank for a in alternatives) != list(range(1, len(alternatives) + 1)):
            raise ReportFormatError("rank report ranks are not a permutation of 1..r")
        return doc

    @classmethod
    def load(cls, path: str | Path) -> RankReportDocument:
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ReportFormatError(f"cannot read rank report {path}: {exc}") from None
        return cls.from_dict(raw)


def _table(header: list[str], rows: list[list[str]], numeric_from: int = 1) -> list[str]:
    widths = [max(len(cell) for cell in column) for column in zip(header, *rows)]
    lines = []
    for line in [header, *rows]:
        cells = [
            cell.ljust(width) if k < numeric_from else cell.rjust(width)
            for k, (cell, width) in enumerate(zip(line, widths))
        ]
        lines.append("  ".join(cells).rstrip())
    return lines


def render_stage(matrix: StageMatrix, precision: int) -> str:
    header = [matrix.stage.value, *matrix.alternative_ids]
    rows = [
        [cid, *(round_half_up(v, precision) for v in row)]
        for cid, row in zip(matrix.criterion_ids, np.asarray(matrix.data).tolist())
    ]
    return "\n".join(_table(header, rows)) + "\n"


def render_scores(doc: RankReportDocument, precision: int) -> str:
    header = ["Code", "Alternative", "alpha", "beta_s", "theta", "distance", "rank"]
    rows = [
        [
            a.id,
            a.name,
            round_half_up(a.alpha, precision),
            round_half_up(doc.beta_s, precision),
            round_half_up(a.theta, precision),
            round_half_up(a.distance, precision),
            str(a.rank),
        ]
        for a in doc.alternatives
    ]
    return "\n".join(_table(header, rows, numeric_from=2)) + "\n"


def render_text_report(
    result: PipelineResult,
    doc: RankReportDocument,
    *,
    precision: int,
    score_precision: int,
    stages: bool,
) -> str:
    parts: list[str] = []
    if stages:
        for matrix in (result.spc, result.lc, result.wlc):
            parts.append(render_stage(matrix, precision))
        beta_header = ["", *result.report.criterion_ids, "beta_s"]
        beta_row = [
            "beta",
            *(round_half_up(b, score_precision) for b in doc.beta),
            round_half_up(doc.beta_s, score_precision),
        ]
        parts.append("\n".join(_table(beta_header, [beta_row])) + "\n")
    parts.append(render_scores(doc, score_precision))
    ranking = " > ".join(a.id for a in sorted(doc.alternatives, key=lambda a: a.rank))
    parts.append(f"ranking: {ranking}\n")
    return "\n".join(parts)


def sorted_distances(doc: RankReportDocument) -> list[AlternativeRow]:
    """Alternatives from the closest to the farthest from the ideal score."""
    return sorted(doc.alternatives, key=lambda a: (a.distance, a.rank))


def render_distances_tsv(doc: RankReportDocument) -> str:
    lines = ["alternative_id\tdistance"]
    lines.extend(f"{a.id}\t{a.distance!r}" for a in sorted_distances(doc))
    return "\n".join(lines) + "\n"


def render_distances_svg(doc: RankReportDocument) -> bytes:
    """Bar chart of each alternative's distance from the ideal score."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = sorted_distances(doc)
    labels = [f"{a.id} {a.name}".strip() for a in rows]
    values = [a.distance for a in rows]

    with plt.rc_context({"svg.hashsalt": "aploco", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(8, 0.45 * len(rows) + 1.5), facecolor="w")
        try:
            positions = np.arange(len(rows))
            ax.barh(positions, values, color="#4c72b0")
            ax.set_yticks(positions)
            ax.set_yticklabels(labels)
            ax.invert_yaxis()
            ax.set_xlabel(f"distance from beta_s = {doc.beta_s:.3f}")
            ax.set_title("Distances of alternative scores from the ideal score")
            for y, value in zip(positions, values):
                ax.text(value, y, f" {value:.3f}", va="center", fontsize=8)
            fig.tight_layout()
            buffer = io.BytesIO()
            fig.savefig(buffer, format="svg", metadata={"Date": None, "Creator": f"aploco {__version__}"})
        finally:
            plt.close(fig)
    return buffer.getvalue()


def weights_report(
    train_report: TrainReport,
    importances: ImportanceReport,
    criteria: Sequence[CriterionSpec],
    mapping: Mapping[str, str],
) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "timestamp": report_timestamp(),
        "split": {
            "train_rows": train_report.train_rows,
            "test_rows": train_report.test_rows,
            "train_fraction": train_report.config.train_fraction,
        },
        "train": train_report.to_dict(),
        "importance": importances.to_dict(),
        "mapping": dict(mapping),
        "weights": {c.id: c.weight for c in criteria},
    }


def render_importance(importances: ImportanceReport, precision: int) -> str:
    header = ["Predictor", "Importance", "Normalized", "rank"]
    rows = [
        [
            p.name,
            round_half_up(p.importance, precision),
            f"{round_half_up(100 * p.normalized, 1)}%",
            str(p.rank),
        ]
        for p in importances.predictors
    ]
    return "\n".join(_table(header, rows)) + "\n"


def render_weights(criteria: Sequence[CriterionSpec], precision: int) -> str:
    header = ["Code", "Criterion", "direction", "weight"]
    rows = [
        [c.id, c.name, c.direction.value, round_half_up(c.weight, precision)] for c in criteria
    ]
    return "\n".join(_table(header, rows, numeric_from=2)) + "\n"


def render_describe(stats: DescriptiveStats, precision: int) -> str:
    header = ["Variable", "N", "Minimum", "Maximum", "Mean", "Std. Deviation"]
    rows = [
        [
            v.name,
            str(v.n),
            round_half_up(v.minimum, precision),
            round_half_up(v.maximum, precision),
            round_half_up(v.mean, precision),
            round_half_up(v.sd, precision) + (" *" if v.degenerate else ""),
        ]
        for v in stats.variables
    ]
    parts = ["\n".join(_table(header, rows)) + "\n"]
    if any(v.degenerate for v in stats.variables):
        parts.append("* single observation: sample standard deviation undefined, shown as 0\n")
    for factor in stats.factors:
        level_rows = [
            [c.level, str(c.count), f"{round_half_up(c.percent, 1)}%"] for c in factor.levels
        ]
        parts.append("\n".join(_table([factor.name, "N", "Percent"], level_rows)) + "\n")
    return "\n".join(parts)
