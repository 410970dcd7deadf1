"""CLI entry point for aploco.

Exit codes: 0 success, 1 invalid input or configuration, 2 internal invariant
violation (and click usage errors), 3 training diverged.
"""

from __future__ import annotations

import logging
import os
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import click

from aploco import __version__
from aploco.config import AplocoConfig, TrainingConfig, load_config
from aploco.dataio import (
    ProblemFileSet,
    describe,
    load_criteria,
    load_mapping,
    load_problem,
    load_raw_dataset,
    render_weights_csv,
)
from aploco.decision import CriterionSpec, DecisionProblem, Direction, run_stages
from aploco.encoding import encode, partition
from aploco.errors import AplocoError, InvariantViolation, NonFiniteLoss
from aploco.importance import importance, importances_to_weights
from aploco.mlp import network_to_dict, train
from aploco.report import (
    RankReportDocument,
    render_describe,
    render_distances_svg,
    render_distances_tsv,
    render_importance,
    render_text_report,
    render_weights,
    to_json,
    weights_report,
    write_all,
)

logger = logging.getLogger(__name__)

OUT_DIR_ENV = "APLOCO_OUT_DIR"

EXIT_INPUT = 1
EXIT_INVARIANT = 2
EXIT_DIVERGED = 3

_input_file = click.Path(dir_okay=False, path_type=Path)


@contextmanager
def _exit_codes() -> Iterator[None]:
    try:
        yield
    except NonFiniteLoss as exc:
        click.echo(f"error: {exc}", err=True)
        raise click.exceptions.Exit(EXIT_DIVERGED) from None
    except (AplocoError, FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        raise click.exceptions.Exit(EXIT_INPUT) from None
    except InvariantViolation as exc:
        click.echo(f"error: internal invariant violated: {exc}", err=True)
        raise click.exceptions.Exit(EXIT_INVARIANT) from None


def _options(*decorators: Callable[[Callable[..., Any]], Callable[..., Any]]):
    def apply(func: Callable[..., Any]) -> Callable[..., Any]:
        for decorator in reversed(decorators):
            func = decorator(func)
        return func

    return apply


out_dir_option = click.option(
    "--out-dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help=f"Directory for output files (default: config 'out_dir', then ${OUT_DIR_ENV}, then '.').",
)
decimal_comma_option = click.option(
    "--decimal-comma",
    is_flag=True,
    help="Read CSV files with ';' delimiters and ',' as the decimal separator.",
)
training_options = _options(
    click.option("--seed", type=int, default=None, help="Seed for the split and initial weights."),
    click.option("--epochs", type=click.IntRange(min=0), default=None, help="Training epochs."),
    click.option("--lr", "learning_rate", type=float, default=None, help="Learning rate."),
    click.option("--hidden-units", type=click.IntRange(min=1), default=None, help="Hidden units."),
    click.option("--init-scale", type=float, default=None, help="Initial weights lie in [-s, s]."),
    click.option(
        "--train-fraction", type=float, default=None, help="Share of rows in the training partition."
    ),
)
display_options = _options(
    click.option(
        "--precision",
        type=click.IntRange(min=0),
        default=None,
        help="Decimals for printed stage matrices (default 2).",
    ),
    click.option(
        "--score-precision",
        type=click.IntRange(min=0),
        default=None,
        help="Decimals for printed scores and weights (default 3).",
    ),
)


@dataclass(frozen=True)
class _Settings:
    config: AplocoConfig

    def out_dir(self, flag: Path | None) -> Path:
        if flag is not None:
            return flag
        if self.config.out_dir is not None:
            return Path(self.config.out_dir)
        return Path(os.environ.get(OUT_DIR_ENV) or ".")

    def training(self, **flags: Any) -> TrainingConfig:
        overrides = {key: value for key, value in flags.items() if value is not None}
        return replace(self.config.training, **overrides).validate()

    def precisions(self, precision: int | None, score_precision: int | None) -> tuple[int, int]:
        display = self.config.display
        return (
            display.precision if precision is None else precision,
            display.score_precision if score_precision is None else score_precision,
        )


@click.group()
@click.option(
    "--config",
    "config_path",
    type=_input_file,
    default=None,
    help="Path to an aploco.json configuration file.",
)
@click.option("-v", "--verbose", is_flag=True, help="Log debug messages.")
@click.version_option(__version__, prog_name="aploco")
@click.pass_context
def main(ctx: click.Context, config_path: Path | None, verbose: bool) -> None:
    """aploco: rank alternatives by the logarithmic concept, with MLP-derived weights."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(name)s — %(message)s",
        force=True,
    )
    with _exit_codes():
        config = load_config(config_path) if config_path is not None else AplocoConfig()
    ctx.obj = _Settings(config)


def _rank_outputs(
    problem: DecisionProblem,
    out_dir: Path,
    *,
    stages: bool,
    precision: int,
    score_precision: int,
) -> tuple[dict[Path, str | bytes], RankReportDocument, str]:
    result = run_stages(problem)
    doc = RankReportDocument.from_result(result)
    text = render_text_report(
        result, doc, precision=precision, score_precision=score_precision, stages=stages
    )
    outputs: dict[Path, str | bytes] = {
        out_dir / "rank_report.json": to_json(doc.to_dict()),
        out_dir / "rank_report.txt": text,
    }
    return outputs, doc, text


def _distance_outputs(doc: RankReportDocument, out_dir: Path, svg: bool) -> dict[Path, str | bytes]:
    outputs: dict[Path, str | bytes] = {out_dir / "distances.tsv": render_distances_tsv(doc)}
    if svg:
        outputs[out_dir / "distances.svg"] = render_distances_svg(doc)
    return outputs


@dataclass(frozen=True)
class _DerivedWeights:
    criteria: list[CriterionSpec]
    outputs: dict[Path, str | bytes]
    text: str


def _derive_weights(
    data: Path,
    schema_path: Path,
    mapping_path: Path,
    criteria: list[CriterionSpec],
    training: TrainingConfig,
    out_dir: Path,
    *,
    decimal_comma: bool,
    score_precision: int,
) -> _DerivedWeights:
    rows, schema = load_raw_dataset(data, schema_path, decimal_comma=decimal_comma)
    mapping = load_mapping(mapping_path, decimal_comma=decimal_comma)
    dataset = partition(encode(rows, schema), training.train_fraction, training.seed)
    net, report = train(dataset, training)
    importances = importance(net, dataset)
    weighted = importances_to_weights(importances, mapping, criteria)
    text = "\n".join(
        [
            f"split: {report.train_rows} train / {report.test_rows} test (seed {report.seed})\n",
            render_importance(importances, score_precision),
            render_weights(weighted, score_precision),
        ]
    )
    outputs: dict[Path, str | bytes] = {
        out_dir / "weights.csv": render_weights_csv(weighted),
        out_dir / "weights_report.json": to_json(
            weights_report(report, importances, weighted, mapping)
        ),
        out_dir / "network.json": to_json(network_to_dict(net, dataset, training)),
    }
    return _DerivedWeights(criteria=weighted, outputs=outputs, text=text)


def _mapped_criteria(mapping_path: Path, decimal_comma: bool) -> list[CriterionSpec]:
    """Criteria named by a mapping file, in first-mention order, when no criteria file is given."""

    seen: dict[str, None] = {}
    for criterion_id in load_mapping(mapping_path, decimal_comma=decimal_comma).values():
        seen.setdefault(criterion_id, None)
    return [CriterionSpec(id=cid, name=cid, direction=Direction.MAXIMIZE, weight=0.0) for cid in seen]


@main.command()
@click.option("--matrix", type=_input_file, required=True, help="Decision matrix CSV.")
@click.option("--criteria", type=_input_file, required=True, help="Criteria CSV.")
@click.option("--weights", type=_input_file, default=None, help="Weights CSV overriding the criteria file.")
@click.option("--alternatives", type=_input_file, default=None, help="Alternatives CSV (id,name).")
@click.option("--normalize-weights", is_flag=True, help="Divide weights by their sum instead of rejecting.")
@click.option("--stages", is_flag=True, help="Also print the SPC, LC and WLC matrices.")
@display_options
@decimal_comma_option
@out_dir_option
@click.pass_obj
def rank(
    settings: _Settings,
    matrix: Path,
    criteria: Path,
    weights: Path | None,
    alternatives: Path | None,
    normalize_weights: bool,
    stages: bool,
    precision: int | None,
    score_precision: int | None,
    decimal_comma: bool,
    out_dir: Path | None,
) -> None:
    """Rank the alternatives of a decision matrix."""
    with _exit_codes():
        precision, score_precision = settings.precisions(precision, score_precision)
        problem = load_problem(
            ProblemFileSet(matrix=matrix, criteria=criteria, weights=weights, alternatives=alternatives),
            decimal_comma=decimal_comma,
            normalize_weights=normalize_weights,
        )
        outputs, _, text = _rank_outputs(
            problem,
            settings.out_dir(out_dir),
            stages=stages,
            precision=precision,
            score_precision=score_precision,
        )
        write_all(outputs)
    click.echo(text, nl=False)


@main.command()
@click.option("--data", type=_input_file, required=True, help="Predictor dataset CSV.")
@click.option("--schema", "schema_path", type=_input_file, required=True, help="Predictor schema JSON.")
@click.option("--mapping", type=_input_file, required=True, help="Predictor to criterion mapping CSV.")
@click.option("--criteria", type=_input_file, default=None, help="Criteria CSV fixing order and coverage.")
@training_options
@display_options
@decimal_comma_option
@out_dir_option
@click.pass_obj
def weights(
    settings: _Settings,
    data: Path,
    schema_path: Path,
    mapping: Path,
    criteria: Path | None,
    precision: int | None,
    score_precision: int | None,
    decimal_comma: bool,
    out_dir: Path | None,
    **training_flags: Any,
) -> None:
    """Train the network and turn predictor importances into criterion weights."""
    with _exit_codes():
        _, score_precision = settings.precisions(precision, score_precision)
        training = settings.training(**training_flags)
        specs = (
            load_criteria(criteria, decimal_comma=decimal_comma)
            if criteria is not None
            else _mapped_criteria(mapping, decimal_comma)
        )
        derived = _derive_weights(
            data,
            schema_path,
            mapping,
            specs,
            training,
            settings.out_dir(out_dir),
            decimal_comma=decimal_comma,
            score_precision=score_precision,
        )
        write_all(derived.outputs)
    click.echo(derived.text, nl=False)


@main.command("report-distances")
@click.option("--report", type=_input_file, required=True, help="rank_report.json to read.")
@click.option("--svg", is_flag=True, help="Also write a distances.svg bar chart.")
@out_dir_option
@click.pass_obj
def report_distances(settings: _Settings, report: Path, svg: bool, out_dir: Path | None) -> None:
    """Write each alternative's distance from the ideal score."""
    with _exit_codes():
        doc = RankReportDocument.load(report)
        outputs = _distance_outputs(doc, settings.out_dir(out_dir), svg)
        write_all(outputs)
    click.echo(render_distances_tsv(doc), nl=False)


@main.command()
@click.option("--matrix", type=_input_file, required=True, help="Decision matrix CSV.")
@click.option("--criteria", type=_input_file, required=True, help="Criteria CSV.")
@click.option("--alternatives", type=_input_file, default=None, help="Alternatives CSV (id,name).")
@click.option("--data", type=_input_file, default=None, help="Predictor dataset CSV.")
@click.option("--schema", "schema_path", type=_input_file, default=None, help="Predictor schema JSON.")
@click.option("--mapping", type=_input_file, default=None, help="Predictor to criterion mapping CSV.")
@click.option("--weights", type=_input_file, default=None, help="Use these weights and skip training.")
@click.option("--normalize-weights", is_flag=True, help="Divide weights by their sum instead of rejecting.")
@click.option("--stages", is_flag=True, help="Also print the SPC, LC and WLC matrices.")
@click.option("--svg", is_flag=True, help="Also write a distances.svg bar chart.")
@training_options
@display_options
@decimal_comma_option
@out_dir_option
@click.pass_obj
def pipeline(
    settings: _Settings,
    matrix: Path,
    criteria: Path,
    alternatives: Path | None,
    data: Path | None,
    schema_path: Path | None,
    mapping: Path | None,
    weights: Path | None,
    normalize_weights: bool,
    stages: bool,
    svg: bool,
    precision: int | None,
    score_precision: int | None,
    decimal_comma: bool,
    out_dir: Path | None,
    **training_flags: Any,
) -> None:
    """Derive weights from the dataset, then rank the decision matrix with them."""
    if weights is None and None in (data, schema_path, mapping):
        raise click.UsageError("give --data, --schema and --mapping, or --weights to skip training")
    with _exit_codes():
        precision, score_precision = settings.precisions(precision, score_precision)
        directory = settings.out_dir(out_dir)
        files = ProblemFileSet(matrix=matrix, criteria=criteria, weights=weights, alternatives=alternatives)
        outputs: dict[Path, str | bytes] = {}
        texts: list[str] = []
        derived_weights = None
        if weights is not None:
            logger.info("Using weights from %s; training skipped", weights)
        else:
            derived = _derive_weights(
                data,
                schema_path,
                mapping,
                load_criteria(criteria, decimal_comma=decimal_comma),
                settings.training(**training_flags),
                directory,
                decimal_comma=decimal_comma,
                score_precision=score_precision,
            )
            outputs.update(derived.outputs)
            texts.append(derived.text)
            derived_weights = {c.id: c.weight for c in derived.criteria}
        problem = load_problem(
            files,
            decimal_comma=decimal_comma,
            normalize_weights=normalize_weights,
            weights=derived_weights,
        )
        rank_outputs, doc, text = _rank_outputs(
            problem, directory, stages=stages, precision=precision, score_precision=score_precision
        )
        outputs.update(rank_outputs)
        outputs.update(_distance_outputs(doc, directory, svg))
        texts.append(text)
        write_all(outputs)
    click.echo("\n".join(texts), nl=False)


@main.command("describe")
@click.option("--data", type=_input_file, required=True, help="Predictor dataset CSV.")
@click.option("--schema", "schema_path", type=_input_file, required=True, help="Predictor schema JSON.")
@click.option("--precision", type=click.IntRange(min=0), default=None, help="Decimals printed (default 2).")
@decimal_comma_option
@out_dir_option
@click.pass_obj
def describe_command(
    settings: _Settings,
    data: Path,
    schema_path: Path,
    precision: int | None,
    decimal_comma: bool,
    out_dir: Path | None,
) -> None:
    """Print descriptive statistics of a predictor dataset."""
    with _exit_codes():
        precision, _ = settings.precisions(precision, None)
        rows, schema = load_raw_dataset(data, schema_path, decimal_comma=decimal_comma)
        stats = describe(rows, schema)
        write_all({settings.out_dir(out_dir) / "describe.json": to_json(stats.to_dict())})
    click.echo(render_describe(stats, precision), nl=False)
