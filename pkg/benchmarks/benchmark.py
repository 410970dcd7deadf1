"""Runtime benchmarks for aploco.

Times the golden nine-city ranking, a batch of random small problems, backprop
gradient checks and one training run, and reports how each compares with its
time budget.

Usage:
    python benchmarks/benchmark.py

    # Save results to JSON:
    python benchmarks/benchmark.py --output benchmarks/results/baseline.json
"""

from __future__ import annotations

import json
import logging
import sys
import time
from collections.abc import Callable
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import numpy as np

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from aploco.config import TrainingConfig  # noqa: E402
from aploco.dataio import ProblemFileSet, load_problem  # noqa: E402
from aploco.decision import CriterionSpec, Direction, build_problem, run_stages  # noqa: E402
from aploco.encoding import encode, partition  # noqa: E402
from aploco.mlp import MlpNetwork, initialize, parameter_gradients, predict, sum_squared_error, train  # noqa: E402
from tests.synthetic import FIXTURES, covariate_schema, linear_rows  # noqa: E402

logging.basicConfig(level=logging.WARNING, format="%(name)s — %(message)s")
logger = logging.getLogger(__name__)


@dataclass
class CaseResult:
    name: str
    budget_s: float
    elapsed_s: float
    within_budget: bool
    detail: str = ""


@dataclass
class BenchmarkResults:
    cases: list[CaseResult] = field(default_factory=list)
    total_s: float = 0.0


def _timed(name: str, budget_s: float, func: Callable[[], str]) -> CaseResult:
    start = time.perf_counter()
    detail = func()
    elapsed = time.perf_counter() - start
    return CaseResult(
        name=name,
        budget_s=budget_s,
        elapsed_s=round(elapsed, 4),
        within_budget=elapsed < budget_s,
        detail=detail,
    )


def golden_ranking() -> str:
    files = ProblemFileSet(matrix=FIXTURES / "matrix.csv", criteria=FIXTURES / "criteria.csv")
    report = run_stages(load_problem(files)).report
    return " > ".join(report.ranking())


def random_problems(count: int, seed: int) -> str:
    rng = np.random.default_rng(seed)
    for _ in range(count):
        c, r = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        criteria = [
            CriterionSpec(
                id=f"C{i + 1}",
                name=f"C{i + 1}",
                direction=Direction.MAXIMIZE if rng.random() < 0.5 else Direction.MINIMIZE,
                weight=float(w),
            )
            for i, w in enumerate(rng.dirichlet(np.ones(c)))
        ]
        values = rng.integers(-50, 51, size=(c, r)).astype(float)
        run_stages(build_problem(criteria, [f"A{j + 1}" for j in range(r)], values, normalize_weights=True))
    return f"{count} problems"


def gradient_checks(count: int, seed: int) -> str:
    rng = np.random.default_rng(seed)
    eps = 1e-6
    worst = 0.0
    for _ in range(count):
        d, h, n = int(rng.integers(1, 8)), int(rng.integers(1, 6)), int(rng.integers(1, 12))
        net = initialize(d, h, 0.5, rng)
        x = rng.uniform(-1.0, 1.0, size=(n, d))
        y = rng.normal(size=n)
        analytic = parameter_gradients(net, x, predict(net, x) - y).flat()
        theta = net.flat()
        for k in range(theta.size):
            up, down = theta.copy(), theta.copy()
            up[k] += eps
            down[k] -= eps
            numeric = (
                0.5 * sum_squared_error(MlpNetwork.from_flat(up, d, h), x, y)
                - 0.5 * sum_squared_error(MlpNetwork.from_flat(down, d, h), x, y)
            ) / (2 * eps)
            scale = max(abs(analytic[k]), abs(numeric), 1e-4)
            worst = max(worst, abs(analytic[k] - numeric) / scale)
    return f"{count} networks, worst relative error {worst:.2e}"


def training_run(rows: int, epochs: int, seed: int) -> str:
    records = linear_rows(rows, seed)
    schema = covariate_schema(["x1", "x2", "x3"])
    config = TrainingConfig(epochs=epochs, learning_rate=0.1, seed=seed)
    dataset = partition(encode(records, schema), config.train_fraction, seed)
    _, report = train(dataset, config)
    return f"{rows} rows, {epochs} epochs, test relative error {report.test_relative_error:.4f}"


def run_benchmark(problems: int, networks: int, epochs: int, seed: int) -> BenchmarkResults:
    results = BenchmarkResults()
    results.cases.append(_timed("golden ranking", 1.0, golden_ranking))
    results.cases.append(_timed("random problems", 30.0, lambda: random_problems(problems, seed)))
    results.cases.append(_timed("gradient checks", 10.0, lambda: gradient_checks(networks, seed)))
    results.cases.append(_timed("training run", 60.0, lambda: training_run(200, epochs, seed)))
    results.total_s = round(sum(c.elapsed_s for c in results.cases), 4)
    return results


def print_results(results: BenchmarkResults) -> None:
    print(f"\n{'='*70}")
    print("  aploco Benchmark Results")
    print(f"{'='*70}")
    for case in results.cases:
        icon = "✅" if case.within_budget else "❌"
        print(f"{icon} {case.name:<18} {case.elapsed_s:>9.3f}s  (budget {case.budget_s:.0f}s)")
        if case.detail:
            print(f"   {case.detail}")
    print(f"{'='*70}")
    print(f"  Total:  {results.total_s:.3f}s")
    print(f"{'='*70}\n")


def save_results(results: BenchmarkResults, path: str) -> None:
    """Save results to JSON for cross-run comparison."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    data = asdict(results)
    data["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    out.write_text(json.dumps(data, indent=2))
    print(f"Results saved to {path}")


@click.command()
@click.option("--problems", default=1000, type=int, help="Random problems to rank.")
@click.option("--networks", default=20, type=int, help="Networks to gradient-check.")
@click.option("--epochs", default=500, type=int, help="Epochs for the training run.")
@click.option("--seed", default=0, type=int, help="Seed for every generated input.")
@click.option("--output", "output_path", type=click.Path(), help="Save results to JSON file.")
def main(problems: int, networks: int, epochs: int, seed: int, output_path: str | None) -> None:
    """Run aploco runtime benchmarks."""
    results = run_benchmark(problems, networks, epochs, seed)
    print_results(results)
    if output_path:
        save_results(results, output_path)
    if not all(case.within_budget for case in results.cases):
        raise SystemExit(1)


if __name__ == "__main__":
    main()
