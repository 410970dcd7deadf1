"""Smoke runs of the benchmark cases on tiny inputs."""

from __future__ import annotations

import unittest

from benchmarks.benchmark import golden_ranking, random_problems, run_benchmark, training_run


class BenchmarkCaseTest(unittest.TestCase):
    def test_golden_ranking(self) -> None:
        self.assertEqual(golden_ranking(), "A6 > A8 > A5 > A9 > A7 > A4 > A2 > A1 > A3")

    def test_training_run_uses_the_shared_linear_rows(self) -> None:
        detail = training_run(40, 5, seed=1)
        self.assertTrue(detail.startswith("40 rows, 5 epochs, test relative error "))

    def test_small_run_reports_every_case(self) -> None:
        self.assertEqual(random_problems(3, seed=0), "3 problems")
        results = run_benchmark(problems=2, networks=1, epochs=2, seed=0)
        self.assertEqual(
            [case.name for case in results.cases],
            ["golden ranking", "random problems", "gradient checks", "training run"],
        )


if __name__ == "__main__":
    unittest.main()
