from __future__ import annotations

import json
import math
import tempfile
import unittest
from pathlib import Path

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from aploco.dataio import (
    ProblemFileSet,
    describe,
    load_criteria,
    load_mapping,
    load_problem,
    load_raw_dataset,
    load_weights,
    parse_number,
    render_weights_csv,
    save_problem,
)
from aploco.decision import CriterionSpec, Direction, build_problem
from aploco.encoding import encode
from aploco.errors import (
    DuplicateId,
    EmptyDataset,
    IdMismatch,
    MissingField,
    ParseError,
    SchemaViolation,
    UnknownLevel,
    WeightSumViolation,
)
from tests.synthetic import FIXTURES, covariate_schema, oiz_rows, oiz_schema, write_rows, write_schema

CRITERIA = "id,name,direction,weight\nC1,Cost,min,0.25\nC2,Quality,max,0.75\n"
MATRIX = "criterion_id,A1,A2,A3\nC1,3,5,1\nC2,2,7,4\n"


class _TempDirTest(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self._tmp.cleanup)
        self.dir = Path(self._tmp.name)

    def write(self, name: str, text: str) -> Path:
        path = self.dir / name
        path.write_text(text, encoding="utf-8")
        return path

    def files(self, matrix: str = MATRIX, criteria: str = CRITERIA, **extra: str) -> ProblemFileSet:
        paths = {key: self.write(f"{key}.csv", text) for key, text in extra.items()}
        return ProblemFileSet(
            matrix=self.write("matrix.csv", matrix),
            criteria=self.write("criteria.csv", criteria),
            **paths,
        )


class ParseNumberTest(unittest.TestCase):
    def test_accepts_plain_decimals(self) -> None:
        self.assertEqual(parse_number("22665.00", "f", 1, 1), 22665.0)
        self.assertEqual(parse_number("-.5", "f", 1, 1), -0.5)
        self.assertEqual(parse_number("1e-05", "f", 1, 1), 1e-05)
        self.assertEqual(parse_number("0,45", "f", 1, 1, decimal_comma=True), 0.45)

    def test_rejects_everything_else(self) -> None:
        for text in ["", "abc", "1,5", "nan", "inf", "0x10", "1.2.3", "1e999"]:
            with self.subTest(text=text), self.assertRaises(ParseError):
                parse_number(text, "f", 4, 2)
        with self.assertRaises(ParseError):
            parse_number("1.5", "f", 1, 1, decimal_comma=True)


class LoadProblemTest(_TempDirTest):
    def test_loads_matrix_and_criteria(self) -> None:
        problem = load_problem(self.files())
        self.assertEqual(problem.shape, (2, 3))
        self.assertEqual(problem.alternative_ids, ("A1", "A2", "A3"))
        self.assertIs(problem.criteria[0].direction, Direction.MINIMIZE)
        np.testing.assert_array_equal(problem.values, [[3, 5, 1], [2, 7, 4]])

    def test_criteria_rows_follow_matrix_order(self) -> None:
        criteria = "id,name,direction,weight\nC2,Quality,max,0.75\nC1,Cost,min,0.25\n"
        problem = load_problem(self.files(criteria=criteria))
        self.assertEqual(problem.criterion_ids, ("C1", "C2"))

    def test_cell_errors_carry_coordinates(self) -> None:
        matrix = "criterion_id,A1,A2,A3\nC1,3,5,1\nC2,2,abc,4\n"
        with self.assertRaises(ParseError) as caught:
            load_problem(self.files(matrix=matrix))
        self.assertEqual((caught.exception.row, caught.exception.col), (3, 3))
        self.assertIn("matrix.csv:3:3:", str(caught.exception))

    def test_matrix_key_column_must_be_criterion_id(self) -> None:
        with self.assertRaises(ParseError) as caught:
            load_problem(self.files(matrix="criterion,A1,A2,A3\nC1,3,5,1\nC2,2,7,4\n"))
        self.assertEqual((caught.exception.row, caught.exception.col), (1, 1))
        self.assertIn("criterion_id", str(caught.exception))

    def test_empty_matrix_file(self) -> None:
        with self.assertRaises(ParseError):
            load_problem(self.files(matrix=""))
        with self.assertRaises(ParseError):
            load_problem(self.files(matrix="criterion_id,A1\n"))

    def test_ragged_and_short_rows(self) -> None:
        with self.assertRaises(ParseError):
            load_problem(self.files(matrix="criterion_id,A1,A2,A3\nC1,3,5,1,9\nC2,2,7,4\n"))
        with self.assertRaises(ParseError) as caught:
            load_problem(self.files(matrix="criterion_id,A1,A2,A3\nC1,3,5,1\nC2,2,7\n"))
        self.assertEqual(caught.exception.row, 3)

    def test_criteria_naming_unknown_criterion(self) -> None:
        criteria = CRITERIA + "C10,Extra,max,0.0\n"
        with self.assertRaises(IdMismatch):
            load_problem(self.files(criteria=criteria))

    def test_bad_direction_and_header(self) -> None:
        with self.assertRaises(ParseError) as caught:
            load_problem(self.files(criteria=CRITERIA.replace("min", "lowest")))
        self.assertEqual((caught.exception.row, caught.exception.col), (2, 3))
        with self.assertRaises(ParseError):
            load_problem(self.files(criteria=CRITERIA.replace("direction", "sense")))

    def test_duplicate_ids(self) -> None:
        with self.assertRaises(DuplicateId):
            load_problem(self.files(matrix="criterion_id,A1,A1,A3\nC1,3,5,1\nC2,2,7,4\n"))
        with self.assertRaises(DuplicateId):
            load_problem(self.files(matrix="criterion_id,A1,A2,A3\nC1,3,5,1\nC1,2,7,4\n"))

    def test_weights_file_and_normalization(self) -> None:
        problem = load_problem(self.files(weights="criterion_id,weight\nC1,0.5\nC2,0.5\n"))
        np.testing.assert_array_equal(problem.weights, [0.5, 0.5])
        with self.assertRaises(IdMismatch):
            load_problem(self.files(weights="criterion_id,weight\nC1,1.0\n"))
        with self.assertRaises(WeightSumViolation):
            load_problem(self.files(weights="criterion_id,weight\nC1,2\nC2,2\n"))
        problem = load_problem(
            self.files(weights="criterion_id,weight\nC1,2\nC2,6\n"), normalize_weights=True
        )
        np.testing.assert_allclose(problem.weights, [0.25, 0.75])

    def test_weights_argument_wins(self) -> None:
        problem = load_problem(self.files(), weights={"C1": 0.9, "C2": 0.1})
        np.testing.assert_array_equal(problem.weights, [0.9, 0.1])

    def test_alternatives_file(self) -> None:
        problem = load_problem(self.files(alternatives="id,name\nA3,Gamma\nA1,Alpha\nA2,Beta\n"))
        self.assertEqual([a.name for a in problem.alternatives], ["Alpha", "Beta", "Gamma"])
        with self.assertRaises(IdMismatch):
            load_problem(self.files(alternatives="id,name\nA1,Alpha\n"))

    def test_decimal_comma(self) -> None:
        files = self.files(
            matrix="criterion_id;A1;A2\nC1;0,45;0,55\nC2;383,00;22665,00\n",
            criteria="id;name;direction;weight\nC1;Education index;Max;0,25\nC2;Parcels;Max;0,75\n",
        )
        problem = load_problem(files, decimal_comma=True)
        np.testing.assert_array_equal(problem.values, [[0.45, 0.55], [383.0, 22665.0]])

    def test_quoted_names(self) -> None:
        criteria = 'id,name,direction,weight\nC1,"Cost, total",min,0.25\nC2,Quality,max,0.75\n'
        self.assertEqual(load_criteria(self.write("c.csv", criteria))[0].name, "Cost, total")


class SaveProblemTest(_TempDirTest):
    def test_round_trip_is_bit_exact(self) -> None:
        values = [[0.1, 1.0 / 3.0, -2.5e-300], [12345.678901234567, 7.0, math.pi]]
        criteria = [
            CriterionSpec("C1", "First, with comma", Direction.MAXIMIZE, 0.1),
            CriterionSpec("C2", "Second", Direction.MINIMIZE, 0.9),
        ]
        problem = build_problem(criteria, ["A1", "A2", "A3"], values)
        again = load_problem(save_problem(problem, self.dir / "out"))
        np.testing.assert_array_equal(again.values, problem.values)
        self.assertEqual(again.criteria, problem.criteria)
        self.assertEqual(again.fingerprint, problem.fingerprint)

    def test_weights_csv_sums_to_one(self) -> None:
        problem = load_problem(
            ProblemFileSet(matrix=FIXTURES / "matrix.csv", criteria=FIXTURES / "criteria.csv")
        )
        path = self.write("weights.csv", render_weights_csv(problem.criteria))
        weights = load_weights(path)
        self.assertAlmostEqual(math.fsum(weights.values()), 1.0, places=6)
        self.assertEqual(list(weights), list(problem.criterion_ids))


class RawDatasetTest(_TempDirTest):
    def setUp(self) -> None:
        super().setUp()
        self.schema_path = write_schema(oiz_schema(), self.dir / "schema.json")

    def test_synthetic_dataset_encodes_to_seventeen_units(self) -> None:
        data = write_rows(oiz_rows(), oiz_schema(), self.dir / "data.csv")
        rows, schema = load_raw_dataset(data, self.schema_path)
        self.assertEqual(len(rows), 200)
        self.assertEqual(encode(rows, schema).inputs.shape, (200, 17))

    def test_shipped_schema(self) -> None:
        data = write_rows(oiz_rows(20), oiz_schema(), self.dir / "data.csv")
        _, schema = load_raw_dataset(data, FIXTURES / "schema.json")
        self.assertEqual(schema, oiz_schema())

    def test_undeclared_level(self) -> None:
        rows = oiz_rows(5)
        rows[1]["incentive_zone"] = "9"
        data = write_rows(rows, oiz_schema(), self.dir / "data.csv")
        with self.assertRaises(UnknownLevel) as caught:
            load_raw_dataset(data, self.schema_path)
        self.assertIsInstance(caught.exception, SchemaViolation)
        self.assertIn("data.csv:3:4:", str(caught.exception))

    def test_zero_level_factor(self) -> None:
        schema = self.write(
            "bad.json",
            json.dumps({"factors": [{"name": "f", "levels": []}], "covariates": [], "target": {"name": "y"}}),
        )
        data = self.write("data.csv", "f,y\na,1\n")
        with self.assertRaises(SchemaViolation):
            load_raw_dataset(data, schema)

    def test_missing_column(self) -> None:
        schema = write_schema(covariate_schema(["x1", "x2"]), self.dir / "s.json")
        with self.assertRaises(MissingField):
            load_raw_dataset(self.write("data.csv", "x1,y\n1,2\n"), schema)

    def test_header_only_and_bad_json(self) -> None:
        schema = write_schema(covariate_schema(["x1"]), self.dir / "s.json")
        with self.assertRaises(EmptyDataset):
            load_raw_dataset(self.write("data.csv", "x1,y\n"), schema)
        with self.assertRaises(ParseError):
            load_raw_dataset(self.write("data.csv", "x1,y\n1,2\n"), self.write("s.json", "{oops"))

    def test_mapping_file(self) -> None:
        mapping = load_mapping(FIXTURES / "mapping.csv")
        self.assertEqual(mapping["parcels_in_production"], "C8")
        self.assertEqual(len(mapping), 9)


class DescribeTest(unittest.TestCase):
    def test_hand_arithmetic(self) -> None:
        stats = describe([{"x1": 1.0, "y": 5.0}, {"x1": 2.0, "y": 5.0}, {"x1": 3.0, "y": 5.0}], covariate_schema(["x1"]))
        x = stats.variable("x1")
        self.assertEqual((x.n, x.minimum, x.maximum, x.mean, x.sd), (3, 1.0, 3.0, 2.0, 1.0))
        self.assertEqual(stats.variable("y").sd, 0.0)
        self.assertFalse(x.degenerate)

    def test_single_row_is_flagged(self) -> None:
        stats = describe([{"x1": 4.0, "y": 1.0}], covariate_schema(["x1"]))
        self.assertEqual(stats.variable("x1").sd, 0.0)
        self.assertTrue(stats.variable("x1").degenerate)

    def test_factor_frequencies(self) -> None:
        rows = oiz_rows()
        stats = describe(rows, oiz_schema())
        mixed = next(f for f in stats.factors if f.name == "mixed")
        yes = next(c for c in mixed.levels if c.level == "yes")
        self.assertEqual(yes.count, sum(r["mixed"] == "yes" for r in rows))
        self.assertAlmostEqual(sum(c.percent for c in mixed.levels), 100.0)
        self.assertEqual(stats.to_dict()["variables"][0]["name"], "education_index")

    def test_empty(self) -> None:
        with self.assertRaises(EmptyDataset):
            describe([], covariate_schema(["x1"]))

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=60))
    def test_matches_two_pass_formulas(self, values: list[float]) -> None:
        rows = [{"x1": v, "y": float(i)} for i, v in enumerate(values)]
        x = describe(rows, covariate_schema(["x1"])).variable("x1")
        n = len(values)
        mean = math.fsum(values) / n
        sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
        scale = max(1.0, max(abs(v) for v in values))
        self.assertAlmostEqual(x.mean, mean, delta=1e-12 * scale)
        self.assertAlmostEqual(x.sd, sd, delta=1e-12 * scale)
        self.assertLessEqual(x.minimum, x.mean)
        self.assertLessEqual(x.mean, x.maximum)


if __name__ == "__main__":
    unittest.main()
