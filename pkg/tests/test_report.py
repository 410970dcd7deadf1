from __future__ import annotations

import json
import os
import tempfile
import unittest
from dataclasses import replace
from pathlib import Path
from unittest import mock

from aploco.dataio import ProblemFileSet, load_problem
from aploco.decision import run_stages
from aploco.errors import ReportFormatError
from aploco.report import (
    RankReportDocument,
    render_distances_svg,
    render_distances_tsv,
    render_text_report,
    report_timestamp,
    round_half_up,
    sorted_distances,
    to_json,
    write_atomic,
)
from tests.synthetic import FIXTURES


def _fixture_result():
    files = ProblemFileSet(
        matrix=FIXTURES / "matrix.csv",
        criteria=FIXTURES / "criteria.csv",
        alternatives=FIXTURES / "alternatives.csv",
    )
    return run_stages(load_problem(files))


class RoundHalfUpTest(unittest.TestCase):
    def test_ties_round_away_from_zero(self) -> None:
        self.assertEqual(round_half_up(0.125, 2), "0.13")
        self.assertEqual(round_half_up(2.675, 2), "2.68")
        self.assertEqual(round_half_up(-0.125, 2), "-0.13")
        self.assertEqual(round_half_up(0.9458, 3), "0.946")

    def test_fixed_width_and_no_negative_zero(self) -> None:
        self.assertEqual(round_half_up(22282, 2), "22282.00")
        self.assertEqual(round_half_up(1.0, 3), "1.000")
        self.assertEqual(round_half_up(-0.0004, 3), "0.000")
        self.assertEqual(round_half_up(7.4, 0), "7")


class RankReportDocumentTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.result = _fixture_result()
        with mock.patch.dict(os.environ, {"SOURCE_DATE_EPOCH": "0"}):
            cls.doc = RankReportDocument.from_result(cls.result)

    def test_pinned_timestamp(self) -> None:
        self.assertEqual(self.doc.timestamp, "1970-01-01T00:00:00Z")
        with mock.patch.dict(os.environ, {"SOURCE_DATE_EPOCH": "1445644800"}):
            self.assertEqual(report_timestamp(), "2015-10-24T00:00:00Z")

    def test_json_round_trip(self) -> None:
        again = RankReportDocument.from_dict(json.loads(to_json(self.doc.to_dict())))
        self.assertEqual(again, self.doc)
        self.assertEqual(set(again.stages), {"SPC", "LC", "WLC"})

    def test_rejects_foreign_documents(self) -> None:
        good = self.doc.to_dict()
        broken = [
            [],
            {**good, "schema_version": 2},
            {k: v for k, v in good.items() if k != "alternatives"},
            {**good, "alternatives": []},
            {**good, "alternatives": [dict(a, rank=1) for a in good["alternatives"]]},
            {**good, "beta_s": "lots"},
        ]
        for raw in broken:
            with self.subTest(raw=str(raw)[:60]), self.assertRaises(ReportFormatError):
                RankReportDocument.from_dict(raw)

    def test_load_reports_unreadable_files(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "rank_report.json"
            with self.assertRaises(ReportFormatError):
                RankReportDocument.load(path)
            path.write_text("{not json", encoding="utf-8")
            with self.assertRaises(ReportFormatError):
                RankReportDocument.load(path)

    def test_text_report(self) -> None:
        text = render_text_report(self.result, self.doc, precision=2, score_precision=3, stages=True)
        self.assertIn("22282.00", text)
        self.assertIn("1.443", text)
        self.assertIn("ranking: A6 > A8 > A5 > A9 > A7 > A4 > A2 > A1 > A3", text)
        short = render_text_report(self.result, self.doc, precision=2, score_precision=3, stages=False)
        self.assertNotIn("22282.00", short)
        self.assertIn("Istanbul", short)


class DistancesTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.doc = RankReportDocument.from_result(_fixture_result())

    def test_tsv_is_sorted_closest_first(self) -> None:
        lines = render_distances_tsv(self.doc).splitlines()
        self.assertEqual(lines[0], "alternative_id\tdistance")
        ids = [line.split("\t")[0] for line in lines[1:]]
        self.assertEqual(ids, ["A6", "A8", "A5", "A9", "A7", "A4", "A2", "A1", "A3"])
        distances = [float(line.split("\t")[1]) for line in lines[1:]]
        self.assertEqual(distances, sorted(distances))

    def test_ties_keep_rank_order(self) -> None:
        flat = [replace(a, distance=0.5) for a in self.doc.alternatives]
        doc = replace(self.doc, alternatives=flat)
        self.assertEqual([a.rank for a in sorted_distances(doc)], list(range(1, 10)))

    def test_svg_is_deterministic(self) -> None:
        first = render_distances_svg(self.doc)
        second = render_distances_svg(self.doc)
        self.assertEqual(first, second)
        self.assertIn(b"<svg", first)
        self.assertIn(b"Istanbul", first)


class WriteAtomicTest(unittest.TestCase):
    def test_replaces_file_and_leaves_no_temporaries(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "nested" / "out.txt"
            write_atomic(path, "first\n")
            write_atomic(path, "second\n")
            self.assertEqual(path.read_text(encoding="utf-8"), "second\n")
            self.assertEqual(os.listdir(path.parent), ["out.txt"])

    def test_failed_write_keeps_previous_content(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "out.txt"
            write_atomic(path, b"kept")
            with self.assertRaises(TypeError):
                write_atomic(path, 12345)  # type: ignore[arg-type]
            self.assertEqual(path.read_bytes(), b"kept")
            self.assertEqual(os.listdir(tmp), ["out.txt"])


if __name__ == "__main__":
    unittest.main()
