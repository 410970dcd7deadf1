from __future__ import annotations

import json
import tempfile
import unittest
from pathlib import Path

from aploco.config import AplocoConfig, TrainingConfig, load_config
from aploco.errors import ConfigError

EXAMPLE = Path(__file__).resolve().parent.parent / "aploco.example.json"


class LoadConfigTest(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self._tmp.cleanup)
        self.path = Path(self._tmp.name) / "aploco.json"

    def load(self, payload: object) -> AplocoConfig:
        self.path.write_text(json.dumps(payload), encoding="utf-8")
        return load_config(self.path)

    def test_example_config(self) -> None:
        config = load_config(EXAMPLE)
        self.assertEqual(config.training.seed, 7)
        self.assertEqual(config.display.score_precision, 3)
        self.assertEqual(config.out_dir, "out")

    def test_empty_object_gives_defaults(self) -> None:
        self.assertEqual(self.load({}), AplocoConfig())

    def test_integers_accepted_for_floats(self) -> None:
        config = self.load({"training": {"learning_rate": 1}})
        self.assertEqual(config.training.learning_rate, 1.0)
        self.assertIsInstance(config.training.learning_rate, float)

    def test_rejects_unknown_keys(self) -> None:
        with self.assertRaises(ConfigError):
            self.load({"trainig": {}})
        with self.assertRaises(ConfigError):
            self.load({"training": {"momentum": 0.9}})

    def test_rejects_wrong_types(self) -> None:
        for payload in [
            {"training": {"epochs": "500"}},
            {"training": {"seed": True}},
            {"training": []},
            {"display": {"precision": 1.5}},
            {"out_dir": 3},
            [1, 2],
        ]:
            with self.subTest(payload=payload), self.assertRaises(ConfigError):
                self.load(payload)

    def test_rejects_out_of_range_values(self) -> None:
        for payload in [
            {"training": {"train_fraction": 1.0}},
            {"training": {"learning_rate": 0.0}},
            {"training": {"hidden_units": 0}},
            {"training": {"epochs": -1}},
            {"display": {"precision": -1}},
        ]:
            with self.subTest(payload=payload), self.assertRaises(ConfigError):
                self.load(payload)

    def test_missing_and_malformed_files(self) -> None:
        with self.assertRaises(FileNotFoundError):
            load_config(self.path)
        self.path.write_text("{", encoding="utf-8")
        with self.assertRaises(ConfigError):
            load_config(self.path)


class TrainingConfigTest(unittest.TestCase):
    def test_defaults_validate(self) -> None:
        config = TrainingConfig().validate()
        self.assertEqual(config.to_dict()["hidden_units"], 5)
        self.assertEqual(config.train_fraction, 0.71)

    def test_init_scale_must_be_positive(self) -> None:
        with self.assertRaises(ConfigError):
            TrainingConfig(init_scale=-0.1).validate()


if __name__ == "__main__":
    unittest.main()
