import json
import os

import numpy as np
import pytest

from exitexport import ExportConfig, run_export
from exitexport.cli import load_export_config, main


def tiny_config(tmp_path, **overrides):
    kwargs = dict(
        dataset="toy-sentiment",
        L=4,
        hidden=32,
        epochs=2,
        n_train=300,
        n_val=120,
        n_test=150,
        train_out=str(tmp_path / "train.jsonl"),
        val_out=str(tmp_path / "val.jsonl"),
        test_out=str(tmp_path / "test.jsonl"),
        seed=9,
    )
    kwargs.update(overrides)
    return ExportConfig(**kwargs)


class TestExportConfig:
    def test_rejects_single_layer(self, tmp_path):
        with pytest.raises(ValueError):
            tiny_config(tmp_path, L=1)

    def test_rejects_colliding_outputs(self, tmp_path):
        with pytest.raises(ValueError, match="distinct"):
            tiny_config(tmp_path, val_out=str(tmp_path / "train.jsonl"))


class TestRunExport:
    def test_header_and_counts_match_config(self, tmp_path):
        cfg = tiny_config(tmp_path)
        run_export(cfg)
        for path, n in [(cfg.train_out, 300), (cfg.val_out, 120), (cfg.test_out, 150)]:
            lines = open(path, encoding="utf-8").read().splitlines()
            header = json.loads(lines[0])
            assert header == {"C": 2, "L": 4, "mode": "classification", "version": 1}
            assert len(lines) == n + 1

    def test_rows_normalized_within_tolerance(self, tmp_path):
        cfg = tiny_config(tmp_path)
        run_export(cfg)
        with open(cfg.val_out, encoding="utf-8") as fh:
            fh.readline()
            for line in fh:
                rows = np.asarray(json.loads(line)["exits"])
                assert np.abs(rows.sum(axis=1) - 1.0).max() <= 1e-6

    def test_deterministic_outputs(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        a.mkdir()
        b.mkdir()
        run_export(tiny_config(a))
        run_export(tiny_config(b))
        assert (a / "val.jsonl").read_bytes() == (b / "val.jsonl").read_bytes()
        assert (a / "test.jsonl").read_bytes() == (b / "test.jsonl").read_bytes()

    def test_summary_matches_file_contents(self, tmp_path):
        cfg = tiny_config(tmp_path)
        summary = run_export(cfg)
        with open(cfg.test_out, encoding="utf-8") as fh:
            fh.readline()
            right = np.zeros(4)
            n = 0
            for line in fh:
                obj = json.loads(line)
                rows = np.asarray(obj["exits"])
                right += rows.argmax(axis=1) == obj["label"]
                n += 1
        assert np.allclose(right / n, summary.test_accuracy, atol=1e-9)


class TestCli:
    def test_end_to_end(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(
            json.dumps(
                {
                    "dataset": "toy-sentiment",
                    "L": 4,
                    "hidden": 32,
                    "epochs": 2,
                    "n_train": 200,
                    "n_val": 80,
                    "n_test": 100,
                    "train_out": str(tmp_path / "tr.jsonl"),
                    "val_out": str(tmp_path / "va.jsonl"),
                    "test_out": str(tmp_path / "te.jsonl"),
                    "seed": 4,
                }
            ),
            encoding="utf-8",
        )
        assert main(["--config", str(cfg_path)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert len(out["val_accuracy"]) == 4
        assert os.path.exists(tmp_path / "te.jsonl")

    def test_unknown_key_rejected(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text('{"dataset": "toy-sentiment", "bogus": 1}', encoding="utf-8")
        assert main(["--config", str(cfg_path)]) == 2

    def test_missing_config_file(self):
        assert main(["--config", "/nonexistent.json"]) == 2
