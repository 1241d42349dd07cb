"""Command line: train the toy multi-exit model and export trace files.

Exit status 0 on success, 1 on usage errors, 2 on data or training errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from .export import ExportConfig, run_export
from .model import TrainingDiverged

_CONFIG_KEYS = {
    "dataset": str,
    "L": int,
    "hidden": int,
    "epochs": int,
    "distill": bool,
    "train_out": str,
    "val_out": str,
    "test_out": str,
    "n_train": int,
    "n_val": int,
    "n_test": int,
    "seed": int,
}


def load_export_config(path: str) -> ExportConfig:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ValueError("config must be a flat JSON object")
    for key, value in obj.items():
        if key not in _CONFIG_KEYS:
            raise ValueError(f"unknown config key {key!r}")
        expected = _CONFIG_KEYS[key]
        if expected is not bool and isinstance(value, bool) or not isinstance(value, expected):
            raise ValueError(f"config key {key!r} has invalid value {value!r}")
    return ExportConfig(**obj)


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="exitexport", description=__doc__)
    parser.add_argument("--config", required=True, help="export config (JSON)")
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    try:
        cfg = load_export_config(args.config)
        summary = run_export(cfg)
    except (OSError, ValueError, TrainingDiverged) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(
        json.dumps(
            {
                "train_accuracy": list(summary.train_accuracy),
                "val_accuracy": list(summary.val_accuracy),
                "test_accuracy": list(summary.test_accuracy),
                "n_classes": summary.n_classes,
                "outputs": [cfg.train_out, cfg.val_out, cfg.test_out],
            },
            indent=2,
            sort_keys=True,
        )
    )
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
