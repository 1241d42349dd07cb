"""Train the toy model and write per-exit traces in the v1 trace schema.

The schema is the integration contract with the trace-replay tooling:

    {"C": int, "L": int, "mode": "classification", "version": 1}
    {"exits": [[float x C] x L], "id": str, "label": int}

one JSON object per line, keys sorted, probabilities as fixed 9-decimal
floats.  Every file is written to a temporary sibling, validated row by row
(shapes, ranges, normalization within 1e-6), and only then moved into
place, so a failed export leaves nothing behind.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .corpus import load_corpus
from .features import featurize
from .model import MultiExitMLP, exit_probabilities, per_exit_accuracy, train_multi_exit

SCHEMA_VERSION = 1
NORM_TOL = 1e-6


@dataclass(frozen=True)
class ExportConfig:
    """One full train-and-export run.

    ``L`` between 4 and 6 is the intended range for exported traces; any
    value >= 2 trains.  Splits are disjoint by construction and must go to
    three distinct paths.
    """

    dataset: str = "toy-sentiment"
    L: int = 4
    hidden: int = 64
    epochs: int = 8
    distill: bool = True
    train_out: str = "train.jsonl"
    val_out: str = "val.jsonl"
    test_out: str = "test.jsonl"
    n_train: int = 2000
    n_val: int = 1000
    n_test: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.L < 2:
            raise ValueError(f"need at least two exits, got L={self.L}")
        paths = (self.train_out, self.val_out, self.test_out)
        if len({os.path.abspath(p) for p in paths}) != 3:
            raise ValueError("train/val/test output paths must be distinct")
        if min(self.n_train, self.n_val, self.n_test) < 1:
            raise ValueError("every split needs at least one sample")


@dataclass(frozen=True)
class ExportSummary:
    """Per-exit standalone accuracies as the trainer itself measured them."""

    train_accuracy: tuple[float, ...]
    val_accuracy: tuple[float, ...]
    test_accuracy: tuple[float, ...]
    n_classes: int


def _record_line(sample_id: str, label: int, probs: np.ndarray) -> str:
    exits = "[" + ",".join(
        "[" + ",".join(format(float(v), ".9f") for v in row) + "]" for row in probs
    ) + "]"
    return f'{{"exits":{exits},"id":{json.dumps(sample_id)},"label":{int(label)}}}'


def _validate_file(path: str, L: int, C: int, n_records: int) -> None:
    with open(path, "r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        expected = {"C": C, "L": L, "mode": "classification", "version": SCHEMA_VERSION}
        if header != expected:
            raise ValueError(f"header {header} does not match {expected}")
        count = 0
        for lineno, line in enumerate(fh, start=2):
            obj = json.loads(line)
            if set(obj) != {"exits", "id", "label"}:
                raise ValueError(f"line {lineno}: unexpected keys {sorted(obj)}")
            rows = np.asarray(obj["exits"], dtype=np.float64)
            if rows.shape != (L, C):
                raise ValueError(f"line {lineno}: exits shape {rows.shape} != {(L, C)}")
            if rows.min() < 0.0 or rows.max() > 1.0:
                raise ValueError(f"line {lineno}: probabilities outside [0, 1]")
            if np.abs(rows.sum(axis=1) - 1.0).max() > NORM_TOL:
                raise ValueError(f"line {lineno}: rows not normalized within {NORM_TOL}")
            if not 0 <= int(obj["label"]) < C:
                raise ValueError(f"line {lineno}: label {obj['label']} outside [0, {C})")
            count += 1
    if count != n_records:
        raise ValueError(f"wrote {count} records, expected {n_records}")


def export_traces(
    model: MultiExitMLP, X: np.ndarray, y: np.ndarray, path: str, id_prefix: str
) -> None:
    """Write one split's traces; validates the finished file before moving
    it into place and aborts with no partial output otherwise."""
    probs = exit_probabilities(model, X)
    probs = np.round(probs.astype(np.float64), 9)
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(
                f'{{"C":{model.n_classes},"L":{model.n_layers},'
                f'"mode":"classification","version":{SCHEMA_VERSION}}}\n'
            )
            for j in range(len(y)):
                fh.write(_record_line(f"{id_prefix}-{j:06d}", int(y[j]), probs[j]) + "\n")
        _validate_file(tmp, model.n_layers, model.n_classes, len(y))
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def run_export(cfg: ExportConfig) -> ExportSummary:
    """Load the corpus, train all exits jointly, export every split."""
    (tr_texts, tr_y), (va_texts, va_y), (te_texts, te_y) = load_corpus(
        cfg.dataset, cfg.n_train, cfg.n_val, cfg.n_test, cfg.seed
    )
    X_tr, X_va, X_te = featurize(tr_texts), featurize(va_texts), featurize(te_texts)
    n_classes = int(max(tr_y.max(), va_y.max(), te_y.max())) + 1

    model = train_multi_exit(
        X_tr,
        tr_y,
        n_classes=n_classes,
        n_layers=cfg.L,
        hidden=cfg.hidden,
        epochs=cfg.epochs,
        distill=cfg.distill,
        seed=cfg.seed,
    )

    export_traces(model, X_tr, tr_y, cfg.train_out, "train")
    export_traces(model, X_va, va_y, cfg.val_out, "val")
    export_traces(model, X_te, te_y, cfg.test_out, "test")

    return ExportSummary(
        train_accuracy=tuple(float(a) for a in per_exit_accuracy(model, X_tr, tr_y)),
        val_accuracy=tuple(float(a) for a in per_exit_accuracy(model, X_va, va_y)),
        test_accuracy=tuple(float(a) for a in per_exit_accuracy(model, X_te, te_y)),
        n_classes=n_classes,
    )
