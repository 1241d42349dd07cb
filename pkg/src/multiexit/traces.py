"""Core data model: per-exit probability traces and derived quantities.

A trace records, for one input, the class-probability vector produced by the
classifier attached to every layer of a multi-exit backbone.  Everything
downstream (exit policies, calibration, evaluation) replays these traces, so
no model is ever needed at decision time.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ValidationError

#: Absolute tolerance for probability normalization; exported softmax vectors
#: carry rounding error from serialization.
PROB_TOL = 1e-6


def as_prob_vector(values: Iterable[float], *, tol: float = PROB_TOL) -> np.ndarray:
    """Validate a class-probability vector and return it as a read-only array.

    Requirements: at least two classes, every entry in [0, 1] and the total
    mass equal to 1, both within ``tol``.
    """
    probs = np.asarray(values, dtype=np.float64)
    if probs.ndim != 1 or probs.shape[0] < 2:
        raise ValidationError("shape", f"need a 1-D vector of >= 2 classes, got shape {probs.shape}")
    if not np.all(np.isfinite(probs)):
        raise ValidationError("range", "probabilities must be finite")
    if probs.min() < -tol or probs.max() > 1.0 + tol:
        raise ValidationError("range", f"probabilities must lie in [0, 1], got [{probs.min()}, {probs.max()}]")
    total = float(probs.sum())
    if abs(total - 1.0) > tol:
        raise ValidationError("normalization", f"probabilities sum to {total!r}, expected 1 within {tol}")
    probs = probs.copy()
    probs.flags.writeable = False
    return probs


def _freeze_matrix(probs: np.ndarray, *, tol: float = PROB_TOL) -> np.ndarray:
    """Validate an (L, C) matrix of per-exit probability rows."""
    try:
        probs = np.asarray(probs, dtype=np.float64)
    except ValueError as e:
        raise ValidationError("shape", f"exit rows do not form a rectangular matrix ({e})") from e
    if probs.ndim != 2:
        raise ValidationError("shape", f"need an (L, C) matrix, got shape {probs.shape}")
    L, C = probs.shape
    if L < 1:
        raise ValidationError("shape", "need at least one exit")
    if C < 2:
        raise ValidationError("shape", f"need >= 2 classes, got {C}")
    if not np.all(np.isfinite(probs)):
        raise ValidationError("range", "probabilities must be finite")
    if probs.min() < -tol or probs.max() > 1.0 + tol:
        raise ValidationError("range", f"probabilities must lie in [0, 1], got [{probs.min()}, {probs.max()}]")
    sums = probs.sum(axis=1)
    bad = np.abs(sums - 1.0) > tol
    if bad.any():
        i = int(np.argmax(bad))
        raise ValidationError(
            "normalization", f"exit {i + 1} probabilities sum to {sums[i]!r}, expected 1 within {tol}"
        )
    probs = probs.copy()
    probs.flags.writeable = False
    return probs


@dataclass(frozen=True, eq=False)
class ExitRecord:
    """Probability output of the classifier at one exit.

    ``exit_index`` is 1-based: exits sit after layers 1..L.
    """

    exit_index: int
    probs: np.ndarray

    def __post_init__(self):
        if self.exit_index < 1:
            raise ValidationError("range", f"exit_index must be >= 1, got {self.exit_index}")
        object.__setattr__(self, "probs", as_prob_vector(self.probs))

    @property
    def prediction(self) -> int:
        """Argmax class; ties break to the lowest class index."""
        return int(np.argmax(self.probs))

    @property
    def confidence(self) -> float:
        """Maximum class probability; always in [1/C, 1]."""
        return float(np.max(self.probs))


def predict(record: ExitRecord) -> tuple[int, float]:
    """Return (label, confidence) for one exit: argmax class and its mass."""
    return record.prediction, record.confidence


@dataclass(frozen=True, eq=False)
class SampleTrace:
    """One sample's ordered per-exit probability vectors.

    ``probs`` has shape (L, C): row i-1 is the class distribution produced by
    exit i.  ``label`` is the true class, or None for unlabeled replay; any
    operation that needs error rates rejects unlabeled traces.
    """

    id: str
    label: int | None
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _freeze_matrix(self.probs))
        if self.label is not None:
            label = int(self.label)
            if not 0 <= label < self.n_classes:
                raise ValidationError("range", f"label {label} outside [0, {self.n_classes})")
            object.__setattr__(self, "label", label)

    @classmethod
    def from_records(cls, id: str, label: int | None, records: Sequence[ExitRecord]) -> "SampleTrace":
        """Build from explicit ExitRecords; indices must be exactly 1..L."""
        indices = [r.exit_index for r in records]
        if indices != list(range(1, len(records) + 1)):
            raise ValidationError("shape", f"exit indices must be exactly 1..L with no gaps, got {indices}")
        widths = {r.probs.shape[0] for r in records}
        if len(widths) > 1:
            raise ValidationError("shape", f"all exits must share one class count, got {sorted(widths)}")
        return cls(id=id, label=label, probs=np.stack([r.probs for r in records]))

    @property
    def n_layers(self) -> int:
        return self.probs.shape[0]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[1]

    @cached_property
    def predictions(self) -> np.ndarray:
        """Per-exit argmax labels, shape (L,)."""
        preds = np.argmax(self.probs, axis=1)
        preds.flags.writeable = False
        return preds

    @cached_property
    def confidences(self) -> np.ndarray:
        """Per-exit maximum probabilities, shape (L,)."""
        confs = np.max(self.probs, axis=1)
        confs.flags.writeable = False
        return confs

    def record(self, exit_index: int) -> ExitRecord:
        """The ExitRecord at a 1-based exit index."""
        if not 1 <= exit_index <= self.n_layers:
            raise ValidationError("range", f"exit index {exit_index} outside 1..{self.n_layers}")
        return ExitRecord(exit_index, self.probs[exit_index - 1])

    @property
    def records(self) -> tuple[ExitRecord, ...]:
        return tuple(ExitRecord(i + 1, row) for i, row in enumerate(self.probs))

    def equals(self, other: "SampleTrace") -> bool:
        return (
            isinstance(other, SampleTrace)
            and self.id == other.id
            and self.label == other.label
            and self.probs.shape == other.probs.shape
            and bool(np.array_equal(self.probs, other.probs))
        )


def prediction_change_count(trace: SampleTrace, upto: int) -> int:
    """Number of adjacent prediction flips among exits 1..upto.

    Counts indices i in 2..upto with ŷ_{i-1} != ŷ_i.  Nondecreasing in
    ``upto`` and at most ``upto - 1``.
    """
    if not 1 <= upto <= trace.n_layers:
        raise ValidationError("range", f"exit index {upto} outside 1..{trace.n_layers}")
    preds = trace.predictions[:upto]
    return int(np.count_nonzero(preds[1:] != preds[:-1]))


@dataclass(frozen=True, eq=False)
class SequenceTrace:
    """Token-by-token decoding trace: one SampleTrace per decoding step.

    Classes are vocabulary tokens.  The emitted sequence terminates at the
    first emitted ``eos_token``.  ``reference_tokens`` is the ground-truth
    token sequence when available.
    """

    id: str
    token_traces: tuple[SampleTrace, ...]
    eos_token: int
    reference_tokens: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "token_traces", tuple(self.token_traces))
        if not self.token_traces:
            raise ValidationError("shape", "sequence needs at least one decoding step")
        L = self.token_traces[0].n_layers
        C = self.token_traces[0].n_classes
        for t in self.token_traces:
            if t.n_layers != L or t.n_classes != C:
                raise ValidationError(
                    "shape",
                    f"all decoding steps must share (L, C)=({L}, {C}), got ({t.n_layers}, {t.n_classes})",
                )
        if not 0 <= int(self.eos_token) < C:
            raise ValidationError("range", f"eos_token {self.eos_token} outside [0, {C})")
        object.__setattr__(self, "eos_token", int(self.eos_token))
        if self.reference_tokens is not None:
            ref = tuple(int(v) for v in self.reference_tokens)
            for v in ref:
                if not 0 <= v < C:
                    raise ValidationError("range", f"reference token {v} outside [0, {C})")
            object.__setattr__(self, "reference_tokens", ref)

    @property
    def n_layers(self) -> int:
        return self.token_traces[0].n_layers

    @property
    def n_classes(self) -> int:
        return self.token_traces[0].n_classes

    def equals(self, other: "SequenceTrace") -> bool:
        # token-step ids are internal plumbing and intentionally not compared
        return (
            isinstance(other, SequenceTrace)
            and self.id == other.id
            and self.eos_token == other.eos_token
            and self.reference_tokens == other.reference_tokens
            and len(self.token_traces) == len(other.token_traces)
            and all(
                np.array_equal(a.probs, b.probs) for a, b in zip(self.token_traces, other.token_traces)
            )
        )


Trace = Union[SampleTrace, SequenceTrace]


@dataclass(frozen=True, eq=False)
class Dataset:
    """A homogeneous collection of traces plus a split tag.

    All traces must share the layer count L and class count C, and must all
    be of one kind (classification SampleTraces or sequence traces).  L and C
    may be given explicitly (e.g. from a file header) for empty datasets.
    """

    traces: tuple[Trace, ...]
    split: str = "unspecified"
    L: int | None = None
    C: int | None = None

    def __post_init__(self):
        traces = tuple(self.traces)
        object.__setattr__(self, "traces", traces)
        kinds = {type(t) for t in traces}
        if len(kinds) > 1:
            raise ValidationError("shape", "cannot mix classification and sequence traces")
        if traces:
            L, C = traces[0].n_layers, traces[0].n_classes
            for t in traces:
                if t.n_layers != L or t.n_classes != C:
                    raise ValidationError(
                        "shape", f"all traces must share (L, C)=({L}, {C}), got ({t.n_layers}, {t.n_classes})"
                    )
            if self.L is not None and self.L != L:
                raise ValidationError("shape", f"declared L={self.L} but traces have L={L}")
            if self.C is not None and self.C != C:
                raise ValidationError("shape", f"declared C={self.C} but traces have C={C}")
            object.__setattr__(self, "L", L)
            object.__setattr__(self, "C", C)

    def __len__(self) -> int:
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)

    @property
    def mode(self) -> str:
        """"classification" or "sequence"; empty datasets default to classification."""
        if self.traces and isinstance(self.traces[0], SequenceTrace):
            return "sequence"
        return "classification"

    @property
    def is_labeled(self) -> bool:
        """True when every trace carries ground truth."""
        if self.mode == "sequence":
            return all(t.reference_tokens is not None for t in self.traces)
        return all(t.label is not None for t in self.traces)

    @cached_property
    def label_array(self) -> np.ndarray:
        """(N,) true labels of a labeled classification dataset."""
        self._require_classification()
        labels = np.array([-1 if t.label is None else t.label for t in self.traces], dtype=np.int64)
        labels.flags.writeable = False
        return labels

    @cached_property
    def prediction_matrix(self) -> np.ndarray:
        """(N, L) per-exit argmax labels of a classification dataset."""
        self._require_classification()
        preds = np.stack([t.predictions for t in self.traces]) if self.traces else np.zeros((0, 0), np.int64)
        preds.flags.writeable = False
        return preds

    @cached_property
    def confidence_matrix(self) -> np.ndarray:
        """(N, L) per-exit max probabilities of a classification dataset."""
        self._require_classification()
        confs = np.stack([t.confidences for t in self.traces]) if self.traces else np.zeros((0, 0))
        confs.flags.writeable = False
        return confs

    def _require_classification(self):
        if self.mode != "classification":
            raise ValidationError("mode", "operation requires a classification dataset")

    def equals(self, other: "Dataset") -> bool:
        return (
            isinstance(other, Dataset)
            and self.split == other.split
            and self.L == other.L
            and self.C == other.C
            and len(self.traces) == len(other.traces)
            and all(a.equals(b) for a, b in zip(self.traces, other.traces))
        )
