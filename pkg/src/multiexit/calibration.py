"""Threshold selection on a validation split.

Two methods are provided.  The classical method picks one threshold for all
exits, the value from a small grid that maximizes validation accuracy.  The
error-rate method sets a separate threshold per exit: the smallest grid value
whose exiting population is misclassified no more often than the final layer
(error rate p), so every live exit performs at least as well as running the
whole backbone.  Exits are calibrated bottom-up because the population that
reaches exit t depends on the thresholds below it; conditioning on the
already-fixed prefix makes the constraint exact on the calibration set.

The layer count L is appended to the error-rate grid as a sentinel: when all
weights are at most 1 the running score can never reach L, so the sentinel
admits nobody and its error rate is 0, keeping the per-exit problem feasible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyDatasetError, LabelRequiredError, ValidationError
from .policies import ThresholdVector, WeightScheme, beem_score_matrix
from .traces import Dataset

#: Grid searched by the classical (uniform threshold) method.
CLASSICAL_GRID = (0.3, 0.6, 0.9, 1.2, 1.5)


def error_rate_grid(L: int) -> tuple[float, ...]:
    """Default per-exit search grid: 0.5, 1.0, ..., 5.0 plus the sentinel L."""
    grid = [0.5 * k for k in range(1, 11)]
    if float(L) not in grid:
        grid.append(float(L))
    return tuple(grid)


@dataclass(frozen=True)
class ExitCalibration:
    """Calibration outcome for one exit: coverage, error among exiters,
    chosen threshold, and whether the error constraint was met."""

    exit_index: int
    c_stop: int
    error_rate: float
    alpha: float
    feasible: bool


@dataclass(frozen=True)
class CalibrationReport:
    """Chosen thresholds plus the per-exit evidence backing them."""

    method: str
    thresholds: ThresholdVector
    per_exit: tuple[ExitCalibration, ...]
    p: float
    grid: tuple[float, ...]


def _require_labeled(data: Dataset):
    if len(data) == 0:
        raise EmptyDatasetError("dataset has no traces")
    if data.mode != "classification":
        raise ValidationError("mode", "calibration requires a classification dataset")
    if not data.is_labeled:
        raise LabelRequiredError("calibration requires true labels on every trace")


def final_error_rate(val: Dataset) -> float:
    """Fraction of samples the final layer misclassifies."""
    _require_labeled(val)
    final_preds = val.prediction_matrix[:, -1]
    return float(np.mean(final_preds != val.label_array))


def exit_stats(
    val: Dataset,
    weights: WeightScheme,
    fixed_prefix: Sequence[float],
    alpha: float,
    t: int,
) -> tuple[int, float]:
    """Coverage and error rate of exit t under a candidate threshold.

    Replays the weighted-confidence rule with exits 1..t-1 already fixed at
    ``fixed_prefix``; among samples still alive at t, ``c_stop`` counts those
    whose score reaches ``alpha`` and the error rate is the misclassified
    fraction of those exiters (0 when nobody exits).
    """
    _require_labeled(val)
    if not 1 <= t <= val.L:
        raise ValidationError("range", f"exit index {t} outside 1..{val.L}")
    prefix = [float(a) for a in fixed_prefix]
    if len(prefix) != t - 1:
        raise ValidationError("shape", f"need {t - 1} prefix thresholds for exit {t}, got {len(prefix)}")
    scores = beem_score_matrix(val, weights)
    alive = np.ones(len(val), dtype=bool)
    for j, a in enumerate(prefix):
        alive &= scores[:, j] < a
    crossing = alive & (scores[:, t - 1] >= alpha)
    c_stop = int(np.count_nonzero(crossing))
    if c_stop == 0:
        return 0, 0.0
    preds_t = val.prediction_matrix[:, t - 1]
    wrong = preds_t[crossing] != val.label_array[crossing]
    return c_stop, float(np.mean(wrong))


def calibrate_error_rate(
    val: Dataset,
    weights: WeightScheme,
    grid: Sequence[float] | None = None,
    p_override: float | None = None,
) -> CalibrationReport:
    """Pick per-exit thresholds so each live exit errs at most as often as
    the final layer.

    For each exit t = 1..L-1 in order, the threshold is the smallest grid
    value whose exiting error rate (conditioned on the already-fixed lower
    exits) is at most p, where p defaults to the final layer's error rate on
    ``val``.  The sentinel L is always added to the grid; an exit where even
    the largest candidate violates the constraint is marked infeasible and
    gets that largest candidate.  The final layer exits unconditionally and
    its threshold is recorded as L.
    """
    _require_labeled(val)
    L = val.L
    p = final_error_rate(val) if p_override is None else float(p_override)
    if grid is None:
        grid_values = error_rate_grid(L)
    else:
        grid_values = tuple(float(g) for g in grid)
        if not grid_values:
            raise ValidationError("shape", "grid must be nonempty")
        if float(L) not in grid_values:
            grid_values = grid_values + (float(L),)
    candidates = sorted(set(grid_values))

    alphas: list[float] = []
    per_exit: list[ExitCalibration] = []
    for t in range(1, L):
        chosen = None
        for a in candidates:
            c_stop, q = exit_stats(val, weights, alphas, a, t)
            if q <= p:
                chosen = ExitCalibration(t, c_stop, q, a, True)
                break
        if chosen is None:
            a = candidates[-1]
            c_stop, q = exit_stats(val, weights, alphas, a, t)
            chosen = ExitCalibration(t, c_stop, q, a, False)
        per_exit.append(chosen)
        alphas.append(chosen.alpha)
    alphas.append(float(L))

    return CalibrationReport(
        method="error-rate",
        thresholds=ThresholdVector(tuple(alphas)),
        per_exit=tuple(per_exit),
        p=p,
        grid=tuple(grid_values),
    )


def calibrate_classical(
    val: Dataset,
    weights: WeightScheme,
    grid: Sequence[float] | None = None,
) -> CalibrationReport:
    """Pick one threshold for every exit by validation accuracy.

    Every grid value is evaluated as a uniform threshold vector; the most
    accurate wins, with accuracy ties broken toward the higher speedup
    (earlier average exits) and remaining ties toward the smaller threshold.
    """
    _require_labeled(val)
    L = val.L
    grid_values = CLASSICAL_GRID if grid is None else tuple(float(g) for g in grid)
    if not grid_values:
        raise ValidationError("shape", "grid must be nonempty")

    p = final_error_rate(val)
    scores = beem_score_matrix(val, weights)
    preds = val.prediction_matrix
    labels = val.label_array

    best = None
    for a in sorted(set(grid_values)):
        exit_layers = _first_crossing(scores, a)
        chosen = preds[np.arange(len(val)), exit_layers - 1]
        accuracy = float(np.mean(chosen == labels))
        total_layers = int(exit_layers.sum())
        # higher speedup == fewer layers executed
        key = (-accuracy, total_layers, a)
        if best is None or key < best[0]:
            best = (key, a, accuracy, exit_layers)

    _, alpha, _, exit_layers = best
    per_exit = []
    for t in range(1, L):
        exiting = exit_layers == t
        c_stop = int(np.count_nonzero(exiting))
        if c_stop == 0:
            q = 0.0
        else:
            q = float(np.mean(preds[exiting, t - 1] != labels[exiting]))
        per_exit.append(ExitCalibration(t, c_stop, q, alpha, q <= p))

    return CalibrationReport(
        method="classical",
        thresholds=ThresholdVector.uniform(alpha, L),
        per_exit=tuple(per_exit),
        p=p,
        grid=tuple(grid_values),
    )


def _first_crossing(scores: np.ndarray, alpha: float) -> np.ndarray:
    """Exit layer per sample for a uniform threshold: first i < L with
    scores[:, i-1] >= alpha, else L."""
    n, L = scores.shape
    crossing = scores[:, : L - 1] >= alpha
    has = crossing.any(axis=1)
    first = np.argmax(crossing, axis=1) + 1
    return np.where(has, first, L).astype(np.int64)
