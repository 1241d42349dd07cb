"""Per-exit sufficient condition for beating the final layer.

For exit t, let q_t be its standalone error rate, p the final layer's error
rate, b_t the ratio max(q_1..q_t)/min(q_1..q_t), and a_t the ratio of the
probability of exiting at t with exactly one prediction change so far to the
probability of exiting at t with none.  If

    q_t < a_t / (a_t + (1/p - 1) * b_t**(t-1))

holds for every exit, the weighted-confidence policy's error rate is at most
p.  The condition is sufficient, not necessary; a failed check says nothing
about the policy actually being worse.

a_t and b_t are population constants; here they are estimated empirically,
with support counts surfaced so thin conditioning events are visible.  Exits
where either conditioning event has no support (or a denominator hits zero)
are flagged non-estimable and excluded from the overall verdict.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyDatasetError, LabelRequiredError, ValidationError
from .policies import Beem, run_beem
from .traces import Dataset


@dataclass(frozen=True)
class AEstimate:
    """Empirical a_t for one exit.

    ``support_no_change`` / ``support_one_change`` count samples whose
    prediction changed 0 / exactly 1 times up to this exit; ``a`` is the
    ratio of the exit probabilities conditioned on those events, or None
    when either event has no support or the denominator is zero.
    """

    exit_index: int
    a: float | None
    estimable: bool
    support_no_change: int
    support_one_change: int


@dataclass(frozen=True)
class ExitConditionEstimate:
    """Empirical condition quantities for one exit; ``bound`` and
    ``satisfied`` are None when the exit is not estimable."""

    exit_index: int
    q: float
    a: float | None
    b: float | None
    bound: float | None
    satisfied: bool | None
    estimable: bool
    support_no_change: int
    support_one_change: int


@dataclass(frozen=True)
class TheoremReport:
    """Per-exit condition estimates plus the final layer's error rate.

    ``all_satisfied`` is the conjunction over estimable exits (vacuously
    true when nothing is estimable; check ``n_estimable``).
    """

    per_exit: tuple[ExitConditionEstimate, ...]
    p: float

    @property
    def all_satisfied(self) -> bool:
        return all(e.satisfied for e in self.per_exit if e.estimable)

    @property
    def n_estimable(self) -> int:
        return sum(e.estimable for e in self.per_exit)


def _require_labeled(data: Dataset):
    if len(data) == 0:
        raise EmptyDatasetError("dataset has no traces")
    if data.mode != "classification":
        raise ValidationError("mode", "condition checking requires a classification dataset")
    if not data.is_labeled:
        raise LabelRequiredError("error rates require true labels on every trace")


def standalone_error_rates(data: Dataset) -> np.ndarray:
    """q_i per exit: misclassification rate if every sample used exit i."""
    _require_labeled(data)
    wrong = data.prediction_matrix != data.label_array[:, None]
    return wrong.mean(axis=0)


def estimate_a(data: Dataset, policy: Beem) -> list[AEstimate]:
    """Estimate a_t = P(exit at t | one change) / P(exit at t | no change).

    Works on labeled or unlabeled data (labels never enter).  Exit 1 is
    never estimable since no prediction change can have happened yet.
    """
    if len(data) == 0:
        raise EmptyDatasetError("dataset has no traces")
    if data.mode != "classification":
        raise ValidationError("mode", "estimation requires a classification dataset")
    L = data.L
    exit_layers = np.array(
        [run_beem(t, policy.weights, policy.thresholds).exit_layer for t in data], dtype=np.int64
    )
    # change counts per sample per exit, vectorized over the dataset
    preds = data.prediction_matrix
    flips = preds[:, 1:] != preds[:, :-1]
    changes = np.zeros((len(data), L), dtype=np.int64)
    changes[:, 1:] = np.cumsum(flips, axis=1)

    out: list[AEstimate] = []
    for t in range(1, L):
        at_t = changes[:, t - 1]
        no_change = at_t == 0
        one_change = at_t == 1
        n0 = int(np.count_nonzero(no_change))
        n1 = int(np.count_nonzero(one_change))
        a = None
        estimable = n0 > 0 and n1 > 0
        if estimable:
            a0 = float(np.mean(exit_layers[no_change] == t))
            a1 = float(np.mean(exit_layers[one_change] == t))
            if a0 == 0.0:
                estimable = False
            else:
                a = a1 / a0
        out.append(AEstimate(t, a, estimable, n0, n1))
    return out


def theorem_bound(a_t: float, b_t: float, p: float, t: int) -> float:
    """Upper bound on q_t under which exit t cannot hurt overall error.

    Equals a_t / (a_t + (1/p - 1) * b_t**(t-1)); with b_t = 1 this reduces
    to a_t / (a_t + (1/p - 1)) for every t.
    """
    if not 0.0 < p < 1.0:
        raise ValidationError("range", f"final error rate must lie in (0, 1), got {p}")
    if a_t <= 0:
        raise ValidationError("range", f"a must be positive, got {a_t}")
    if b_t < 1:
        raise ValidationError("range", f"b must be >= 1, got {b_t}")
    if t < 1:
        raise ValidationError("range", f"exit index must be >= 1, got {t}")
    return a_t / (a_t + (1.0 / p - 1.0) * b_t ** (t - 1))


def check_condition(data: Dataset, policy: Beem) -> TheoremReport:
    """Assemble the per-exit condition report for a labeled dataset.

    b_t is max(q_1..q_t)/min(q_1..q_t); a zero minimum makes the exit
    non-estimable (division guard), as does p outside (0, 1).
    """
    _require_labeled(data)
    q = standalone_error_rates(data)
    p = float(q[-1])
    estimates = estimate_a(data, policy)

    out: list[ExitConditionEstimate] = []
    for est in estimates:
        t = est.exit_index
        q_t = float(q[t - 1])
        q_max = float(np.max(q[:t]))
        q_min = float(np.min(q[:t]))
        b = None
        bound = None
        satisfied = None
        estimable = est.estimable
        if q_min > 0.0:
            b = q_max / q_min
        else:
            estimable = False
        if not 0.0 < p < 1.0:
            estimable = False
        if estimable:
            # an empirical a of exactly 0 collapses the bound to 0: the
            # condition cannot hold there, but the estimate itself is valid
            bound = 0.0 if est.a == 0.0 else theorem_bound(est.a, b, p, t)
            satisfied = q_t < bound
        out.append(
            ExitConditionEstimate(
                exit_index=t,
                q=q_t,
                a=est.a,
                b=b,
                bound=bound,
                satisfied=satisfied,
                estimable=estimable,
                support_no_change=est.support_no_change,
                support_one_change=est.support_one_change,
            )
        )
    return TheoremReport(per_exit=tuple(out), p=p)
