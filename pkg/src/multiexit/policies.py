"""Exit policies: the weighted-confidence rule and the baseline criteria.

The central rule keeps a running score S_i per sample: while adjacent exits
agree on the predicted label the weighted confidences w_i * C_i accumulate,
capturing the ensemble effect of consistent experts; on disagreement the
score resets to the current exit's own weighted confidence.  The sample
leaves at the first exit whose score reaches that exit's threshold, and the
final layer always answers if no earlier exit fires.

Baselines: plain per-exit confidence thresholding, patience (consecutive
agreeing predictions), and majority voting across the exits seen so far.
All functions here are pure; traces are immutable, so callers may replay
many samples concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ValidationError
from .traces import ExitRecord, SampleTrace, SequenceTrace


@dataclass(frozen=True)
class CostWeights:
    """w_i = lam * i: deeper exits cost proportionally more to reach."""

    lam: float = 0.1

    def __post_init__(self):
        if not self.lam > 0:
            raise ValidationError("range", f"per-layer cost must be positive, got {self.lam}")


@dataclass(frozen=True)
class AccuracyWeights:
    """w_i = validation accuracy of exit i, used verbatim (no normalization)."""

    acc: tuple[float, ...]

    def __post_init__(self):
        acc = tuple(float(a) for a in self.acc)
        if any(not 0.0 <= a <= 1.0 for a in acc):
            raise ValidationError("range", "accuracies must lie in [0, 1]")
        object.__setattr__(self, "acc", acc)


@dataclass(frozen=True)
class ExplicitWeights:
    """Arbitrary positive per-exit weights supplied by the caller."""

    w: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(v) for v in self.w)
        if any(not v > 0 for v in w):
            raise ValidationError("range", "weights must be positive")
        object.__setattr__(self, "w", w)


WeightScheme = Union[CostWeights, AccuracyWeights, ExplicitWeights]


def materialize_weights(scheme: WeightScheme, L: int) -> np.ndarray:
    """Expand a weight scheme to the L concrete per-exit weights."""
    if isinstance(scheme, CostWeights):
        w = scheme.lam * np.arange(1, L + 1, dtype=np.float64)
    elif isinstance(scheme, AccuracyWeights):
        if len(scheme.acc) != L:
            raise ValidationError("shape", f"got {len(scheme.acc)} accuracies for L={L} exits")
        w = np.array(scheme.acc, dtype=np.float64)
    elif isinstance(scheme, ExplicitWeights):
        if len(scheme.w) != L:
            raise ValidationError("shape", f"got {len(scheme.w)} weights for L={L} exits")
        w = np.array(scheme.w, dtype=np.float64)
    else:
        raise TypeError(f"unknown weight scheme {scheme!r}")
    w.flags.writeable = False
    return w


@dataclass(frozen=True)
class ThresholdVector:
    """Per-exit thresholds on the running score.

    The final exit always answers whatever alpha_L says, so only entries
    1..L-1 gate anything.  A zero entry means "always exit here".
    """

    alphas: tuple[float, ...]

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas:
            raise ValidationError("shape", "need at least one threshold")
        if any(not np.isfinite(a) or a < 0 for a in alphas):
            raise ValidationError("range", "thresholds must be finite and >= 0")
        object.__setattr__(self, "alphas", alphas)

    @classmethod
    def uniform(cls, alpha: float, L: int) -> "ThresholdVector":
        return cls((float(alpha),) * L)

    def __len__(self) -> int:
        return len(self.alphas)


@dataclass(frozen=True)
class Beem:
    """Weighted-confidence exit policy (weights x thresholds)."""

    weights: WeightScheme
    thresholds: ThresholdVector


@dataclass(frozen=True)
class ConfidenceThreshold:
    """Exit as soon as the current exit's own confidence reaches tau."""

    tau: float

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValidationError("range", f"tau must lie in (0, 1), got {self.tau}")


@dataclass(frozen=True)
class Patience:
    """Exit after t consecutive adjacent agreements in prediction."""

    t: int

    def __post_init__(self):
        if int(self.t) < 1:
            raise ValidationError("range", f"patience must be >= 1, got {self.t}")
        object.__setattr__(self, "t", int(self.t))


@dataclass(frozen=True)
class MajorityVote:
    """Exit once some label holds a strict majority of the votes so far.

    The scan starts at exit ``quorum`` so a lone early vote cannot decide.
    """

    quorum: int

    def __post_init__(self):
        if int(self.quorum) < 1:
            raise ValidationError("range", f"quorum must be >= 1, got {self.quorum}")
        object.__setattr__(self, "quorum", int(self.quorum))


@dataclass(frozen=True)
class FinalOnly:
    """Never exit early; the final layer answers (vanilla inference)."""


Policy = Union[Beem, ConfidenceThreshold, Patience, MajorityVote, FinalOnly]


@dataclass(frozen=True)
class ExitDecision:
    """Outcome of running a policy on one trace.

    ``per_layer_scores`` holds the policy's decision statistic for layers
    1..exit_layer (the running score for the weighted rule, the confidence
    for confidence exiting, the agreement-run length for patience, the top
    vote count for majority voting).
    """

    exit_layer: int
    label: int
    score_at_exit: float
    per_layer_scores: tuple[float, ...]


@dataclass(frozen=True)
class SequenceDecision:
    """Outcome of decoding one sequence trace under a policy.

    ``terminated`` is False when the recorded steps ran out before the
    end-of-sequence token was emitted.
    """

    tokens: tuple[int, ...]
    exit_layers: tuple[int, ...]
    terminated: bool


def beem_step(
    prev_score: float, prev_label: int | None, record: ExitRecord, w_i: float
) -> tuple[float, int]:
    """One step of the weighted-confidence recurrence.

    Accumulate w_i * C_i onto the running score while the prediction agrees
    with the previous exit; reset to w_i * C_i on disagreement.  The first
    exit (``prev_label`` None) starts the score at w_1 * C_1.
    """
    label, conf = record.prediction, record.confidence
    if prev_label is not None and prev_label == label:
        return prev_score + w_i * conf, label
    return w_i * conf, label


def run_beem(trace: SampleTrace, weights: WeightScheme, thresholds: ThresholdVector) -> ExitDecision:
    """Replay the weighted-confidence policy on one trace.

    Exits at the smallest i < L whose running score reaches alphas[i-1];
    the final layer answers unconditionally if no earlier exit fires.
    """
    L = trace.n_layers
    w = materialize_weights(weights, L)
    if len(thresholds) != L:
        raise ValidationError("shape", f"got {len(thresholds)} thresholds for L={L} exits")
    preds = trace.predictions
    confs = trace.confidences
    scores: list[float] = []
    score = 0.0
    label = None
    for i in range(L):
        if label is not None and label == int(preds[i]):
            score = float(score + w[i] * confs[i])
        else:
            score = float(w[i] * confs[i])
        label = int(preds[i])
        scores.append(score)
        if i < L - 1 and score >= thresholds.alphas[i]:
            break
    return ExitDecision(
        exit_layer=len(scores),
        label=label,
        score_at_exit=score,
        per_layer_scores=tuple(scores),
    )


def beem_score_matrix(dataset, weights: WeightScheme) -> np.ndarray:
    """(N, L) running scores for every trace in a classification dataset.

    Vectorized across samples; row j reproduces bit-for-bit the scores
    run_beem would compute for trace j (thresholds never enter the score
    recurrence, so one matrix serves every threshold choice).
    """
    preds = dataset.prediction_matrix
    confs = dataset.confidence_matrix
    n, L = preds.shape
    w = materialize_weights(weights, L)
    scores = np.empty((n, L), dtype=np.float64)
    scores[:, 0] = w[0] * confs[:, 0]
    for i in range(1, L):
        agree = preds[:, i] == preds[:, i - 1]
        scores[:, i] = np.where(agree, scores[:, i - 1], 0.0) + w[i] * confs[:, i]
    return scores


def run_confidence(trace: SampleTrace, tau: float) -> ExitDecision:
    """Exit at the first i < L with confidence C_i >= tau, else at L."""
    L = trace.n_layers
    confs = trace.confidences
    exit_layer = L
    for i in range(L - 1):
        if confs[i] >= tau:
            exit_layer = i + 1
            break
    return ExitDecision(
        exit_layer=exit_layer,
        label=int(trace.predictions[exit_layer - 1]),
        score_at_exit=float(confs[exit_layer - 1]),
        per_layer_scores=tuple(float(c) for c in confs[:exit_layer]),
    )


def run_patience(trace: SampleTrace, t: int) -> ExitDecision:
    """Exit at the first layer ending a run of t adjacent agreements.

    The exit fires at layer i when ŷ_{i-t} = ... = ŷ_i, i.e. the t most
    recent adjacent pairs all agree; with no such run the final layer
    answers.
    """
    if t < 1:
        raise ValidationError("range", f"patience must be >= 1, got {t}")
    L = trace.n_layers
    preds = trace.predictions
    run = 0
    runs = [0.0]
    exit_layer = L
    for i in range(1, L):
        run = run + 1 if preds[i] == preds[i - 1] else 0
        runs.append(float(run))
        if run >= t:
            exit_layer = i + 1
            break
    return ExitDecision(
        exit_layer=exit_layer,
        label=int(preds[exit_layer - 1]),
        score_at_exit=runs[exit_layer - 1],
        per_layer_scores=tuple(runs[:exit_layer]),
    )


def run_majority(trace: SampleTrace, quorum: int) -> ExitDecision:
    """Exit at the first i >= quorum where a label holds a strict majority.

    Votes are the predictions of exits 1..i; a strict majority needs more
    than i/2 of them.  The decision label is the majority label, which may
    differ from ŷ_i.  With no majority anywhere the final layer answers
    with its own prediction.
    """
    if quorum < 1:
        raise ValidationError("range", f"quorum must be >= 1, got {quorum}")
    L = trace.n_layers
    preds = trace.predictions
    counts = np.zeros(trace.n_classes, dtype=np.int64)
    top: list[float] = []
    for i in range(L):
        counts[preds[i]] += 1
        top.append(float(counts.max()))
        if i + 1 >= quorum and counts.max() * 2 > i + 1:
            return ExitDecision(
                exit_layer=i + 1,
                label=int(np.argmax(counts)),
                score_at_exit=top[-1],
                per_layer_scores=tuple(top),
            )
    return ExitDecision(
        exit_layer=L,
        label=int(preds[L - 1]),
        score_at_exit=top[-1],
        per_layer_scores=tuple(top),
    )


def run_final_only(trace: SampleTrace) -> ExitDecision:
    """Vanilla inference: the final layer always answers."""
    L = trace.n_layers
    return ExitDecision(
        exit_layer=L,
        label=int(trace.predictions[L - 1]),
        score_at_exit=float(trace.confidences[L - 1]),
        per_layer_scores=tuple(float(c) for c in trace.confidences),
    )


def run_policy(trace: SampleTrace, policy: Policy) -> ExitDecision:
    """Dispatch one classification trace to its policy implementation."""
    if isinstance(policy, Beem):
        return run_beem(trace, policy.weights, policy.thresholds)
    if isinstance(policy, ConfidenceThreshold):
        return run_confidence(trace, policy.tau)
    if isinstance(policy, Patience):
        return run_patience(trace, policy.t)
    if isinstance(policy, MajorityVote):
        return run_majority(trace, policy.quorum)
    if isinstance(policy, FinalOnly):
        return run_final_only(trace)
    raise TypeError(f"unknown policy {policy!r}")


def run_sequence(seq: SequenceTrace, policy: Policy) -> SequenceDecision:
    """Decode a sequence trace token by token under a policy.

    Each decoding step is an independent decision (the weighted score does
    not carry over between tokens); emission stops after the first
    end-of-sequence token.  If the recorded steps never emit it, every
    recorded token is returned and the decision is flagged unterminated.
    """
    tokens: list[int] = []
    layers: list[int] = []
    terminated = False
    for step in seq.token_traces:
        decision = run_policy(step, policy)
        tokens.append(decision.label)
        layers.append(decision.exit_layer)
        if decision.label == seq.eos_token:
            terminated = True
            break
    return SequenceDecision(tokens=tuple(tokens), exit_layers=tuple(layers), terminated=terminated)
