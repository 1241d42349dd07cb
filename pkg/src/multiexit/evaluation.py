"""Replay a policy over a dataset and summarize accuracy and speed.

Speedup is the layer-count ratio (sum over units of L) / (sum of exit
layers): how many fewer layers ran compared with always executing the full
backbone.  No wall clock is involved.  For sequence datasets the unit is the
emitted token, so n_i counts tokens exiting from layer i.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyDatasetError, ValidationError
from .policies import Policy, run_policy, run_sequence
from .traces import Dataset, SampleTrace, SequenceTrace


@dataclass(frozen=True)
class EvalReport:
    """Replay summary for one policy.

    ``accuracy`` is None for unlabeled data.  ``per_exit_error`` holds, for
    each layer, the error rate among units that exited there, or None for a
    layer nobody exited from (left undefined rather than 0 so dead exits are
    visible).  ``time_reduction`` is 1 - 1/speedup, the expected fraction of
    layer evaluations saved.
    """

    policy: str
    sample_count: int
    exit_counts: tuple[int, ...]
    speedup: float
    accuracy: float | None
    per_exit_error: tuple[float | None, ...]

    @property
    def time_reduction(self) -> float:
        return 1.0 - 1.0 / self.speedup


def speedup_from_counts(exit_counts: Sequence[int]) -> float:
    """(sum_i L*n_i) / (sum_i i*n_i) for 1-based layer counts n_i."""
    counts = np.asarray(exit_counts, dtype=np.float64)
    L = counts.shape[0]
    total = counts.sum()
    if total == 0:
        raise EmptyDatasetError("no units exited; cannot compute speedup")
    layers = np.arange(1, L + 1, dtype=np.float64)
    return float((L * total) / np.dot(layers, counts))


def _policy_name(policy: Policy) -> str:
    return type(policy).__name__


def evaluate(data: Dataset, policy: Policy) -> EvalReport:
    """Run ``policy`` on every trace and aggregate.

    Classification datasets contribute one unit per trace; sequence datasets
    one unit per emitted token.  Accuracy needs labels (reference tokens for
    sequences) and is omitted otherwise; sequence tokens emitted beyond the
    reference length count as wrong.
    """
    if len(data) == 0:
        raise EmptyDatasetError("dataset has no traces")
    L = data.L
    counts = np.zeros(L, dtype=np.int64)
    correct_per_exit = np.zeros(L, dtype=np.int64)
    n_correct = 0
    n_units = 0
    labeled = data.is_labeled

    for trace in data:
        if isinstance(trace, SequenceTrace):
            decision = run_sequence(trace, policy)
            ref = trace.reference_tokens
            for pos, (token, layer) in enumerate(zip(decision.tokens, decision.exit_layers)):
                counts[layer - 1] += 1
                n_units += 1
                if labeled:
                    ok = ref is not None and pos < len(ref) and token == ref[pos]
                    n_correct += ok
                    correct_per_exit[layer - 1] += ok
        else:
            decision = run_policy(trace, policy)
            counts[decision.exit_layer - 1] += 1
            n_units += 1
            if labeled:
                ok = decision.label == trace.label
                n_correct += ok
                correct_per_exit[decision.exit_layer - 1] += ok

    per_exit_error = tuple(
        None if counts[i] == 0 else float(1.0 - correct_per_exit[i] / counts[i]) if labeled else None
        for i in range(L)
    )
    return EvalReport(
        policy=_policy_name(policy),
        sample_count=int(n_units),
        exit_counts=tuple(int(c) for c in counts),
        speedup=speedup_from_counts(counts),
        accuracy=float(n_correct / n_units) if labeled else None,
        per_exit_error=per_exit_error,
    )


def compare(data: Dataset, policies: Sequence[Policy]) -> list[EvalReport]:
    """Evaluate several policies on identical data, in the given order."""
    if not policies:
        raise ValidationError("shape", "need at least one policy to compare")
    return [evaluate(data, p) for p in policies]
