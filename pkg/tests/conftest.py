"""Shared builders and reference implementations for the test suite."""

import numpy as np
import pytest

from multiexit import SampleTrace, ThresholdVector, beem_step, materialize_weights


def make_trace(pred_conf, C=3, label=None, id="t"):
    """Build a trace from (predicted class, confidence) pairs.

    The predicted class gets the stated confidence, the remaining mass is
    spread evenly, so the argmax and max are exactly the stated pair as long
    as conf > 1/C (or the prediction is class 0 at conf == 1/C).
    """
    rows = []
    for pred, conf in pred_conf:
        row = np.full(C, (1.0 - conf) / (C - 1))
        row[pred] = conf
        rows.append(row)
    return SampleTrace(id=id, label=label, probs=np.array(rows))


def random_trace(rng, L=None, C=None, labeled=True, id="t"):
    """A random valid trace with strictly positive probabilities."""
    L = int(L if L is not None else rng.integers(1, 13))
    C = int(C if C is not None else rng.integers(2, 11))
    probs = rng.random((L, C)) + 1e-6
    probs /= probs.sum(axis=1, keepdims=True)
    label = int(rng.integers(0, C)) if labeled else None
    return SampleTrace(id=id, label=label, probs=probs)


def reference_beem(trace, weights, thresholds):
    """Independent oracle: compute all L scores by repeated single steps,
    then scan for the first threshold crossing.

    Returns (exit_layer, label, score_at_exit, scores_up_to_exit).
    """
    L = trace.n_layers
    w = materialize_weights(weights, L)
    scores, labels = [], []
    prev_score, prev_label = 0.0, None
    for i, rec in enumerate(trace.records):
        s, y = beem_step(prev_score, prev_label, rec, float(w[i]))
        scores.append(s)
        labels.append(y)
        prev_score, prev_label = s, y
    alphas = thresholds.alphas if isinstance(thresholds, ThresholdVector) else tuple(thresholds)
    exit_layer = L
    for i in range(L - 1):
        if scores[i] >= alphas[i]:
            exit_layer = i + 1
            break
    return exit_layer, labels[exit_layer - 1], scores[exit_layer - 1], tuple(scores[:exit_layer])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
