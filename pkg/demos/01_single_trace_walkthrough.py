"""Walk one sample through a 12-exit backbone under three exit rules.

The sample is easy but never very confident: every exit predicts the same
class at confidence ~0.55-0.65.  A plain confidence threshold of 0.9 never
fires and a patience rule needs several layers, while the weighted rule
aggregates the consistent evidence and exits almost immediately.
"""

import numpy as np

from multiexit import (
    Beem,
    ConfidenceThreshold,
    CostWeights,
    Patience,
    SampleTrace,
    ThresholdVector,
    run_beem,
    run_confidence,
    run_patience,
)

L, C = 12, 4
rng = np.random.default_rng(0)

# all exits agree on class 2 with middling confidence
rows = []
for conf in rng.uniform(0.55, 0.65, L):
    row = np.full(C, (1 - conf) / (C - 1))
    row[2] = conf
    rows.append(row)
trace = SampleTrace(id="easy-but-shy", label=2, probs=np.array(rows))

# weights 0.1, 0.2, ..., 1.2 and a uniform threshold of 0.2
policy = Beem(CostWeights(0.1), ThresholdVector.uniform(0.2, L))
decision = run_beem(trace, policy.weights, policy.thresholds)

print("per-layer running score under the weighted rule:")
for i, s in enumerate(decision.per_layer_scores, start=1):
    print(f"  layer {i:2d}  conf={trace.confidences[i-1]:.3f}  S={s:.3f}")
print(f"weighted rule exits at layer {decision.exit_layer} with label {decision.label}\n")

for name, d in [
    ("confidence >= 0.9", run_confidence(trace, 0.9)),
    ("patience 2", run_patience(trace, 2)),
]:
    print(f"{name:<18} exits at layer {d.exit_layer} with label {d.label}")
