"""Token-by-token decoding with early exits.

Each decoding step carries its own per-exit distributions over a small
vocabulary; the policy decides independently per token (the running score
never leaks across tokens) and decoding stops at the end-of-sequence token.
"""

import numpy as np

from multiexit import (
    Beem,
    CostWeights,
    Dataset,
    FinalOnly,
    SampleTrace,
    SequenceTrace,
    ThresholdVector,
    evaluate,
    run_sequence,
)

L, V = 4, 6  # decoder depth, vocabulary size
EOS = 5
rng = np.random.default_rng(3)


def step(token, base_conf):
    rows = []
    for i in range(L):
        conf = min(base_conf + 0.08 * i, 0.97)  # deeper exits more confident
        row = np.full(V, (1 - conf) / (V - 1))
        row[token] = conf
        rows.append(row)
    return SampleTrace(id="", label=None, probs=np.array(rows))


def caption(tokens, confs, id):
    steps = tuple(step(t, c) for t, c in zip(tokens, confs))
    return SequenceTrace(id=id, token_traces=steps, eos_token=EOS,
                         reference_tokens=tuple(tokens))


captions = (
    caption([0, 2, 4, EOS], [0.55, 0.7, 0.6, 0.8], "cap-0"),
    caption([1, 1, 3, 2, EOS], [0.6, 0.5, 0.65, 0.7, 0.9], "cap-1"),
)
policy = Beem(CostWeights(0.3), ThresholdVector.uniform(0.8, L))

for cap in captions:
    d = run_sequence(cap, policy)
    print(f"{cap.id}: tokens {list(d.tokens)} exit layers {list(d.exit_layers)} "
          f"terminated={d.terminated}")

data = Dataset(traces=captions, split="test")
for name, pol in [("weighted", policy), ("final-only", FinalOnly())]:
    rep = evaluate(data, pol)
    print(f"{name:<11} token accuracy {rep.accuracy:.2f} speedup {rep.speedup:.2f}x "
          f"({rep.sample_count} tokens)")
