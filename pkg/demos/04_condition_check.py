"""Estimate the per-exit performance condition on synthetic traces.

The construction makes the final layer noticeably worse (overthinking): the
intermediate exits err on 5% of samples, the final layer on 20%.  Every
estimable exit should satisfy its bound, and the weighted policy's overall
error should then stay at or below the final layer's.
"""

from multiexit import (
    Beem,
    CostWeights,
    FinalOnly,
    SynthConfig,
    ThresholdVector,
    check_condition,
    evaluate,
    generate,
)

data = generate(
    SynthConfig(L=6, C=4, n=20000, q=(0.05, 0.05, 0.05, 0.05, 0.05, 0.2),
                rho=0.8, conf_correct=(2, 2), conf_wrong=(2, 2), seed=7)
)
policy = Beem(CostWeights(0.1), ThresholdVector((0.12, 0.14, 0.22, 0.30, 0.40, 6.0)))

report = check_condition(data, policy)
print(f"final-layer error rate p = {report.p:.4f}\n")
print(f"{'exit':>4} {'q':>7} {'a':>8} {'b':>6} {'bound':>8}  {'satisfied':>9}  support(0/1 changes)")
for e in report.per_exit:
    a = "-" if e.a is None else f"{e.a:.3f}"
    b = "-" if e.b is None else f"{e.b:.2f}"
    bound = "-" if e.bound is None else f"{e.bound:.4f}"
    sat = "-" if e.satisfied is None else str(e.satisfied)
    print(f"{e.exit_index:>4} {e.q:>7.4f} {a:>8} {b:>6} {bound:>8}  {sat:>9}  "
          f"{e.support_no_change}/{e.support_one_change}")
print(f"\nall estimable exits satisfied: {report.all_satisfied}")

ev = evaluate(data, policy)
fin = evaluate(data, FinalOnly())
print(f"weighted policy: error {1 - ev.accuracy:.4f} at speedup {ev.speedup:.2f}x")
print(f"final layer:     error {1 - fin.accuracy:.4f}")
