"""Calibrate exit thresholds two ways and audit the error-rate guarantee.

The error-rate method picks, per exit, the smallest threshold whose exiting
population errs no more often than the final layer; re-evaluating the
calibration split must then show every covered exit at error <= p, and a
fresh test split should stay close.
"""

from multiexit import (
    Beem,
    CostWeights,
    SynthConfig,
    calibrate_classical,
    calibrate_error_rate,
    evaluate,
    generate,
)

gen = dict(L=6, C=4, q=(0.30, 0.22, 0.16, 0.12, 0.10, 0.08), rho=0.6,
           conf_correct=(6, 2), conf_wrong=(2, 4))
val = generate(SynthConfig(n=5000, seed=1, **gen), split="validation")
test = generate(SynthConfig(n=20000, seed=2, **gen), split="test")
weights = CostWeights(0.4)

report = calibrate_error_rate(val, weights)
print(f"final-layer error rate p = {report.p:.4f}")
print(f"error-rate thresholds:   {report.thresholds.alphas}")
for e in report.per_exit:
    print(f"  exit {e.exit_index}: alpha={e.alpha:<4} coverage={e.c_stop:<5} "
          f"error={e.error_rate:.4f} feasible={e.feasible}")

classical = calibrate_classical(val, weights)
print(f"classical uniform threshold: {classical.thresholds.alphas[0]}")

print("\naudit on the calibration split (error must be <= p exactly):")
for split, data in [("validation", val), ("test", test)]:
    ev = evaluate(data, Beem(weights, report.thresholds))
    errs = ["  -  " if e is None else f"{e:.3f}" for e in ev.per_exit_error]
    print(f"  {split:<11} acc={ev.accuracy:.4f} speedup={ev.speedup:.2f}x "
          f"per-exit error: {errs}")
