"""Accuracy/speedup table for every exit policy on one synthetic dataset."""

from multiexit import (
    Beem,
    ConfidenceThreshold,
    CostWeights,
    FinalOnly,
    MajorityVote,
    Patience,
    SynthConfig,
    ThresholdVector,
    calibrate_error_rate,
    compare,
    generate,
)

gen = dict(L=8, C=4, q=(0.10, 0.085, 0.075, 0.068, 0.062, 0.058, 0.055, 0.052),
           rho=0.35, conf_correct=(6, 2), conf_wrong=(2, 4))
val = generate(SynthConfig(n=4000, seed=5, **gen), split="validation")
test = generate(SynthConfig(n=12000, seed=6, **gen), split="test")

weights = CostWeights(0.15)
thresholds = calibrate_error_rate(val, weights).thresholds

policies = [
    ("final layer", FinalOnly()),
    ("confidence 0.9", ConfidenceThreshold(0.9)),
    ("patience 3", Patience(3)),
    ("majority of 5", MajorityVote(5)),
    ("weighted (calibrated)", Beem(weights, thresholds)),
]

reports = compare(test, [p for _, p in policies])
print(f"{'policy':<24}{'accuracy':>10}{'speedup':>10}")
for (name, _), rep in zip(policies, reports):
    print(f"{name:<24}{rep.accuracy:>10.4f}{rep.speedup:>9.2f}x")
