"""Acceptance suite: one test per release criterion, each at its stated
tolerance, printing one PASS line on success (run with ``pytest -v -s``).

Monte-Carlo criteria use frozen seed ranges; every expected value is either
hand-computable arithmetic or checked against an independent replay oracle.
"""

import time

import numpy as np
import pytest

from multiexit import (
    Beem,
    ConfidenceThreshold,
    CostWeights,
    Dataset,
    ExplicitWeights,
    FinalOnly,
    MajorityVote,
    ParseError,
    Patience,
    SynthConfig,
    ThresholdVector,
    beem_score_matrix,
    calibrate_error_rate,
    check_condition,
    evaluate,
    generate,
    load_traces,
    run_beem,
    save_traces,
    speedup_from_counts,
    theorem_bound,
)

from conftest import random_trace, reference_beem


def _sweep_uniform_alpha(data, lam, grid):
    """(alpha, accuracy, speedup) per candidate via the vectorized score
    matrix; used by the baseline-ordering criterion."""
    scores = beem_score_matrix(data, CostWeights(lam))
    preds = data.prediction_matrix
    labels = data.label_array
    n, L = scores.shape
    out = []
    for a in grid:
        crossing = scores[:, : L - 1] >= a
        has = crossing.any(axis=1)
        exit_layers = np.where(has, np.argmax(crossing, axis=1) + 1, L)
        chosen = preds[np.arange(n), exit_layers - 1]
        acc = float(np.mean(chosen == labels))
        counts = np.bincount(exit_layers, minlength=L + 1)[1:]
        out.append((float(a), acc, speedup_from_counts(counts)))
    return out


class TestAcceptance:
    def test_weighted_rule_oracle_equivalence(self):
        # 10,000 random traces: the early-stopping implementation must match
        # a compute-all-scores-then-scan oracle exactly, in under 10 s
        rng = np.random.default_rng(101)
        start = time.perf_counter()
        for i in range(10_000):
            trace = random_trace(rng, L=int(rng.integers(1, 13)), C=int(rng.integers(2, 11)), id=f"t{i}")
            L = trace.n_layers
            weights = ExplicitWeights(tuple(rng.uniform(0.02, 1.5, L)))
            thresholds = ThresholdVector(tuple(rng.uniform(0.0, 2.5, L)))
            d = run_beem(trace, weights, thresholds)
            exit_layer, label, score, scores = reference_beem(trace, weights, thresholds)
            assert d.exit_layer == exit_layer
            assert d.label == label
            assert d.score_at_exit == score
            assert d.per_layer_scores == scores
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0, f"oracle equivalence took {elapsed:.1f}s"
        print(f"ACCEPTANCE PASS: oracle equivalence on 10000 traces in {elapsed:.1f}s")

    def test_scale_invariance(self):
        # decisions are invariant under (w, alpha) -> (c*w, c*alpha), c > 0
        rng = np.random.default_rng(102)
        violations = 0
        for i in range(1_000):
            trace = random_trace(rng, L=int(rng.integers(1, 13)), C=int(rng.integers(2, 11)), id=f"t{i}")
            L = trace.n_layers
            w = rng.uniform(0.02, 1.5, L)
            alphas = rng.uniform(0.0, 2.5, L)
            c = float(np.exp(rng.uniform(np.log(0.01), np.log(100.0))))
            d1 = run_beem(trace, ExplicitWeights(tuple(w)), ThresholdVector(tuple(alphas)))
            d2 = run_beem(trace, ExplicitWeights(tuple(c * w)), ThresholdVector(tuple(c * alphas)))
            violations += (d1.exit_layer, d1.label) != (d2.exit_layer, d2.label)
        assert violations == 0
        print("ACCEPTANCE PASS: scale invariance on 1000 tuples, zero violations")

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(103)
        violations = 0
        for i in range(1_000):
            trace = random_trace(rng, L=int(rng.integers(2, 13)), C=int(rng.integers(2, 11)), id=f"t{i}")
            L = trace.n_layers
            alphas = rng.uniform(0.0, 2.0, L)
            bigger = alphas + rng.uniform(0.0, 1.5, L)
            weights = CostWeights(float(rng.uniform(0.05, 0.5)))
            d1 = run_beem(trace, weights, ThresholdVector(tuple(alphas)))
            d2 = run_beem(trace, weights, ThresholdVector(tuple(bigger)))
            violations += d2.exit_layer < d1.exit_layer
        assert violations == 0
        print("ACCEPTANCE PASS: threshold monotonicity on 1000 traces, zero violations")

    def test_calibration_guarantee(self):
        # on the calibration set the per-exit error constraint holds exactly;
        # on fresh test data it holds within +0.02 in at least 18 of 20 seeds
        q = (0.30, 0.22, 0.16, 0.12, 0.10, 0.08)
        weights = CostWeights(0.4)
        val_exact, test_ok = 0, 0
        for seed in range(20):
            val = generate(
                SynthConfig(L=6, C=4, n=5_000, q=q, rho=0.6, conf_correct=(6, 2),
                            conf_wrong=(2, 4), seed=1000 + seed),
                split="validation",
            )
            test = generate(
                SynthConfig(L=6, C=4, n=20_000, q=q, rho=0.6, conf_correct=(6, 2),
                            conf_wrong=(2, 4), seed=5000 + seed),
                split="test",
            )
            report = calibrate_error_rate(val, weights)
            policy = Beem(weights, report.thresholds)

            ev_val = evaluate(val, policy)
            val_exact += all(
                ev_val.per_exit_error[t - 1] <= report.p
                for t in range(1, 6)
                if ev_val.exit_counts[t - 1] > 0
            )
            ev_test = evaluate(test, policy)
            test_ok += all(
                ev_test.per_exit_error[t - 1] <= report.p + 0.02
                for t in range(1, 6)
                if ev_test.exit_counts[t - 1] > 0
            )
        assert val_exact == 20, f"exact in-sample guarantee failed in {20 - val_exact} seeds"
        assert test_ok >= 18, f"test-set guarantee held in only {test_ok}/20 seeds"
        print(f"ACCEPTANCE PASS: calibration guarantee exact 20/20 on val, {test_ok}/20 on test")

    def test_condition_implies_no_accuracy_loss(self):
        # construction where the per-exit condition reports satisfied: the
        # weighted policy's error stays at or below the final layer's rate
        start = time.perf_counter()
        q = (0.05, 0.05, 0.05, 0.05, 0.05, 0.2)
        policy = Beem(CostWeights(0.1), ThresholdVector((0.12, 0.14, 0.22, 0.30, 0.40, 6.0)))
        sat, err_ok, final_ok = 0, 0, 0
        sigma3 = 3.0 * np.sqrt(0.2 * 0.8 / 20_000)
        for seed in range(20):
            data = generate(
                SynthConfig(L=6, C=4, n=20_000, q=q, rho=0.8, conf_correct=(2, 2),
                            conf_wrong=(2, 2), seed=2000 + seed)
            )
            report = check_condition(data, policy)
            sat += report.all_satisfied and report.n_estimable >= 2
            ev = evaluate(data, policy)
            err_ok += (1.0 - ev.accuracy) <= report.p
            fin = evaluate(data, FinalOnly())
            final_ok += abs((1.0 - fin.accuracy) - 0.2) <= sigma3
        elapsed = time.perf_counter() - start
        assert sat == 20, f"condition reported satisfied in only {sat}/20 seeds"
        assert err_ok >= 19, f"error beat the final layer in only {err_ok}/20 seeds"
        assert final_ok >= 19, f"final-only error within 3 sigma of target in only {final_ok}/20 seeds"
        assert elapsed < 120.0, f"condition check took {elapsed:.0f}s"
        print(
            f"ACCEPTANCE PASS: condition satisfied 20/20, error <= p {err_ok}/20, "
            f"final at target {final_ok}/20, {elapsed:.0f}s"
        )

    def test_speedup_metric_exactness(self):
        all_final = [0] * 11 + [100]
        half_middle = [0] * 12
        half_middle[5] = 50
        half_middle[11] = 50
        all_middle = [0] * 12
        all_middle[5] = 100
        assert abs(speedup_from_counts(all_final) - 1.0) <= 1e-12
        assert abs(speedup_from_counts(half_middle) - 1200.0 / 900.0) <= 1e-12
        assert abs(speedup_from_counts(all_middle) - 2.0) <= 1e-12
        print("ACCEPTANCE PASS: speedup ratios exact to 1e-12")

    def test_bound_arithmetic(self):
        assert abs(theorem_bound(1.0, 1.0, 0.5, 3) - 0.5) <= 1e-12
        assert abs(theorem_bound(1.0, 1.0, 0.1, 5) - 0.1) <= 1e-12
        assert abs(theorem_bound(1.0, 2.0, 0.1, 3) - 1.0 / 37.0) <= 1e-12
        for t in range(1, 13):
            simplified = 0.8 / (0.8 + (1.0 / 0.3 - 1.0))
            assert abs(theorem_bound(0.8, 1.0, 0.3, t) - simplified) <= 1e-12
        print("ACCEPTANCE PASS: bound arithmetic exact to 1e-12 incl. equal-rate reduction")

    def test_baseline_ordering(self):
        # all early-exit baselines stay within 0.02 of the final layer's
        # accuracy at speedup > 1; the weighted rule matches patience's
        # accuracy (+-0.005) at equal or better speedup in >= 15 of 20 seeds
        q = (0.10, 0.085, 0.075, 0.068, 0.062, 0.058, 0.055, 0.052)
        alpha_grid = np.arange(0.1, 3.01, 0.05)
        within_ok, speed_ok, matched_ok = 0, 0, 0
        for seed in range(20):
            data = generate(
                SynthConfig(L=8, C=4, n=6_000, q=q, rho=0.35, conf_correct=(6, 2),
                            conf_wrong=(2, 4), seed=3000 + seed)
            )
            fin = evaluate(data, FinalOnly())
            conf = evaluate(data, ConfidenceThreshold(0.9))
            pat = evaluate(data, Patience(3))
            maj = evaluate(data, MajorityVote(5))
            sweep = _sweep_uniform_alpha(data, 0.15, alpha_grid)
            best = max(sweep, key=lambda x: (x[1], x[2]))

            accs = (conf.accuracy, pat.accuracy, maj.accuracy, best[1])
            speeds = (conf.speedup, pat.speedup, maj.speedup, best[2])
            within_ok += all(abs(a - fin.accuracy) <= 0.02 for a in accs)
            speed_ok += all(s > 1.0 for s in speeds)
            matched = [x for x in sweep if abs(x[1] - pat.accuracy) <= 0.005]
            matched_ok += any(x[2] >= pat.speedup for x in matched)
        assert within_ok == 20, f"accuracy within 0.02 of final in only {within_ok}/20 seeds"
        assert speed_ok == 20, f"speedup > 1 for all baselines in only {speed_ok}/20 seeds"
        assert matched_ok >= 15, f"weighted rule matched patience in only {matched_ok}/20 seeds"
        print(
            f"ACCEPTANCE PASS: baselines within 0.02 {within_ok}/20, speedup>1 {speed_ok}/20, "
            f"matched-accuracy speedup {matched_ok}/20"
        )

    def test_trace_round_trip_and_rejections(self, tmp_path):
        # save -> load identity for 100 generated datasets
        for i in range(100):
            L = 1 + i % 6
            C = 2 + i % 5
            data = generate(
                SynthConfig(L=L, C=C, n=20 + i, q=tuple(np.linspace(0.4, 0.1, L)), seed=9000 + i),
                split="test",
            )
            path = tmp_path / f"rt{i}.jsonl"
            save_traces(data, path)
            assert load_traces(path, split="test").equals(data), f"round trip broke at {i}"

        # 10 curated malformed files, each rejected with the invariant named
        good_header = '{"C":2,"L":2,"mode":"classification","version":1}'
        corpus = [
            ('{"C":2,"L":2,"mode":"classification"', None, "format"),
            (good_header, '{"exits":[[0.5,0.4],[0.7,0.3]],"id":"a","label":0}', "normalization"),
            (good_header, '{"exits":[[1.4,-0.4],[0.7,0.3]],"id":"a","label":0}', "range"),
            (good_header, '{"exits":[[0.6,0.4]],"id":"a","label":0}', "shape"),
            (good_header, '{"exits":[[0.6,0.3,0.1],[0.7,0.2,0.1]],"id":"a","label":0}', "shape"),
            (good_header, '{"exits":[[0.6,0.4],[0.7,0.3]],"id":"a"}', "record-keys"),
            (good_header, '{"exits":[[0.6,0.4],[0.7,0.3]],"id":"a","label":0,"x":1}', "record-keys"),
            (good_header, '{"exits":[[0.6,0.4],[0.7,0.3]],"id":"a","label":9}', "range"),
            ('{"C":2,"L":2,"mode":"classification","version":3}',
             '{"exits":[[0.6,0.4],[0.7,0.3]],"id":"a","label":0}', "version"),
            ('{"C":2,"L":2,"eos_token":0,"mode":"classification","version":1}',
             '{"exits":[[0.6,0.4],[0.7,0.3]],"id":"a","label":0}', "header-keys"),
        ]
        for i, (header, record, invariant) in enumerate(corpus):
            path = tmp_path / f"bad{i}.jsonl"
            lines = [header] + ([record] if record else [])
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            with pytest.raises(ParseError) as err:
                load_traces(path)
            assert err.value.invariant == invariant, f"file {i}: got {err.value.invariant}"
        print("ACCEPTANCE PASS: 100 round trips identical, 10 malformed files rejected by name")
