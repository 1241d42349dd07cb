import itertools

import numpy as np
import pytest

from multiexit import (
    Beem,
    CostWeights,
    Dataset,
    EmptyDatasetError,
    ExplicitWeights,
    LabelRequiredError,
    SynthConfig,
    ThresholdVector,
    beem_step,
    calibrate_classical,
    calibrate_error_rate,
    error_rate_grid,
    evaluate,
    exit_stats,
    final_error_rate,
    generate,
    materialize_weights,
)

from conftest import make_trace


# ---------------------------------------------------------------------------
# independent replay used by the brute-force oracles below


def full_scores(trace, w):
    scores = []
    prev_s, prev_y = 0.0, None
    for i, rec in enumerate(trace.records):
        s, y = beem_step(prev_s, prev_y, rec, float(w[i]))
        scores.append(s)
        prev_s, prev_y = s, y
    return scores


def brute_exit_stats(val, w, prefix, alpha, t):
    """Count coverage and error at exit t by per-trace enumeration."""
    c_stop, wrong = 0, 0
    for trace in val:
        scores = full_scores(trace, w)
        if any(scores[j] >= prefix[j] for j in range(t - 1)):
            continue  # exited earlier
        if scores[t - 1] >= alpha:
            c_stop += 1
            wrong += int(trace.predictions[t - 1]) != trace.label
    return c_stop, (wrong / c_stop if c_stop else 0.0)


def brute_force_lexmin(val, w, candidates, p, L):
    """Smallest feasible assignment by exhaustive enumeration of the grid."""
    feasible = []
    for assignment in itertools.product(candidates, repeat=L - 1):
        ok = True
        for t in range(1, L):
            _, q = brute_exit_stats(val, w, assignment[: t - 1], assignment[t - 1], t)
            if q > p:
                ok = False
                break
        if ok:
            feasible.append(assignment)
    return min(feasible)


def small_synth(seed, n=300, L=4):
    cfg = SynthConfig(
        L=L,
        C=3,
        n=n,
        q=tuple(np.linspace(0.35, 0.1, L)),
        rho=0.5,
        conf_correct=(5.0, 2.0),
        conf_wrong=(2.0, 3.0),
        seed=seed,
    )
    return generate(cfg)


class TestFinalErrorRate:
    def test_counts_final_layer_mistakes(self):
        traces = [make_trace([(0, 0.9)], C=2, label=0, id=f"t{i}") for i in range(9)]
        traces.append(make_trace([(1, 0.9)], C=2, label=0, id="t9"))
        assert final_error_rate(Dataset(traces=tuple(traces))) == pytest.approx(0.1)

    def test_all_correct(self):
        traces = [make_trace([(1, 0.8)], C=2, label=1, id=f"t{i}") for i in range(5)]
        assert final_error_rate(Dataset(traces=tuple(traces))) == 0.0

    def test_all_wrong(self):
        traces = [make_trace([(1, 0.8)], C=2, label=0, id=f"t{i}") for i in range(5)]
        assert final_error_rate(Dataset(traces=tuple(traces))) == 1.0

    def test_rejects_unlabeled(self):
        data = Dataset(traces=(make_trace([(0, 0.9)], C=2),))
        with pytest.raises(LabelRequiredError):
            final_error_rate(data)

    def test_rejects_empty(self):
        with pytest.raises(EmptyDatasetError):
            final_error_rate(Dataset(traces=()))


class TestExitStats:
    W = ExplicitWeights((0.1, 0.2, 0.3))

    def test_unreachable_candidate_has_zero_coverage(self, rng):
        data = small_synth(1, n=100, L=4)
        c_stop, q = exit_stats(data, CostWeights(0.2), [], data.L + 1.0, 1)
        assert (c_stop, q) == (0, 0.0)

    def test_single_crossing_correct_sample(self):
        trace = make_trace([(0, 0.6), (0, 0.9), (0, 0.9)], label=0)
        data = Dataset(traces=(trace,))
        # S_2 = 0.06 + 0.18 = 0.24 >= 0.2, prediction correct
        c_stop, q = exit_stats(data, self.W, [10.0], 0.2, 2)
        assert (c_stop, q) == (1, 0.0)

    def test_two_survivors_one_wrong(self):
        good = make_trace([(0, 0.6), (0, 0.9), (0, 0.9)], label=0, id="good")
        bad = make_trace([(1, 0.6), (1, 0.9), (1, 0.9)], label=0, id="bad")
        data = Dataset(traces=(good, bad))
        c_stop, q = exit_stats(data, self.W, [10.0], 0.2, 2)
        assert (c_stop, q) == (2, 0.5)

    def test_matches_brute_force_replay(self, rng):
        data = small_synth(2, n=200, L=4)
        w = materialize_weights(CostWeights(0.3), 4)
        for t in (1, 2, 3):
            prefix = [0.8, 1.1, 0.9][: t - 1]
            for alpha in (0.3, 0.7, 1.2):
                assert exit_stats(data, CostWeights(0.3), prefix, alpha, t) == pytest.approx(
                    brute_exit_stats(data, w, prefix, alpha, t)
                )

    def test_coverage_nonincreasing_in_alpha(self, rng):
        data = small_synth(3, n=200, L=4)
        prev = None
        for alpha in np.linspace(0.1, 3.0, 15):
            c_stop, _ = exit_stats(data, CostWeights(0.3), [1.0], float(alpha), 2)
            if prev is not None:
                assert c_stop <= prev
            prev = c_stop


class TestCalibrateErrorRate:
    def test_default_grid(self):
        assert error_rate_grid(12) == (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 12.0)
        # the sentinel is not duplicated when L already sits on the grid
        assert error_rate_grid(3) == (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0)
        data = small_synth(4, n=50, L=3)
        report = calibrate_error_rate(data, CostWeights(0.1))
        assert report.grid == error_rate_grid(3)
        assert float(data.L) in report.grid
        # a user grid always gets the sentinel appended
        report = calibrate_error_rate(data, CostWeights(0.1), grid=(0.4, 0.9))
        assert report.grid == (0.4, 0.9, 3.0)

    def test_vacuous_constraint_picks_grid_minimum(self):
        data = small_synth(5, n=100, L=4)
        report = calibrate_error_rate(data, CostWeights(0.3), p_override=1.0)
        assert all(e.alpha == min(report.grid) for e in report.per_exit)
        assert all(e.feasible for e in report.per_exit)

    def test_low_score_mistakes_push_threshold_up(self):
        # exit 1 misclassifies exactly the samples whose score is small, so
        # the smallest grid value is infeasible and the next one is chosen
        w = ExplicitWeights((1.0, 1.0, 1.0))
        grid = (0.25, 0.5, 0.75)
        traces = []
        for i in range(4):  # low score, wrong at exit 1, corrected later
            traces.append(make_trace([(1, 0.4), (0, 0.9), (0, 0.9)], label=0, id=f"a{i}"))
        for i in range(8):  # high score, right everywhere
            traces.append(make_trace([(0, 0.9), (0, 0.9), (0, 0.9)], label=0, id=f"b{i}"))
        data = Dataset(traces=tuple(traces))
        report = calibrate_error_rate(data, w, grid=grid, p_override=0.05)

        candidates = sorted(set(grid) | {3.0})
        expected = brute_force_lexmin(data, materialize_weights(w, 3), candidates, 0.05, 3)
        assert report.thresholds.alphas[:-1] == expected
        assert report.per_exit[0].alpha == 0.5 > min(grid)

    def test_matches_brute_force_on_synthetic_data(self):
        for seed in range(3):
            data = small_synth(10 + seed, n=250, L=4)
            grid = (0.3, 0.8, 1.3)
            report = calibrate_error_rate(data, CostWeights(0.3), grid=grid)
            candidates = sorted(set(grid) | {4.0})
            expected = brute_force_lexmin(
                data, materialize_weights(CostWeights(0.3), 4), candidates, report.p, 4
            )
            assert report.thresholds.alphas[:-1] == expected

    def test_sequential_consistency(self):
        data = small_synth(20, n=400, L=5)
        report = calibrate_error_rate(data, CostWeights(0.25))
        for e in report.per_exit:
            prefix = report.thresholds.alphas[: e.exit_index - 1]
            c_stop, q = exit_stats(data, CostWeights(0.25), prefix, e.alpha, e.exit_index)
            assert (c_stop, q) == (e.c_stop, e.error_rate)

    def test_postcondition_audit_exact(self):
        data = small_synth(21, n=500, L=5)
        weights = CostWeights(0.25)
        report = calibrate_error_rate(data, weights)
        assert all(e.feasible for e in report.per_exit)
        # replaying the calibration set under the chosen thresholds shows
        # every covered exit at error <= p, with no tolerance
        ev = evaluate(data, Beem(weights, report.thresholds))
        for t in range(1, data.L):
            err = ev.per_exit_error[t - 1]
            if ev.exit_counts[t - 1] > 0:
                assert err <= report.p
        # and the report records a constraint-satisfying fraction per exit
        for e in report.per_exit:
            if e.c_stop > 0:
                assert e.error_rate <= report.p

    def test_grid_monotone_per_exit(self):
        # a larger grid can only lower the chosen threshold of an exit when
        # the population reaching it is held fixed
        data = small_synth(22, n=300, L=4)
        weights = CostWeights(0.3)
        base = calibrate_error_rate(data, weights, grid=(0.4, 1.0, 1.6))
        for e in base.per_exit:
            prefix = base.thresholds.alphas[: e.exit_index - 1]
            enriched = sorted({0.2, 0.4, 0.7, 1.0, 1.3, 1.6, float(data.L)})
            chosen = None
            for a in enriched:
                _, q = exit_stats(data, weights, prefix, a, e.exit_index)
                if q <= base.p:
                    chosen = a
                    break
            assert chosen is not None and chosen <= e.alpha

    def test_rejects_unlabeled_and_empty(self):
        with pytest.raises(EmptyDatasetError):
            calibrate_error_rate(Dataset(traces=()), CostWeights(0.1))
        data = Dataset(traces=(make_trace([(0, 0.9), (0, 0.9)], C=2),))
        with pytest.raises(LabelRequiredError):
            calibrate_error_rate(data, CostWeights(0.1))


class TestCalibrateClassical:
    def test_default_grid(self):
        data = small_synth(30, n=120, L=4)
        report = calibrate_classical(data, CostWeights(0.3))
        assert report.grid == (0.3, 0.6, 0.9, 1.2, 1.5)
        assert report.thresholds.alphas == (report.thresholds.alphas[0],) * 4

    def test_constant_accuracy_breaks_tie_by_speedup(self):
        # every exit agrees and is right: accuracy is flat across the grid,
        # so the smallest threshold (earliest exits) wins
        traces = [
            make_trace([(1, 0.95), (1, 0.95), (1, 0.95)], label=1, id=f"t{i}") for i in range(10)
        ]
        data = Dataset(traces=tuple(traces))
        report = calibrate_classical(data, ExplicitWeights((1.0, 1.0, 1.0)), grid=(0.5, 0.7, 0.9))
        assert report.thresholds.alphas == (0.5, 0.5, 0.5)

    def test_matches_exhaustive_oracle(self):
        for seed in range(3):
            data = small_synth(40 + seed, n=250, L=4)
            weights = CostWeights(0.35)
            w = materialize_weights(weights, 4)
            report = calibrate_classical(data, weights)

            best = None
            for a in sorted(set(report.grid)):
                n_right, layer_sum = 0, 0
                for trace in data:
                    scores = full_scores(trace, w)
                    exit_layer = 4
                    for i in range(3):
                        if scores[i] >= a:
                            exit_layer = i + 1
                            break
                    layer_sum += exit_layer
                    n_right += int(trace.predictions[exit_layer - 1]) == trace.label
                key = (-n_right, layer_sum, a)
                if best is None or key < best:
                    best = key
            assert report.thresholds.alphas[0] == best[2]
