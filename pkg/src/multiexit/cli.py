"""Command-line surface: generate, calibrate, evaluate, compare, inspect.

Every command is deterministic given its flags, input files, and seed.
Exit status is 0 on success, 1 on a usage error, and 2 on a data error
(missing or malformed files, invariant violations).  Output files are
written atomically, so a failing command leaves no partial outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

from . import io as trace_io
from .calibration import calibrate_classical, calibrate_error_rate
from .errors import DataError, ValidationError
from .evaluation import compare as compare_policies
from .evaluation import evaluate
from .policies import (
    AccuracyWeights,
    Beem,
    ConfidenceThreshold,
    CostWeights,
    ExplicitWeights,
    FinalOnly,
    MajorityVote,
    Patience,
    Policy,
    ThresholdVector,
    WeightScheme,
    materialize_weights,
    run_beem,
)
from .synth import SynthConfig, generate
from .theory import check_condition, standalone_error_rates
from .traces import Dataset

DEFAULT_LAMBDA = 0.1


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="multiexit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic traces from a config")
    p.add_argument("--config", required=True, help="synthesis config (JSON)")
    p.add_argument("--out", required=True, help="output trace file")
    p.add_argument("--split", default="synthetic", help="split tag for the dataset")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("calibrate", help="select thresholds on a validation file")
    p.add_argument("--val", required=True, help="validation trace file (labeled)")
    p.add_argument(
        "--weights",
        default=f"cost:{DEFAULT_LAMBDA}",
        help="cost[:lambda] | accuracy | explicit:FILE (JSON array)",
    )
    p.add_argument("--method", choices=["error-rate", "classical"], default="error-rate")
    p.add_argument("--grid", default=None, help="comma-separated threshold candidates")
    p.add_argument("--p", type=float, default=None, help="override the final-layer error rate target")
    p.add_argument("--out", default=None, help="write the calibration report here")

    p = sub.add_parser("evaluate", help="replay one policy over a trace file")
    p.add_argument("--test", required=True, help="trace file")
    p.add_argument("--policy-config", required=True, help="policy config (JSON)")
    p.add_argument("--out", default=None, help="write the evaluation report here")

    p = sub.add_parser("compare", help="tabulate several policies on one trace file")
    p.add_argument("--test", required=True, help="trace file")
    p.add_argument("--policies-config", required=True, help="JSON array of policy configs")
    p.add_argument("--out", default=None, help="write the reports (JSON array) here")

    p = sub.add_parser("check-theorem", help="check the per-exit performance condition")
    p.add_argument("--test", required=True, help="labeled trace file")
    p.add_argument("--policy-config", required=True, help="weighted-policy config (JSON)")
    p.add_argument("--out", default=None, help="write the condition report here")

    p = sub.add_parser("inspect", help="per-layer walkthrough of one trace")
    p.add_argument("--traces", required=True, help="trace file")
    p.add_argument("--trace-id", required=True, help="id of the trace to inspect")
    p.add_argument("--policy-config", required=True, help="weighted-policy config (JSON)")

    return parser


# ---------------------------------------------------------------------------
# config interpretation


def _as_floats(values, what: str) -> tuple[float, ...]:
    if not isinstance(values, list) or any(
        isinstance(v, bool) or not isinstance(v, (int, float)) for v in values
    ):
        raise ValidationError("type", f"{what} must be a list of numbers, got {values!r}")
    return tuple(float(v) for v in values)


def _weights_from_config(cfg: dict) -> WeightScheme:
    kind = cfg.get("weights", "cost")
    if kind == "cost":
        return CostWeights(float(cfg.get("lambda", DEFAULT_LAMBDA)))
    values = cfg.get("weight_values")
    if values is None:
        raise ValidationError("missing-key", f"weights {kind!r} needs 'weight_values'")
    if kind == "accuracy":
        return AccuracyWeights(_as_floats(values, "weight_values"))
    if kind == "explicit":
        return ExplicitWeights(_as_floats(values, "weight_values"))
    raise ValidationError("range", f"unknown weights kind {kind!r}")


def _thresholds_from_config(cfg: dict, L: int) -> ThresholdVector:
    alpha = cfg.get("alpha")
    if alpha is None:
        raise ValidationError("missing-key", "weighted policy needs 'alpha' (scalar or list)")
    if isinstance(alpha, list):
        values = _as_floats(alpha, "alpha")
        if len(values) != L:
            raise ValidationError("shape", f"got {len(values)} thresholds for L={L} exits")
        return ThresholdVector(values)
    return ThresholdVector.uniform(float(alpha), L)


def policy_from_config(cfg: dict, L: int) -> Policy:
    """Build a policy from a validated flat config for a file with L exits."""
    kind = cfg.get("policy", "beem")
    if kind == "beem":
        return Beem(_weights_from_config(cfg), _thresholds_from_config(cfg, L))
    if kind == "confidence":
        if "tau" not in cfg:
            raise ValidationError("missing-key", "confidence policy needs 'tau'")
        return ConfidenceThreshold(float(cfg["tau"]))
    if kind == "patience":
        if "patience" not in cfg:
            raise ValidationError("missing-key", "patience policy needs 'patience'")
        return Patience(int(cfg["patience"]))
    if kind == "majority":
        if "quorum" not in cfg:
            raise ValidationError("missing-key", "majority policy needs 'quorum'")
        return MajorityVote(int(cfg["quorum"]))
    if kind == "final":
        return FinalOnly()
    raise ValidationError("range", f"unknown policy kind {kind!r}")


def _synth_config(cfg: dict, seed_override: int | None) -> SynthConfig:
    for key in ("L", "C", "n", "q"):
        if key not in cfg:
            raise ValidationError("missing-key", f"synthesis config needs {key!r}")
    kwargs = dict(L=cfg["L"], C=cfg["C"], n=cfg["n"], q=tuple(cfg["q"]))
    if "rho" in cfg:
        kwargs["rho"] = cfg["rho"]
    if "conf_correct" in cfg:
        kwargs["conf_correct"] = tuple(cfg["conf_correct"])
    if "conf_wrong" in cfg:
        kwargs["conf_wrong"] = tuple(cfg["conf_wrong"])
    kwargs["seed"] = cfg.get("seed", 0) if seed_override is None else seed_override
    return SynthConfig(**kwargs)


def _parse_weights_flag(value: str, val: Dataset) -> WeightScheme:
    if value == "cost":
        return CostWeights(DEFAULT_LAMBDA)
    if value.startswith("cost:"):
        return CostWeights(float(value.split(":", 1)[1]))
    if value == "accuracy":
        acc = 1.0 - standalone_error_rates(val)
        return AccuracyWeights(tuple(float(a) for a in acc))
    if value.startswith("explicit:"):
        path = value.split(":", 1)[1]
        with open(path, "r", encoding="utf-8") as fh:
            values = json.load(fh)
        return ExplicitWeights(_as_floats(values, "explicit weights file"))
    raise _UsageError(f"cannot parse --weights {value!r}")


def _parse_grid_flag(value: str | None):
    if value is None:
        return None
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise _UsageError(f"cannot parse --grid {value!r}") from e


# ---------------------------------------------------------------------------
# commands


def _cmd_synth(args) -> int:
    cfg = _synth_config(trace_io.load_config(args.config), args.seed)
    data = generate(cfg, split=args.split)
    trace_io.save_traces(data, args.out)
    print(f"wrote {len(data)} traces (L={data.L}, C={data.C}) to {args.out}")
    return 0


def _cmd_calibrate(args) -> int:
    val = trace_io.load_traces(args.val, split="validation")
    weights = _parse_weights_flag(args.weights, val)
    grid = _parse_grid_flag(args.grid)
    if args.method == "classical":
        report = calibrate_classical(val, weights, grid)
    else:
        report = calibrate_error_rate(val, weights, grid, p_override=args.p)
    if isinstance(weights, AccuracyWeights):
        print(f"accuracy weights: {json.dumps(list(weights.acc))}")
    print(trace_io.report_to_json(report))
    if args.out:
        trace_io.save_report(report, args.out)
    return 0


def _cmd_evaluate(args) -> int:
    data = trace_io.load_traces(args.test, split="test")
    policy = policy_from_config(trace_io.load_config(args.policy_config), data.L)
    report = evaluate(data, policy)
    print(trace_io.report_to_json(report))
    if args.out:
        trace_io.save_report(report, args.out)
    return 0


def _cmd_compare(args) -> int:
    data = trace_io.load_traces(args.test, split="test")
    with open(args.policies_config, "r", encoding="utf-8") as fh:
        entries = json.load(fh)
    if not isinstance(entries, list) or not entries:
        raise ValidationError("shape", "policies config must be a nonempty JSON array")
    configs = [trace_io.validate_config(e) for e in entries]
    policies = [policy_from_config(c, data.L) for c in configs]
    names = [c.get("name", type(p).__name__) for c, p in zip(configs, policies)]
    reports = compare_policies(data, policies)

    width = max(len(n) for n in names) + 2
    print(f"{'policy':<{width}}{'accuracy':>10}{'speedup':>10}")
    for name, rep in zip(names, reports):
        acc = "-" if rep.accuracy is None else f"{rep.accuracy:.4f}"
        print(f"{name:<{width}}{acc:>10}{rep.speedup:>9.2f}x")
    if args.out:
        payload = [json.loads(trace_io.report_to_json(r)) for r in reports]
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
        tmp = args.out + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, args.out)
    return 0


def _cmd_check_theorem(args) -> int:
    data = trace_io.load_traces(args.test, split="test")
    policy = policy_from_config(trace_io.load_config(args.policy_config), data.L)
    if not isinstance(policy, Beem):
        raise ValidationError("policy", "condition checking needs a weighted (beem) policy config")
    report = check_condition(data, policy)
    print(trace_io.report_to_json(report))
    if args.out:
        trace_io.save_report(report, args.out)
    return 0


def _cmd_inspect(args) -> int:
    data = trace_io.load_traces(args.traces)
    policy = policy_from_config(trace_io.load_config(args.policy_config), data.L)
    if not isinstance(policy, Beem):
        raise ValidationError("policy", "inspect needs a weighted (beem) policy config")
    trace = next((t for t in data if t.id == args.trace_id), None)
    if trace is None:
        raise DataError(f"no trace with id {args.trace_id!r} in {args.traces}")
    if data.mode != "classification":
        raise ValidationError("mode", "inspect supports classification traces")

    w = materialize_weights(policy.weights, data.L)
    decision = run_beem(trace, policy.weights, policy.thresholds)
    print(f"trace {trace.id} (label: {trace.label})")
    print(f"{'layer':>5} {'yhat':>5} {'conf':>10} {'weight':>8} {'score':>10} {'alpha':>8}")
    for i in range(data.L):
        score = f"{decision.per_layer_scores[i]:.6f}" if i < decision.exit_layer else "-"
        print(
            f"{i + 1:>5} {trace.predictions[i]:>5} {trace.confidences[i]:>10.6f}"
            f" {w[i]:>8.3f} {score:>10} {policy.thresholds.alphas[i]:>8.3f}"
        )
    scores = ", ".join(f"{s:.6g}" for s in decision.per_layer_scores)
    print(f"S = [{scores}]")
    print(f"exit layer {decision.exit_layer}, label {decision.label}, score {decision.score_at_exit:.6g}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "calibrate": _cmd_calibrate,
    "evaluate": _cmd_evaluate,
    "compare": _cmd_compare,
    "check-theorem": _cmd_check_theorem,
    "inspect": _cmd_inspect,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (DataError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
