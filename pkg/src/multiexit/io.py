"""Bit-exact serialization of traces, configs, and reports.

Trace files are line-delimited JSON so large datasets stream without full
materialization: the first line is a header object, every following line one
sample.  Output is canonical (sorted keys, compact separators, probabilities
as fixed 9-decimal floats), so loading a canonical file and saving it again
reproduces the bytes exactly.  Loading never repairs data; anything off is
rejected with the violated invariant named and, for per-line problems, the
1-based line number.

Schema, version 1
-----------------
header          {"C": int, "L": int, "mode": "classification"|"sequence",
                 "version": 1} plus "eos_token": int in sequence mode only
classification  {"exits": [[float x C] x L], "id": str, "label": int|null}
sequence        {"eos": int, "id": str, "ref": [int]|null,
                 "tokens": [ [[float x C] x L] per decoding step ]}

Configs are flat JSON objects with a fixed key vocabulary; reports are plain
JSON documents with a "kind" discriminator.
"""

from __future__ import annotations

import json
import os
from typing import Any, IO

from .calibration import CalibrationReport, ExitCalibration
from .errors import ParseError, ValidationError
from .evaluation import EvalReport
from .policies import ThresholdVector
from .theory import ExitConditionEstimate, TheoremReport
from .traces import Dataset, SampleTrace, SequenceTrace

FORMAT_VERSION = 1

_HEADER_KEYS = {"version", "L", "C", "mode"}
_RECORD_KEYS = {"classification": {"id", "label", "exits"}, "sequence": {"id", "eos", "tokens", "ref"}}

#: Allowed keys of the flat run-configuration document, with expected types.
CONFIG_KEYS: dict[str, Any] = {
    "name": str,
    "policy": str,
    "weights": str,
    "lambda": (int, float),
    "weight_values": list,
    "alpha": (int, float, list),
    "tau": (int, float),
    "patience": int,
    "quorum": int,
    "method": str,
    "grid": list,
    "p": (int, float),
    "seed": int,
    "L": int,
    "C": int,
    "n": int,
    "q": list,
    "rho": (int, float),
    "conf_correct": list,
    "conf_wrong": list,
}


# ---------------------------------------------------------------------------
# canonical formatting


def _fmt_matrix(matrix) -> str:
    return "[" + ",".join("[" + ",".join(format(float(v), ".9f") for v in row) + "]" for row in matrix) + "]"


def _header_line(data: Dataset) -> str:
    if data.mode == "sequence":
        eos = data.traces[0].eos_token
        for t in data.traces:
            if t.eos_token != eos:
                raise ValidationError("eos", "all sequences in one file must share eos_token")
        return (
            f'{{"C":{data.C},"L":{data.L},"eos_token":{eos},'
            f'"mode":"sequence","version":{FORMAT_VERSION}}}'
        )
    return f'{{"C":{data.C},"L":{data.L},"mode":"classification","version":{FORMAT_VERSION}}}'


def _record_line(trace) -> str:
    if isinstance(trace, SequenceTrace):
        tokens = "[" + ",".join(_fmt_matrix(t.probs) for t in trace.token_traces) + "]"
        ref = "null" if trace.reference_tokens is None else json.dumps(list(trace.reference_tokens))
        return f'{{"eos":{trace.eos_token},"id":{json.dumps(trace.id)},"ref":{ref},"tokens":{tokens}}}'
    label = "null" if trace.label is None else str(trace.label)
    return f'{{"exits":{_fmt_matrix(trace.probs)},"id":{json.dumps(trace.id)},"label":{label}}}'


# ---------------------------------------------------------------------------
# traces


def save_traces(data: Dataset, path: str | os.PathLike) -> None:
    """Write a dataset in the canonical line-delimited schema.

    The file appears atomically: content goes to a temporary sibling that
    replaces ``path`` only after a complete, successful write.
    """
    if data.L is None or data.C is None:
        raise ValidationError("shape", "cannot save a dataset with unknown L and C")
    path = os.fspath(path)
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(_header_line(data) + "\n")
            for trace in data.traces:
                fh.write(_record_line(trace) + "\n")
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def load_traces(path: str | os.PathLike, split: str = "unspecified") -> Dataset:
    """Load a trace file, enforcing every data-model invariant.

    Raises :class:`ParseError` with the offending line number for malformed
    JSON, unknown or missing keys, shape mismatches against the header, and
    any probability-vector invariant violation.
    """
    path = os.fspath(path)
    with open(path, "r", encoding="utf-8") as fh:
        header = _parse_header(fh)
        traces = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                raise ParseError("format", "blank line in record stream", line=lineno)
            traces.append(_parse_record(line, header, lineno))
    return Dataset(traces=tuple(traces), split=split, L=header["L"], C=header["C"])


def _parse_header(fh: IO[str]) -> dict:
    line = fh.readline()
    if not line:
        raise ParseError("format", "empty file, expected a header object", line=1)
    try:
        header = json.loads(line)
    except json.JSONDecodeError as e:
        raise ParseError("format", f"header is not valid JSON ({e.msg})", line=1) from e
    if not isinstance(header, dict):
        raise ParseError("format", "header must be a JSON object", line=1)

    mode = header.get("mode")
    if mode not in ("classification", "sequence"):
        raise ParseError("mode", f"mode must be 'classification' or 'sequence', got {mode!r}", line=1)
    expected = _HEADER_KEYS | ({"eos_token"} if mode == "sequence" else set())
    if set(header) != expected:
        unknown = set(header) - expected
        missing = expected - set(header)
        detail = []
        if unknown:
            detail.append(f"unknown keys {sorted(unknown)}")
        if missing:
            detail.append(f"missing keys {sorted(missing)}")
        raise ParseError("header-keys", "; ".join(detail), line=1)
    if header["version"] != FORMAT_VERSION:
        raise ParseError("version", f"unsupported format version {header['version']!r}", line=1)
    if not isinstance(header["L"], int) or header["L"] < 1:
        raise ParseError("shape", f"L must be a positive integer, got {header['L']!r}", line=1)
    if not isinstance(header["C"], int) or header["C"] < 2:
        raise ParseError("shape", f"C must be an integer >= 2, got {header['C']!r}", line=1)
    if mode == "sequence" and not isinstance(header["eos_token"], int):
        raise ParseError("eos", f"eos_token must be an integer, got {header['eos_token']!r}", line=1)
    return header


def _parse_record(line: str, header: dict, lineno: int):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise ParseError("format", f"record is not valid JSON ({e.msg})", line=lineno) from e
    if not isinstance(obj, dict):
        raise ParseError("format", "record must be a JSON object", line=lineno)
    mode = header["mode"]
    expected = _RECORD_KEYS[mode]
    if set(obj) != expected:
        raise ParseError(
            "record-keys",
            f"expected keys {sorted(expected)}, got {sorted(obj)}",
            line=lineno,
        )
    if not isinstance(obj["id"], str):
        raise ParseError("id", f"id must be a string, got {obj['id']!r}", line=lineno)
    try:
        if mode == "classification":
            exits = _check_exits(obj["exits"], header, lineno)
            label = obj["label"]
            if label is not None and not isinstance(label, int):
                raise ParseError("label", f"label must be an integer or null, got {label!r}", line=lineno)
            return SampleTrace(id=obj["id"], label=label, probs=exits)
        eos = obj["eos"]
        if not isinstance(eos, int):
            raise ParseError("eos", f"eos must be an integer, got {eos!r}", line=lineno)
        ref = obj["ref"]
        if ref is not None and (
            not isinstance(ref, list) or any(not isinstance(v, int) for v in ref)
        ):
            raise ParseError("ref", "ref must be a list of integers or null", line=lineno)
        if not isinstance(obj["tokens"], list) or not obj["tokens"]:
            raise ParseError("shape", "tokens must be a nonempty list of per-step exits", line=lineno)
        steps = [
            SampleTrace(id=f"{obj['id']}#t{k}", label=None, probs=_check_exits(step, header, lineno))
            for k, step in enumerate(obj["tokens"])
        ]
        return SequenceTrace(
            id=obj["id"],
            token_traces=tuple(steps),
            eos_token=eos,
            reference_tokens=None if ref is None else tuple(ref),
        )
    except ParseError:
        raise
    except ValidationError as e:
        raise ParseError(e.invariant, f"{e}", line=lineno) from e


def _check_exits(exits, header: dict, lineno: int) -> list:
    if not isinstance(exits, list) or len(exits) != header["L"]:
        raise ParseError(
            "shape",
            f"expected {header['L']} exit rows, got {len(exits) if isinstance(exits, list) else type(exits).__name__}",
            line=lineno,
        )
    for row in exits:
        if not isinstance(row, list) or len(row) != header["C"]:
            raise ParseError(
                "shape",
                f"expected rows of {header['C']} probabilities, got {len(row) if isinstance(row, list) else type(row).__name__}",
                line=lineno,
            )
        for v in row:
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ParseError("range", f"probabilities must be numbers, got {v!r}", line=lineno)
    return exits


# ---------------------------------------------------------------------------
# configs


def load_config(path: str | os.PathLike) -> dict:
    """Load and validate a flat run-configuration document.

    Unknown keys are rejected by name; values must match the declared type.
    Omitted keys fall back to documented defaults at the point of use.
    """
    with open(os.fspath(path), "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError("format", f"config is not valid JSON ({e.msg})", line=e.lineno) from e
    return validate_config(obj)


def validate_config(obj: Any) -> dict:
    if not isinstance(obj, dict):
        raise ValidationError("format", "config must be a flat JSON object")
    for key, value in obj.items():
        if key not in CONFIG_KEYS:
            raise ValidationError("unknown-key", f"unknown config key {key!r}")
        expected = CONFIG_KEYS[key]
        if isinstance(value, bool) or not isinstance(value, expected):
            raise ValidationError("type", f"config key {key!r} has invalid value {value!r}")
    return dict(obj)


# ---------------------------------------------------------------------------
# reports


def save_report(report, path: str | os.PathLike) -> None:
    """Serialize a calibration, evaluation, or condition report to JSON."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(report_to_json(report) + "\n")
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def report_to_json(report) -> str:
    return json.dumps(_report_payload(report), sort_keys=True, indent=2)


def _report_payload(report) -> dict:
    if isinstance(report, CalibrationReport):
        return {
            "kind": "calibration",
            "method": report.method,
            "thresholds": list(report.thresholds.alphas),
            "p": report.p,
            "grid": list(report.grid),
            "per_exit": [
                {
                    "exit": e.exit_index,
                    "c_stop": e.c_stop,
                    "error_rate": e.error_rate,
                    "alpha": e.alpha,
                    "feasible": e.feasible,
                }
                for e in report.per_exit
            ],
        }
    if isinstance(report, EvalReport):
        return {
            "kind": "evaluation",
            "policy": report.policy,
            "sample_count": report.sample_count,
            "exit_counts": list(report.exit_counts),
            "speedup": report.speedup,
            "accuracy": report.accuracy,
            "per_exit_error": list(report.per_exit_error),
        }
    if isinstance(report, TheoremReport):
        return {
            "kind": "theorem",
            "p": report.p,
            "per_exit": [
                {
                    "exit": e.exit_index,
                    "q": e.q,
                    "a": e.a,
                    "b": e.b,
                    "bound": e.bound,
                    "satisfied": e.satisfied,
                    "estimable": e.estimable,
                    "support_no_change": e.support_no_change,
                    "support_one_change": e.support_one_change,
                }
                for e in report.per_exit
            ],
        }
    raise TypeError(f"cannot serialize report {report!r}")


def load_report(path: str | os.PathLike):
    """Inverse of :func:`save_report`."""
    with open(os.fspath(path), "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError("format", f"report is not valid JSON ({e.msg})", line=e.lineno) from e
    kind = obj.get("kind") if isinstance(obj, dict) else None
    if kind == "calibration":
        return CalibrationReport(
            method=obj["method"],
            thresholds=ThresholdVector(tuple(obj["thresholds"])),
            per_exit=tuple(
                ExitCalibration(e["exit"], e["c_stop"], e["error_rate"], e["alpha"], e["feasible"])
                for e in obj["per_exit"]
            ),
            p=obj["p"],
            grid=tuple(obj["grid"]),
        )
    if kind == "evaluation":
        return EvalReport(
            policy=obj["policy"],
            sample_count=obj["sample_count"],
            exit_counts=tuple(obj["exit_counts"]),
            speedup=obj["speedup"],
            accuracy=obj["accuracy"],
            per_exit_error=tuple(obj["per_exit_error"]),
        )
    if kind == "theorem":
        return TheoremReport(
            per_exit=tuple(
                ExitConditionEstimate(
                    exit_index=e["exit"],
                    q=e["q"],
                    a=e["a"],
                    b=e["b"],
                    bound=e["bound"],
                    satisfied=e["satisfied"],
                    estimable=e["estimable"],
                    support_no_change=e["support_no_change"],
                    support_one_change=e["support_one_change"],
                )
                for e in obj["per_exit"]
            ),
            p=obj["p"],
        )
    raise ValidationError("kind", f"unknown report kind {kind!r}")
