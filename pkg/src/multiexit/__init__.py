"""Exit policies for multi-exit classifiers on replayable probability traces.

The package replays recorded per-exit class-probability vectors through exit
policies (a weighted-confidence aggregation rule plus confidence, patience,
majority-vote, and final-only baselines), calibrates exit thresholds on a
validation split, evaluates accuracy and layer-count speedup, and checks an
empirical per-exit condition under which early exiting beats running the
full backbone.  A seedable synthetic generator and a strict line-delimited
trace format make everything testable without any trained model.
"""

from .calibration import (
    CLASSICAL_GRID,
    CalibrationReport,
    ExitCalibration,
    calibrate_classical,
    calibrate_error_rate,
    error_rate_grid,
    exit_stats,
    final_error_rate,
)
from .errors import (
    DataError,
    EmptyDatasetError,
    LabelRequiredError,
    ParseError,
    ValidationError,
)
from .evaluation import EvalReport, compare, evaluate, speedup_from_counts
from .io import load_config, load_report, load_traces, save_report, save_traces
from .policies import (
    AccuracyWeights,
    Beem,
    ConfidenceThreshold,
    CostWeights,
    ExitDecision,
    ExplicitWeights,
    FinalOnly,
    MajorityVote,
    Patience,
    Policy,
    SequenceDecision,
    ThresholdVector,
    WeightScheme,
    beem_score_matrix,
    beem_step,
    materialize_weights,
    run_beem,
    run_confidence,
    run_final_only,
    run_majority,
    run_patience,
    run_policy,
    run_sequence,
)
from .synth import SynthConfig, generate
from .theory import (
    AEstimate,
    ExitConditionEstimate,
    TheoremReport,
    check_condition,
    estimate_a,
    standalone_error_rates,
    theorem_bound,
)
from .traces import (
    Dataset,
    ExitRecord,
    SampleTrace,
    SequenceTrace,
    as_prob_vector,
    predict,
    prediction_change_count,
)

__version__ = "0.1.0"

__all__ = [
    "AEstimate",
    "AccuracyWeights",
    "Beem",
    "CLASSICAL_GRID",
    "CalibrationReport",
    "ConfidenceThreshold",
    "CostWeights",
    "DataError",
    "Dataset",
    "EmptyDatasetError",
    "EvalReport",
    "ExitCalibration",
    "ExitConditionEstimate",
    "ExitDecision",
    "ExitRecord",
    "ExplicitWeights",
    "FinalOnly",
    "LabelRequiredError",
    "MajorityVote",
    "ParseError",
    "Patience",
    "Policy",
    "SampleTrace",
    "SequenceDecision",
    "SequenceTrace",
    "SynthConfig",
    "TheoremReport",
    "ThresholdVector",
    "ValidationError",
    "WeightScheme",
    "as_prob_vector",
    "beem_score_matrix",
    "beem_step",
    "calibrate_classical",
    "calibrate_error_rate",
    "check_condition",
    "compare",
    "error_rate_grid",
    "estimate_a",
    "evaluate",
    "exit_stats",
    "final_error_rate",
    "generate",
    "load_config",
    "load_report",
    "load_traces",
    "materialize_weights",
    "predict",
    "prediction_change_count",
    "run_beem",
    "run_confidence",
    "run_final_only",
    "run_majority",
    "run_patience",
    "run_policy",
    "run_sequence",
    "save_report",
    "save_traces",
    "speedup_from_counts",
    "standalone_error_rates",
    "theorem_bound",
]
