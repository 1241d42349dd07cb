"""Toy multi-exit trainer exporting per-exit probability traces.

Trains a small text classifier with a linear exit head after every layer
(joint training, cross-entropy plus final-layer distillation per exit) and
writes each split's per-exit softmax outputs as versioned line-delimited
trace files for the replay tooling to consume.
"""

from .corpus import load_corpus, toy_sentiment
from .export import ExportConfig, ExportSummary, export_traces, run_export
from .features import featurize
from .model import (
    MultiExitMLP,
    TrainingDiverged,
    distillation_kl,
    exit_loss_weights,
    exit_probabilities,
    joint_loss,
    per_exit_accuracy,
    train_multi_exit,
)

__version__ = "0.1.0"

__all__ = [
    "ExportConfig",
    "ExportSummary",
    "MultiExitMLP",
    "TrainingDiverged",
    "distillation_kl",
    "exit_loss_weights",
    "exit_probabilities",
    "export_traces",
    "featurize",
    "joint_loss",
    "load_corpus",
    "per_exit_accuracy",
    "run_export",
    "toy_sentiment",
    "train_multi_exit",
]
