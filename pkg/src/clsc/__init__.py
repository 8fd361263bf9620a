"""Compact latent-space clustering for entity typing with noisy candidate labels."""

from .dataio import Dataset, load_checkpoint, load_dataset, save_checkpoint, save_dataset
from .encoder import EncoderParams, encode, init_encoder
from .estimator import CLSCClassifier
from .exceptions import ClscError, DegenerateClampError, NumericalError, ValidationError
from .graph import build_graph, propagate
from .hierarchy import Batch, MentionSample, TypeHierarchy, build_batch, is_clean, pack_samples, terminal_types
from .loss import clsc_backward, clsc_forward, clsc_loss, one_step_loss
from .metrics import EvalResult, evaluate
from .model import ModelParams, init_model, objective
from .synth import SynthConfig, generate
from .train import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "CLSCClassifier",
    "ClscError",
    "Dataset",
    "DegenerateClampError",
    "EncoderParams",
    "EvalResult",
    "MentionSample",
    "ModelParams",
    "NumericalError",
    "SynthConfig",
    "TrainConfig",
    "TypeHierarchy",
    "ValidationError",
    "build_batch",
    "build_graph",
    "clsc_backward",
    "clsc_forward",
    "clsc_loss",
    "encode",
    "evaluate",
    "generate",
    "init_encoder",
    "init_model",
    "is_clean",
    "load_checkpoint",
    "load_dataset",
    "objective",
    "one_step_loss",
    "pack_samples",
    "propagate",
    "save_checkpoint",
    "save_dataset",
    "terminal_types",
    "train",
]
