"""
fastskip - Transducer training with fast-skip regularization and CTC-guided frame skipping.

A tiny numpy transducer learns, alongside a CTC head, to place its blanks where
the CTC head places them; at inference the CTC blank posterior then decides
which frames the joint network may skip.
"""

__version__ = "0.1.0"

# Lattice and losses
from fastskip.core.lattice import (
    Lattice,
    NodeProbs,
    backward_vars,
    diagonal_logprob,
    enumerate_paths,
    forward_vars,
    node_posterior_split,
    sequence_logprob,
)
from fastskip.core.losses import (
    BLANK_ID,
    BlankPosterior,
    LatticeGrad,
    chain_to_logits,
    ctc_forward,
    ctc_grad,
    ctc_loss_and_grad,
    fsr_lattice_grads,
    fsr_surrogate,
    joint_loss,
    transducer_lattice_grads,
    transducer_loss,
)

# Configuration
from fastskip.core.config import (
    ExperimentConfig,
    FsrConfig,
    ModelConfig,
    SkipConfig,
    TaskConfig,
    TrainConfig,
)

# Model, training and checkpoints
from fastskip.core.model import (
    PARAM_NAMES,
    EncodedUtterance,
    TinyTransducer,
    backward,
    build_lattice,
    encode,
    joint_step,
    predict_step,
)
from fastskip.core.training import StepRecord, loss_and_grads, train
from fastskip.core.checkpoint import load_checkpoint, save_checkpoint

# Data, decoding and metrics
from fastskip.core.data import Dataset, Utterance, generate, load_dataset, save_dataset
from fastskip.core.decoder import (
    DecodeTrace,
    extract_alignment,
    fast_skip_decode,
    greedy_decode,
    trigger_mask,
)
from fastskip.core.metrics import EvalReport, aggregate, edit_distance
from fastskip.core.evaluation import evaluate

# Exceptions
from fastskip.utils.exceptions import (
    CheckpointMismatchError,
    ConfigurationError,
    CorruptFileError,
    CtcInfeasibleError,
    EmptyUtteranceError,
    FastSkipError,
    FileFormatError,
    LatticeIndexError,
    LatticeShapeError,
    NonFiniteLossError,
    PathEnumerationError,
    TrainingDivergedError,
    UndefinedCerError,
    UnknownTokenError,
)

__all__ = [
    "__version__",
    # Lattice and losses
    "Lattice",
    "NodeProbs",
    "forward_vars",
    "backward_vars",
    "sequence_logprob",
    "diagonal_logprob",
    "node_posterior_split",
    "enumerate_paths",
    "BLANK_ID",
    "BlankPosterior",
    "LatticeGrad",
    "transducer_loss",
    "transducer_lattice_grads",
    "fsr_lattice_grads",
    "fsr_surrogate",
    "chain_to_logits",
    "ctc_forward",
    "ctc_grad",
    "ctc_loss_and_grad",
    "joint_loss",
    # Configuration
    "ExperimentConfig",
    "TaskConfig",
    "ModelConfig",
    "FsrConfig",
    "SkipConfig",
    "TrainConfig",
    # Model
    "PARAM_NAMES",
    "TinyTransducer",
    "EncodedUtterance",
    "encode",
    "predict_step",
    "joint_step",
    "build_lattice",
    "backward",
    "StepRecord",
    "loss_and_grads",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    # Data, decoding, metrics
    "Dataset",
    "Utterance",
    "generate",
    "save_dataset",
    "load_dataset",
    "DecodeTrace",
    "greedy_decode",
    "fast_skip_decode",
    "trigger_mask",
    "extract_alignment",
    "EvalReport",
    "edit_distance",
    "aggregate",
    "evaluate",
    # Exceptions
    "FastSkipError",
    "ConfigurationError",
    "LatticeShapeError",
    "LatticeIndexError",
    "PathEnumerationError",
    "CtcInfeasibleError",
    "EmptyUtteranceError",
    "UnknownTokenError",
    "NonFiniteLossError",
    "TrainingDivergedError",
    "FileFormatError",
    "CorruptFileError",
    "CheckpointMismatchError",
    "UndefinedCerError",
]
