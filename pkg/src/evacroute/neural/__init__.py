from .model import (
    AttentionPolicy,
    DecoderState,
    NeuralSolverError,
    PolicyParams,
    ShapeMismatch,
    decode_greedy,
    decode_sample,
    encode,
    sequence_log_prob,
    solve_greedy,
)
from .checkpoint import CorruptCheckpoint, VersionMismatch, load_checkpoint, save_checkpoint
from .training import (
    EpochStats,
    NonFiniteLoss,
    TrainConfig,
    TrainResult,
    greedy_costs,
    history_csv,
    sample_instances,
    train_reinforce,
)

__all__ = [
    "AttentionPolicy",
    "CorruptCheckpoint",
    "DecoderState",
    "EpochStats",
    "NeuralSolverError",
    "NonFiniteLoss",
    "PolicyParams",
    "ShapeMismatch",
    "TrainConfig",
    "TrainResult",
    "VersionMismatch",
    "decode_greedy",
    "decode_sample",
    "encode",
    "greedy_costs",
    "history_csv",
    "load_checkpoint",
    "sample_instances",
    "save_checkpoint",
    "sequence_log_prob",
    "solve_greedy",
    "train_reinforce",
]
