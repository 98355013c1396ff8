"""Dataset ingestion, the optimization loop, checkpoints, and ablations."""
from .ablation import (AblationResult, default_grid, evaluate_model_on_sequence,
                       run_ablation)
from .config import LOSS_NAMES, TrainConfig, parse_resolution
from .data import FrameTriplet, build_triplets, resample_sequence
from .loop import (FINAL_CHECKPOINT, LOG_HEADER, LOG_NAME, TrainResult,
                   load_training_checkpoint, run_training,
                   save_training_checkpoint, train_step)
from .optim import Adam, lr_at

__all__ = [
    "AblationResult", "Adam", "FINAL_CHECKPOINT", "FrameTriplet",
    "LOG_HEADER", "LOG_NAME", "LOSS_NAMES", "TrainConfig", "TrainResult",
    "build_triplets", "default_grid", "evaluate_model_on_sequence",
    "load_training_checkpoint", "lr_at", "parse_resolution",
    "resample_sequence", "run_ablation", "run_training",
    "save_training_checkpoint", "train_step",
]
