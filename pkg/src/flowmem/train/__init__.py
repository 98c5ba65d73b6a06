from .config import EVAL_MODES, EvalConfig, ModelConfig, RunConfig, StageConfig, load_config
from .stages import (
    TrainingDivergenceError,
    TrainLog,
    action_normalization,
    build_memory_bank,
    contrastive_margin,
    infonce_loss,
    replay_targets,
    stage1_train,
    stage2_train,
    stage3_train,
    task_pair_batches,
)

__all__ = [
    "EVAL_MODES", "EvalConfig", "ModelConfig", "RunConfig", "StageConfig", "load_config",
    "TrainingDivergenceError", "TrainLog", "action_normalization", "build_memory_bank",
    "contrastive_margin", "infonce_loss", "replay_targets", "stage1_train",
    "stage2_train", "stage3_train", "task_pair_batches",
]
