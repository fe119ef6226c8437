"""Training loop, evaluation suite, ablation harness, and visualization."""

from glyphgen.train_eval.ablation import VARIANTS, ablate, apply_variant, bpe_split_study
from glyphgen.train_eval.config import (
    LossConfig,
    ModelConfig,
    ScheduleConfig,
    TrainConfig,
    config_to_dict,
    dataclass_from_dict,
    load_train_config,
    save_config,
)
from glyphgen.train_eval.evaluation import (
    EvalReport,
    detect_words,
    encode_prompt,
    evaluate,
    localization_score,
    save_grid,
)
from glyphgen.train_eval.training import (
    CKPT_VERSION,
    TrainedBundle,
    TrainingData,
    build_models,
    build_vocab,
    load_checkpoint,
    load_training_data,
    save_checkpoint,
    train,
)
from glyphgen.train_eval.viz import viz_attention

__all__ = [
    "CKPT_VERSION",
    "VARIANTS",
    "EvalReport",
    "LossConfig",
    "ModelConfig",
    "ScheduleConfig",
    "TrainConfig",
    "TrainedBundle",
    "TrainingData",
    "ablate",
    "apply_variant",
    "bpe_split_study",
    "build_models",
    "build_vocab",
    "config_to_dict",
    "dataclass_from_dict",
    "detect_words",
    "encode_prompt",
    "evaluate",
    "load_checkpoint",
    "load_train_config",
    "load_training_data",
    "localization_score",
    "save_checkpoint",
    "save_config",
    "save_grid",
    "train",
    "viz_attention",
]
