"""
Training Module
Run configuration, Adam, datasets and the training loop
"""

from .run_config import (
    CONFIG_KEYS,
    RunConfig,
)

from .adam import (
    AdamState,
    adam_step,
    adam_update,
    l2_penalty,
)

from .dataset import (
    Dataset,
    DatasetKind,
    make_synthetic_batch,
)

from .trainer import (
    MetricsRow,
    TrainRun,
    evaluation_set,
    initial_params,
    train,
    training_step,
)

__all__ = [
    # Configuration
    "CONFIG_KEYS",
    "RunConfig",
    # Optimizer
    "AdamState",
    "adam_step",
    "adam_update",
    "l2_penalty",
    # Data
    "Dataset",
    "DatasetKind",
    "make_synthetic_batch",
    # Training loop
    "MetricsRow",
    "TrainRun",
    "evaluation_set",
    "initial_params",
    "train",
    "training_step",
]
