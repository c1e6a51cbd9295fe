"""
Modeling Module
Encoder/decoder architectures, parameter storage and checkpoints
"""

from .models import (
    LOG_VARIANCE_BOUNDS,
    LatentKind,
    LatentSpec,
    ModelParams,
    ParamEntry,
    ParamGroup,
    decode_log_likelihood,
    encode,
    init_model,
    model_layout,
)

from .checkpoint import (
    MAGIC,
    load_checkpoint,
    read_checkpoint,
    save_checkpoint,
    write_checkpoint,
)

__all__ = [
    # Models
    "LOG_VARIANCE_BOUNDS",
    "LatentKind",
    "LatentSpec",
    "ModelParams",
    "ParamEntry",
    "ParamGroup",
    "decode_log_likelihood",
    "encode",
    "init_model",
    "model_layout",
    # Checkpoints
    "MAGIC",
    "load_checkpoint",
    "read_checkpoint",
    "save_checkpoint",
    "write_checkpoint",
]
