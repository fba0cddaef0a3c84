"""Minimal float64 autodiff, layers, and AdamW used by the control policies."""

from .tensor import (
    Tensor,
    ShapeError,
    no_grad,
    tensor,
    concat,
    matmul,
    take,
    logsumexp,
    softmax,
    log_softmax,
    categorical_sample,
    categorical_logprob,
)
from .optim import (
    ParamStore,
    adamw_step,
    CheckpointError,
    save_checkpoint,
    load_checkpoint,
    config_hash,
)
from .layers import (
    Dense,
    Conv1x1,
    LayerNorm,
    MultiHeadAttention,
    TransformerEncoderLayer,
    PositionalEmbedding,
    GRUCell,
    glorot_uniform,
    mlp_stack,
)

__all__ = [
    "Tensor",
    "ShapeError",
    "no_grad",
    "tensor",
    "concat",
    "matmul",
    "take",
    "logsumexp",
    "softmax",
    "log_softmax",
    "categorical_sample",
    "categorical_logprob",
    "ParamStore",
    "adamw_step",
    "CheckpointError",
    "save_checkpoint",
    "load_checkpoint",
    "config_hash",
    "Dense",
    "Conv1x1",
    "LayerNorm",
    "MultiHeadAttention",
    "TransformerEncoderLayer",
    "PositionalEmbedding",
    "GRUCell",
    "glorot_uniform",
    "mlp_stack",
]
