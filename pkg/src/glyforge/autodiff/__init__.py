"""Minimal dense tensors with reverse-mode differentiation and Adam."""
from .checkpoint import MAGIC, CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, finite_diff_check
from .ops import (
    IndexOutOfRange,
    add,
    batch_norm,
    concat,
    embedding_gather,
    exp,
    gather,
    gelu,
    index_rows,
    matmul,
    mean,
    mse_loss,
    mul,
    relu,
    reshape,
    segment_max,
    segment_mean,
    slice_rows,
    softmax_cross_entropy,
    spmm,
    sub,
    sum,
    transpose,
    zeros,
)
from .optim import AdamState, adam_step
from .params import Parameters
from .tensor import TRACKER, GraphConsumed, ShapeMismatch, Tensor, backward, default_dtype, precision

__all__ = [
    "AdamState", "CheckpointError", "GradCheckReport", "GraphConsumed", "IndexOutOfRange", "MAGIC",
    "Parameters", "ShapeMismatch", "TRACKER", "Tensor", "adam_step", "add", "backward",
    "batch_norm", "concat", "default_dtype", "embedding_gather", "exp", "finite_diff_check", "gather",
    "gelu", "index_rows", "load_checkpoint", "matmul", "mean", "mse_loss", "mul", "precision", "relu", "reshape",
    "save_checkpoint", "segment_max", "segment_mean", "slice_rows", "softmax_cross_entropy", "spmm", "sub", "sum", "transpose", "zeros",
]
