"""Dense float64 tensors with reverse-mode autodiff, Adam, and checkpoints."""

from .tensor import (
    Tensor,
    backward,
    concat_cols,
    dropout,
    lookup_row,
    lookup_rows,
    matmul,
    max_pool_time,
    maximum,
    scale,
    shift_rows,
    sigmoid,
    stack_rows,
    sum_all,
    tanh,
)
from .optim import AdamState, ParamStore
from .gradcheck import GradCheckReport, grad_check
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "AdamState",
    "GradCheckReport",
    "ParamStore",
    "Tensor",
    "backward",
    "concat_cols",
    "dropout",
    "grad_check",
    "load_checkpoint",
    "lookup_row",
    "lookup_rows",
    "matmul",
    "max_pool_time",
    "maximum",
    "save_checkpoint",
    "scale",
    "shift_rows",
    "sigmoid",
    "stack_rows",
    "sum_all",
    "tanh",
]
