"""Small dense reverse-mode autodiff engine."""
from . import ops
from .adam import AdamState, StepSchedule, adam_step
from .checkpoint import load_checkpoint, save_checkpoint
from .tensor import NonFiniteError, Tape, Tensor, as_tensor, set_debug

__all__ = ["ops", "AdamState", "StepSchedule", "adam_step", "load_checkpoint",
           "save_checkpoint", "NonFiniteError", "Tape", "Tensor", "as_tensor", "set_debug"]
