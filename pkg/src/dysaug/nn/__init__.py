"""Minimal tensor/autodiff engine used by the GAN models."""
from .checkpoint import load_checkpoint, parse_checkpoint, checkpoint_bytes, save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .layers import (
    KINDS,
    Layer,
    LayerSpec,
    Sequential,
    act_spec,
    build_layer,
    conv_spec,
    fc_spec,
    pad_spec,
)
from .optim import Optimizer, TrainSchedule, step
from .tensor import Tensor, bce_with_logits, log_sigmoid

__all__ = [
    "KINDS", "Layer", "LayerSpec", "Sequential", "Tensor", "TrainSchedule", "Optimizer",
    "GradCheckReport", "act_spec", "bce_with_logits", "build_layer", "checkpoint_bytes",
    "conv_spec", "fc_spec", "grad_check", "load_checkpoint", "log_sigmoid", "pad_spec",
    "parse_checkpoint", "save_checkpoint", "step",
]
