"""Minimal differentiable-computation toolkit: float64 layers with
hand-derived backward passes, a real FFT with its adjoint, Adam, and a
finite-difference gradient checker."""

from .fourier import naive_dft, rfft, rfft_adjoint, rfft_backward, spectrum_inner
from .gradcheck import gradient_check
from .layers import (
    BatchNorm1d,
    Conv1d,
    Linear,
    Parameter,
    PerChannelLinear,
    atan2_phase,
    atan2_phase_backward,
    elu,
    elu_backward,
    ensure_finite,
    relu,
    relu_backward,
    softplus,
    softplus_backward,
)
from .optim import Adam

__all__ = [
    "Adam",
    "BatchNorm1d",
    "Conv1d",
    "Linear",
    "Parameter",
    "PerChannelLinear",
    "atan2_phase",
    "atan2_phase_backward",
    "elu",
    "elu_backward",
    "ensure_finite",
    "gradient_check",
    "naive_dft",
    "relu",
    "relu_backward",
    "rfft",
    "rfft_adjoint",
    "rfft_backward",
    "softplus",
    "softplus_backward",
    "spectrum_inner",
]
