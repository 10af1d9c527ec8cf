"""Sharpness measures, Monte-Carlo estimators and universality probes."""

from ._sharplab import (
    ConfigError,
    DomainError,
    Loss,
    NumericalError,
    eigh,
    estimate_sharpness,
    measure_exact,
    quadratic_loss,
    reconstruct_eigenvalues,
    reconstruct_hessian,
    rot_inv_toy,
    saddle_toy,
    scale_inv_toy,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "Loss",
    "NumericalError",
    "eigh",
    "estimate_sharpness",
    "measure_exact",
    "quadratic_loss",
    "reconstruct_eigenvalues",
    "reconstruct_hessian",
    "rot_inv_toy",
    "saddle_toy",
    "scale_inv_toy",
]
