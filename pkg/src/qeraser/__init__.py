"""Gaussian simulation of quantum non-demolition measurement and its
reversal by measurement and feedforward ("quantum erasing")."""

__version__ = "0.1.0"

from .gaussian import (  # noqa: E402
    GaussianState,
    QuadratureSelector,
    SymplecticTransform,
    UnphysicalStateError,
    apply,
    coherent,
    squeezed_thermal,
    squeezed_vacuum,
    tensor,
    vacuum,
)
from .qnd import QndGate, apply_qnd, erase, erase_channel, exchange_roles, ideal_qnd  # noqa: E402

__all__ = [
    "GaussianState",
    "QuadratureSelector",
    "SymplecticTransform",
    "UnphysicalStateError",
    "QndGate",
    "apply",
    "apply_qnd",
    "coherent",
    "erase",
    "erase_channel",
    "exchange_roles",
    "ideal_qnd",
    "squeezed_thermal",
    "squeezed_vacuum",
    "tensor",
    "vacuum",
]
