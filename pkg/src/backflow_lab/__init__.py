"""Quantum backflow of Gaussian cat states and its phase-space (Wigner) picture."""

from .backflow import BackflowResult, compute_beta, scan_beta_delta
from .dynamics import current_j, flux_F, probability_P
from .phase_space import CatWigner, negativity_delta, wigner_cat
from .states import CatState, RescaledParams

__version__ = "0.1.0"

__all__ = [
    "CatState", "RescaledParams", "CatWigner", "wigner_cat", "negativity_delta",
    "probability_P", "current_j", "flux_F", "compute_beta", "BackflowResult",
    "scan_beta_delta",
]
