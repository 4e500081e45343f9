"""Dispersive decay laboratory for the discrete Klein-Gordon equation."""
from .backend import BACKEND
from .dispersion import det_hessian, grad_omega, hessian_phi, max_group_speed, omega, phi_aux

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "omega",
    "grad_omega",
    "hessian_phi",
    "det_hessian",
    "phi_aux",
    "max_group_speed",
]
