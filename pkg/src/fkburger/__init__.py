"""Simulation and analysis of the hamburger-cheeseburger inventory model."""

from .params import ModelParams, params_from_p, params_from_q, params_from_kappa, DomainError

__all__ = ["ModelParams", "params_from_p", "params_from_q", "params_from_kappa", "DomainError"]
__version__ = "0.1.0"
