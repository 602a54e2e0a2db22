"""Pseudospectral toolkit for the surface growth equation h_t = -h_xxxx - (h_x^2)_xx."""

from .field import FourierField, InvalidFieldError, ModeBasis, basis, sobolev_norm
from .evolve import StepperConfig, Trajectory, picard_iterate, simulate

__all__ = ["FourierField", "InvalidFieldError", "ModeBasis", "basis", "sobolev_norm",
           "StepperConfig", "Trajectory", "picard_iterate", "simulate"]
