"""Locate and size a single stiffness defect in a damped spring-mass chain
from the Laplace-domain response of its first mass."""
from ._backend import BACKEND
from .inversion import (InversionResult, MCResult, ObjectiveSpec, SigmaSmoothSpec, invert,
                        landscape, mc_invert, objective, sigma_smooth_objective)
from .measurement import MeasurementSet, SGrid, add_noise, load, save, simulate, synthesize
from .model import ChainConfig, DefectHypothesis, PhysicalUnits
from .spectral import analytic_x1, direct_solve_x1, green_kernel, lambda_of_s

__all__ = [
    "BACKEND", "ChainConfig", "DefectHypothesis", "PhysicalUnits", "SGrid", "MeasurementSet",
    "ObjectiveSpec", "SigmaSmoothSpec", "InversionResult", "MCResult", "analytic_x1",
    "direct_solve_x1", "green_kernel", "lambda_of_s", "synthesize", "add_noise", "simulate",
    "save", "load", "objective", "sigma_smooth_objective", "invert", "mc_invert", "landscape",
]
