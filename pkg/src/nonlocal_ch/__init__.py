"""Fourier pseudo-spectral solver for the nonlocal Cahn-Hilliard equation on a periodic rectangle."""

from .energy import EnergyBreakdown, energy
from .errors import (
    BlowUpError,
    ConfigError,
    ConservationError,
    DimensionError,
    DomainError,
    KernelError,
    NCHError,
    ParameterError,
    StudyError,
    SymmetryError,
)
from .grid import GridFunction, PeriodicGrid, inner_product, mean, norm_l2, norm_linf
from .harness import RefinementStudy, error_hm1, spatial_study, temporal_study
from .initial import InitialCondition
from .kernel import Kernel, ModelParams, convolve, make_gaussian_kernel, nonlocal_op
from .spectral import SpectralField, forward, gradient, inverse, inverse_laplacian, laplacian, norm_hm1
from .stepper import SolverConfig, StabilizerPolicy, StepDiagnostics, run, step

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "ConfigError",
    "ConservationError",
    "DimensionError",
    "DomainError",
    "EnergyBreakdown",
    "GridFunction",
    "InitialCondition",
    "Kernel",
    "KernelError",
    "ModelParams",
    "NCHError",
    "ParameterError",
    "PeriodicGrid",
    "RefinementStudy",
    "SolverConfig",
    "SpectralField",
    "StabilizerPolicy",
    "StepDiagnostics",
    "StudyError",
    "SymmetryError",
    "convolve",
    "energy",
    "error_hm1",
    "forward",
    "gradient",
    "inner_product",
    "inverse",
    "inverse_laplacian",
    "laplacian",
    "make_gaussian_kernel",
    "mean",
    "nonlocal_op",
    "norm_hm1",
    "norm_l2",
    "norm_linf",
    "run",
    "spatial_study",
    "step",
    "temporal_study",
]
