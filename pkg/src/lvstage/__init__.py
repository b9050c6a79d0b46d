"""Delayed diffusive Lotka-Volterra competition with stage structure on (0, L)."""

from .classify import Outcome, OutcomeKind, Region, RegionLabel, classify, delta_thresholds, predicted_outcome
from .eigen import cooperative_mu, delayed_scalar_principal, delayed_system_principal, mu1
from .grid import Grid, build_laplacian, heat_kernel
from .model import ModelParams
from .profiles import parse_profile, sample
from .simulate import SimConfig, Variant, simulate
from .steady import solve_coexistence, solve_theta

__version__ = "0.1.0"

__all__ = [
    "Grid", "build_laplacian", "heat_kernel", "parse_profile", "sample", "ModelParams",
    "solve_theta", "solve_coexistence", "mu1", "cooperative_mu", "delayed_scalar_principal",
    "delayed_system_principal", "Region", "RegionLabel", "classify", "Outcome", "OutcomeKind",
    "predicted_outcome", "delta_thresholds", "SimConfig", "Variant", "simulate",
]
