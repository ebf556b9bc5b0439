"""Exact kernels, spectra and brute-force oracles for three coupled quantum oscillators."""

from .model import (
    ConfigError,
    DriveVector,
    GaugeChoice,
    PhysicalSystem,
    TimeDependentConfig,
    parse_config,
    parse_td_config,
)
from .propagator import CausticError, Endpoints, KernelValue, three_body_kernel
from .spectrum import LevelIndex, enumerate_levels
from .timedep import build_td_system, td_three_body_kernel
from .transform import normal_modes, to_jacobi

__version__ = "0.1.0"

__all__ = [
    "CausticError",
    "ConfigError",
    "DriveVector",
    "Endpoints",
    "GaugeChoice",
    "KernelValue",
    "LevelIndex",
    "PhysicalSystem",
    "TimeDependentConfig",
    "build_td_system",
    "enumerate_levels",
    "normal_modes",
    "parse_config",
    "parse_td_config",
    "td_three_body_kernel",
    "three_body_kernel",
    "to_jacobi",
]
