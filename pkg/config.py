"""
Configuration and constants for the plasma sheath lab
Numerical tolerances, grid defaults and output conventions

Copyright 2025 Intellegix
Licensed under the Apache License, Version 2.0
"""
from dataclasses import dataclass


@dataclass
class SagdeevConfig:
    """Tolerances for f, its inverse branch and the Sagdeev potential"""
    CLASSIFY_TOL: float = 1e-9  # Relative band on u_inf^2 around the Bohm thresholds
    DENSITY_FLOOR: float = 1e-8  # Lower bracket for the inverse branch
    QUAD_TOL: float = 1e-12
    INVERSE_TOL: float = 1e-12  # Absolute f-residual accepted from the inverse
    SERIES_RADIUS: float = 0.02  # |n - 1| below which V uses its power series
    SERIES_TERMS: int = 18


@dataclass
class StationaryConfig:
    """Sheath profile construction"""
    TAIL_EPS: float = 1e-6  # Analytic tail continuation once |phi| < TAIL_EPS * |phi_b|
    GAUSS_ORDER: int = 12
    PANEL_WIDTH: float = 0.05  # Panel width in the log-offset variable
    DEFAULT_CELLS: int = 2048
    L_MAX: float = 5000.0
    NONDEGENERATE_DECAY_LENGTHS: float = 20.0  # L = 20 / c_pred
    DEGENERATE_DECAY_LENGTHS: float = 40.0  # L = 40 / (Gamma * sqrt(phi_b))
    NEWTON_MAX_ITER: int = 50


@dataclass
class EvolutionConfig:
    """Time integration of the full system"""
    CFL: float = 0.4
    POISSON_TOL: float = 1e-10
    POISSON_MAX_ITER: int = 50
    MIN_CELLS: int = 16
    STRICT_UPWIND: bool = True
    PERTURBATION_AMPLITUDE: float = 1e-3


@dataclass
class DiagnosticsConfig:
    """Norms, fits and quadratic-form sampling"""
    MIN_FIT_SAMPLES: int = 10
    QFORM_EPSILON: float = 4.0
    QFORM_BETA_FRACTION: float = 0.9  # beta = fraction * Gamma * sqrt(phi_b)
    QFORM_X_MAX: float = 100.0
    QFORM_SAMPLES: int = 1000
    EXPANSION_EXCLUDED_CELLS: int = 5  # Trailing cells left out of the sup window


@dataclass
class OutputConfig:
    """Artifact layout"""
    ROOT: str = "experiments"
    ROOT_ENV: str = "SHEATHLAB_OUTPUT_ROOT"
    FLOAT_FORMAT: str = "%.17g"
    MANIFEST_NAME: str = "manifest.json"


# Global configuration instances
SAGDEEV = SagdeevConfig()
STATIONARY = StationaryConfig()
EVOLUTION = EvolutionConfig()
DIAGNOSTICS = DiagnosticsConfig()
OUTPUT = OutputConfig()
