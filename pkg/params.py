"""
Physical parameters, Bohm-criterion regime classification and closed-form
derived constants.

Regime thresholds on u_inf^2 (only m * u_inf^2 enters):
    a = gamma*R*T_inf / m          sonic point
    b = (gamma*R*T_inf + 1) / m    Bohm point

    u_inf^2 <= a       Subsonic
    a < u_inf^2 < b    ForbiddenBand
    u_inf^2 == b       Degenerate (within a relative tolerance)
    u_inf^2 > b        Nondegenerate
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from dataclasses_json import dataclass_json

from config import SAGDEEV
from errors import InvalidParams

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass_json
@dataclass(frozen=True)
class PlasmaParams:
    """Physical constants of the ion fluid; n_inf is fixed at 1"""
    m: float
    R: float
    gamma: float
    T_inf: float
    u_inf: float
    phi_b: float
    n_inf: float = 1.0

    def __post_init__(self):
        for name in ("m", "R", "gamma", "T_inf", "u_inf", "phi_b", "n_inf"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise InvalidParams(f"{name} must be a finite number, got {value!r}")
        if self.m <= 0:
            raise InvalidParams(f"m must be positive, got {self.m}")
        if self.R <= 0:
            raise InvalidParams(f"R must be positive, got {self.R}")
        if self.gamma <= 1:
            raise InvalidParams(f"gamma must exceed 1, got {self.gamma}")
        if self.T_inf <= 0:
            raise InvalidParams(f"T_inf must be positive, got {self.T_inf}")
        if self.n_inf != 1.0:
            raise InvalidParams(f"n_inf is fixed at 1 (quasi-neutrality), got {self.n_inf}")

    @property
    def mu2(self) -> float:
        """m * u_inf^2"""
        return self.m * self.u_inf ** 2

    @property
    def gRT(self) -> float:
        """gamma * R * T_inf"""
        return self.gamma * self.R * self.T_inf

    @property
    def RT(self) -> float:
        return self.R * self.T_inf

    def with_phi_b(self, phi_b: float) -> "PlasmaParams":
        return PlasmaParams(self.m, self.R, self.gamma, self.T_inf, self.u_inf, phi_b)


class RegimeKind(Enum):
    SUBSONIC = "Subsonic"
    FORBIDDEN_BAND = "ForbiddenBand"
    DEGENERATE = "Degenerate"
    NONDEGENERATE = "Nondegenerate"


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    margin: float  # Distance of u_inf^2 from the nearest threshold

    @property
    def supersonic(self) -> bool:
        return self.kind in (RegimeKind.DEGENERATE, RegimeKind.NONDEGENERATE)


@dataclass(frozen=True)
class DerivedConstants:
    c_crit: float
    Gamma: Optional[float]  # Degenerate regime only
    f_at_c: float


def classify_regime(params: PlasmaParams, tol: Optional[float] = None) -> Regime:
    """
    Classify the far-field flow against the Bohm criterion.

    Args:
        params: Plasma parameters
        tol: Relative band on u_inf^2 around each threshold (default 1e-9)

    Returns:
        Regime with the distance of u_inf^2 to the nearest threshold
    """
    tol = SAGDEEV.CLASSIFY_TOL if tol is None else tol
    if tol < 0:
        raise InvalidParams(f"tol must be non-negative, got {tol}")
    if not params.u_inf < 0:
        raise InvalidParams(
            f"sheath requires incoming flow u_inf < 0, got u_inf={params.u_inf}"
        )

    u2 = params.u_inf ** 2
    sonic = params.gRT / params.m
    bohm = (params.gRT + 1.0) / params.m
    margin = min(abs(u2 - sonic), abs(u2 - bohm))

    if abs(u2 - bohm) <= tol * bohm:
        kind = RegimeKind.DEGENERATE
    elif u2 > bohm:
        kind = RegimeKind.NONDEGENERATE
    elif u2 <= sonic * (1.0 + tol):
        kind = RegimeKind.SUBSONIC
    else:
        kind = RegimeKind.FORBIDDEN_BAND

    logger.debug("u_inf^2=%.17g sonic=%.17g bohm=%.17g -> %s", u2, sonic, bohm, kind.value)
    return Regime(kind, margin)


def derived_constants(params: PlasmaParams, regime: Optional[Regime] = None) -> DerivedConstants:
    """c_crit, Gamma (degenerate only) and f(c_crit)"""
    from sagdeev import f  # sagdeev imports this module

    regime = classify_regime(params) if regime is None else regime
    c_crit = (params.mu2 / params.gRT) ** (1.0 / (params.gamma + 1.0))
    gamma_const = None
    if regime.kind is RegimeKind.DEGENERATE:
        gamma_const = math.sqrt(((params.gamma ** 2 + params.gamma) * params.RT + 2.0) / 12.0)
    return DerivedConstants(c_crit=c_crit, Gamma=gamma_const, f_at_c=float(f(c_crit, params)))


def characteristic_speeds(u: ArrayLike, T: ArrayLike,
                          params: PlasmaParams) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
    """lambda_1 <= lambda_2 = u <= lambda_3 of the transport system"""
    u = np.asarray(u, dtype=float)
    T = np.asarray(T, dtype=float)
    root = np.sqrt((params.m - 1.0) ** 2 * u ** 2 + 4.0 * params.gamma * params.R * T)
    lam1 = ((params.m + 1.0) * u - root) / 2.0
    lam3 = ((params.m + 1.0) * u + root) / 2.0
    return lam1[()], u.copy()[()], lam3[()]


def acoustic_speeds(u: ArrayLike, T: ArrayLike,
                    params: PlasmaParams) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
    """Eigenvalues u - c_s, u, u + c_s of the (v, u, T) system, c_s = sqrt(gamma R T / m)"""
    u = np.asarray(u, dtype=float)
    c_s = np.sqrt(params.gamma * params.R * np.asarray(T, dtype=float) / params.m)
    return (u - c_s)[()], u.copy()[()], (u + c_s)[()]
