"""
Degenerate-case (u_inf^2 = (gamma R T_inf + 1)/m) far-field asymptotics.

With G(x) = Gamma x + phi_b^(-1/2) every observable U of the sheath behaves
like -G^-2 and
    sup_x | d^i U/dx^i * G^(i+2) + c_i | <= C phi_b,   i = 0..3
with c_0 = 1, c_1 = -2 Gamma, c_2 = 6 Gamma^2, c_3 = -24 Gamma^3.
This module measures the left-hand side on computed profiles and solves
the cubic equations that bound the admissible weight exponents.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from config import DIAGNOSTICS
from errors import InsufficientResolution, InvalidParams
from params import PlasmaParams, RegimeKind, classify_regime, derived_constants

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps
CENTERED_HALF_WIDTH = 2


@dataclass(frozen=True)
class ExpansionConstants:
    c0: float
    c1: float
    c2: float
    c3: float
    Gamma: float

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.c0, self.c1, self.c2, self.c3)


@dataclass(frozen=True)
class ExpansionEntry:
    U: str
    i: int
    sup: float
    sup_over_phib: float
    error_floor: float

    def to_dict(self) -> Dict:
        return {"U": self.U, "i": self.i, "sup": self.sup,
                "sup_over_phib": self.sup_over_phib, "error_floor": self.error_floor}


@dataclass(frozen=True)
class ExpansionReport:
    phi_b: float
    Gamma: Optional[float]
    entries: List[ExpansionEntry] = field(default_factory=list)

    def get(self, U: str, i: int) -> ExpansionEntry:
        for entry in self.entries:
            if entry.U == U and entry.i == i:
                return entry
        raise KeyError(f"no entry for U={U!r}, i={i}")

    def to_dict(self) -> Dict:
        return {"phi_b": self.phi_b, "Gamma": self.Gamma,
                "entries": [entry.to_dict() for entry in self.entries]}


def expansion_constants(params: PlasmaParams) -> ExpansionConstants:
    regime = classify_regime(params)
    if regime.kind is not RegimeKind.DEGENERATE:
        raise InvalidParams(f"expansion constants need the degenerate regime, got {regime.kind.value}")
    Gamma = derived_constants(params, regime).Gamma
    return ExpansionConstants(c0=1.0, c1=-2.0 * Gamma, c2=6.0 * Gamma ** 2,
                              c3=-24.0 * Gamma ** 3, Gamma=Gamma)


def G(x, params: PlasmaParams):
    """Gamma x + phi_b^(-1/2)"""
    regime = classify_regime(params)
    if regime.kind is not RegimeKind.DEGENERATE:
        raise InvalidParams(f"G(x) is defined for the degenerate regime only, got {regime.kind.value}")
    if not params.phi_b > 0:
        raise InvalidParams(f"G(x) needs phi_b > 0, got {params.phi_b}")
    Gamma = derived_constants(params, regime).Gamma
    return (Gamma * np.asarray(x, dtype=float) + params.phi_b ** -0.5)[()]


def _cubic_root(coefficient: float) -> float:
    """Real root in (4, 6) of l(l-1)(l-2) - 12 (coefficient * l + 2)"""
    def cubic(lam):
        return lam * (lam - 1.0) * (lam - 2.0) - 12.0 * (coefficient * lam + 2.0)
    return optimize.brentq(cubic, 4.0, 6.0, xtol=1e-15, rtol=4.0 * EPS, maxiter=200)


def lambda0(gamma: float) -> float:
    """Upper end of the admissible weight exponents, decreasing from 5.5693... to 4"""
    if not gamma > 1:
        raise InvalidParams(f"gamma must exceed 1, got {gamma}")
    return _cubic_root(2.0 / (gamma + 1.0))


def root_5_5693() -> float:
    """The gamma -> 1 limit of lambda0"""
    return _cubic_root(1.0)


def admissible_lambda_window(gamma: float) -> Tuple[float, float]:
    """[4, lambda0(gamma)): weight exponents covered by the degenerate stability result"""
    return 4.0, lambda0(gamma)


def fd_weights(offsets: Sequence[int], order: int) -> np.ndarray:
    """Finite-difference weights for d^order/dx^order on unit-spaced offsets"""
    offsets = np.asarray(offsets, dtype=float)
    rhs = np.zeros(len(offsets))
    rhs[order] = math.factorial(order)
    return np.linalg.solve(np.vander(offsets, increasing=True).T, rhs)


def derivative(values: np.ndarray, h: float, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    d^order values / dx^order on a uniform grid.

    Five-point centered stencils in the interior (4th order for the first
    and second derivative, 2nd order for the third); one-sided stencils of
    matching accuracy on the two nodes nearest each end.

    Returns:
        (derivative, sum of |weights| per node), the latter for noise estimates
    """
    values = np.asarray(values, dtype=float)
    if order == 0:
        return values.copy(), np.ones_like(values)
    accuracy = 4 if order < 3 else 2
    width = order + accuracy
    n = len(values)
    half = CENTERED_HALF_WIDTH
    if n < max(width, 2 * half + 1):
        raise InsufficientResolution(f"{n} nodes cannot carry a derivative of order {order}")

    out = np.empty(n)
    gain = np.empty(n)
    centered = fd_weights(range(-half, half + 1), order)
    out[half:n - half] = sum(w * values[half + s:n - half + s]
                             for s, w in zip(range(-half, half + 1), centered))
    gain[half:n - half] = np.sum(np.abs(centered))
    for j in list(range(half)) + list(range(n - half, n)):
        start = 0 if j < half else n - width
        weights = fd_weights(np.arange(start, start + width) - j, order)
        out[j] = np.dot(weights, values[start:start + width])
        gain[j] = np.sum(np.abs(weights))
    return out / h ** order, gain / h ** order


def _observables(profile) -> Dict[str, np.ndarray]:
    """Five normalizations of the sheath fields, each ~ -G^-2 in the far field"""
    w = profile.w
    gamma = profile.params.gamma
    log_n = np.log1p(w)
    return {
        "-phi": -np.asarray(profile.phi),
        "n-1": np.asarray(w),
        "log n": log_n,
        "1-u/u_inf": w / (1.0 + w),
        "(T/T_inf-1)/(gamma-1)": np.expm1((gamma - 1.0) * log_n) / (gamma - 1.0),
    }


OBSERVABLES: Tuple[str, ...] = ("-phi", "n-1", "log n", "1-u/u_inf", "(T/T_inf-1)/(gamma-1)")


def verify_expansion(profile, max_order: int = 3,
                     observables: Optional[Sequence[str]] = None) -> ExpansionReport:
    """
    Measure sup |d^i U * G^(i+2) + c_i| for i <= max_order.

    sup / phi_b tends to a finite limit as phi_b -> 0, approached with an
    O(phi_b) correction of parameter-dependent sign, so along a halving
    sequence it is bounded but need not decrease.

    Args:
        profile: Degenerate SheathProfile on a uniform grid
        max_order: Highest derivative order (0..3)
        observables: Subset of OBSERVABLES (default all)

    Raises:
        InvalidParams: nondegenerate profile or max_order outside 0..3
        InsufficientResolution: rounding noise exceeds the measured sup for i >= 2
    """
    if not 0 <= max_order <= 3:
        raise InvalidParams(f"max_order must be in 0..3, got {max_order}")
    params = profile.params
    if profile.regime.kind is not RegimeKind.DEGENERATE:
        raise InvalidParams(f"expansion check needs a degenerate profile, got {profile.regime.kind.value}")
    if params.phi_b == 0.0:
        logger.info("[ASYMPTOTICS] trivial profile: nothing to verify")
        return ExpansionReport(phi_b=0.0, Gamma=None)

    names = OBSERVABLES if observables is None else tuple(observables)
    unknown = set(names) - set(OBSERVABLES)
    if unknown:
        raise InvalidParams(f"unknown observables: {sorted(unknown)}")

    consts = expansion_constants(params)
    c = consts.as_tuple()
    x = np.asarray(profile.x)
    h = float(x[1] - x[0])
    if not np.allclose(np.diff(x), h, rtol=1e-9, atol=0.0):
        raise InvalidParams("expansion check needs a uniform grid")
    Gx = G(x, params)
    window = slice(0, len(x) - DIAGNOSTICS.EXPANSION_EXCLUDED_CELLS)
    fields = _observables(profile)

    entries = []
    for name in names:
        U = fields[name]
        for i in range(max_order + 1):
            dU, gain = derivative(U, h, i)
            scaled = Gx ** (i + 2)
            deviation = dU * scaled + c[i]
            sup = float(np.max(np.abs(deviation[window])))
            floor = float(np.max((gain * 64.0 * EPS * np.abs(U) * scaled)[window]))
            if i >= 2 and floor > sup:
                raise InsufficientResolution(
                    f"rounding floor {floor:.3e} exceeds sup {sup:.3e} for U={name}, i={i}"
                )
            entries.append(ExpansionEntry(U=name, i=i, sup=sup, sup_over_phib=sup / params.phi_b,
                                          error_floor=floor))
            logger.debug("[ASYMPTOTICS] U=%s i=%d sup=%.4e floor=%.2e", name, i, sup, floor)

    logger.info("[ASYMPTOTICS] phi_b=%g: %d entries, worst sup/phi_b=%.4g", params.phi_b,
                len(entries), max(e.sup_over_phib for e in entries))
    return ExpansionReport(phi_b=params.phi_b, Gamma=consts.Gamma, entries=entries)
