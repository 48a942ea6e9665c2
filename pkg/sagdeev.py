"""
Sagdeev potential machinery.

    f(n) = gamma R T/(gamma-1) (n^(gamma-1) - 1) + m u^2/2 (1/n^2 - 1)
    f'(n) = (-m u^2 + gamma R T n^(gamma+1)) / n^3
    V(phi) = int_0^phi [f^-1(eta) - exp(-eta)] d eta

The inverse is taken on the branch n in (0, c_crit] that contains the
far-field state n = 1; f decreases on it whenever u_inf^2 > gamma R T / m.

In the density variable the integral has the closed form
    V = m u^2 (1/n - 1) + R T (n^gamma - 1) + exp(-f(n)) - 1
which loses all significant digits near n = 1, so for small w = n - 1 it
is evaluated from its Taylor series in w.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy import integrate, optimize

from config import SAGDEEV
from errors import (BranchExceeded, ConvergenceFailure, DomainError,
                    InvalidParams)
from params import PlasmaParams, RegimeKind, classify_regime, derived_constants

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class BranchedInverse:
    """The decreasing branch of f that contains n = 1"""
    params: PlasmaParams
    domain_lo: float  # f(c_crit)
    c_crit: float
    branch: str = "n in (0, c_crit], f decreasing"


@dataclass(frozen=True)
class ExistenceReport:
    exists: bool
    V_at_phib: Optional[float]  # None when phi_b lies below the branch
    f_at_c: float
    V_at_edge: Optional[float] = None  # V(f(c_crit)), reported when phi_b lies below the branch


def _check_density(n: np.ndarray):
    if np.any(~(n > 0)):
        raise DomainError(f"density must be positive, got min {np.min(n)}")


def f(n: ArrayLike, params: PlasmaParams) -> ArrayLike:
    """f(n); vectorized, DomainError for n <= 0"""
    if np.ndim(n) == 0:
        n = float(n)
        if not n > 0:
            raise DomainError(f"density must be positive, got {n}")
        log_n = math.log(n)
        return (params.gRT / (params.gamma - 1.0) * math.expm1((params.gamma - 1.0) * log_n)
                + 0.5 * params.mu2 * math.expm1(-2.0 * log_n))
    n = np.asarray(n, dtype=float)
    _check_density(n)
    log_n = np.log(n)
    return (params.gRT / (params.gamma - 1.0) * np.expm1((params.gamma - 1.0) * log_n)
            + 0.5 * params.mu2 * np.expm1(-2.0 * log_n))


def f_from_offset(w: ArrayLike, params: PlasmaParams) -> ArrayLike:
    """f(1 + w), accurate for tiny |w|"""
    w = np.asarray(w, dtype=float)
    _check_density(1.0 + w)
    log_n = np.log1p(w)
    value = (params.gRT / (params.gamma - 1.0) * np.expm1((params.gamma - 1.0) * log_n)
             + 0.5 * params.mu2 * np.expm1(-2.0 * log_n))
    return value[()]


def f_prime(n: ArrayLike, params: PlasmaParams) -> ArrayLike:
    """f'(n) = (-m u^2 + gamma R T n^(gamma+1)) / n^3"""
    n = np.asarray(n, dtype=float)
    _check_density(n)
    return ((-params.mu2 + params.gRT * n ** (params.gamma + 1.0)) / n ** 3)[()]


def f_prime_from_offset(w: ArrayLike, params: PlasmaParams) -> ArrayLike:
    w = np.asarray(w, dtype=float)
    _check_density(1.0 + w)
    log_n = np.log1p(w)
    return ((-params.mu2 + params.gRT * np.exp((params.gamma + 1.0) * log_n))
            * np.exp(-3.0 * log_n))[()]


@lru_cache(maxsize=64)
def branched_inverse(params: PlasmaParams) -> BranchedInverse:
    """Validate the supersonic branch and cache its endpoint"""
    if not params.u_inf ** 2 * params.m > params.gRT:
        raise InvalidParams(
            "inverse branch through n = 1 needs u_inf^2 > gamma R T_inf / m "
            f"(got m u_inf^2={params.mu2}, gamma R T_inf={params.gRT})"
        )
    c_crit = (params.mu2 / params.gRT) ** (1.0 / (params.gamma + 1.0))
    return BranchedInverse(params=params, domain_lo=float(f(c_crit, params)), c_crit=c_crit)


def f_inverse(phi: float, params: PlasmaParams, tol: Optional[float] = None) -> float:
    """
    Density n in (0, c_crit] with f(n) = phi.

    Raises:
        BranchExceeded: phi < f(c_crit)
        ConvergenceFailure: the bracketed solve did not converge
    """
    tol = SAGDEEV.INVERSE_TOL if tol is None else tol
    phi = float(phi)
    if phi == 0.0:
        return 1.0

    branch = branched_inverse(params)
    lo_phi = branch.domain_lo
    if phi <= lo_phi:
        if phi >= lo_phi - 4.0 * np.finfo(float).eps * max(1.0, abs(lo_phi)):
            return branch.c_crit
        raise BranchExceeded(f"phi={phi} lies below f(c_crit)={lo_phi}")

    n_floor = SAGDEEV.DENSITY_FLOOR
    if phi >= f(n_floor, params):
        raise DomainError(f"phi={phi} needs a density below the floor {n_floor}")

    root, info = optimize.brentq(lambda n: f(n, params) - phi, n_floor, branch.c_crit,
                                 xtol=1e-15, rtol=4.0 * np.finfo(float).eps,
                                 maxiter=200, full_output=True, disp=False)
    if not info.converged:
        raise ConvergenceFailure(f"f_inverse({phi}) did not converge: {info.flag}")
    residual = abs(f(root, params) - phi)
    if residual > tol * max(1.0, abs(phi)):
        raise ConvergenceFailure(f"f_inverse({phi}) residual {residual:.3e} above {tol:.1e}")
    return root


def sagdeev_V(phi: float, params: PlasmaParams, quad_tol: Optional[float] = None) -> float:
    """V(phi) by adaptive quadrature of f^-1(eta) - exp(-eta)"""
    quad_tol = SAGDEEV.QUAD_TOL if quad_tol is None else quad_tol
    if quad_tol <= 0:
        raise InvalidParams(f"quad_tol must be positive, got {quad_tol}")
    phi = float(phi)
    if phi == 0.0:
        return 0.0
    f_inverse(phi, params)  # surfaces BranchExceeded before quadrature

    value, abserr = integrate.quad(lambda eta: f_inverse(eta, params) - math.exp(-eta),
                                   0.0, phi, epsabs=quad_tol, epsrel=0.0, limit=200)
    logger.debug("V(%.6g) = %.17g (abserr %.2e)", phi, value, abserr)
    return value


@lru_cache(maxsize=64)
def _potential_series(params: PlasmaParams, terms: int) -> np.ndarray:
    """Taylor coefficients v_k of V in w = n - 1 (v_0 = v_1 = 0)"""
    def binomial(a, k_max):
        out = np.empty(k_max + 1)
        out[0] = 1.0
        for k in range(1, k_max + 1):
            out[k] = out[k - 1] * (a - k + 1) / k
        return out

    g = params.gamma
    bin_gm1 = binomial(g - 1.0, terms)
    bin_m2 = binomial(-2.0, terms)
    bin_g = binomial(g, terms)

    # -f(1 + w) = sum_k neg_f[k] w^k
    neg_f = -(params.gRT / (g - 1.0) * bin_gm1 + 0.5 * params.mu2 * bin_m2)
    neg_f[0] = 0.0

    # exp(-f) by the recurrence e_k = (1/k) sum_j j g_j e_(k-j)
    exp_coef = np.zeros(terms + 1)
    exp_coef[0] = 1.0
    for k in range(1, terms + 1):
        j = np.arange(1, k + 1)
        exp_coef[k] = np.dot(j * neg_f[1:k + 1], exp_coef[k - j]) / k

    signs = (-1.0) ** np.arange(terms + 1)
    coef = params.mu2 * signs + params.RT * bin_g + exp_coef
    coef[:2] = 0.0
    return coef


def potential_from_offset(w: ArrayLike, params: PlasmaParams) -> ArrayLike:
    """V at density n = 1 + w (series near w = 0, stable closed form elsewhere)"""
    shape = np.shape(w)
    w = np.atleast_1d(np.asarray(w, dtype=float)).ravel()
    _check_density(1.0 + w)
    out = np.empty_like(w)

    near = np.abs(w) <= SAGDEEV.SERIES_RADIUS
    if np.any(near):
        coef = _potential_series(params, SAGDEEV.SERIES_TERMS)
        out[near] = np.polynomial.polynomial.polyval(w[near], coef)
    far = ~near
    if np.any(far):
        wf = w[far]
        log_n = np.log1p(wf)
        phi = f_from_offset(wf, params)
        out[far] = (-params.mu2 * wf / (1.0 + wf)
                    + params.RT * np.expm1(params.gamma * log_n)
                    + np.expm1(-phi))
    return out.reshape(shape)[()]


def potential_from_density(n: ArrayLike, params: PlasmaParams) -> ArrayLike:
    """V(f(n)) in closed form"""
    return potential_from_offset(np.asarray(n, dtype=float) - 1.0, params)


def sagdeev_table(params: PlasmaParams, phis: np.ndarray):
    """(phi, f^-1(phi), V(phi)) rows for the given potentials"""
    phis = np.asarray(phis, dtype=float)
    n = np.array([f_inverse(p, params) for p in phis])
    V = np.array([sagdeev_V(p, params) for p in phis])
    return phis, n, V


def existence_check(params: PlasmaParams, quad_tol: Optional[float] = None) -> ExistenceReport:
    """
    Monotone sheath exists iff V(phi_b) >= 0 and phi_b >= f(c_crit).

    Below the branch V(phi_b) is undefined; the last reachable value
    V(f(c_crit)) is reported instead.

    Raises:
        InvalidParams: flow outside the supersonic branch
    """
    quad_tol = SAGDEEV.QUAD_TOL if quad_tol is None else quad_tol
    regime = classify_regime(params)
    if regime.kind is RegimeKind.FORBIDDEN_BAND:
        raise InvalidParams("no sheath exists in the forbidden band")
    if regime.kind is RegimeKind.SUBSONIC:
        raise InvalidParams("subsonic sheath construction is not supported")

    f_at_c = derived_constants(params, regime).f_at_c
    if params.phi_b < f_at_c:
        logger.info("[SAGDEEV] phi_b=%g below f(c_crit)=%g", params.phi_b, f_at_c)
        V_edge = sagdeev_V(f_at_c, params, quad_tol)
        return ExistenceReport(exists=False, V_at_phib=None, f_at_c=f_at_c, V_at_edge=V_edge)

    V_b = sagdeev_V(params.phi_b, params, quad_tol)
    exists = V_b >= -quad_tol
    logger.info("[SAGDEEV] V(phi_b)=%.6e f(c_crit)=%.6f exists=%s", V_b, f_at_c, exists)
    return ExistenceReport(exists=bool(exists), V_at_phib=V_b, f_at_c=f_at_c)
