"""
Weighted norms, decay fits, the weighted energy monitor and the quadratic
form positivity check used by the stability analysis.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from dataclasses_json import dataclass_json
from scipy import integrate, stats

from config import DIAGNOSTICS
from errors import DegenerateFit, InvalidParams
from evolution import EvolutionState, PerturbationView
from params import PlasmaParams, RegimeKind, classify_regime, derived_constants

logger = logging.getLogger(__name__)

FieldLike = Union[np.ndarray, Sequence[np.ndarray]]


class WeightKind(Enum):
    ALGEBRAIC = "algebraic"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class WeightSpec:
    """(1 + beta x)^alpha or exp(beta x), applied to squared fields"""
    kind: WeightKind
    beta: float
    alpha: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidParams(f"weight beta must be positive, got {self.beta}")

    @classmethod
    def algebraic(cls, alpha: float, beta: float) -> "WeightSpec":
        return cls(WeightKind.ALGEBRAIC, beta=beta, alpha=alpha)

    @classmethod
    def exponential(cls, beta: float) -> "WeightSpec":
        return cls(WeightKind.EXPONENTIAL, beta=beta)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind is WeightKind.ALGEBRAIC:
            return (1.0 + self.beta * x) ** self.alpha
        return np.exp(self.beta * x)


def _field_list(fields: FieldLike) -> List[np.ndarray]:
    if isinstance(fields, np.ndarray) and fields.ndim == 1:
        return [fields]
    return [np.asarray(f, dtype=float) for f in fields]


def weighted_norm(fields: FieldLike, x: np.ndarray, weight: WeightSpec, order: int = 0) -> float:
    """
    (int W sum_{j <= order} (d^j f)^2 dx)^(1/2), summed over all fields.

    Derivatives are second-order centered (one-sided at the ends), the
    integral is the trapezoid rule on the grid x.
    """
    if not 0 <= order <= 2:
        raise InvalidParams(f"order must be 0, 1 or 2, got {order}")
    x = np.asarray(x, dtype=float)
    W = weight(x)
    density = np.zeros_like(x)
    for f in _field_list(fields):
        d = f
        density += d ** 2
        for _ in range(order):
            d = np.gradient(d, x, edge_order=2)
            density += d ** 2
    return float(math.sqrt(integrate.trapezoid(W * density, x)))


# Decay fits --------------------------------------------------------------

FIT_MODELS = ("exp", "alg")


@dataclass_json
@dataclass(frozen=True)
class DecayFit:
    model: str  # "exp": norm ~ exp(-rate t); "alg": norm ~ (1 + beta t)^rate
    rate: float
    beta: Optional[float]
    r_squared: float
    window: Tuple[float, float]
    samples: int

    @property
    def mu(self) -> float:
        return self.rate

    @property
    def exponent(self) -> float:
        return self.rate


def decay_fit(t: np.ndarray, norm: np.ndarray, model: str = "exp",
              window: Optional[Tuple[float, float]] = None, beta: Optional[float] = None) -> DecayFit:
    """
    Least-squares decay fit of a norm series.

    exp: log norm against t, rate mu = -slope.
    alg: log norm against log(1 + beta t), rate = slope (the exponent).

    Args:
        window: (t_lo, t_hi); default the second half of the series

    Raises:
        DegenerateFit: fewer than the minimum samples, non-positive or constant norms
    """
    if model not in FIT_MODELS:
        raise InvalidParams(f"model must be one of {FIT_MODELS}, got {model!r}")
    if model == "alg" and not (beta is not None and beta > 0):
        raise InvalidParams(f"algebraic fit needs beta > 0, got {beta}")
    t = np.asarray(t, dtype=float)
    norm = np.asarray(norm, dtype=float)
    if len(t) == 0:
        raise DegenerateFit("empty series")
    if window is None:
        window = (0.5 * t[-1], t[-1])
    slack = 1e-9 * max(1.0, abs(window[1]))
    mask = (t >= window[0] - slack) & (t <= window[1] + slack)
    t_win, y_win = t[mask], norm[mask]

    if len(t_win) < DIAGNOSTICS.MIN_FIT_SAMPLES:
        raise DegenerateFit(f"{len(t_win)} samples in window {window}, need {DIAGNOSTICS.MIN_FIT_SAMPLES}")
    if np.any(~(y_win > 0)):
        raise DegenerateFit("norm samples must be positive")
    log_y = np.log(y_win)
    if np.ptp(log_y) <= 64.0 * np.finfo(float).eps * max(1.0, np.max(np.abs(log_y))):
        raise DegenerateFit("norm is constant in the fit window")

    if model == "exp":
        fit = stats.linregress(t_win, log_y)
        rate = -fit.slope
    else:
        fit = stats.linregress(np.log1p(beta * t_win), log_y)
        rate = fit.slope
    logger.info("[DECAY] %s fit on [%.4g, %.4g]: rate=%.6g r2=%.6f", model, window[0], window[1],
                rate, fit.rvalue ** 2)
    return DecayFit(model=model, rate=float(rate), beta=beta if model == "alg" else None,
                    r_squared=float(fit.rvalue ** 2), window=(float(window[0]), float(window[1])),
                    samples=int(len(t_win)))


def predicted_norm_exponent(kind: RegimeKind, lam: float, epsilon: float) -> float:
    """Algebraic-weight norm decay exponent implied by the stability estimates"""
    if not 0 < epsilon <= lam:
        raise InvalidParams(f"need 0 < epsilon <= lambda, got epsilon={epsilon}, lambda={lam}")
    if kind is RegimeKind.DEGENERATE:
        return -(lam - epsilon) / 6.0
    if kind is RegimeKind.NONDEGENERATE:
        return -(lam - epsilon) / 2.0
    raise InvalidParams(f"no decay estimate for regime {kind.value}")


# Energy ------------------------------------------------------------------

def _quadratic_density(view: PerturbationView, a, b, c):
    p = view.params
    n, T = view.n_ref, view.T
    return (0.5 * n * p.R * T * a ** 2 + 0.5 * n * p.m * b ** 2
            + n * p.R / (2.0 * (p.gamma - 1.0) * T) * c ** 2)


def energy_functional(view: PerturbationView, weight: WeightSpec) -> float:
    """int W [exp(-phi_ref) E0 + E1 + n_ref^2 varphi^2 / 2] dx"""
    x = view.x
    grad = lambda f: np.gradient(f, x, edge_order=2)
    E0 = _quadratic_density(view, view.varphi, view.psi, view.zeta)
    E1 = _quadratic_density(view, grad(view.varphi), grad(view.psi), grad(view.zeta))
    integrand = weight(x) * (np.exp(-view.phi_ref) * E0 + E1 + 0.5 * view.n_ref ** 2 * view.varphi ** 2)
    return float(integrate.trapezoid(integrand, x))


@dataclass(frozen=True)
class WallFlux:
    zeroth: float  # -[exp(-phi_ref) H0 + n_ref^2 u varphi^2 / 2] at x = 0
    first: float  # -H1 at x = 0


def _flux_density(view: PerturbationView, a, b, c):
    p = view.params
    n, T, u = view.n_ref, view.T, view.u
    return (0.5 * n * p.R * T * u * a ** 2 + n * p.R * T * a * b + 0.5 * n * p.m * u * b ** 2
            + p.R * n * c * b + n * p.R * u / (2.0 * (p.gamma - 1.0) * T) * c ** 2)


def wall_flux(view: PerturbationView) -> WallFlux:
    """Boundary terms the energy identity picks up at the wall"""
    x = view.x
    grad = lambda f: np.gradient(f, x, edge_order=2)
    H0 = _flux_density(view, view.varphi, view.psi, view.zeta) - view.n_ref * view.sigma * view.psi
    H1 = _flux_density(view, grad(view.varphi), grad(view.psi), grad(view.zeta))
    zeroth = -(np.exp(-view.phi_ref[0]) * H0[0] + 0.5 * view.n_ref[0] ** 2 * view.u[0] * view.varphi[0] ** 2)
    return WallFlux(zeroth=float(zeroth), first=float(-H1[0]))


@dataclass(frozen=True)
class MassBudget:
    total: float  # int n dx
    wall_flux: float  # (n u)(0)
    far_flux: float  # (n u)(L)

    @property
    def rate(self) -> float:
        """d/dt of the total mass implied by the boundary fluxes"""
        return self.wall_flux - self.far_flux


def mass_budget(state: EvolutionState) -> MassBudget:
    n = state.n
    flux = n * state.u
    return MassBudget(total=float(integrate.trapezoid(n, state.x)),
                      wall_flux=float(flux[0]), far_flux=float(flux[-1]))


# Observers ---------------------------------------------------------------

def norm_observer(profile, weight: WeightSpec, order: int = 1,
                  components: Sequence[str] = ("varphi", "psi", "zeta")):
    """Weighted norm of the perturbation against the baseline (or the profile)"""
    def observe(state, baseline=None):
        view = PerturbationView.of(state, profile, baseline)
        parts = view.components()
        return weighted_norm([parts[c] for c in components], view.x, weight, order)
    return observe


def energy_observer(profile, weight: WeightSpec):
    def observe(state, baseline=None):
        return energy_functional(PerturbationView.of(state, profile, baseline), weight)
    return observe


def drift_observer(initial: EvolutionState):
    """Max-norm distance of (v, u, T) from the initial state"""
    def observe(state, baseline=None):
        return float(max(np.max(np.abs(state.v - initial.v)),
                         np.max(np.abs(state.u - initial.u)),
                         np.max(np.abs(state.T - initial.T))))
    return observe


def mass_observer():
    def observe(state, baseline=None):
        return mass_budget(state).total
    return observe


# Quadratic form ----------------------------------------------------------

QFORM_COLUMNS = ("x", "q1", "q2", "q3", "q4", "q5", "disc12", "disc35", "cubic", "bound")


@dataclass_json
@dataclass(frozen=True)
class QuadraticFormReport:
    epsilon: float
    beta: float
    passed: bool
    c_cubic: float  # min over samples of -cubic * B^2
    c_coercive: float  # min over samples of lambda_min(M) * B^2
    samples: List[Dict[str, float]] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([s[name] for s in self.samples])

    def rows(self) -> np.ndarray:
        return np.array([[s[c] for c in QFORM_COLUMNS] for s in self.samples])


def _degenerate_window(params: PlasmaParams, epsilon: float, beta: float) -> float:
    regime = classify_regime(params)
    if regime.kind is not RegimeKind.DEGENERATE:
        raise InvalidParams(f"quadratic form check needs the degenerate regime, got {regime.kind.value}")
    if not params.phi_b > 0:
        raise InvalidParams(f"quadratic form check needs phi_b > 0, got {params.phi_b}")
    if not epsilon > 0:
        raise InvalidParams(f"epsilon must be positive, got {epsilon}")
    Gamma = derived_constants(params, regime).Gamma
    beta_max = Gamma * math.sqrt(params.phi_b)
    if not 0 < beta <= beta_max * (1.0 + 1e-12):
        raise InvalidParams(f"beta must lie in (0, Gamma sqrt(phi_b)] = (0, {beta_max:.6g}], got {beta}")
    return Gamma


def reference_beta(params: PlasmaParams, fraction: Optional[float] = None) -> float:
    """fraction * Gamma * sqrt(phi_b), the default weight scale"""
    fraction = DIAGNOSTICS.QFORM_BETA_FRACTION if fraction is None else fraction
    regime = classify_regime(params)
    if regime.kind is not RegimeKind.DEGENERATE or not params.phi_b > 0:
        raise InvalidParams("reference beta needs a degenerate sheath with phi_b > 0")
    return fraction * derived_constants(params, regime).Gamma * math.sqrt(params.phi_b)


def weight_ratio(x: np.ndarray, params: PlasmaParams, beta: float) -> Tuple[np.ndarray, np.ndarray]:
    """B = x + 1/beta and S = B / (x + 1/(Gamma sqrt(phi_b)))"""
    Gamma = derived_constants(params).Gamma
    x = np.asarray(x, dtype=float)
    B = x + 1.0 / beta
    return B, B / (x + 1.0 / (Gamma * math.sqrt(params.phi_b)))


def quadratic_form_coefficients(params: PlasmaParams, epsilon: float, beta: float,
                                x: np.ndarray) -> Tuple[np.ndarray, ...]:
    """q1..q5 of the degenerate-case energy estimate, evaluated at x"""
    Gamma = _degenerate_window(params, epsilon, beta)
    B, S = weight_ratio(x, params, beta)
    K = 1.0 / (B ** 2 * Gamma ** 2)
    e, g, R = epsilon, params.gamma, params.R
    RT, gRT = params.RT, params.gRT
    heat = R / ((g - 1.0) * params.T_inf)

    q1 = e / 2.0 * RT + K * ((1.0 - RT) * e / 2.0 * S ** 2 + (gRT - 1.0) * S ** 3
                             - Gamma ** 2 / 2.0 * e * (e - 1.0) * (e - 2.0))
    q2 = -RT * e + K * (2.0 * e * RT * S ** 2 + 2.0 * (1.0 - gRT) * S ** 3)
    q3 = e / 2.0 * gRT + K * ((1.0 - gRT) * e / 2.0 * S ** 2 + (3.0 * gRT + 1.0) * S ** 3)
    q4 = e * heat / 2.0 + K * (-e * heat / 2.0 * S ** 2 + g * heat * S ** 3)
    q5 = -e * R + 2.0 * e * R * K * S ** 2
    return q1, q2, q3, q4, q5


def quadratic_form_check(params: PlasmaParams, epsilon: Optional[float] = None,
                         beta: Optional[float] = None,
                         x_samples: Optional[np.ndarray] = None) -> QuadraticFormReport:
    """
    Sample the three positivity claims of the degenerate energy estimate.

    pass iff q1, q3, q4 > 0, both discriminants are negative and
    -(q1 q5^2 + q4 q2^2 - 4 q1 q3 q4) >= c B^-2 for some c > 0 at every sample.

    Args:
        epsilon: Weight exponent (default 4)
        beta: Weight scale (default 0.9 Gamma sqrt(phi_b))
        x_samples: Positions (default 1000 points on [0, 100])

    Raises:
        InvalidParams: outside the degenerate regime or beta > Gamma sqrt(phi_b)
    """
    epsilon = DIAGNOSTICS.QFORM_EPSILON if epsilon is None else epsilon
    if beta is None:
        beta = reference_beta(params)
    if x_samples is None:
        x_samples = np.linspace(0.0, DIAGNOSTICS.QFORM_X_MAX, DIAGNOSTICS.QFORM_SAMPLES)
    x = np.asarray(x_samples, dtype=float)

    q1, q2, q3, q4, q5 = quadratic_form_coefficients(params, epsilon, beta, x)
    B, _ = weight_ratio(x, params, beta)
    disc12 = q2 ** 2 - 4.0 * q1 * q3
    disc35 = q5 ** 2 - 4.0 * q3 * q4
    cubic = q1 * q5 ** 2 + q4 * q2 ** 2 - 4.0 * q1 * q3 * q4
    bound = -cubic * B ** 2

    speed = abs(params.u_inf)
    M = np.zeros((len(x), 3, 3))
    M[:, 0, 0] = speed * q1
    M[:, 0, 1] = M[:, 1, 0] = q2 / 2.0
    M[:, 1, 1] = q3 / speed
    M[:, 1, 2] = M[:, 2, 1] = q5 / 2.0
    M[:, 2, 2] = speed * q4
    lam_min = np.linalg.eigvalsh(M)[:, 0]

    c_cubic = float(np.min(bound))
    passed = bool(np.all(q1 > 0) and np.all(q3 > 0) and np.all(q4 > 0)
                  and np.all(disc12 < 0) and np.all(disc35 < 0) and c_cubic > 0)
    columns = (x, q1, q2, q3, q4, q5, disc12, disc35, cubic, bound)
    samples = [dict(zip(QFORM_COLUMNS, map(float, row))) for row in zip(*columns)]
    logger.info("[QFORM] epsilon=%g beta=%.4g: pass=%s c=%.4g", epsilon, beta, passed, c_cubic)
    return QuadraticFormReport(epsilon=float(epsilon), beta=float(beta), passed=passed,
                               c_cubic=c_cubic, c_coercive=float(np.min(lam_min * B ** 2)),
                               samples=samples)
