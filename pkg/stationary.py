"""
Stationary sheath profiles.

The first integral phi_x^2 / 2 = V(phi) gives the position as a quadrature
    x(phi) = int_phi^phi_b d eta / sqrt(2 V(eta)).
Substituting eta = f(s) and s = 1 + w_b exp(-tau) turns it into
    X(tau) = int_0^tau |f'(1+w)| |w| / sqrt(2 V(w)) d tau',   w = w_b exp(-tau'),
whose integrand stays bounded (nondegenerate) or grows like exp(tau/2)
(degenerate) instead of blowing up at the far field. X is tabulated with
composite Gauss-Legendre panels and inverted at each grid node by Newton,
so the profile carries no interpolation error. Past the cutoff
|phi| = tail_eps * |phi_b| the profile continues analytically.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from scipy import optimize, stats

from config import SAGDEEV, STATIONARY
from errors import (ConvergenceFailure, ExistenceViolation, InsufficientTail,
                    InvalidParams, QuadratureSingularity)
from params import (PlasmaParams, Regime, RegimeKind, classify_regime,
                    derived_constants)
from sagdeev import (existence_check, f, f_from_offset, f_inverse,
                     f_prime_from_offset, potential_from_offset)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridRequest:
    """Domain length (None picks one from the decay scale) and cell count"""
    L: Optional[float] = None
    N: int = STATIONARY.DEFAULT_CELLS
    L_max: float = STATIONARY.L_MAX

    def __post_init__(self):
        if self.N < 2:
            raise InvalidParams(f"need at least 2 cells, got N={self.N}")
        if self.L is not None and not self.L > 0:
            raise InvalidParams(f"L must be positive, got {self.L}")


@dataclass(frozen=True)
class SheathProfile:
    x: np.ndarray
    phi: np.ndarray
    n: np.ndarray
    u: np.ndarray
    T: np.ndarray
    dphi: np.ndarray  # phi_x from the first integral
    w: np.ndarray  # n - 1, kept separately for precision in the tail
    regime: Regime
    params: PlasmaParams
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("x", "phi", "n", "u", "T", "dphi", "w"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.x.ndim != 1 or len(self.x) < 3:
            raise InvalidParams("profile grid needs at least 3 nodes")
        if np.any(np.diff(self.x) <= 0):
            raise InvalidParams("profile grid must be strictly increasing")

    @property
    def v(self) -> np.ndarray:
        return np.log1p(self.w)

    @property
    def L(self) -> float:
        return float(self.x[-1])

    @property
    def cells(self) -> int:
        return len(self.x) - 1


@dataclass(frozen=True)
class ResidualReport:
    mass_flux: float  # sup |n u - u_inf|
    momentum: float  # sup |f(n) - phi|
    entropy: float  # sup |T - T_inf n^(gamma-1)|
    poisson: float  # sup |D2 phi - (n - exp(-phi))| on interior nodes
    first_integral: float  # sup |phi_x^2/2 - V| over the quadrature region


@dataclass(frozen=True)
class TailReport:
    kind: RegimeKind
    fitted: float  # decay rate (nondegenerate) or log-log slope (degenerate)
    predicted: float
    x_lo: float
    x_hi: float
    r_squared: float


def predicted_decay_rate(params: PlasmaParams) -> float:
    """sqrt(V''(0)) = sqrt(1 + 1/f'(1)); zero in the degenerate case"""
    slope = params.gRT - params.mu2  # f'(1)
    return math.sqrt(max(1.0 + 1.0 / slope, 0.0))


def default_length(params: PlasmaParams, regime: Regime, L_max: float) -> float:
    if regime.kind is RegimeKind.NONDEGENERATE:
        L = STATIONARY.NONDEGENERATE_DECAY_LENGTHS / predicted_decay_rate(params)
    elif regime.kind is RegimeKind.DEGENERATE and params.phi_b > 0:
        Gamma = derived_constants(params, regime).Gamma
        L = STATIONARY.DEGENERATE_DECAY_LENGTHS / (Gamma * math.sqrt(params.phi_b))
    else:
        L = L_max
    return min(L, L_max)


def _constant_profile(params: PlasmaParams, regime: Regime, x: np.ndarray) -> SheathProfile:
    zeros = np.zeros_like(x)
    return SheathProfile(x=x, phi=zeros, n=np.ones_like(x), u=np.full_like(x, params.u_inf),
                         T=np.full_like(x, params.T_inf), dphi=zeros, w=zeros,
                         regime=regime, params=params,
                         meta={"trivial": True, "L": float(x[-1]), "N": len(x) - 1})


def _position_integrand(w_b: float, params: PlasmaParams):
    def integrand(tau: np.ndarray) -> np.ndarray:
        w = w_b * np.exp(-tau)
        V = potential_from_offset(w, params)
        if np.any(V <= 0):
            bad = np.min(V)
            raise QuadratureSingularity(
                f"Sagdeev potential vanishes inside (0, phi_b): min V = {bad:.3e}"
            )
        return np.abs(f_prime_from_offset(w, params)) * np.abs(w) / np.sqrt(2.0 * V)
    return integrand


def _invert_positions(targets, edges, X_edges, integrand, nodes, weights):
    """Solve X(tau) = target by Newton, one panel per target"""
    k = np.clip(np.searchsorted(X_edges, targets, side="right") - 1, 0, len(edges) - 2)
    lo, hi = edges[k], edges[k + 1]
    X_lo = X_edges[k]
    tau = lo + (targets - X_lo) / (X_edges[k + 1] - X_lo) * (hi - lo)

    def position(tau):
        span = tau - lo
        pts = lo[:, None] + span[:, None] * (nodes[None, :] + 1.0) / 2.0
        return X_lo + 0.5 * span * (integrand(pts) @ weights)

    for iteration in range(STATIONARY.NEWTON_MAX_ITER):
        step = (position(tau) - targets) / integrand(tau)
        tau_next = np.clip(tau - step, lo, hi)
        moved = np.max(np.abs(tau_next - tau)) if len(tau) else 0.0
        tau = tau_next
        if moved <= 1e-15 * max(1.0, float(np.max(hi))):
            break
    logger.debug("[STATIONARY] position inversion: %d Newton sweeps", iteration + 1)

    residual = np.abs(position(tau) - targets)
    if len(residual) and np.max(residual) > 1e-11 * max(1.0, float(np.max(targets))):
        raise ConvergenceFailure(f"position inversion residual {np.max(residual):.3e}")
    return tau


def offset_from_potential(phi: np.ndarray, params: PlasmaParams,
                          w0: Optional[np.ndarray] = None) -> np.ndarray:
    """
    w with f(1 + w) = phi by Newton, for |phi| small or a close starting guess.

    Recovers the density offset to full relative precision where n - 1
    computed from a stored density would lose digits.
    """
    phi = np.asarray(phi, dtype=float)
    w = phi / (params.gRT - params.mu2) if w0 is None else np.array(w0, dtype=float)
    for _ in range(8):
        w = w - (f_from_offset(w, params) - phi) / f_prime_from_offset(w, params)
    return w


def solve_stationary(params: PlasmaParams, grid: Optional[GridRequest] = None,
                     tail_eps: Optional[float] = None,
                     quad_tol: Optional[float] = None) -> SheathProfile:
    """
    Monotone sheath profile on a uniform grid.

    Args:
        params: Plasma parameters (supersonic branch)
        grid: Domain length and resolution request
        tail_eps: Relative cutoff for the analytic tail (default 1e-6)
        quad_tol: Quadrature tolerance of the existence check (default 1e-12)

    Returns:
        SheathProfile on x_j = j L / N

    Raises:
        ExistenceViolation: boundary data admits no monotone sheath
        QuadratureSingularity: V has an interior zero between 0 and phi_b
    """
    grid = GridRequest() if grid is None else grid
    tail_eps = STATIONARY.TAIL_EPS if tail_eps is None else tail_eps
    regime = classify_regime(params)
    L = grid.L if grid.L is not None else default_length(params, regime, grid.L_max)
    x = np.linspace(0.0, L, grid.N + 1)

    if params.phi_b == 0.0:
        logger.info("[STATIONARY] phi_b = 0: constant state")
        return _constant_profile(params, regime, x)

    report = existence_check(params, quad_tol)
    if not report.exists:
        raise ExistenceViolation(
            f"no monotone sheath for phi_b={params.phi_b}: V(phi_b)={report.V_at_phib}, "
            f"f(c_crit)={report.f_at_c}"
        )
    if regime.kind is RegimeKind.DEGENERATE and params.phi_b < 0:
        raise ExistenceViolation("degenerate sheaths need phi_b > 0")

    consts = derived_constants(params, regime)
    sign = math.copysign(1.0, params.phi_b)
    w_b = f_inverse(params.phi_b, params) - 1.0
    phi_min = tail_eps * abs(params.phi_b)

    tau_cut = optimize.brentq(
        lambda t: abs(f_from_offset(w_b * math.exp(-t), params)) - phi_min,
        0.0, math.log(1.0 / tail_eps) + 20.0, xtol=1e-14)

    panels = max(8, int(math.ceil(tau_cut / STATIONARY.PANEL_WIDTH)))
    nodes, weights = np.polynomial.legendre.leggauss(STATIONARY.GAUSS_ORDER)
    edges = np.linspace(0.0, tau_cut, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    integrand = _position_integrand(w_b, params)
    panel_values = integrand(mid[:, None] + half[:, None] * nodes[None, :])
    X_edges = np.concatenate([[0.0], np.cumsum(half * (panel_values @ weights))])
    x_cut = float(X_edges[-1])
    logger.debug("[STATIONARY] %d panels, tau_cut=%.4f, x_cut=%.6g", panels, tau_cut, x_cut)

    inner = x <= x_cut
    w = np.empty_like(x)
    phi = np.empty_like(x)
    dphi = np.empty_like(x)

    tau = _invert_positions(x[inner], edges, X_edges, integrand, nodes, weights)
    w[inner] = w_b * np.exp(-tau)
    phi[inner] = f_from_offset(w[inner], params)
    dphi[inner] = -sign * np.sqrt(2.0 * potential_from_offset(w[inner], params))
    w[0] = w_b
    phi[0] = params.phi_b

    outer = ~inner
    c_pred = predicted_decay_rate(params)
    if np.any(outer):
        phi_cut = float(f_from_offset(w_b * math.exp(-tau_cut), params))
        shift = x[outer] - x_cut
        if regime.kind is RegimeKind.NONDEGENERATE:
            phi[outer] = phi_cut * np.exp(-c_pred * shift)
            dphi[outer] = -c_pred * phi[outer]
        else:
            G_tail = consts.Gamma * shift + phi_cut ** -0.5
            phi[outer] = G_tail ** -2
            dphi[outer] = -2.0 * consts.Gamma * G_tail ** -3
        w[outer] = offset_from_potential(phi[outer], params)

    n = 1.0 + w
    meta = {
        "trivial": False,
        "L": float(L),
        "N": grid.N,
        "tail_eps": tail_eps,
        "quad_tol": SAGDEEV.QUAD_TOL if quad_tol is None else quad_tol,
        "tau_cut": tau_cut,
        "x_cut": x_cut,
        "panels": panels,
        "gauss_order": STATIONARY.GAUSS_ORDER,
        "c_pred": c_pred,
        "Gamma": consts.Gamma,
    }
    logger.info("[STATIONARY] %s sheath: phi_b=%g L=%.6g N=%d x_cut=%.6g",
                regime.kind.value, params.phi_b, L, grid.N, x_cut)
    return SheathProfile(x=x, phi=phi, n=n, u=params.u_inf / n,
                         T=params.T_inf * np.exp((params.gamma - 1.0) * np.log1p(w)),
                         dphi=dphi, w=w, regime=regime, params=params, meta=meta)


def residual_check(profile: SheathProfile) -> ResidualReport:
    """Discrete sup-norm residuals of the stationary system"""
    p = profile.params
    x, phi, n = profile.x, profile.phi, profile.n

    mass_flux = np.max(np.abs(n * profile.u - p.u_inf))
    momentum = np.max(np.abs(f(n, p) - phi))
    entropy = np.max(np.abs(profile.T - p.T_inf * n ** (p.gamma - 1.0)))

    h = np.diff(x)
    d2 = 2.0 * ((phi[2:] - phi[1:-1]) / h[1:] - (phi[1:-1] - phi[:-2]) / h[:-1]) / (h[1:] + h[:-1])
    poisson = np.max(np.abs(d2 - (n[1:-1] - np.exp(-phi[1:-1]))))

    x_cut = profile.meta.get("x_cut", x[-1]) if not profile.meta.get("trivial") else x[-1]
    region = x <= x_cut
    first_integral = np.max(np.abs(0.5 * profile.dphi[region] ** 2
                                   - potential_from_offset(profile.w[region], p)))
    return ResidualReport(mass_flux=float(mass_flux), momentum=float(momentum),
                          entropy=float(entropy), poisson=float(poisson),
                          first_integral=float(first_integral))


def tail_decay_fit(profile: SheathProfile, regime: Optional[Regime] = None) -> TailReport:
    """
    Fit the far-field decay over the last third of the grid.

    Nondegenerate: rate of log|phi| against x, predicted sqrt(V''(0)).
    Degenerate: slope of log|phi| against log G(x), predicted -2.
    """
    regime = profile.regime if regime is None else regime
    p = profile.params
    start = int(math.ceil(2.0 * profile.cells / 3.0))
    x_win = profile.x[start:]
    phi_win = profile.phi[start:]

    if p.phi_b == 0.0 or len(x_win) < 3:
        raise InsufficientTail("no tail to fit on a constant profile")
    if np.any(np.abs(phi_win) >= 0.1 * abs(p.phi_b)) or np.any(phi_win == 0.0):
        raise InsufficientTail(
            f"|phi| must stay below 0.1|phi_b| on x >= {x_win[0]:.4g}; extend the domain"
        )

    log_phi = np.log(np.abs(phi_win))
    if regime.kind is RegimeKind.NONDEGENERATE:
        fit = stats.linregress(x_win, log_phi)
        fitted, predicted = -fit.slope, predicted_decay_rate(p)
    elif regime.kind is RegimeKind.DEGENERATE:
        from degenerate_asymptotics import G
        fit = stats.linregress(np.log(G(x_win, p)), log_phi)
        fitted, predicted = fit.slope, -2.0
    else:
        raise InvalidParams(f"no tail model for regime {regime.kind.value}")

    logger.info("[STATIONARY] tail fit %.6g (predicted %.6g)", fitted, predicted)
    return TailReport(kind=regime.kind, fitted=float(fitted), predicted=float(predicted),
                      x_lo=float(x_win[0]), x_hi=float(x_win[-1]),
                      r_squared=float(fit.rvalue ** 2))
