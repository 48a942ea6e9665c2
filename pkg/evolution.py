"""
Time integration of the Euler-Poisson system on a truncated half line.

Unknowns v = log n, u, T are advanced explicitly:
    v_t = -u v_x - u_x
    u_t = -u u_x - (R/m)(T_x + T v_x) + phi_x / m
    T_t = -u T_x - (gamma - 1) T u_x
and phi is re-solved from phi_xx = exp(v) - exp(-phi) after every stage.
All characteristic speeds are negative in the sheath regime, so spatial
derivatives use forward one-sided stencils and x = 0 needs no boundary
condition; the node at x = L holds its initial (far-field) values.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import solve_banded

from config import EVOLUTION, OUTPUT
from errors import (CFLViolation, CharacteristicSignViolation, InvalidParams,
                    NewtonDivergence, PositivityLoss)
from params import PlasmaParams, acoustic_speeds, characteristic_speeds

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid x_j = j h on [0, L], j = 0..N"""
    L: float
    N: int

    def __post_init__(self):
        if not self.L > 0:
            raise InvalidParams(f"L must be positive, got {self.L}")
        if int(self.N) != self.N or self.N < EVOLUTION.MIN_CELLS:
            raise InvalidParams(f"N must be an integer >= {EVOLUTION.MIN_CELLS}, got {self.N}")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.N + 1)


@dataclass(frozen=True)
class EvolutionState:
    t: float
    grid: GridSpec
    v: np.ndarray
    u: np.ndarray
    T: np.ndarray
    phi: np.ndarray
    params: PlasmaParams

    def __post_init__(self):
        for name in ("v", "u", "T", "phi"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.N + 1,):
                raise InvalidParams(f"{name} has shape {arr.shape}, grid needs ({self.grid.N + 1},)")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> np.ndarray:
        return np.exp(self.v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x


@dataclass(frozen=True)
class DiagnosticsSeries:
    """Observer samples; values[k, j] is observer names[j] at time t[k]"""
    names: Tuple[str, ...]
    t: np.ndarray
    values: np.ndarray

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def __len__(self) -> int:
        return len(self.t)


Observer = Callable[[EvolutionState, Optional[EvolutionState]], float]


# Poisson -----------------------------------------------------------------

def poisson_residual(phi: np.ndarray, v: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Interior residual D2 phi - (exp(v) - exp(-phi)), nodes 1..N-1"""
    h2 = grid.h ** 2
    return ((phi[2:] - 2.0 * phi[1:-1] + phi[:-2]) / h2
            - (np.exp(v[1:-1]) - np.exp(-phi[1:-1])))


def poisson_jacobian(phi: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Tridiagonal Jacobian of poisson_residual in solve_banded (1, 1) layout"""
    inv_h2 = 1.0 / grid.h ** 2
    size = grid.N - 1
    ab = np.zeros((3, size))
    ab[0, 1:] = inv_h2
    ab[1, :] = -2.0 * inv_h2 - np.exp(-phi[1:-1])
    ab[2, :-1] = inv_h2
    return ab


def poisson_solve(v: np.ndarray, phi_b: float, grid: GridSpec, guess: Optional[np.ndarray] = None,
                  tol: Optional[float] = None, max_iter: Optional[int] = None,
                  phi_far: float = 0.0) -> np.ndarray:
    """
    Newton solve of phi_xx = exp(v) - exp(-phi) with phi(0) = phi_b, phi(L) = phi_far.

    Raises:
        NewtonDivergence: residual above tol after max_iter iterations
    """
    tol = EVOLUTION.POISSON_TOL if tol is None else tol
    max_iter = EVOLUTION.POISSON_MAX_ITER if max_iter is None else max_iter
    if not tol > 0:
        raise InvalidParams(f"tol must be positive, got {tol}")
    v = np.asarray(v, dtype=float)

    if guess is None:
        phi = phi_b + (phi_far - phi_b) * grid.x / grid.L
    else:
        phi = np.array(guess, dtype=float)
        if not np.all(np.isfinite(phi)):
            raise InvalidParams("Poisson initial guess must be finite")
    phi[0] = phi_b
    phi[-1] = phi_far

    for iteration in range(max_iter + 1):
        residual = poisson_residual(phi, v, grid)
        norm = np.max(np.abs(residual))
        if not np.isfinite(norm):
            raise NewtonDivergence(f"Poisson Newton produced non-finite values at iteration {iteration}")
        if norm <= tol:
            logger.debug("Poisson converged in %d iterations (residual %.2e)", iteration, norm)
            return phi
        if iteration == max_iter:
            break
        phi[1:-1] += solve_banded((1, 1), poisson_jacobian(phi, grid), -residual)

    raise NewtonDivergence(f"Poisson Newton residual {norm:.3e} after {max_iter} iterations")


# Transport ---------------------------------------------------------------

def forward_difference(f: np.ndarray, h: float) -> np.ndarray:
    """Second-order forward stencil; first order at node N-1, zero at node N"""
    df = np.zeros_like(f)
    df[:-2] = (-3.0 * f[:-2] + 4.0 * f[1:-1] - f[2:]) / (2.0 * h)
    df[-2] = (f[-1] - f[-2]) / h
    return df


def max_signal_speed(u: np.ndarray, T: np.ndarray, params: PlasmaParams) -> float:
    lam1, _, _ = characteristic_speeds(u, T, params)
    slow, _, fast = acoustic_speeds(u, T, params)
    return float(max(np.max(np.abs(lam1)), np.max(np.abs(slow)), np.max(np.abs(fast))))


def check_characteristic_signs(u: np.ndarray, T: np.ndarray, params: PlasmaParams):
    """Raise unless every characteristic speed is negative"""
    _, _, lam3 = characteristic_speeds(u, T, params)
    _, _, fast = acoustic_speeds(u, T, params)
    top = np.maximum(lam3, fast)
    if np.max(top) >= 0:
        j = int(np.argmax(top))
        raise CharacteristicSignViolation(
            f"characteristic speed {top[j]:.4g} >= 0 at node {j} (u={u[j]:.4g}, T={T[j]:.4g})"
        )


def transport_rhs(state: EvolutionState, strict: Optional[bool] = None
                  ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(v_t, u_t, T_t) with phi taken from the state"""
    strict = EVOLUTION.STRICT_UPWIND if strict is None else strict
    p = state.params
    v, u, T, phi = state.v, state.u, state.T, state.phi
    if strict:
        check_characteristic_signs(u, T, p)

    h = state.grid.h
    v_x = forward_difference(v, h)
    u_x = forward_difference(u, h)
    T_x = forward_difference(T, h)
    phi_x = forward_difference(phi, h)

    dv = -u * v_x - u_x
    du = -u * u_x - (p.R / p.m) * (T_x + T * v_x) + phi_x / p.m
    dT = -u * T_x - (p.gamma - 1.0) * T * u_x
    for d in (dv, du, dT):
        d[-1] = 0.0
    return dv, du, dT


# Time stepping -----------------------------------------------------------

def max_stable_dt(state: EvolutionState, cfl: Optional[float] = None) -> float:
    cfl = EVOLUTION.CFL if cfl is None else cfl
    return cfl * state.grid.h / max_signal_speed(state.u, state.T, state.params)


def _check_positivity(v, u, T, t):
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(u)) and np.all(np.isfinite(T))):
        raise PositivityLoss(f"non-finite fields at t={t:.6g}")
    if np.any(T <= 0):
        j = int(np.argmin(T))
        raise PositivityLoss(f"T={T[j]:.4g} <= 0 at node {j}, t={t:.6g}")


def _stage(state: EvolutionState, v, u, T, t, poisson_tol) -> EvolutionState:
    _check_positivity(v, u, T, t)
    phi = poisson_solve(v, state.params.phi_b, state.grid, guess=state.phi, tol=poisson_tol,
                        phi_far=state.phi[-1])
    return EvolutionState(t=t, grid=state.grid, v=v, u=u, T=T, phi=phi, params=state.params)


def step(state: EvolutionState, dt: float, cfl: Optional[float] = None,
         strict: Optional[bool] = None, poisson_tol: Optional[float] = None) -> EvolutionState:
    """
    One SSP-RK2 (Heun) step with a Poisson solve per stage.

    Raises:
        CFLViolation: dt < 0 or dt above cfl * h / max speed
        PositivityLoss: T <= 0 or non-finite fields after a stage
    """
    if dt == 0:
        return state
    limit = max_stable_dt(state, cfl)
    if dt < 0 or dt > limit * (1.0 + 1e-12):
        raise CFLViolation(f"dt={dt:.6g} outside [0, {limit:.6g}]")

    dv, du, dT = transport_rhs(state, strict)
    first = _stage(state, state.v + dt * dv, state.u + dt * du, state.T + dt * dT,
                   state.t + dt, poisson_tol)

    dv1, du1, dT1 = transport_rhs(first, strict)
    return _stage(first,
                  0.5 * (state.v + first.v + dt * dv1),
                  0.5 * (state.u + first.u + dt * du1),
                  0.5 * (state.T + first.T + dt * dT1),
                  state.t + dt, poisson_tol)


def advance(state: EvolutionState, t_target: float, cfl: Optional[float] = None,
            strict: Optional[bool] = None, poisson_tol: Optional[float] = None) -> EvolutionState:
    """Step at the stable dt until t_target, without sampling"""
    if t_target < state.t:
        raise InvalidParams(f"cannot advance from t={state.t} back to {t_target}")
    while t_target - state.t > 1e-12 * max(1.0, t_target):
        state = step(state, min(max_stable_dt(state, cfl), t_target - state.t), cfl, strict,
                     poisson_tol)
    return replace(state, t=t_target)


def _sample_times(t_start: float, t_end: float, period: float) -> List[float]:
    """t_start, then every k * period in (t_start, t_end], then t_end"""
    slack = 1e-9 * max(1.0, t_end)
    first = int(math.floor((t_start + slack) / period)) + 1
    last = int(math.floor((t_end + slack) / period))
    times = [t_start] + [k * period for k in range(first, last + 1)]
    if t_end - times[-1] > slack:
        times.append(t_end)
    return times


def evolve(initial: EvolutionState, t_end: float, observer_period: float,
           observers: Mapping[str, Observer], *, baseline: Optional[EvolutionState] = None,
           cfl: Optional[float] = None, strict: Optional[bool] = None,
           poisson_tol: Optional[float] = None, stream_path: Optional[str] = None,
           on_sample: Optional[Callable[[int, EvolutionState], None]] = None) -> DiagnosticsSeries:
    """
    Advance to t_end, sampling every observer at t_k = k * observer_period.

    Args:
        initial: Starting state
        t_end: Final time (>= 0)
        observer_period: Sampling interval (> 0)
        observers: name -> observer(state, baseline)
        baseline: Optional reference state advanced in lockstep with the same steps
        stream_path: CSV "t,<names>" written as samples arrive
        on_sample: Called with (sample index, state) at every sample

    Returns:
        DiagnosticsSeries with one row per sample
    """
    if t_end < initial.t:
        raise InvalidParams(f"t_end={t_end} lies before the initial time {initial.t}")
    if not observer_period > 0:
        raise InvalidParams(f"observer_period must be positive, got {observer_period}")
    if baseline is not None and baseline.grid != initial.grid:
        raise InvalidParams("baseline must live on the same grid as the initial state")

    names = tuple(observers)
    times = _sample_times(initial.t, t_end, observer_period)
    rows = []
    stream = open(stream_path, "w") if stream_path else None
    if stream:
        stream.write(",".join(("t",) + names) + "\n")

    state = initial
    if baseline is not None and baseline.t != initial.t:
        baseline = replace(baseline, t=initial.t)
    steps = 0
    try:
        for k, target in enumerate(times):
            while target - state.t > 1e-12 * max(1.0, target):
                dt = min(max_stable_dt(state, cfl), target - state.t)
                if baseline is not None:
                    dt = min(dt, max_stable_dt(baseline, cfl))
                state = step(state, dt, cfl, strict, poisson_tol)
                if baseline is not None:
                    baseline = step(baseline, dt, cfl, strict, poisson_tol)
                steps += 1
            state = replace(state, t=target)
            if baseline is not None:
                baseline = replace(baseline, t=target)

            row = [target] + [float(observers[name](state, baseline)) for name in names]
            rows.append(row)
            if stream:
                stream.write(",".join(OUTPUT.FLOAT_FORMAT % value for value in row) + "\n")
                stream.flush()
            if on_sample is not None:
                on_sample(k, state)
            logger.debug("[EVOLVE] t=%.4f steps=%d %s", target, steps,
                         " ".join(f"{n}={r:.4e}" for n, r in zip(names, row[1:])))
    finally:
        if stream:
            stream.close()

    logger.info("[EVOLVE] reached t=%.6g in %d steps (%d samples)", t_end, steps, len(rows))
    data = np.array(rows, dtype=float).reshape(len(rows), len(names) + 1)
    return DiagnosticsSeries(names=names, t=data[:, 0], values=data[:, 1:])


# Initial data ------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationView:
    """Perturbation fields against a reference (stationary profile or paired baseline)"""
    x: np.ndarray
    varphi: np.ndarray
    psi: np.ndarray
    zeta: np.ndarray
    sigma: np.ndarray
    n_ref: np.ndarray
    phi_ref: np.ndarray
    u: np.ndarray
    T: np.ndarray
    params: PlasmaParams

    @classmethod
    def of(cls, state: EvolutionState, profile=None,
           baseline: Optional[EvolutionState] = None) -> "PerturbationView":
        if baseline is not None:
            v_ref, u_ref, T_ref, phi_ref = baseline.v, baseline.u, baseline.T, baseline.phi
        elif profile is not None:
            if len(profile.x) != len(state.v) or not np.allclose(profile.x, state.x, rtol=1e-12, atol=0.0):
                raise InvalidParams("profile grid does not match the evolution grid")
            v_ref, u_ref, T_ref, phi_ref = profile.v, profile.u, profile.T, profile.phi
        else:
            raise InvalidParams("a perturbation view needs a profile or a baseline state")
        return cls(x=state.x, varphi=state.v - v_ref, psi=state.u - u_ref, zeta=state.T - T_ref,
                   sigma=state.phi - phi_ref, n_ref=np.exp(v_ref), phi_ref=np.asarray(phi_ref),
                   u=state.u, T=state.T, params=state.params)

    def components(self) -> Dict[str, np.ndarray]:
        return {"varphi": self.varphi, "psi": self.psi, "zeta": self.zeta}


PERTURBATION_SHAPES = ("gaussian", "compact-bump")
PERTURBATION_COMPONENTS = ("varphi", "psi", "zeta")


@dataclass(frozen=True)
class PerturbationSpec:
    """Bump added to selected components; center and width default to L/4 and L/40"""
    shape: str = "gaussian"
    amplitude: float = EVOLUTION.PERTURBATION_AMPLITUDE
    center: Optional[float] = None
    width: Optional[float] = None
    components: Sequence[str] = ("psi",)
    weight_compat: Optional[object] = None  # diagnostics.WeightSpec

    def __post_init__(self):
        if self.shape not in PERTURBATION_SHAPES:
            raise InvalidParams(f"shape must be one of {PERTURBATION_SHAPES}, got {self.shape!r}")
        bad = [c for c in self.components if c not in PERTURBATION_COMPONENTS]
        if bad:
            raise InvalidParams(f"unknown perturbation components {bad}")
        if self.width is not None and not self.width > 0:
            raise InvalidParams(f"width must be positive, got {self.width}")


def perturbation_shape(x: np.ndarray, spec: PerturbationSpec, L: float) -> np.ndarray:
    center = L / 4.0 if spec.center is None else spec.center
    width = L / 40.0 if spec.width is None else spec.width
    r = (x - center) / width
    if spec.shape == "gaussian":
        bump = np.exp(-r ** 2)
    else:
        bump = np.zeros_like(x)
        inside = np.abs(r) < 1.0
        bump[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    bump[-1] = 0.0
    return spec.amplitude * bump


def state_from_profile(profile, poisson_tol: Optional[float] = None) -> EvolutionState:
    """Stationary profile on its own grid, with phi from the discrete Poisson equation"""
    grid = GridSpec(profile.L, profile.cells)
    if not np.allclose(profile.x, grid.x, rtol=1e-12, atol=1e-12 * profile.L):
        raise InvalidParams("evolution needs a uniform profile grid")
    phi = poisson_solve(profile.v, profile.params.phi_b, grid, guess=profile.phi,
                        tol=poisson_tol, phi_far=float(profile.phi[-1]))
    return EvolutionState(t=0.0, grid=grid, v=profile.v, u=profile.u, T=profile.T, phi=phi,
                          params=profile.params)


def make_initial_perturbation(profile, spec: Optional[PerturbationSpec] = None,
                              poisson_tol: Optional[float] = None) -> EvolutionState:
    """
    Stationary profile plus a localized bump in the chosen components.

    Raises:
        CharacteristicSignViolation: the perturbed flow has a non-negative characteristic
    """
    spec = PerturbationSpec() if spec is None else spec
    if spec.amplitude == 0:
        return state_from_profile(profile, poisson_tol)

    grid = GridSpec(profile.L, profile.cells)
    bump = perturbation_shape(grid.x, spec, grid.L)
    fields = {"varphi": np.array(profile.v), "psi": np.array(profile.u), "zeta": np.array(profile.T)}
    for component in spec.components:
        fields[component] = fields[component] + bump
    v, u, T = fields["varphi"], fields["psi"], fields["zeta"]

    check_characteristic_signs(u, T, profile.params)
    _check_positivity(v, u, T, 0.0)

    if spec.weight_compat is not None:
        from diagnostics import weighted_norm  # diagnostics imports this module
        norm = weighted_norm([bump] * len(spec.components), grid.x, spec.weight_compat, order=2)
        if not np.isfinite(norm):
            raise InvalidParams("perturbation has an infinite weighted norm")
        logger.info("[EVOLVE] initial perturbation weighted H2 norm %.6e", norm)

    phi = poisson_solve(v, profile.params.phi_b, grid, guess=profile.phi, tol=poisson_tol,
                        phi_far=float(profile.phi[-1]))
    return EvolutionState(t=0.0, grid=grid, v=v, u=u, T=T, phi=phi, params=profile.params)
