import math

import numpy as np
import pytest
from scipy import integrate

from diagnostics import drift_observer, mass_budget
from errors import (CFLViolation, CharacteristicSignViolation, InvalidParams,
                    NewtonDivergence)
from evolution import (DiagnosticsSeries, EvolutionState, GridSpec, PerturbationSpec,
                       PerturbationView, _sample_times, advance, check_characteristic_signs, evolve,
                       forward_difference, make_initial_perturbation, max_stable_dt,
                       perturbation_shape, poisson_jacobian, poisson_residual, poisson_solve,
                       state_from_profile, step, transport_rhs)
from stationary import GridRequest, solve_stationary


def band_apply(ab, d):
    Jd = ab[1] * d
    Jd[:-1] += ab[0, 1:] * d[1:]
    Jd[1:] += ab[2, :-1] * d[:-1]
    return Jd


def test_grid_validation():
    with pytest.raises(InvalidParams):
        GridSpec(L=10.0, N=8)
    with pytest.raises(InvalidParams):
        GridSpec(L=0.0, N=64)
    grid = GridSpec(L=10.0, N=64)
    assert grid.h == pytest.approx(10.0 / 64)
    assert len(grid.x) == 65


def test_state_shape_checked(nondegenerate_params):
    grid = GridSpec(L=10.0, N=32)
    good = np.zeros(33)
    with pytest.raises(InvalidParams):
        EvolutionState(t=0.0, grid=grid, v=np.zeros(32), u=good, T=good, phi=good,
                       params=nondegenerate_params)


def test_forward_difference_exact_on_quadratics():
    h = 0.1
    x = np.arange(21) * h
    df = forward_difference(x ** 2, h)
    np.testing.assert_allclose(df[:-2], 2.0 * x[:-2], atol=1e-12)
    assert df[-2] == pytest.approx(2.0 * x[-2] + h)
    assert df[-1] == 0.0


def test_poisson_jacobian_matches_directional_difference():
    grid = GridSpec(L=10.0, N=64)
    x = grid.x
    phi = 0.1 * np.sin(x)
    v = 0.05 * np.cos(x)
    rng = np.random.default_rng(7)
    d = np.zeros_like(x)
    d[1:-1] = rng.standard_normal(grid.N - 1)

    delta = 1e-7
    fd = (poisson_residual(phi + delta * d, v, grid) - poisson_residual(phi, v, grid)) / delta
    Jd = band_apply(poisson_jacobian(phi, grid), d[1:-1])
    np.testing.assert_allclose(Jd, fd, rtol=1e-6, atol=1e-6 * np.max(np.abs(Jd)))


def test_poisson_solve_converges_at_second_order(nondegenerate_params):
    errors = []
    for N in (200, 400, 800):
        profile = solve_stationary(nondegenerate_params, GridRequest(L=20.0, N=N))
        grid = GridSpec(profile.L, N)
        phi = poisson_solve(profile.v, nondegenerate_params.phi_b, grid, tol=1e-12,
                            phi_far=float(profile.phi[-1]))
        assert phi[0] == nondegenerate_params.phi_b
        errors.append(np.max(np.abs(phi - profile.phi)))
    for coarse, fine in zip(errors, errors[1:]):
        assert 3.5 <= coarse / fine <= 4.5


def test_poisson_solve_failures():
    grid = GridSpec(L=10.0, N=32)
    with pytest.raises(NewtonDivergence):
        poisson_solve(np.zeros(33), -0.5, grid, max_iter=0)
    with pytest.raises(InvalidParams):
        poisson_solve(np.zeros(33), -0.5, grid, tol=0.0)
    with pytest.raises(InvalidParams):
        poisson_solve(np.zeros(33), -0.5, grid, guess=np.full(33, np.nan))


def test_characteristic_signs(nondegenerate_params):
    T = np.full(5, 0.5)
    check_characteristic_signs(np.full(5, -2.0), T, nondegenerate_params)
    with pytest.raises(CharacteristicSignViolation):
        check_characteristic_signs(np.array([-2.0, -2.0, -0.5, -2.0, -2.0]), T, nondegenerate_params)


def test_state_from_profile(coarse_nondegenerate_profile):
    state = state_from_profile(coarse_nondegenerate_profile)
    assert state.t == 0.0
    assert state.grid.N == 256
    np.testing.assert_allclose(state.n, coarse_nondegenerate_profile.n, rtol=1e-12)
    assert np.max(np.abs(state.phi - coarse_nondegenerate_profile.phi)) < 1e-3


def test_step_guards(coarse_nondegenerate_profile):
    state = state_from_profile(coarse_nondegenerate_profile)
    assert step(state, 0.0) is state
    with pytest.raises(CFLViolation):
        step(state, -1e-3)
    with pytest.raises(CFLViolation):
        step(state, 2.0 * max_stable_dt(state))
    advanced = step(state, max_stable_dt(state))
    assert advanced.t == pytest.approx(max_stable_dt(state))
    assert advanced.phi[0] == state.params.phi_b


def test_perturbation_spec_validation():
    with pytest.raises(InvalidParams):
        PerturbationSpec(shape="square")
    with pytest.raises(InvalidParams):
        PerturbationSpec(components=("rho",))
    with pytest.raises(InvalidParams):
        PerturbationSpec(width=0.0)


def test_compact_bump_support():
    x = np.linspace(0.0, 40.0, 401)
    bump = perturbation_shape(x, PerturbationSpec(shape="compact-bump", amplitude=2.0), 40.0)
    assert bump.max() == pytest.approx(2.0)
    assert np.all(bump[np.abs(x - 10.0) >= 1.0] == 0.0)
    assert bump[-1] == 0.0


def test_initial_perturbation(coarse_nondegenerate_profile):
    profile = coarse_nondegenerate_profile
    state = make_initial_perturbation(profile)
    view = PerturbationView.of(state, profile)
    np.testing.assert_array_equal(view.varphi, 0.0)
    np.testing.assert_array_equal(view.zeta, 0.0)
    j = int(np.argmax(view.psi))
    assert view.psi[j] == pytest.approx(1e-3, rel=1e-2)
    assert state.x[j] == pytest.approx(profile.L / 4.0, abs=profile.L / profile.cells)


def test_zero_amplitude_is_the_profile_state(coarse_nondegenerate_profile):
    state = make_initial_perturbation(coarse_nondegenerate_profile, PerturbationSpec(amplitude=0.0))
    reference = state_from_profile(coarse_nondegenerate_profile)
    np.testing.assert_array_equal(state.phi, reference.phi)


def test_large_bump_breaks_characteristics(coarse_nondegenerate_profile):
    with pytest.raises(CharacteristicSignViolation):
        make_initial_perturbation(coarse_nondegenerate_profile, PerturbationSpec(amplitude=3.0))


def test_view_needs_a_reference(coarse_nondegenerate_profile, nondegenerate_profile):
    state = state_from_profile(coarse_nondegenerate_profile)
    with pytest.raises(InvalidParams):
        PerturbationView.of(state)
    with pytest.raises(InvalidParams):
        PerturbationView.of(state, nondegenerate_profile)


@pytest.mark.parametrize("start, end, period, expected", [
    (0.0, 1.0, 0.25, [0.0, 0.25, 0.5, 0.75, 1.0]),
    (0.0, 1.0, 0.3, [0.0, 0.3, 0.6, 0.9, 1.0]),
    (0.5, 1.0, 0.25, [0.5, 0.75, 1.0]),
    (0.0, 0.0, 0.1, [0.0]),
])
def test_sample_times(start, end, period, expected):
    assert _sample_times(start, end, period) == pytest.approx(expected)


def test_evolve_streams_samples(coarse_nondegenerate_profile, tmp_path):
    initial = make_initial_perturbation(coarse_nondegenerate_profile)
    path = tmp_path / "series.csv"
    seen = []
    series = evolve(initial, 0.5, 0.1, {"u0": lambda s, b: s.u[0]}, stream_path=str(path),
                    on_sample=lambda k, s: seen.append((k, s.t)))
    assert len(series) == 6
    np.testing.assert_allclose(series.t, np.arange(6) * 0.1, atol=1e-15)
    assert seen[-1] == (5, series.t[-1])
    lines = path.read_text().splitlines()
    assert lines[0] == "t,u0"
    assert len(lines) == 7
    assert float(lines[-1].split(",")[1]) == series.column("u0")[-1]


def test_evolve_argument_checks(coarse_nondegenerate_profile):
    initial = state_from_profile(coarse_nondegenerate_profile)
    with pytest.raises(InvalidParams):
        evolve(initial, -1.0, 0.1, {})
    with pytest.raises(InvalidParams):
        evolve(initial, 1.0, 0.0, {})


def test_paired_baseline_cancels_drift(coarse_nondegenerate_profile):
    baseline = state_from_profile(coarse_nondegenerate_profile)
    observers = {"gap": lambda s, b: float(np.max(np.abs(s.u - b.u)))}
    series = evolve(baseline, 1.0, 0.25, observers, baseline=baseline)
    np.testing.assert_array_equal(series.column("gap"), 0.0)


def test_scheme_converges_at_second_order(nondegenerate_params):
    spec = PerturbationSpec(center=8.0, width=2.0)
    finals = []
    for N in (256, 512, 1024):
        profile = solve_stationary(nondegenerate_params, GridRequest(L=20.0, N=N))
        initial = make_initial_perturbation(profile, spec, poisson_tol=1e-12)
        evolve(initial, 2.0, 2.0, {}, poisson_tol=1e-12,
               on_sample=lambda k, s: finals.append(s) if k == 1 else None)
    u256, u512, u1024 = (s.u for s in finals)
    coarse_gap = np.max(np.abs(u256 - u512[::2]))
    fine_gap = np.max(np.abs(u512 - u1024[::2]))
    assert math.log2(coarse_gap / fine_gap) >= 1.8


def test_advance_reaches_target(coarse_nondegenerate_profile):
    state = state_from_profile(coarse_nondegenerate_profile)
    later = advance(state, 0.3)
    assert later.t == 0.3
    with pytest.raises(InvalidParams):
        advance(later, 0.1)


def far_field_state(params, L=10.0, N=64):
    grid = GridSpec(L=L, N=N)
    return EvolutionState(t=0.0, grid=grid, v=np.zeros(N + 1), u=np.full(N + 1, params.u_inf),
                          T=np.full(N + 1, params.T_inf), phi=np.zeros(N + 1), params=params)


def test_transport_vanishes_on_constant_state(nondegenerate_params):
    state = far_field_state(nondegenerate_params.with_phi_b(0.0))
    for d in transport_rhs(state):
        assert np.all(d == 0.0)


def test_transport_on_stationary_state_is_second_order(nondegenerate_params):
    sizes = []
    for N in (256, 512):
        profile = solve_stationary(nondegenerate_params, GridRequest(L=20.0, N=N))
        state = state_from_profile(profile, poisson_tol=1e-12)
        sizes.append(max(np.max(np.abs(d)) for d in transport_rhs(state)))
    assert sizes[0] < 1e-2
    assert sizes[0] / sizes[1] >= 3.0


def test_transport_strict_mode_guards_characteristics(coarse_nondegenerate_profile):
    state = state_from_profile(coarse_nondegenerate_profile)
    reversed_flow = EvolutionState(t=0.0, grid=state.grid, v=state.v, u=state.u + 3.0, T=state.T,
                                   phi=state.phi, params=state.params)
    with pytest.raises(CharacteristicSignViolation):
        transport_rhs(reversed_flow, strict=True)
    assert all(np.all(np.isfinite(d)) for d in transport_rhs(reversed_flow, strict=False))


def test_trivial_equilibrium_is_preserved(nondegenerate_params):
    params = nondegenerate_params.with_phi_b(0.0)
    profile = solve_stationary(params, GridRequest(L=10.0, N=64))
    initial = state_from_profile(profile)
    observers = {"drift": drift_observer(initial),
                 "phi": lambda s, b: float(np.max(np.abs(s.phi)))}
    series = evolve(initial, 5.0, 0.5, observers)
    assert len(series) == 11
    np.testing.assert_array_equal(series.column("drift"), 0.0)
    np.testing.assert_array_equal(series.column("phi"), 0.0)


def test_mass_change_matches_boundary_fluxes(nondegenerate_params):
    profile = solve_stationary(nondegenerate_params, GridRequest(L=20.0, N=512))
    spec = PerturbationSpec(center=8.0, width=2.0, components=("varphi",))
    initial = make_initial_perturbation(profile, spec, poisson_tol=1e-12)
    baseline = state_from_profile(profile, poisson_tol=1e-12)
    observers = {
        "mass": lambda s, b: mass_budget(s).total - mass_budget(b).total,
        "rate": lambda s, b: mass_budget(s).rate - mass_budget(b).rate,
    }
    series = evolve(initial, 6.0, 0.02, observers, baseline=baseline, poisson_tol=1e-12)
    mass = series.column("mass")
    change = mass[-1] - mass[0]
    assert abs(change) > 1e-5
    assert integrate.trapezoid(series.column("rate"), series.t) == pytest.approx(change, rel=2e-2)


def test_diagnostics_series_columns():
    series = DiagnosticsSeries(names=("norm", "energy"), t=np.array([0.0, 0.5, 1.0]),
                               values=np.array([[3.0, 9.0], [2.0, 4.0], [1.0, 1.0]]))
    assert len(series) == 3
    np.testing.assert_array_equal(series.column("energy"), [9.0, 4.0, 1.0])
    with pytest.raises(ValueError):
        series.column("mass")
