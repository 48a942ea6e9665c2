import math

import numpy as np
import pytest

from degenerate_asymptotics import lambda0
from diagnostics import (DecayFit, QuadraticFormReport, WeightKind, WeightSpec, decay_fit,
                         drift_observer, energy_functional, mass_budget, mass_observer,
                         norm_observer, predicted_norm_exponent, quadratic_form_check,
                         quadratic_form_coefficients, reference_beta, wall_flux,
                         weight_ratio, weighted_norm)
from errors import DegenerateFit, InvalidParams
from evolution import PerturbationSpec, PerturbationView, make_initial_perturbation, state_from_profile
from params import RegimeKind


@pytest.fixture(scope="module")
def small_degenerate(degenerate_params):
    return degenerate_params.with_phi_b(1e-4)


def test_weight_spec():
    w = WeightSpec.algebraic(4.0, 0.5)
    assert w.kind is WeightKind.ALGEBRAIC
    assert w(np.array([0.0, 2.0])) == pytest.approx([1.0, 16.0])
    assert WeightSpec.exponential(1.0)(1.0) == pytest.approx(math.e)
    with pytest.raises(InvalidParams):
        WeightSpec.exponential(0.0)


def test_weighted_norm_of_known_fields():
    x = np.linspace(0.0, math.pi, 2001)
    unit = WeightSpec.algebraic(0.0, 1.0)
    assert weighted_norm(np.sin(x), x, unit) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-6)
    # sin^2 + cos^2 = 1 on [0, pi]
    assert weighted_norm(np.sin(x), x, unit, order=1) == pytest.approx(math.sqrt(math.pi), rel=1e-5)
    both = weighted_norm([np.sin(x), np.sin(x)], x, unit)
    assert both == pytest.approx(math.sqrt(math.pi), rel=1e-6)
    with pytest.raises(InvalidParams):
        weighted_norm(np.sin(x), x, unit, order=3)


def test_weighted_norm_respects_weight():
    x = np.linspace(0.0, 10.0, 1001)
    f = np.exp(-x)
    plain = weighted_norm(f, x, WeightSpec.algebraic(0.0, 1.0))
    weighted = weighted_norm(f, x, WeightSpec.exponential(1.0))
    assert plain == pytest.approx(math.sqrt(0.5), rel=1e-4)
    assert weighted == pytest.approx(1.0, rel=1e-4)


def test_exponential_decay_fit():
    t = np.linspace(0.0, 10.0, 101)
    fit = decay_fit(t, 3.0 * np.exp(-0.7 * t))
    assert fit.model == "exp"
    assert fit.mu == pytest.approx(0.7, rel=1e-10)
    assert fit.window == (5.0, 10.0)
    assert fit.samples == 51
    assert fit.r_squared == pytest.approx(1.0)


def test_algebraic_decay_fit():
    t = np.linspace(0.0, 50.0, 201)
    fit = decay_fit(t, 2.0 * (1.0 + 0.1 * t) ** -1.5, model="alg", window=(10.0, 50.0), beta=0.1)
    assert fit.exponent == pytest.approx(-1.5, rel=1e-10)
    assert fit.beta == 0.1
    assert DecayFit.from_dict(fit.to_dict()).exponent == fit.exponent


@pytest.mark.parametrize("t, norm", [
    (np.linspace(0.0, 1.0, 12), np.ones(12)),
    (np.linspace(0.0, 1.0, 12), np.linspace(1.0, -0.1, 12)),
    (np.linspace(0.0, 1.0, 8), np.linspace(1.0, 0.5, 8)),
])
def test_degenerate_fits(t, norm):
    with pytest.raises(DegenerateFit):
        decay_fit(t, norm, window=(0.0, 1.0))


def test_fit_argument_checks():
    t = np.linspace(0.0, 1.0, 20)
    with pytest.raises(InvalidParams):
        decay_fit(t, np.exp(-t), model="power")
    with pytest.raises(InvalidParams):
        decay_fit(t, np.exp(-t), model="alg")


def test_predicted_exponents():
    assert predicted_norm_exponent(RegimeKind.DEGENERATE, 5.0, 4.0) == pytest.approx(-1.0 / 6.0)
    assert predicted_norm_exponent(RegimeKind.NONDEGENERATE, 5.0, 4.0) == pytest.approx(-0.5)
    with pytest.raises(InvalidParams):
        predicted_norm_exponent(RegimeKind.DEGENERATE, 4.0, 5.0)
    with pytest.raises(InvalidParams):
        predicted_norm_exponent(RegimeKind.SUBSONIC, 5.0, 4.0)


def test_energy_and_fluxes_vanish_without_perturbation(coarse_nondegenerate_profile):
    state = state_from_profile(coarse_nondegenerate_profile)
    view = PerturbationView.of(state, baseline=state)
    weight = WeightSpec.exponential(0.5)
    assert energy_functional(view, weight) == 0.0
    flux = wall_flux(view)
    assert flux.zeroth == 0.0 and flux.first == 0.0


def test_energy_is_positive_and_quadratic(coarse_nondegenerate_profile):
    weight = WeightSpec.exponential(0.4)
    energies = []
    for amplitude in (1e-4, 2e-4):
        spec = PerturbationSpec(amplitude=amplitude, components=("varphi", "psi"))
        state = make_initial_perturbation(coarse_nondegenerate_profile, spec)
        energies.append(energy_functional(PerturbationView.of(state, coarse_nondegenerate_profile), weight))
    assert energies[0] > 0
    assert energies[1] / energies[0] == pytest.approx(4.0, rel=1e-6)


def test_observers(coarse_nondegenerate_profile):
    profile = coarse_nondegenerate_profile
    initial = make_initial_perturbation(profile)
    weight = WeightSpec.exponential(0.4)
    assert norm_observer(profile, weight)(initial) > 0
    assert norm_observer(profile, weight, components=("varphi",))(initial) == 0.0
    assert drift_observer(initial)(initial) == 0.0
    budget = mass_budget(initial)
    assert mass_observer()(initial) == budget.total
    assert budget.wall_flux == pytest.approx(profile.params.u_inf, rel=1e-12)
    assert budget.rate == pytest.approx(0.0, abs=1e-12)


def test_reference_beta(degenerate_params, nondegenerate_params):
    Gamma = math.sqrt(5.0 / 12.0)
    assert reference_beta(degenerate_params) == pytest.approx(0.9 * Gamma * 0.1)
    assert reference_beta(degenerate_params, 0.5) == pytest.approx(0.5 * Gamma * 0.1)
    with pytest.raises(InvalidParams):
        reference_beta(nondegenerate_params)


def test_quadratic_form_passes_at_reference_point(small_degenerate):
    report = quadratic_form_check(small_degenerate, epsilon=4.0)
    assert report.passed
    assert report.c_cubic > 0 and report.c_coercive > 0
    assert len(report.samples) == 1000
    assert np.all(report.column("q1") > 0)
    assert np.all(report.column("disc12") < 0)
    assert report.rows().shape == (1000, 10)
    assert QuadraticFormReport.from_dict(report.to_dict()).passed


def test_quadratic_form_fails_beyond_window(small_degenerate):
    epsilon = lambda0(small_degenerate.gamma) + 0.5
    report = quadratic_form_check(small_degenerate, epsilon=epsilon,
                                  x_samples=np.linspace(0.0, 1000.0, 2000))
    assert not report.passed


def test_quadratic_form_far_field_limit(small_degenerate):
    epsilon = 4.0
    beta = reference_beta(small_degenerate)
    q1, q2, q3, q4, q5 = quadratic_form_coefficients(small_degenerate, epsilon, beta, np.array([1e8]))
    RT, gamma = small_degenerate.RT, small_degenerate.gamma
    disc12 = q2 ** 2 - 4.0 * q1 * q3
    assert disc12[0] == pytest.approx(epsilon ** 2 * RT ** 2 * (1.0 - gamma), rel=1e-6)
    assert q1[0] == pytest.approx(epsilon * RT / 2.0, rel=1e-6)


def test_quadratic_form_argument_checks(small_degenerate, nondegenerate_params):
    with pytest.raises(InvalidParams):
        quadratic_form_check(nondegenerate_params)
    with pytest.raises(InvalidParams):
        quadratic_form_check(small_degenerate, beta=1.0)
    with pytest.raises(InvalidParams):
        quadratic_form_check(small_degenerate, epsilon=0.0)


@pytest.mark.parametrize("order", [0, 1, 2])
def test_weighted_norm_is_absolutely_homogeneous(order):
    x = np.linspace(0.0, 10.0, 401)
    f = np.exp(-x) * np.cos(3.0 * x)
    g = x / (1.0 + x ** 2)
    weight = WeightSpec.algebraic(2.0, 0.5)
    base = weighted_norm([f, g], x, weight, order)
    for s in (-3.0, 0.5, 10.0):
        assert weighted_norm([s * f, s * g], x, weight, order) == pytest.approx(abs(s) * base, rel=1e-12)


def test_weighted_norm_grows_with_alpha():
    x = np.linspace(0.0, 20.0, 801)
    f = np.exp(-0.2 * (x - 5.0) ** 2)
    norms = [weighted_norm(f, x, WeightSpec.algebraic(alpha, 1.0), order=1) for alpha in (0.0, 1.0, 2.0, 4.0)]
    assert np.all(np.diff(norms) > 0)


def test_weight_ratio_is_at_least_one(small_degenerate):
    x = np.linspace(0.0, 1e4, 2001)
    critical_beta = reference_beta(small_degenerate, 1.0)
    for beta in (reference_beta(small_degenerate), critical_beta):
        B, S = weight_ratio(x, small_degenerate, beta)
        assert np.all(B > 0)
        assert np.all(S >= 1.0 - 1e-14)
    _, S = weight_ratio(x, small_degenerate, critical_beta)
    np.testing.assert_allclose(S, 1.0, rtol=1e-14)


def test_energy_controls_weighted_h1_norm(coarse_nondegenerate_profile):
    profile = coarse_nondegenerate_profile
    p = profile.params
    state = make_initial_perturbation(profile, PerturbationSpec(components=("varphi", "psi", "zeta")))
    view = PerturbationView.of(state, profile)
    weight = WeightSpec.exponential(0.2)
    k = np.minimum.reduce([0.5 * view.n_ref * p.R * view.T, 0.5 * view.n_ref * p.m,
                           view.n_ref * p.R / (2.0 * (p.gamma - 1.0) * view.T)])
    c = min(np.min(np.exp(-view.phi_ref) * k), np.min(k))
    assert c > 0
    norm = weighted_norm([view.varphi, view.psi, view.zeta], view.x, weight, order=1)
    assert norm > 0
    assert energy_functional(view, weight) >= c * norm ** 2
