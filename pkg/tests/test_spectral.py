import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dicke_array.core_model import ArrayParams, mqw_params
from dicke_array.dynamics import oscillation_period
from dicke_array.errors import FitError
from dicke_array.spectral import (
    EffectiveModel,
    LorentzianFit,
    SpectralDensity,
    central_lobe,
    collective_coupling,
    coupling_from_period,
    dos,
    effective_model_from,
    fejer_kernel,
    kappa_from_width,
    lorentzian,
    lorentzian_fit,
    normalize,
)


def synthetic(amplitude=1.0, center=0.0, fwhm=0.01, n=401, span=0.05):
    q = np.linspace(center - span, center + span, n)
    return SpectralDensity(q, lorentzian(q, amplitude, center, fwhm))


@pytest.mark.parametrize("n", [1, 2, 17, 300])
def test_dos_at_zero_is_n_squared(n):
    assert dos(mqw_params(n), [0.0]).values[0] == pytest.approx(n * n, rel=1e-12)


def test_two_emitter_dos():
    p = mqw_params(2)
    q = np.linspace(-0.02, 0.02, 101)
    np.testing.assert_allclose(dos(p, q).values, 2 + 2 * np.cos(q * p.spacing), atol=1e-12)


@pytest.mark.parametrize("n", [2, 10, 200])
def test_first_zero_of_central_lobe(n):
    p = mqw_params(n)
    edge = central_lobe(p)[1]
    assert edge == pytest.approx(2 * math.pi / (n * p.spacing))
    assert dos(p, [edge]).values[0] < 1e-9 * n * n


def test_pair_sum_equals_fejer_kernel():
    rng = np.random.default_rng(7)
    for n in range(2, 65):
        p = ArrayParams(n_emitters=n, spacing=1.0, wavevector=math.pi)
        q = rng.uniform(-20, 20, 1000)
        q = q[np.abs(np.sin(q / 2)) > 1e-3]
        np.testing.assert_allclose(dos(p, q).values, fejer_kernel(q, n), rtol=1e-10, atol=1e-10 * n * n)


def test_fejer_limit_at_lattice_points():
    assert fejer_kernel(2 * math.pi * 3, 7) == pytest.approx(49)


@settings(max_examples=60)
@given(st.integers(1, 50), st.floats(-0.1, 0.1, allow_nan=False))
def test_dos_even_and_periodic(n, q):
    p = mqw_params(n)
    period = 2 * math.pi / p.spacing
    v = dos(p, [q, -q, q + period]).values
    assert v[0] == pytest.approx(v[1], rel=1e-12, abs=1e-12 * n * n)
    assert v[0] == pytest.approx(v[2], rel=1e-8, abs=1e-8 * n * n)


def test_normalize_peak_and_idempotent():
    density = normalize(dos(mqw_params(300), np.linspace(-1e-4, 1e-4, 401)))
    assert density.normalized and np.max(density.values) == 1.0
    assert density.values[200] == 1.0
    again = normalize(density)
    np.testing.assert_array_equal(again.values, density.values)


def test_normalize_rejects_zero():
    with pytest.raises(ValueError):
        normalize(SpectralDensity(np.arange(3.0), np.zeros(3)))


def test_exact_lorentzian_recovered():
    fit = lorentzian_fit(synthetic(), (-0.05, 0.05))
    assert fit.amplitude == pytest.approx(1.0, abs=1e-8)
    assert fit.center == pytest.approx(0.0, abs=1e-8)
    assert fit.fwhm == pytest.approx(0.01, abs=1e-8)
    assert fit.residual < 1e-10


def test_offset_lorentzian_recovered():
    fit = lorentzian_fit(synthetic(amplitude=2.5, center=0.013, fwhm=0.004, n=301, span=0.02), (0.0, 0.026))
    assert (fit.amplitude, fit.center, fit.fwhm) == pytest.approx((2.5, 0.013, 0.004), rel=1e-8)


def test_noisy_width_median_error():
    errors = []
    clean = synthetic()
    for seed in range(100):
        rng = np.random.default_rng(seed)
        noisy = clean.values + rng.uniform(-0.01, 0.01, clean.values.size)
        fit = lorentzian_fit(SpectralDensity(clean.q_grid, np.clip(noisy, 0, None)), (-0.05, 0.05))
        errors.append(abs(fit.fwhm / 0.01 - 1))
    assert np.median(errors) < 0.02


def test_fit_is_a_fixed_point():
    density = normalize(dos(mqw_params(200), np.linspace(-1e-4, 1e-4, 801)))
    fit = lorentzian_fit(density, central_lobe(mqw_params(200)))
    rendered = SpectralDensity(density.q_grid, fit(density.q_grid))
    refit = lorentzian_fit(rendered, fit.window)
    assert (refit.amplitude, refit.center, refit.fwhm) == pytest.approx(
        (fit.amplitude, fit.center, fit.fwhm), rel=1e-10, abs=1e-16)


def test_mqw_central_lobe_fit_reports_residual():
    p = mqw_params(300)
    lobe = central_lobe(p)
    density = normalize(dos(p, np.linspace(4 * lobe[0], 4 * lobe[1], 4001)))
    fit = lorentzian_fit(density, lobe)
    assert 0 < fit.residual < 0.1
    assert 0 < fit.fwhm < lobe[1] - lobe[0]
    assert abs(fit.center) < 1e-12


def test_window_without_maximum_is_rejected():
    with pytest.raises(ValueError):
        lorentzian_fit(synthetic(), (0.02, 0.05))


def test_window_needs_seven_samples():
    with pytest.raises(ValueError):
        lorentzian_fit(synthetic(), (-0.0005, 0.0005))


def test_iteration_cap_raises_with_residual():
    rng = np.random.default_rng(1)
    clean = synthetic()
    noisy = SpectralDensity(clean.q_grid, np.clip(clean.values + rng.uniform(-0.05, 0.05, clean.values.size), 0, None))
    with pytest.raises(FitError) as err:
        lorentzian_fit(noisy, (-0.05, 0.05), max_iter=1)
    assert err.value.residual is not None


def test_coupling_from_period():
    assert coupling_from_period(math.pi) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        coupling_from_period(0.0)


@pytest.mark.parametrize("g", [0.7, 3.0, 25.0])
def test_g_round_trip_through_period(g):
    t = np.linspace(0, 6 * math.pi / g, 60001)
    period = oscillation_period(np.cos(g * t) ** 2, t)
    assert coupling_from_period(period) == pytest.approx(g, rel=1e-3)


def test_effective_model_from_fit():
    p = mqw_params(200)
    fit = LorentzianFit(center=0.0, fwhm=1e-5, amplitude=1.0, residual=0.0)
    model = effective_model_from(fit, math.pi, p, gamma=1.0)
    assert model.g == pytest.approx(1.0)
    assert model.kappa == pytest.approx(p.light_speed * 1e-5 * p.time_unit)
    assert model.gamma == 1.0
    collective = effective_model_from(fit, None, p, gamma=1.0)
    assert collective.g == pytest.approx(collective_coupling(p))


def test_kappa_energy_width_convention():
    p = mqw_params(200)
    # hbar v dq in meV equals hbar * kappa / time_unit
    kappa = kappa_from_width(1e-5, p)
    model = EffectiveModel(0.0, kappa, 0.0)
    assert model.in_mev(p.time_unit)["kappa"] == pytest.approx(0.6582119569 * p.light_speed * 1e-5)


def test_gamma_pass_through_in_mev():
    assert EffectiveModel(1.0, 1.0, 1.0).in_mev(10.0)["gamma"] == pytest.approx(0.06582119569)


def test_effective_model_rejects_negative_rates():
    with pytest.raises(ValueError):
        EffectiveModel(1.0, -1.0, 0.0)
