import numpy as np
import pytest
from scipy.constants import c, pi

from twinbeam.dispersion import (
    ARGON, U01, FiberGasSystem, FiberGeometry, GasState, TaylorDispersion, beta_derivatives,
    find_zdw, gas_refractive_index, gas_susceptibility, nonlinear_parameter, omega_from_wavelength,
    wavelength_from_omega,
)
from twinbeam.errors import AmbiguityError, CutoffError, NotFoundError, OutOfRangeError

# frozen reference values for the default geometry (18.5 um, 240 nm, s = 0.03)
ZDW_75BAR = 776.525e-9
BETA2_800_75BAR = -1.8174404542766232e-28
GAMMA_800_75BAR = 3.7826440790168864e-05


def sellmeier_by_hand(lam_um, pressure, temperature):
    l2 = lam_um**2
    chi = 20332.29e-8 * l2 / (l2 - 206.12e-6) + 34458.31e-8 * l2 / (l2 - 8.066e-3)
    return np.sqrt(1 + chi * pressure * 273.15 / temperature) - 1


def test_vacuum_index_is_exactly_one():
    for lam in (400e-9, 800e-9, 1.5e-6):
        assert gas_refractive_index(GasState("argon", 0.0), lam) == 1.0


def test_index_matches_hand_sellmeier():
    n = gas_refractive_index(GasState("argon", 1.0, 293.0), 800e-9)
    assert n - 1 == pytest.approx(sellmeier_by_hand(0.8, 1.0, 293.0), rel=1e-12)
    assert n - 1 == pytest.approx(2.574409231557162e-4, rel=1e-12)


def test_susceptibility_scales_linearly_with_density():
    a = gas_susceptibility(GasState("argon", 75.0), 800e-9)
    b = gas_susceptibility(GasState("argon", 37.5), 800e-9)
    assert a / b == pytest.approx(2.0, rel=1e-12)
    # n - 1 is then only nearly linear
    na = gas_refractive_index(GasState("argon", 75.0), 800e-9) - 1
    nb = gas_refractive_index(GasState("argon", 37.5), 800e-9) - 1
    assert na / nb == pytest.approx(2.0, rel=1e-2)
    assert na / nb < 2.0


def test_index_increases_with_pressure():
    vals = [gas_refractive_index(GasState("argon", p), 800e-9) for p in (0, 10, 40, 75, 90)]
    assert np.all(np.diff(vals) > 0)


def test_index_outside_window_names_window():
    with pytest.raises(OutOfRangeError, match="200 nm"):
        gas_refractive_index(GasState("argon", 1.0), 100e-9)


def test_fixed_radius_limit_matches_marcatili():
    geo = FiberGeometry(s_parameter=0.0)
    sys_ = FiberGasSystem(geo, GasState("argon", 50.0))
    w = omega_from_wavelength(np.array([600e-9, 800e-9, 1000e-9]))
    lam = 2 * pi * c / w
    a = geo.area_preserving_radius
    n_gas = gas_refractive_index(sys_.gas, lam)
    beta_ref = w / c * np.sqrt(n_gas**2 - (U01 * c / (a * w)) ** 2)
    np.testing.assert_allclose(sys_.beta(w), beta_ref, rtol=1e-12)


def test_vacuum_filled_waveguide_is_fast():
    sys_ = FiberGasSystem(FiberGeometry(), GasState("argon", 0.0))
    w = omega_from_wavelength(np.linspace(500e-9, 1200e-9, 20))
    assert np.all(sys_.beta(w) < w / c)


def test_neff_below_gas_index_and_beta1_positive(fiber75):
    w = omega_from_wavelength(np.linspace(400e-9, 1500e-9, 50))
    n_eff = 1 + fiber75.index_excess(w)
    assert np.all(n_eff < gas_refractive_index(fiber75.gas, 2 * pi * c / w))
    assert np.all(beta_derivatives(fiber75, w, 1) > 0)


def test_cutoff_error():
    geo = FiberGeometry(core_diameter=1.0e-6, wall_thickness=50e-9)
    sys_ = FiberGasSystem(geo, GasState("argon", 0.0))
    with pytest.raises(CutoffError):
        sys_.beta(omega_from_wavelength(2.5e-6))


def test_zdw_reference(fiber75):
    z = find_zdw(fiber75, (600e-9, 1000e-9))
    assert abs(z - 770e-9) < 15e-9
    assert z == pytest.approx(ZDW_75BAR, abs=0.2e-9)


def test_beta2_vanishes_at_zdw(fiber75):
    z = find_zdw(fiber75, (600e-9, 1000e-9))
    w = omega_from_wavelength(z)
    b2 = beta_derivatives(fiber75, w, 2)
    slope = abs(beta_derivatives(fiber75, w, 3))
    # 0.1 nm in wavelength is |d omega| = omega * 0.1 nm / lambda
    assert abs(b2) <= slope * w * 0.1e-9 / z


def test_pump_is_anomalous_at_75_bar(fiber75, omega800):
    b2 = beta_derivatives(fiber75, omega800, 2)
    assert b2 < 0
    assert b2 == pytest.approx(BETA2_800_75BAR, rel=1e-6)


def test_beta2_sign_on_both_sides(fiber75):
    assert beta_derivatives(fiber75, omega_from_wavelength(700e-9), 2) > 0
    assert beta_derivatives(fiber75, omega_from_wavelength(900e-9), 2) < 0


def test_beta2_richardson(fiber75, omega800):
    full = beta_derivatives(fiber75, omega800, 2)
    half = beta_derivatives(fiber75, omega800, 2, step=np.pi * 10e9)
    assert abs(full / half - 1) < 1e-3


def test_beta1_stencil_symmetry():
    # beta1 of a pure beta3 profile is symmetric about omega0
    t = TaylorDispersion(2.0e15, (0.0, 1e-40), beta1=3e-9)
    d = 1e13
    assert beta_derivatives(t, 2.0e15 + d, 1) == pytest.approx(beta_derivatives(t, 2.0e15 - d, 1), rel=1e-12)


def test_stencil_outside_window_raises(fiber75):
    lo, _ = fiber75.window
    with pytest.raises(OutOfRangeError):
        beta_derivatives(fiber75, lo + 1e9, 2)


def test_zdw_moves_red_with_pressure(fiber75):
    pressures = np.arange(40, 91, 5)
    zdw = [find_zdw(fiber75.with_pressure(p), (450e-9, 1200e-9)) for p in pressures]
    assert np.all(np.diff(zdw) > 0)


def test_zdw_not_found_and_ambiguous(fiber75):
    with pytest.raises(NotFoundError):
        find_zdw(fiber75, (850e-9, 1000e-9))
    # a profile with two sign changes of beta2
    t = TaylorDispersion(2.0e15, (0.0, 0.0, 1e-55), window=(1.0e15, 3.0e15))
    t2 = TaylorDispersion(2.0e15, (-1e-27, 0.0, 1e-55), window=(1.0e15, 3.0e15))
    with pytest.raises(AmbiguityError):
        find_zdw(t2, (wavelength_from_omega(2.9e15), wavelength_from_omega(1.1e15)))
    assert t.gamma(2e15) == 0


def test_gamma_reference_and_scaling(fiber75, omega800):
    g = nonlinear_parameter(fiber75, omega800)
    assert g == pytest.approx(GAMMA_800_75BAR, rel=1e-9)
    g2 = nonlinear_parameter(fiber75.with_pressure(150.0), omega800)
    assert g2 / g == pytest.approx(2.0, rel=1e-12)
    assert nonlinear_parameter(fiber75.with_pressure(0.0), omega800) == 0.0


def test_geometry_validation():
    with pytest.raises(ValueError):
        FiberGeometry(s_parameter=1.5)
    with pytest.raises(ValueError):
        FiberGeometry(core_diameter=-1.0)
    with pytest.raises(ValueError):
        GasState("argon", -1.0)
    with pytest.raises(ValueError):
        GasState("xenon", 1.0)
    assert ARGON.wavelength_window == (0.2e-6, 3.0e-6)
