import numpy as np
import pytest
from scipy.constants import pi
from scipy.integrate import trapezoid

from twinbeam.dispersion import (
    FiberGasSystem, FiberGeometry, GasState, TaylorDispersion, beta_derivatives, omega_from_wavelength,
    wavelength_from_omega,
)
from twinbeam.errors import CoverageError, NotFoundError
from twinbeam.jsa import compute_jsa, gvm_curve, phase_matched_detuning, phase_mismatch, pm_geometry
from twinbeam.pump import PumpGrid, pulse_metrics, synthesize_pump

THZ = 2 * pi * 1e12
GRID = PumpGrid(4096, 200 * THZ)


@pytest.fixture(scope="module")
def long_fiber():
    return FiberGasSystem(FiberGeometry(length=1.5), GasState("argon", 76.0))


@pytest.fixture(scope="module")
def chirped_pump():
    return synthesize_pump(800e-9, 240e-15, -29000e-30, 80e-9, GRID)


# (pressure, tilt deg, contour FWHM rad/s, signal wavelength m)
PM_FROZEN = [
    (71.0, -1.1532316563, 2.9113644290e13, 731.4952087e-9),
    (76.0, -15.586272718, 2.2384414853e13, 716.8065932e-9),
    (82.0, -29.469971581, 1.2166833848e13, 688.1641308e-9),
]


@pytest.mark.parametrize("pressure,phi,delta,lam_s", PM_FROZEN)
def test_pm_geometry_frozen(long_fiber, chirped_pump, pressure, phi, delta, lam_s):
    pp = pulse_metrics(chirped_pump)["peak_power"]
    assert pp == pytest.approx(182363.894, rel=1e-6)
    r = pm_geometry(long_fiber.with_pressure(pressure), chirped_pump.center, 1.5, pp)
    assert r.phi_pm == pytest.approx(phi, abs=1e-6)
    assert r.delta_pm == pytest.approx(delta, rel=1e-6)
    assert wavelength_from_omega(r.omega_s) == pytest.approx(lam_s, rel=1e-8)
    assert r.omega_s + r.omega_i == pytest.approx(2 * r.omega_p, rel=1e-14)


def test_tilt_decreases_with_pressure(long_fiber, chirped_pump):
    pp = pulse_metrics(chirped_pump)["peak_power"]
    phis = [pm_geometry(long_fiber.with_pressure(p), chirped_pump.center, 1.5, pp).phi_pm for p in (71, 74, 76, 79, 82)]
    assert np.all(np.diff(phis) < 0)


def test_phase_matched_detuning_is_a_root(long_fiber):
    w0 = omega_from_wavelength(800e-9)
    det = phase_matched_detuning(long_fiber, w0, 1e5)
    dk = phase_mismatch(long_fiber, w0 + det, w0 - det, w0, 1e5)
    assert abs(dk) < 1e-3
    # Kerr shifts the sidebands outward in the anomalous regime
    assert det > phase_matched_detuning(long_fiber, w0, 1e4)


def test_no_phase_matching_in_normal_dispersion():
    sys_ = FiberGasSystem(FiberGeometry(), GasState("argon", 10.0))
    with pytest.raises(NotFoundError):
        phase_matched_detuning(sys_, omega_from_wavelength(600e-9), 0.0)


def test_phase_mismatch_vanishes_on_degenerate_point(long_fiber):
    w0 = omega_from_wavelength(800e-9)
    assert phase_mismatch(long_fiber, w0, w0, w0) == pytest.approx(0.0, abs=1e-9)
    assert phase_mismatch(long_fiber, w0, w0, w0, 1e5) == pytest.approx(-2 * long_fiber.gamma(w0) * 1e5, rel=1e-9)


def test_gvm_curve_zero_at_pump(long_fiber):
    w0 = omega_from_wavelength(800e-9)
    assert gvm_curve(long_fiber, w0, [w0])[0] == pytest.approx(0.0, abs=1e-18)


@pytest.fixture(scope="module")
def small_jsa():
    sys_ = FiberGasSystem(FiberGeometry(), GasState("argon", 70.0))
    pump = synthesize_pump(800e-9, 300e-15, 0.0, 10e-9, PumpGrid(1024, 100 * THZ))
    sw = tuple(omega_from_wavelength(np.array([760e-9, 600e-9])))
    iw = tuple(omega_from_wavelength(np.array([1150e-9, 850e-9])))
    return sys_, pump, compute_jsa(pump, sys_, 0.3, 0.0, sw, iw, resolution=(40, 32))


def test_jsa_layout_and_swap_symmetry(small_jsa):
    sys_, pump, js = small_jsa
    assert js.amplitude.shape == (32, 40)
    swapped = compute_jsa(pump, sys_, 0.3, 0.0, (js.idler[0], js.idler[-1]), (js.signal[0], js.signal[-1]),
                          resolution=(32, 40), allow_pump_overlap=True)
    np.testing.assert_allclose(swapped.amplitude, js.swapped().amplitude, rtol=1e-9,
                               atol=1e-12 * np.abs(js.amplitude).max())


def test_jsa_matches_direct_quadrature(small_jsa):
    sys_, pump, js = small_jsa
    i, s = 20, 13
    ws, wi = js.signal[s], js.idler[i]
    wp = pump.omega
    a1 = pump.amplitude
    a2 = np.interp(ws + wi - wp, wp, pump.amplitude.real, left=0, right=0) + 1j * np.interp(
        ws + wi - wp, wp, pump.amplitude.imag, left=0, right=0)
    dk = phase_mismatch(sys_, ws, wi, wp)
    x = 0.5 * 0.3 * dk
    direct = trapezoid(a1 * a2 * np.sinc(x / pi) * np.exp(1j * x), wp)
    assert js.amplitude[i, s] == pytest.approx(direct, rel=1e-6, abs=1e-9 * np.abs(js.amplitude).max())


def test_jsa_rejects_pump_overlap(small_jsa):
    sys_, pump, _ = small_jsa
    w0 = pump.center
    with pytest.raises(ValueError, match="overlaps"):
        compute_jsa(pump, sys_, 0.3, 0.0, (w0 - 1e13, w0 + 1e13), (2.0e15, 2.2e15), resolution=8)


def test_jsa_coverage_error():
    sys_ = FiberGasSystem(FiberGeometry(), GasState("argon", 70.0))
    pump = synthesize_pump(800e-9, 300e-15, 0.0, 10e-9, PumpGrid(1024, 100 * THZ))
    # windows whose mean frequency is far from the pump
    with pytest.raises(CoverageError):
        compute_jsa(pump, sys_, 0.3, 0.0, (3.1e15, 3.2e15), (2.7e15, 2.8e15), resolution=8)


def test_symmetric_dispersion_tilts_45_degrees():
    w0 = omega_from_wavelength(800e-9)
    # even-order dispersion only: beta1 mismatches are equal and opposite
    sym = TaylorDispersion(w0, (-1e-26, 0.0, 1e-54))
    r = pm_geometry(sym, w0, 0.3, 0.0)
    assert r.omega_s - w0 == pytest.approx(np.sqrt(12e-26 / 1e-54), rel=1e-5)
    assert abs(r.phi_pm) == pytest.approx(45.0, abs=1e-6)


def test_contour_width_scales_inversely_with_length(long_fiber):
    w0 = omega_from_wavelength(800e-9)
    short = pm_geometry(long_fiber, w0, 0.75, 182363.894).delta_pm
    full = pm_geometry(long_fiber, w0, 1.5, 182363.894).delta_pm
    assert short / full == pytest.approx(2.0, rel=0.02)


def test_gvm_signs_across_pressures():
    base = FiberGasSystem(FiberGeometry(), GasState("argon", 71.0))
    w0 = omega_from_wavelength(800e-9)
    idler = omega_from_wavelength(np.linspace(850e-9, 1100e-9, 33))
    signal = omega_from_wavelength(745e-9)
    signs = {}
    for p in (71.0, 76.0, 82.0):
        s = base.with_pressure(p)
        assert np.all(gvm_curve(s, w0, idler) > 0)
        signs[p] = np.sign(gvm_curve(s, w0, [signal])[0])
    # the signal-side mismatch flips between the lowest and highest pressure
    assert signs[71.0] == -1 and signs[82.0] == 1


def test_gvm_curve_step_convergence(long_fiber):
    w0 = omega_from_wavelength(800e-9)
    w = omega_from_wavelength(np.linspace(600e-9, 760e-9, 33))
    g = gvm_curve(long_fiber, w0, w)
    h = pi * 10e9
    g_half = beta_derivatives(long_fiber, w, 1, step=h) - beta_derivatives(long_fiber, w0, 1, step=h)
    assert np.max(np.abs(g - g_half)) < 1e-3 * np.max(np.abs(g))


def test_monochromatic_pump_collapses_onto_antidiagonal():
    sys_ = FiberGasSystem(FiberGeometry(), GasState("argon", 71.0))
    pump = synthesize_pump(800e-9, 50e-12, 0.0, 1e-9, PumpGrid(1024, 2 * pi * 0.2e12))
    w0, d = pump.center, 2e12
    js = compute_jsa(pump, sys_, 0.3, 0.0, (w0 + 0.2e15, w0 + 0.2e15 + 40 * d),
                     (w0 - 0.2e15 - 40 * d, w0 - 0.2e15), resolution=41)
    mag = np.abs(js.amplitude)
    i, s = np.nonzero(mag > 1e-3 * mag.max())
    assert len(i) > 0
    assert np.all(np.abs(js.signal[s] + js.idler[i] - 2 * w0) <= d)


def test_short_fiber_reduces_to_pump_convolution():
    sys_ = FiberGasSystem(FiberGeometry(), GasState("argon", 70.0))
    pump = synthesize_pump(800e-9, 30e-15, 0.0, 10e-9, PumpGrid(2048, 400 * THZ))
    js = compute_jsa(pump, sys_, 1e-3, 0.0, (2.45e15, 2.75e15), (1.95e15, 2.25e15), resolution=16,
                     allow_pump_overlap=True)
    wp, ap = pump.omega, pump.amplitude
    conv = np.empty_like(js.amplitude)
    for i, wi in enumerate(js.idler):
        for s, ws in enumerate(js.signal):
            w2 = ws + wi - wp
            a2 = np.interp(w2, wp, ap.real, left=0, right=0) + 1j * np.interp(w2, wp, ap.imag, left=0, right=0)
            conv[i, s] = trapezoid(ap * a2, wp)
    jsi, ref = np.abs(js.amplitude) ** 2, np.abs(conv) ** 2
    assert np.linalg.norm(jsi - ref) < 1e-3 * np.linalg.norm(ref)


def test_quadrature_step_convergence():
    sys_ = FiberGasSystem(FiberGeometry(), GasState("argon", 70.0))
    sw = tuple(omega_from_wavelength(np.array([760e-9, 600e-9])))
    iw = tuple(omega_from_wavelength(np.array([1150e-9, 850e-9])))
    norms = []
    for n in (4096, 8192):
        pump = synthesize_pump(800e-9, 280e-15, 0.0, 220e-9, PumpGrid(n, 200 * THZ))
        norms.append(compute_jsa(pump, sys_, 0.3, 0.0, sw, iw, resolution=48).norm2)
    assert norms[0] == pytest.approx(norms[1], rel=1e-3)
