"""Joint spectral amplitude of degenerate-pump four-wave mixing.

    F(w_i, w_s) = int dw' alpha(w') alpha(w_s + w_i - w')
                  sinc(L dk / 2) exp(i L dk / 2)

    dk = k(w') + k(w_s + w_i - w') - k(w_s) - k(w_i) - 2 gamma(w_p) P_p

Arrays are laid out with idler along axis 0 and signal along axis 1, so
``amplitude[i, s] = F(idler[i], signal[s])``. The signal is the
high-frequency sideband.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .dispersion import beta_derivatives
from .errors import CoverageError, NotFoundError
from .pump import PumpPulse, fwhm

SUPPORT_LEVEL = 1e-8


@dataclass(frozen=True, eq=False)
class JointSpectrum:
    signal: np.ndarray
    idler: np.ndarray
    amplitude: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.amplitude.shape != (len(self.idler), len(self.signal)):
            raise ValueError("amplitude must have shape (n_idler, n_signal)")

    @property
    def intensity(self):
        return np.abs(self.amplitude) ** 2

    @property
    def norm2(self):
        """Grid-weighted squared norm."""
        ds = self.signal[1] - self.signal[0]
        di = self.idler[1] - self.idler[0]
        return float(np.sum(self.intensity) * ds * di)

    def swapped(self):
        """Signal and idler roles exchanged (transposed amplitude)."""
        return JointSpectrum(self.idler, self.signal, self.amplitude.T.copy(), dict(self.meta))


def phase_mismatch(system, omega_s, omega_i, omega_p1, peak_power=0.0, omega_carrier=None):
    """Delta k in rad/m for pump photons at ``omega_p1`` and ``omega_s + omega_i - omega_p1``.

    gamma is evaluated at ``omega_carrier`` (defaults to ``omega_p1``).
    """
    ws = np.asarray(omega_s, dtype=float)
    wi = np.asarray(omega_i, dtype=float)
    w1 = np.asarray(omega_p1, dtype=float)
    w2 = ws + wi - w1
    f = system.beta_excess
    dk = f(w1) + f(w2) - f(ws) - f(wi)
    if peak_power:
        wc = w1 if omega_carrier is None else omega_carrier
        dk = dk - 2 * system.gamma(wc) * peak_power
    return dk


def _sinc_phase(x):
    # sinc(x) exp(i x), unnormalized sinc
    return np.sinc(x / np.pi) * np.exp(1j * x)


def pump_band(pump: PumpPulse, level=1e-3):
    """Angular-frequency interval where the pump intensity exceeds ``level`` of its peak."""
    p = np.abs(pump.amplitude) ** 2
    idx = np.flatnonzero(p >= level * p.max())
    return float(pump.omega[idx[0]]), float(pump.omega[idx[-1]])


def compute_jsa(
    pump: PumpPulse,
    system,
    length,
    peak_power,
    signal_window,
    idler_window,
    resolution=(256, 256),
    allow_pump_overlap=False,
    chunk=16,
) -> JointSpectrum:
    """Evaluate F on a uniform signal x idler grid.

    The w' integral is a trapezoid rule over the pump's own grid, restricted
    to where the pump amplitude is non-negligible; the second pump factor is
    interpolated from the same grid.

    Parameters
    ----------
    signal_window, idler_window : tuple of float
        Angular-frequency intervals (rad/s).
    resolution : int or (int, int)
        Points along the signal and idler axes.
    """
    if np.isscalar(resolution):
        resolution = (int(resolution), int(resolution))
    ns, ni = resolution
    ws = np.linspace(*sorted(signal_window), ns)
    wi = np.linspace(*sorted(idler_window), ni)

    if not allow_pump_overlap:
        lo, hi = pump_band(pump)
        for name, w in (("signal", ws), ("idler", wi)):
            if w[-1] >= lo and w[0] <= hi:
                raise ValueError(
                    f"{name} window overlaps the pump band; pass allow_pump_overlap=True"
                )

    mag = np.abs(pump.amplitude)
    keep = np.flatnonzero(mag >= SUPPORT_LEVEL * mag.max())
    g0, g1 = pump.omega[0], pump.omega[-1]
    if keep[0] == 0 or keep[-1] == len(mag) - 1:
        raise CoverageError(
            f"pump spectrum is truncated by its grid [{g0:.6g}, {g1:.6g}] rad/s; "
            "extend the pump grid"
        )
    # w' must reach half of every energy-conserving sum w_s + w_i in the windows
    need = 0.5 * (ws[0] + wi[0]), 0.5 * (ws[-1] + wi[-1])
    have = pump.omega[keep[0]], pump.omega[keep[-1]]
    if need[1] < have[0] or need[0] > have[1]:
        raise CoverageError(
            f"pump frequencies [{have[0]:.6g}, {have[1]:.6g}] rad/s miss the range "
            f"[{need[0]:.6g}, {need[1]:.6g}] rad/s required by the signal/idler windows"
        )

    sl = slice(max(keep[0] - 1, 0), min(keep[-1] + 2, len(mag)))
    wp = pump.omega[sl]
    ap = pump.amplitude[sl]
    weights = np.full(len(wp), pump.d_omega)
    weights[0] *= 0.5
    weights[-1] *= 0.5

    re = pump.amplitude.real
    im = pump.amplitude.imag
    fs = system.beta_excess(ws)
    fp = system.beta_excess(wp)
    dk_nl = 2 * float(system.gamma(pump.center)) * peak_power if peak_power else 0.0

    out = np.empty((ni, ns), dtype=complex)
    for start in range(0, ni, chunk):
        wi_c = wi[start:start + chunk]
        fi = system.beta_excess(wi_c)
        total = wi_c[:, None] + ws[None, :]
        w2 = total[..., None] - wp
        lo, hi = pump.omega[0], pump.omega[-1]
        inside = (w2 >= lo) & (w2 <= hi)
        a2 = np.interp(w2, pump.omega, re, left=0, right=0) + 1j * np.interp(
            w2, pump.omega, im, left=0, right=0
        )
        f2 = np.zeros_like(w2)
        f2[inside] = system.beta_excess(w2[inside])
        dk = fp + f2 - fs[None, :, None] - fi[:, None, None] - dk_nl
        integrand = ap * a2 * _sinc_phase(0.5 * length * dk)
        out[start:start + chunk] = integrand @ weights

    meta = {"length": length, "peak_power": peak_power, "pump_center": pump.center}
    return JointSpectrum(ws, wi, out, meta)


@dataclass(frozen=True)
class PhaseMatching:
    phi_pm: float
    delta_pm: float
    omega_s: float
    omega_i: float
    omega_p: float


def _mono_mismatch(system, omega_p, peak_power):
    fp = system.beta_excess(omega_p)
    nl = 2 * float(system.gamma(omega_p)) * peak_power

    def dk(detuning):
        return 2 * fp - system.beta_excess(omega_p + detuning) - system.beta_excess(omega_p - detuning) - nl

    return dk


def phase_matched_detuning(system, omega_p, peak_power, search=None, samples=4000):
    """Smallest non-zero detuning Omega with Delta k = 0 for a monochromatic pump."""
    lo_w, hi_w = system.window
    max_det = min(omega_p - lo_w, hi_w - omega_p) * 0.999
    if search is None:
        search = (1e-4 * omega_p, max_det)
    a, b = search
    b = min(b, max_det)
    dk = _mono_mismatch(system, omega_p, peak_power)
    det = np.linspace(a, b, samples)
    vals = dk(det)
    idx = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)
    if len(idx) == 0:
        raise NotFoundError("no phase-matched signal/idler pair in the search window")
    k = idx[0]
    return brentq(dk, det[k], det[k + 1], xtol=1e-6 * omega_p)


def pm_geometry(system, omega_p, length, peak_power, search=None) -> PhaseMatching:
    """Tilt (degrees, from the signal axis) and transverse FWHM of the phase-matching contour."""
    det = phase_matched_detuning(system, omega_p, peak_power, search)
    w_s, w_i = omega_p + det, omega_p - det
    b1s, b1i, b1p = beta_derivatives(system, np.array([w_s, w_i, omega_p]), 1)
    phi = -np.degrees(np.arctan((b1s - b1p) / (b1i - b1p)))

    grad = np.array([b1p - b1s, b1p - b1i])
    gnorm = np.hypot(*grad)
    n_hat = grad / gnorm
    tau_half = 2 * 1.39156 / (length * gnorm)
    tau = np.linspace(-4 * tau_half, 4 * tau_half, 4001)
    ws_line = w_s + tau * n_hat[0]
    wi_line = w_i + tau * n_hat[1]
    dk = phase_mismatch(system, ws_line, wi_line, omega_p, peak_power, omega_carrier=omega_p)
    prof = np.sinc(0.5 * length * dk / np.pi) ** 2
    return PhaseMatching(float(phi), fwhm(tau, prof), float(w_s), float(w_i), float(omega_p))


def gvm_curve(system, omega_p, omega):
    """beta1(omega) - beta1(omega_p) in s/m."""
    w = np.asarray(omega, dtype=float)
    b1 = beta_derivatives(system, w, 1)
    return b1 - beta_derivatives(system, np.full_like(w, omega_p), 1)
