"""Pump spectral amplitude: Gaussian synthesis, chirp, bandpass, metrics.

Normalization: ``sum(|alpha|^2) * d_omega`` equals the pulse photon number
counted at the carrier photon energy, ``energy / (hbar omega0)``. The time
envelope ``a(t)`` obeys the same normalization with ``|a|^2`` in photons/s,
so the instantaneous power is ``hbar omega0 |a(t)|^2``.

Fourier convention: a spectral component at detuning ``Omega`` evolves as
``exp(-i Omega t)``. A spectral phase ``(chirp/2) Omega^2`` then delays
frequency ``Omega`` by ``chirp * Omega``; negative chirp is a down-chirp.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import c, hbar, pi

from .errors import AliasingError, EmptySpectrumError

GUARD_FRACTION = 0.1
FS = 1e-15
FS2 = 1e-30


@dataclass(frozen=True)
class PumpGrid:
    """Uniform angular-frequency grid centred on the carrier.

    ``span`` is the full angular-frequency span in rad/s.
    """

    n: int
    span: float

    def axis(self, omega0):
        d = self.span / self.n
        return omega0 + (np.arange(self.n) - self.n // 2) * d


@dataclass(frozen=True, eq=False)
class PumpPulse:
    omega: np.ndarray
    amplitude: np.ndarray
    energy: float
    center: float
    chirp: float = 0.0
    bandpass: tuple | None = None

    @property
    def d_omega(self):
        return self.omega[1] - self.omega[0]

    @property
    def photon_number(self):
        return float(np.sum(np.abs(self.amplitude) ** 2) * self.d_omega)

    def time_domain(self):
        """Return ``(t, a)`` with ``|a|^2`` in photons/s."""
        n = len(self.omega)
        dw = self.d_omega
        dt = 2 * pi / (n * dw)
        k0 = int(np.argmin(np.abs(self.omega - self.center)))
        x = np.roll(self.amplitude, -k0)
        a = np.fft.fftshift(np.fft.fft(x)) * dw / np.sqrt(2 * pi)
        t = (np.arange(n) - n // 2) * dt
        return t, a

    def power(self):
        t, a = self.time_domain()
        return t, hbar * self.center * np.abs(a) ** 2

    def resample(self, omega):
        """Complex amplitude interpolated onto ``omega`` (zero outside)."""
        mag = np.interp(omega, self.omega, np.abs(self.amplitude), left=0.0, right=0.0)
        phase = np.unwrap(np.angle(self.amplitude))
        ph = np.interp(omega, self.omega, phase)
        return mag * np.exp(1j * ph)


def _gaussian_fwhm_omega(tl_duration):
    return 4 * np.log(2) / tl_duration


def stretched_duration(tl_duration, chirp):
    """Intensity FWHM of a Gaussian with quadratic spectral phase."""
    return tl_duration * np.sqrt(1 + (4 * np.log(2) * chirp / tl_duration**2) ** 2)


def _normalize(omega, amplitude, energy, center):
    dw = omega[1] - omega[0]
    norm = np.sum(np.abs(amplitude) ** 2) * dw
    if norm <= 0:
        raise EmptySpectrumError("pump spectrum is empty")
    photons = energy / (hbar * center)
    return amplitude * np.sqrt(photons / norm)


def _zero_guard(amplitude):
    n = len(amplitude)
    g = int(np.ceil(GUARD_FRACTION * n))
    out = amplitude.copy()
    out[:g] = 0
    out[n - g:] = 0
    return out


def synthesize_pump(center_wavelength, tl_duration, chirp, energy, grid: PumpGrid) -> PumpPulse:
    """Gaussian pump with quadratic spectral phase.

    Parameters
    ----------
    center_wavelength : float
        Carrier wavelength in m.
    tl_duration : float
        Transform-limited intensity FWHM in s.
    chirp : float
        Group-delay dispersion in s^2.
    energy : float
        Pulse energy in J.
    grid : PumpGrid
        Angular-frequency grid; its span must be at least six spectral FWHM
        and its time window at least six stretched FWHM.
    """
    if tl_duration <= 0:
        raise ValueError("tl_duration must be positive")
    omega0 = 2 * pi * c / center_wavelength
    fwhm_w = _gaussian_fwhm_omega(tl_duration)
    if grid.span < 6 * fwhm_w:
        raise AliasingError(
            f"grid span {grid.span:.4g} rad/s too narrow; need >= {6 * fwhm_w:.4g} rad/s"
        )
    window = 2 * pi * grid.n / grid.span
    tau = stretched_duration(tl_duration, chirp)
    if window < 6 * tau:
        raise AliasingError(
            f"time window {window / FS:.0f} fs shorter than 6x pulse duration "
            f"({6 * tau / FS:.0f} fs); need n >= {int(np.ceil(6 * tau * grid.span / (2 * pi)))}"
        )
    omega = grid.axis(omega0)
    dw = omega - omega0
    amp = np.exp(-2 * np.log(2) * dw**2 / fwhm_w**2)
    if chirp != 0:
        amp = amp * np.exp(0.5j * chirp * dw**2)
    else:
        amp = amp.astype(complex)
    amp = _zero_guard(amp)
    amp = _normalize(omega, amp, energy, omega0)
    return PumpPulse(omega, amp, energy, omega0, chirp)


def load_pump_spectrum(path, energy, chirp, grid: PumpGrid, center_wavelength=None) -> PumpPulse:
    """Pump from a two-column CSV (``wavelength_nm, relative_amplitude``).

    The header line is required. The carrier defaults to the
    intensity-weighted mean frequency of the tabulated spectrum.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise EmptySpectrumError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    try:
        float(header[0])
    except ValueError:
        pass
    else:
        raise ValueError(f"{path}: header line required (wavelength_nm, relative_amplitude)")
    data = np.array([[float(x) for x in r[:2]] for r in body if r])
    lam = data[:, 0] * 1e-9
    w_tab = 2 * pi * c / lam
    order = np.argsort(w_tab)
    w_tab, a_tab = w_tab[order], data[order, 1]
    if center_wavelength is None:
        omega0 = float(np.sum(w_tab * a_tab**2) / np.sum(a_tab**2))
    else:
        omega0 = 2 * pi * c / center_wavelength
    omega = grid.axis(omega0)
    amp = np.interp(omega, w_tab, a_tab, left=0.0, right=0.0).astype(complex)
    if chirp != 0:
        amp = amp * np.exp(0.5j * chirp * (omega - omega0) ** 2)
    amp = _zero_guard(amp)
    amp = _normalize(omega, amp, energy, omega0)
    return PumpPulse(omega, amp, energy, omega0, chirp)


def apply_bandpass(pump: PumpPulse, center_wavelength, fwhm) -> PumpPulse:
    """Multiply by a Gaussian filter with intensity-transmission FWHM ``fwhm`` (m).

    ``fwhm = inf`` means no filter and returns ``pump`` itself.
    """
    if np.isinf(fwhm):
        return pump
    wc = 2 * pi * c / center_wavelength
    fwhm_w = 2 * pi * c * fwhm / center_wavelength**2
    t_amp = np.exp(-2 * np.log(2) * (pump.omega - wc) ** 2 / fwhm_w**2)
    amp = pump.amplitude * t_amp
    e_in = pump.photon_number
    e_out = float(np.sum(np.abs(amp) ** 2) * pump.d_omega)
    if e_out < 1e-6 * e_in:
        raise EmptySpectrumError("bandpass does not overlap the pump spectrum")
    energy = pump.energy * e_out / e_in
    return replace(pump, amplitude=amp, energy=energy, bandpass=(center_wavelength, fwhm))


def transform_limited(pump: PumpPulse) -> PumpPulse:
    """Same spectral magnitude, flat phase."""
    return replace(pump, amplitude=np.abs(pump.amplitude).astype(complex), chirp=0.0)


def with_chirp(pump: PumpPulse, chirp) -> PumpPulse:
    """Replace the quadratic spectral phase, keeping the magnitude."""
    dw = pump.omega - pump.center
    amp = np.abs(pump.amplitude) * np.exp(0.5j * chirp * dw**2)
    return replace(pump, amplitude=amp, chirp=chirp)


def fwhm(x, y):
    """Full width at half maximum of a single-peaked sampled curve."""
    y = np.asarray(y, dtype=float)
    k = int(np.argmax(y))
    half = 0.5 * y[k]
    return _crossing_width(x, y, k, half)


def _crossing_width(x, y, k, level):
    left = np.flatnonzero(y[:k] < level)
    right = np.flatnonzero(y[k:] < level)
    if len(left) == 0 or len(right) == 0:
        raise EmptySpectrumError("curve does not fall below the level inside the grid")
    i = left[-1]
    j = k + right[0]
    xl = x[i] + (level - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i])
    xr = x[j - 1] + (level - y[j - 1]) * (x[j] - x[j - 1]) / (y[j] - y[j - 1])
    return float(xr - xl)


def spectral_width_1e2(omega, amplitude):
    """Full width (Hz) where |amplitude| exceeds e^-2 of its maximum.

    Taken between the outermost crossings, so structured spectra report
    their total extent.
    """
    mag = np.abs(amplitude)
    level = mag.max() * np.exp(-2)
    above = np.flatnonzero(mag >= level)
    i, j = above[0], above[-1]
    if i == 0 or j == len(mag) - 1:
        raise EmptySpectrumError("spectrum touches the grid edge above the e^-2 level")
    wl = omega[i - 1] + (level - mag[i - 1]) * (omega[i] - omega[i - 1]) / (mag[i] - mag[i - 1])
    wr = omega[j] + (level - mag[j]) * (omega[j + 1] - omega[j]) / (mag[j + 1] - mag[j])
    return float(wr - wl) / (2 * pi)


def pulse_metrics(pump: PumpPulse) -> dict:
    """Temporal FWHM (s), spectral width at 1/e^2 of amplitude (Hz), peak power (W)."""
    if pump.photon_number <= 0:
        raise EmptySpectrumError("pump spectrum is empty")
    t, p = pump.power()
    return {
        "duration_fwhm": fwhm(t, p),
        "spectral_width_1e2": spectral_width_1e2(pump.omega, pump.amplitude),
        "peak_power": float(p.max()),
    }
