"""Monte-Carlo single-shot twin-beam spectra from a Schmidt decomposition.

Both variants write the fields as ``E_s = sum_n a_n phi_n`` and
``E_i = sum_n b_n chi_n`` and record photon numbers per bin,
``|E|^2 * d_omega``.

``HighGainConjugate``
    a_n = c_n, b_n = conj(c_n) with circular Gaussian c_n, <|c_n|^2> = v_n^2.
    Each mode pair is thermal and the signal/idler photon numbers per mode
    are identical; the cross covariance is |sum_n v_n^2 phi_n chi_n|^2.

``WignerExact``
    Vacuum inputs with <|alpha|^2> = 1/2 per mode are passed through
    a_n = u_n alpha_n + v_n conj(beta_n), b_n = u_n beta_n + v_n conj(alpha_n).
    Symmetric ordering is undone by subtracting 1/2 sum_n |phi_n|^2 per bin.
    Moments match the quantum Gaussian state at any gain; the cross
    covariance is |sum_n u_n v_n phi_n chi_n|^2.
"""
from __future__ import annotations

import enum
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import c, pi
from threadpoolctl import threadpool_limits

from . import rng as rng_mod
from .ensemble import ShotEnsemble, join_bands
from .errors import EmptySpectrumError, SamplerOverflowError
from .schmidt import SchmidtDecomposition, highgain_weights

CHUNK = 256
CLAMP_WARN_FRACTION = 0.05


class SamplerVariant(str, enum.Enum):
    HighGainConjugate = "HighGainConjugate"
    WignerExact = "WignerExact"


def _check_populated(dec: SchmidtDecomposition, gain):
    if dec.v is None or dec.gain != gain:
        raise ValueError(f"decomposition is not populated for gain {gain}; call highgain_weights")


def _mode_amplitudes(dec, variant, gen, n):
    m = dec.n_modes
    if variant == SamplerVariant.HighGainConjugate:
        cn = rng_mod.complex_normal(gen, (n, m), dec.v**2)
        return cn, cn.conj()
    if not np.all(np.isfinite(dec.u)):
        raise SamplerOverflowError(
            f"Bogoliubov coefficients overflow at gain {dec.gain}; use HighGainConjugate"
        )
    alpha = rng_mod.complex_normal(gen, (n, m), 0.5)
    beta = rng_mod.complex_normal(gen, (n, m), 0.5)
    a = dec.u * alpha + dec.v * beta.conj()
    b = dec.u * beta + dec.v * alpha.conj()
    return a, b


def _spectra(dec, variant, a, b):
    sig = np.abs(a @ dec.signal_modes) ** 2
    idl = np.abs(b @ dec.idler_modes) ** 2
    if variant == SamplerVariant.WignerExact:
        sig = sig - 0.5 * np.sum(np.abs(dec.signal_modes) ** 2, axis=0)
        idl = idl - 0.5 * np.sum(np.abs(dec.idler_modes) ** 2, axis=0)
    return sig * dec.d_signal, idl * dec.d_idler


def sample_shot(dec: SchmidtDecomposition, gain, variant, rng, clamp=True):
    """One signal spectrum and one idler spectrum (photons per bin)."""
    variant = SamplerVariant(variant)
    _check_populated(dec, gain)
    a, b = _mode_amplitudes(dec, variant, rng, 1)
    sig, idl = _spectra(dec, variant, a, b)
    if clamp:
        sig, idl = np.maximum(sig, 0), np.maximum(idl, 0)
    return sig[0], idl[0]


def _chunk(dec, variant, seed, start, stop):
    a_rows, b_rows = [], []
    for k in range(start, stop):
        a, b = _mode_amplitudes(dec, variant, rng_mod.shot_stream(seed, k), 1)
        a_rows.append(a[0])
        b_rows.append(b[0])
    with threadpool_limits(1):
        return _spectra(dec, variant, np.array(a_rows), np.array(b_rows))


def sample_ensemble(
    dec: SchmidtDecomposition,
    gain,
    nshots,
    seed,
    variant=SamplerVariant.HighGainConjugate,
    threads=1,
    clamp=True,
) -> ShotEnsemble:
    """``nshots`` independent shots; shot ``k`` uses substream (seed, k).

    Output is bit-identical for equal inputs regardless of ``threads``.
    WignerExact bins that come out negative are set to zero when ``clamp``
    is true; the clamped fraction is recorded in ``meta['clamp_fraction']``.
    """
    if nshots < 2:
        raise ValueError("nshots must be >= 2")
    variant = SamplerVariant(variant)
    dec = highgain_weights(dec, gain)
    if variant == SamplerVariant.WignerExact and not np.all(np.isfinite(dec.u)):
        raise SamplerOverflowError(
            f"Bogoliubov coefficients overflow at gain {gain}; use HighGainConjugate"
        )
    bounds = [(s, min(s + CHUNK, nshots)) for s in range(0, nshots, CHUNK)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda b: _chunk(dec, variant, seed, *b), bounds))
    else:
        parts = [_chunk(dec, variant, seed, *b) for b in bounds]
    sig = np.concatenate([p[0] for p in parts])
    idl = np.concatenate([p[1] for p in parts])

    clamp_fraction = 0.0
    if variant == SamplerVariant.WignerExact:
        neg = np.count_nonzero(sig < 0) + np.count_nonzero(idl < 0)
        clamp_fraction = neg / (sig.size + idl.size)
        if clamp:
            sig = np.maximum(sig, 0)
            idl = np.maximum(idl, 0)
            if clamp_fraction > CLAMP_WARN_FRACTION:
                warnings.warn(
                    f"WignerExact clamped {clamp_fraction:.1%} of bins to zero "
                    f"(> {CLAMP_WARN_FRACTION:.0%}); moments near vacuum are biased",
                    RuntimeWarning,
                    stacklevel=2,
                )

    meta = {
        "kind": "sampler",
        "gain": float(gain),
        "seed": int(seed),
        "variant": variant.value,
        "rng": rng_mod.ALGORITHM,
        "n_modes": int(dec.n_modes),
        "clamped": bool(clamp and variant == SamplerVariant.WignerExact),
        "clamp_fraction": float(clamp_fraction),
        "detection": None,
    }
    order_i = np.argsort(dec.idler)
    order_s = np.argsort(dec.signal)
    return join_bands(dec.idler[order_i], idl[:, order_i], dec.signal[order_s], sig[:, order_s], meta)


def mean_signal_spectrum(dec: SchmidtDecomposition):
    """Expected photons per signal bin, sum_n v_n^2 |phi_n|^2 d_omega."""
    return (dec.v**2) @ (np.abs(dec.signal_modes) ** 2) * dec.d_signal


def covariance_oracle(dec: SchmidtDecomposition, quantum=False):
    """Cross covariance per bin pair, rows idler and columns signal.

    ``quantum=False`` gives |sum v_n^2 phi_n chi_n|^2 (HighGainConjugate),
    ``quantum=True`` gives |sum u_n v_n phi_n chi_n|^2.
    """
    w = dec.v * (dec.u if quantum else dec.v)
    k = np.einsum("n,ni,ns->is", w, dec.idler_modes, dec.signal_modes)
    return np.abs(k) ** 2 * dec.d_signal * dec.d_idler


@dataclass(frozen=True)
class DetectionConfig:
    """Spectrometer model.

    notch : (lo, hi) wavelength band in m that is blocked, or None
    floor_db : dynamic range below each shot's maximum, or None
    cutoff : long-wavelength sensitivity limit in m, or None
    read_noise_var : variance of additive Gaussian noise per bin (photons^2)
    seed : base seed for the read-noise substreams
    """

    notch: tuple[float, float] | None = None
    floor_db: float | None = None
    cutoff: float | None = None
    read_noise_var: float = 0.0
    seed: int = 0

    @property
    def is_identity(self):
        return self.notch is None and self.floor_db is None and self.cutoff is None and not self.read_noise_var


SPECTROMETER_DETECTION = DetectionConfig(notch=(750e-9, 850e-9), floor_db=40.0, cutoff=1050e-9)


def apply_detection(ens: ShotEnsemble, det: DetectionConfig) -> ShotEnsemble:
    """Notch, long-wavelength cutoff, read noise, then per-shot dynamic-range floor."""
    if det.is_identity:
        return ens
    lam = 2 * pi * c / ens.omega
    live = np.ones(ens.nbins, dtype=bool)
    if det.notch is not None:
        lo, hi = sorted(det.notch)
        live &= ~((lam >= lo) & (lam <= hi))
    if det.cutoff is not None:
        live &= lam <= det.cutoff
    if not live.any():
        raise EmptySpectrumError("detection blocks every bin of the grid")
    shots = np.where(live, ens.shots, 0.0)
    if det.read_noise_var:
        sd = np.sqrt(det.read_noise_var)
        noise = np.stack(
            [rng_mod.shot_stream(det.seed, k).standard_normal(ens.nbins) for k in range(ens.nshots)]
        )
        shots = np.where(live, shots + sd * noise, 0.0)
    if det.floor_db is not None:
        level = shots.max(axis=1, keepdims=True) * 10 ** (-det.floor_db / 10)
        shots = np.where(shots < level, 0.0, shots)
    shots = np.maximum(shots, 0.0)
    meta = dict(ens.meta)
    meta["detection"] = {
        "notch": None if det.notch is None else [float(x) for x in det.notch],
        "floor_db": det.floor_db,
        "cutoff": det.cutoff,
        "read_noise_var": det.read_noise_var,
        "seed": det.seed,
    }
    return replace(ens, shots=shots, meta=meta)
