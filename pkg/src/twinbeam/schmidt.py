"""Schmidt decomposition of a joint spectrum and its high-gain reweighting.

Modes are continuum-normalized: ``sum(|phi_n|^2) * d_omega_s == 1``. The
decomposition reproduces the amplitude as::

    F(w_i, w_s) = norm * sum_n sqrt(lambda_n) phi_n(w_s) chi_n(w_i)

where ``norm`` is the grid-weighted L2 norm of F.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import StatisticsError
from .jsa import JointSpectrum

DEFAULT_RANK = 64
DEFAULT_CUMULATIVE = 1 - 1e-6
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    signal: np.ndarray
    idler: np.ndarray
    signal_modes: np.ndarray  # (n_modes, n_signal)
    idler_modes: np.ndarray  # (n_modes, n_idler)
    lambdas: np.ndarray
    raw_lambdas: np.ndarray
    norm: float = 1.0
    gain: float = 0.0
    photons: np.ndarray | None = None
    weights: np.ndarray | None = None
    v: np.ndarray | None = None
    u: np.ndarray | None = None

    @property
    def n_modes(self):
        return len(self.lambdas)

    @property
    def truncation_residual(self):
        return float(1.0 - np.sum(self.raw_lambdas))

    @property
    def d_signal(self):
        return float(self.signal[1] - self.signal[0])

    @property
    def d_idler(self):
        return float(self.idler[1] - self.idler[0])

    def reconstruct(self):
        """Amplitude rebuilt from the retained modes, shape (n_idler, n_signal)."""
        s = np.sqrt(self.raw_lambdas) * self.norm
        return np.einsum("n,ni,ns->is", s, self.idler_modes, self.signal_modes)

    @property
    def schmidt_number(self):
        w = self.lambdas if self.weights is None else self.weights
        return schmidt_number(w)


def _fix_phase(signal_modes, idler_modes):
    k = np.argmax(np.abs(signal_modes), axis=1)
    ph = signal_modes[np.arange(len(k)), k]
    ph = ph / np.abs(ph)
    return signal_modes * ph.conj()[:, None], idler_modes * ph[:, None]


def _order_degenerate(s, signal_modes, idler_modes, omega):
    """Within groups of equal singular values, sort by signal centre of mass."""
    n = len(s)
    order = np.arange(n)
    com = (np.abs(signal_modes) ** 2) @ omega / np.maximum((np.abs(signal_modes) ** 2).sum(axis=1), 1e-300)
    i = 0
    while i < n:
        j = i + 1
        while j < n and abs(s[j] ** 2 - s[i] ** 2) <= DEGENERACY_TOL * s[0] ** 2:
            j += 1
        if j - i > 1:
            order[i:j] = i + np.argsort(com[i:j], kind="stable")
        i = j
    return s[order], signal_modes[order], idler_modes[order]


def decompose_matrix(matrix, signal, idler, rank=DEFAULT_RANK, cumulative=DEFAULT_CUMULATIVE):
    """Measure-weighted SVD of ``matrix[i, s]`` sampled on uniform grids.

    Returns singular values of the continuum operator and continuum-normalized
    signal and idler modes (phase-fixed, degeneracy-ordered), truncated to at
    most ``rank`` modes or until the squared singular values reach
    ``cumulative`` of the total.
    """
    ds = signal[1] - signal[0]
    di = idler[1] - idler[0]
    m = np.asarray(matrix) * np.sqrt(ds * di)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    total = np.sum(s**2)
    if total <= 0:
        raise StatisticsError("cannot decompose an all-zero matrix")
    frac = np.cumsum(s**2) / total
    keep = min(rank, int(np.searchsorted(frac, cumulative) + 1), len(s))
    s = s[:keep]
    phi = vh[:keep] / np.sqrt(ds)
    chi = u[:, :keep].T / np.sqrt(di)
    phi, chi = _fix_phase(phi, chi)
    s, phi, chi = _order_degenerate(s, phi, chi, signal)
    return s, phi, chi, total


def schmidt_decompose(js: JointSpectrum, rank=DEFAULT_RANK, cumulative=DEFAULT_CUMULATIVE):
    """Schmidt decomposition of a joint spectrum (gain 0)."""
    if not np.any(js.amplitude):
        raise StatisticsError("joint spectrum is identically zero")
    s, phi, chi, total = decompose_matrix(js.amplitude, js.signal, js.idler, rank, cumulative)
    raw = s**2 / total
    lam = raw / raw.sum()
    return SchmidtDecomposition(
        signal=js.signal,
        idler=js.idler,
        signal_modes=phi,
        idler_modes=chi,
        lambdas=lam,
        raw_lambdas=raw,
        norm=float(np.sqrt(total)),
    )


def from_modes(signal, idler, signal_modes, idler_modes, lambdas) -> SchmidtDecomposition:
    """Decomposition from given mode functions (normalized here) and weights."""
    ds = signal[1] - signal[0]
    di = idler[1] - idler[0]
    phi = np.asarray(signal_modes, dtype=complex)
    chi = np.asarray(idler_modes, dtype=complex)
    phi = phi / np.sqrt((np.abs(phi) ** 2).sum(axis=1, keepdims=True) * ds)
    chi = chi / np.sqrt((np.abs(chi) ** 2).sum(axis=1, keepdims=True) * di)
    lam = np.asarray(lambdas, dtype=float)
    lam = lam / lam.sum()
    return SchmidtDecomposition(signal, idler, phi, chi, lam, lam.copy())


def highgain_weights(dec: SchmidtDecomposition, gain) -> SchmidtDecomposition:
    """Photon numbers N_n = sinh^2(G sqrt(lambda_n)) and the normalized high-gain weights."""
    if gain < 0:
        raise ValueError("gain must be >= 0")
    r = gain * np.sqrt(dec.lambdas)
    with np.errstate(over="ignore"):
        v = np.sinh(r)
        u = np.cosh(r)
    n = v**2
    if gain == 0:
        weights = dec.lambdas.copy()
    else:
        # log sinh^2 r = 2r + 2 log(1 - e^-2r) - 2 log 2, finite where sinh overflows
        with np.errstate(divide="ignore"):
            logn = 2 * r + 2 * np.log1p(-np.exp(-2 * r)) - 2 * np.log(2)
        w = np.exp(logn - logn.max())
        weights = w / w.sum()
    return replace(dec, gain=float(gain), photons=n, weights=weights, v=v, u=u)


def schmidt_number(weights):
    """K = 1 / sum(w_n^2) for normalized weights."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if total <= 0:
        raise ValueError("weights sum to zero")
    if abs(total - 1) > 1e-6:
        raise ValueError(f"weights must sum to 1, got {total}")
    return float(1.0 / np.sum(w**2))


def g2_from_K(K):
    """Thermal multimode g2 = 1 + 1/K."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return 1.0 + 1.0 / K


def export_modes_csv(dec: SchmidtDecomposition, path, n_modes=None, unit_scale=1.0):
    """Write signal and idler modes side by side.

    Columns per side: frequency, then Re and Im for each mode. Signal and idler
    blocks are written as two tables separated by a blank line.
    """
    n = dec.n_modes if n_modes is None else min(n_modes, dec.n_modes)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for name, axis, modes in (
            ("signal", dec.signal, dec.signal_modes),
            ("idler", dec.idler, dec.idler_modes),
        ):
            header = [f"{name}_frequency"]
            for k in range(n):
                header += [f"re_{k}", f"im_{k}"]
            w.writerow(header)
            for j, f in enumerate(axis):
                row = [repr(float(f * unit_scale))]
                for k in range(n):
                    row += [repr(float(modes[k, j].real)), repr(float(modes[k, j].imag))]
                w.writerow(row)
            w.writerow([])
