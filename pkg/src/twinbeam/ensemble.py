"""Single-shot spectra container shared by the samplers, the GNLSE and the estimators."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import StatisticsError


@dataclass(frozen=True, eq=False)
class ShotEnsemble:
    """Per-shot photon numbers per spectral bin.

    ``omega`` is ascending angular frequency (rad/s), ``shots`` has shape
    (nshots, nbins). ``signal_band`` and ``idler_band`` are optional
    angular-frequency intervals selecting the two sidebands; the samplers set
    them, full-spectrum ensembles get them from a region of interest.
    """

    omega: np.ndarray
    shots: np.ndarray
    signal_band: tuple[float, float] | None = None
    idler_band: tuple[float, float] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.shots.ndim != 2 or self.shots.shape[1] != len(self.omega):
            raise ValueError("shots must have shape (nshots, len(omega))")
        if len(self.omega) > 1 and np.any(np.diff(self.omega) <= 0):
            raise ValueError("omega must be strictly ascending")

    @property
    def nshots(self):
        return self.shots.shape[0]

    @property
    def nbins(self):
        return self.shots.shape[1]

    def band_mask(self, band):
        lo, hi = band
        return (self.omega >= lo) & (self.omega <= hi)

    @property
    def signal_mask(self):
        if self.signal_band is None:
            raise StatisticsError("ensemble has no signal band; supply a region of interest")
        return self.band_mask(self.signal_band)

    @property
    def idler_mask(self):
        if self.idler_band is None:
            raise StatisticsError("ensemble has no idler band; supply a region of interest")
        return self.band_mask(self.idler_band)

    def with_bands(self, signal_band, idler_band):
        return replace(self, signal_band=tuple(signal_band), idler_band=tuple(idler_band))

    def scaled(self, factor):
        return replace(self, shots=self.shots * factor)

    def equals(self, other):
        return (
            np.array_equal(self.omega, other.omega)
            and np.array_equal(self.shots, other.shots)
            and self.signal_band == other.signal_band
            and self.idler_band == other.idler_band
            and self.meta == other.meta
        )


def join_bands(idler_omega, idler_shots, signal_omega, signal_shots, meta=None) -> ShotEnsemble:
    """Concatenate disjoint idler (low) and signal (high) grids into one ensemble."""
    if idler_omega[-1] >= signal_omega[0]:
        raise ValueError("idler grid must lie entirely below the signal grid")
    omega = np.concatenate([idler_omega, signal_omega])
    shots = np.concatenate([idler_shots, signal_shots], axis=1)
    return ShotEnsemble(
        omega,
        shots,
        signal_band=(float(signal_omega[0]), float(signal_omega[-1])),
        idler_band=(float(idler_omega[0]), float(idler_omega[-1])),
        meta=dict(meta or {}),
    )
