"""Estimators over shot ensembles.

Matrices use the cross layout ``rows = idler bins, columns = signal bins``
or the full layout with every bin on both axes. Covariances are unbiased
(n - 1) sample covariances.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import c, pi
from threadpoolctl import threadpool_limits

from .ensemble import ShotEnsemble
from .errors import FlatPhaseError, StatisticsError
from .schmidt import _fix_phase, g2_from_K, schmidt_number

BOOTSTRAP_RESAMPLES = 200
NEGATIVE_MASS_LIMIT = 0.10


@dataclass(frozen=True)
class RoiSpec:
    """Signal and idler angular-frequency bands (rad/s)."""

    signal_band: tuple[float, float]
    idler_band: tuple[float, float]

    def __post_init__(self):
        s0, s1 = sorted(self.signal_band)
        i0, i1 = sorted(self.idler_band)
        if not (i1 < s0 or s1 < i0):
            raise ValueError("signal and idler bands must be disjoint")

    @classmethod
    def from_wavelengths(cls, signal_nm, idler_nm):
        def band(nm):
            lo, hi = sorted(nm)
            return 2 * pi * c / (hi * 1e-9), 2 * pi * c / (lo * 1e-9)

        return cls(band(signal_nm), band(idler_nm))


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    row_omega: np.ndarray
    col_omega: np.ndarray
    values: np.ndarray
    nshots: int
    layout: str


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    row_omega: np.ndarray
    col_omega: np.ndarray
    values: np.ndarray  # NaN where masked
    mask: np.ndarray  # True where valid
    variance_floor: float
    layout: str


def _full_covariance(shots):
    n = shots.shape[0]
    x = shots - shots.mean(axis=0)
    with threadpool_limits(1):
        return (x.T @ x) / (n - 1)


def _layout_masks(ens: ShotEnsemble, layout, roi):
    if layout == "full":
        return None, None
    if layout != "cross":
        raise ValueError(f"layout must be 'cross' or 'full', got {layout!r}")
    if roi is not None:
        return ens.band_mask(roi.idler_band), ens.band_mask(roi.signal_band)
    return ens.idler_mask, ens.signal_mask


def covariance_matrix(ens: ShotEnsemble, layout="cross", roi: RoiSpec | None = None) -> CovarianceMatrix:
    """Sample covariance of photon numbers between bins.

    The cross layout is the idler x signal block of the full matrix, so both
    layouts agree bit-for-bit on shared bins.
    """
    if ens.nshots < 2:
        raise StatisticsError("covariance needs at least two shots")
    rows, cols = _layout_masks(ens, layout, roi)
    if rows is None:
        full = _full_covariance(ens.shots)
        return CovarianceMatrix(ens.omega, ens.omega, full, ens.nshots, "full")
    sel = rows | cols
    idx = np.flatnonzero(sel)
    full = _full_covariance(ens.shots[:, idx])
    r = np.flatnonzero(rows[idx])
    k = np.flatnonzero(cols[idx])
    return CovarianceMatrix(ens.omega[rows], ens.omega[cols], full[np.ix_(r, k)], ens.nshots, "cross")


def correlation_matrix(
    ens: ShotEnsemble, layout="cross", variance_floor=1e-10, roi: RoiSpec | None = None
) -> CorrelationMatrix:
    """Correlation coefficients C_ij = Cov_ij / sqrt(Var_i Var_j).

    Bins whose variance is below ``variance_floor`` times the largest bin
    variance are masked (NaN) rather than divided.
    """
    if ens.nshots < 2:
        raise StatisticsError("correlation needs at least two shots")
    var = ens.shots.var(axis=0, ddof=1)
    vmax = var.max()
    floor = variance_floor * vmax
    valid = var > floor if vmax > 0 else np.zeros_like(var, dtype=bool)
    rows, cols = _layout_masks(ens, layout, roi)
    if rows is None:
        rows = cols = np.ones(ens.nbins, dtype=bool)
    if not (valid & rows).any() or not (valid & cols).any():
        raise StatisticsError("all bins fall below the variance floor")
    cov = covariance_matrix(ens, layout, roi).values
    vr, vc = var[rows], var[cols]
    ok = np.outer(valid[rows], valid[cols])
    with np.errstate(invalid="ignore", divide="ignore"):
        cij = cov / np.sqrt(np.outer(vr, vc))
    cij = np.where(ok, cij, np.nan)
    if layout == "full":
        d = np.flatnonzero(valid)
        cij[d, d] = 1.0
    return CorrelationMatrix(ens.omega[rows], ens.omega[cols], cij, ok, floor, layout)


def _g2(e):
    m = e.mean(axis=-1)
    return np.mean(e**2, axis=-1) / m**2


def g2_from_energies(energies, resamples=BOOTSTRAP_RESAMPLES, seed=0):
    """g2 = <E^2>/<E>^2 with a bootstrap standard error.

    Returns ``(g2, standard_error)``.
    """
    e = np.asarray(energies, dtype=float)
    if e.mean() == 0:
        raise StatisticsError("mean energy is zero")
    g2 = float(_g2(e))
    gen = np.random.default_rng(seed)
    idx = gen.integers(0, len(e), size=(resamples, len(e)))
    boot = _g2(e[idx])
    return g2, float(np.std(boot, ddof=1))


def band_mask(omega, center, width):
    """Bins with |omega - center| <= width / 2; snaps to the nearest bin if empty."""
    if center < omega[0] or center > omega[-1]:
        raise StatisticsError("band centre lies outside the grid")
    mask = np.abs(omega - center) <= 0.5 * width
    if not mask.any():
        mask[np.argmin(np.abs(omega - center))] = True
    return mask


def nm_band(center_nm, width_nm):
    """Angular-frequency centre and width of a wavelength band."""
    lo = 2 * pi * c / ((center_nm + width_nm / 2) * 1e-9)
    hi = 2 * pi * c / ((center_nm - width_nm / 2) * 1e-9)
    return 0.5 * (lo + hi), hi - lo


def band_g2(ens: ShotEnsemble, center, width, resamples=BOOTSTRAP_RESAMPLES, seed=0):
    """g2 of the photon number summed over the band ``center +- width/2`` (rad/s)."""
    mask = band_mask(ens.omega, center, width)
    e = ens.shots[:, mask].sum(axis=1)
    if not np.any(e):
        raise StatisticsError("band contains no photons")
    return g2_from_energies(e, resamples, seed)


@dataclass(frozen=True, eq=False)
class Reconstruction:
    signal: np.ndarray
    idler: np.ndarray
    signal_modes: np.ndarray
    idler_modes: np.ndarray
    singular_values: np.ndarray
    weights: np.ndarray
    K: float
    g2: float
    negative_mass: float
    truncation_residual: float


def reconstruct_modes(cov: CovarianceMatrix, rank=None, rel_threshold=0.0) -> Reconstruction:
    """Schmidt modes and high-gain weights from a cross covariance.

    The elementwise square root of max(Cov, 0) is decomposed with the grid
    measure; singular values approximate u_n v_n ~ N_n, so the weights are
    the singular values normalized over the retained ranks. ``rank`` caps
    the number of retained modes; ``rel_threshold`` drops singular values
    below that fraction of the largest.
    """
    if cov.layout != "cross":
        raise ValueError("reconstruction needs the cross layout")
    vals = cov.values
    neg = -vals[vals < 0].sum()
    total = np.abs(vals).sum()
    frac = neg / total if total > 0 else 0.0
    if frac > NEGATIVE_MASS_LIMIT:
        raise FlatPhaseError(
            f"negative covariance mass {frac:.1%} exceeds {NEGATIVE_MASS_LIMIT:.0%}; "
            "the flat-phase assumption does not hold (pump depletion or noise)"
        )
    root = np.sqrt(np.maximum(vals, 0.0))
    ds = cov.col_omega[1] - cov.col_omega[0]
    di = cov.row_omega[1] - cov.row_omega[0]
    # photons per bin carry one factor of d_omega each; sqrt leaves sqrt(ds di)
    with threadpool_limits(1):
        u, s, vh = np.linalg.svd(root, full_matrices=False)
    if s[0] <= 0:
        raise StatisticsError("covariance is identically zero")
    keep = len(s) if rank is None else min(rank, len(s))
    keep = min(keep, int(np.count_nonzero(s >= rel_threshold * s[0])))
    phi = vh[:keep] / np.sqrt(ds)
    chi = u[:, :keep].T / np.sqrt(di)
    phi, chi = _fix_phase(phi.astype(complex), chi.astype(complex))
    sv = s[:keep]
    weights = sv / sv.sum()
    K = schmidt_number(weights)
    return Reconstruction(
        signal=cov.col_omega,
        idler=cov.row_omega,
        signal_modes=phi,
        idler_modes=chi,
        singular_values=sv,
        weights=weights,
        K=K,
        g2=g2_from_K(K),
        negative_mass=float(frac),
        truncation_residual=float(1 - sv.sum() / s.sum()),
    )


def tilt_angle(corr: CorrelationMatrix, roi: RoiSpec | None = None, threshold=0.5, min_bins=10):
    """Principal-axis angle (degrees) of the thresholded cross-correlation.

    Coordinates are the signal frequency and the negated idler frequency,
    both in rad/s, so a ridge of constant w_s + w_i is at +45 degrees.
    Bins at or above ``threshold`` times the ROI maximum are weighted by
    their correlation value. The result lies in (-90, 90].
    """
    rows = np.ones(len(corr.row_omega), dtype=bool)
    cols = np.ones(len(corr.col_omega), dtype=bool)
    if roi is not None:
        rows = (corr.row_omega >= min(roi.idler_band)) & (corr.row_omega <= max(roi.idler_band))
        cols = (corr.col_omega >= min(roi.signal_band)) & (corr.col_omega <= max(roi.signal_band))
    sub = corr.values[np.ix_(rows, cols)]
    ok = corr.mask[np.ix_(rows, cols)] & np.isfinite(sub)
    if not ok.any():
        raise StatisticsError("region of interest has no valid bins")
    peak = np.max(sub[ok])
    sel = ok & (sub >= threshold * peak)
    if np.count_nonzero(sel) < min_bins:
        raise StatisticsError(f"fewer than {min_bins} bins above threshold in the region of interest")
    yy, xx = np.meshgrid(-corr.row_omega[rows], corr.col_omega[cols], indexing="ij")
    w = sub[sel]
    x, y = xx[sel], yy[sel]
    mx, my = np.average(x, weights=w), np.average(y, weights=w)
    mu20 = np.average((x - mx) ** 2, weights=w)
    mu02 = np.average((y - my) ** 2, weights=w)
    mu11 = np.average((x - mx) * (y - my), weights=w)
    theta = 0.5 * np.degrees(np.arctan2(2 * mu11, mu20 - mu02))
    if theta <= -90:
        theta += 180
    return float(theta)
