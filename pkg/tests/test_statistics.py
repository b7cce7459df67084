import numpy as np
import pytest
from scipy.constants import c, pi

from twinbeam.ensemble import ShotEnsemble
from twinbeam.errors import FlatPhaseError, StatisticsError
from twinbeam.jsa import JointSpectrum
from twinbeam.sampler import sample_ensemble
from twinbeam.schmidt import schmidt_decompose
from twinbeam.statistics import (
    CorrelationMatrix, CovarianceMatrix, RoiSpec, band_g2, band_mask, correlation_matrix, covariance_matrix,
    g2_from_energies, nm_band, reconstruct_modes, tilt_angle,
)


@pytest.fixture(scope="module")
def ensemble():
    from conftest import synthetic_decomposition
    return sample_ensemble(synthetic_decomposition([0.5, 0.3, 0.2], n=40), 5.0, 800, seed=11)


def test_cross_is_block_of_full(ensemble):
    full = covariance_matrix(ensemble, "full")
    cross = covariance_matrix(ensemble, "cross")
    i, s = ensemble.idler_mask, ensemble.signal_mask
    np.testing.assert_allclose(cross.values, full.values[np.ix_(i, s)], rtol=1e-12)
    np.testing.assert_allclose(full.values, full.values.T, rtol=1e-12)
    np.testing.assert_allclose(full.values, np.cov(ensemble.shots.T), rtol=1e-9, atol=1e-12 * full.values.max())
    assert cross.values.shape == (40, 40) and cross.nshots == 800


def test_roi_selects_sub_block(ensemble):
    sig = (ensemble.omega[ensemble.signal_mask][5], ensemble.omega[ensemble.signal_mask][20])
    idl = (ensemble.omega[ensemble.idler_mask][10], ensemble.omega[ensemble.idler_mask][30])
    cov = covariance_matrix(ensemble, "cross", RoiSpec(sig, idl))
    assert cov.values.shape == (21, 16)
    with pytest.raises(ValueError):
        covariance_matrix(ensemble, "diagonal")


def test_correlation_bounds_and_diagonal(ensemble):
    corr = correlation_matrix(ensemble, "full")
    v = corr.values[corr.mask]
    assert np.all(np.abs(v) <= 1 + 1e-12)
    np.testing.assert_array_equal(np.diag(corr.values), 1.0)
    cross = correlation_matrix(ensemble, "cross")
    np.testing.assert_allclose(cross.values, corr.values[np.ix_(ensemble.idler_mask, ensemble.signal_mask)], rtol=1e-10)


def test_variance_floor_masks_dead_bins():
    gen = np.random.default_rng(0)
    shots = gen.exponential(size=(200, 6))
    shots[:, 2] = 5.0
    ens = ShotEnsemble(np.arange(6.0), shots)
    corr = correlation_matrix(ens, "full")
    assert not corr.mask[2].any() and np.all(np.isnan(corr.values[2]))
    assert corr.mask[0, 1]
    with pytest.raises(StatisticsError):
        correlation_matrix(ShotEnsemble(np.arange(3.0), np.ones((5, 3))), "full")


def test_g2_oracles():
    gen = np.random.default_rng(1)
    g2, se = g2_from_energies(gen.exponential(size=20000))
    assert abs(g2 - 2.0) < 3 * se
    g2c, sec = g2_from_energies(np.full(50, 3.0))
    assert g2c == pytest.approx(1.0) and sec == pytest.approx(0.0, abs=1e-15)
    e = gen.gamma(4.0, size=5000)
    assert g2_from_energies(e, seed=3) == g2_from_energies(e, seed=3)
    assert abs(g2_from_energies(e)[0] - 1.25) < 0.05
    with pytest.raises(StatisticsError):
        g2_from_energies(np.zeros(10))


def test_band_helpers():
    omega = np.linspace(0, 10, 11)
    np.testing.assert_array_equal(np.flatnonzero(band_mask(omega, 5.0, 2.0)), [4, 5, 6])
    np.testing.assert_array_equal(np.flatnonzero(band_mask(omega, 5.2, 0.1)), [5])
    with pytest.raises(StatisticsError):
        band_mask(omega, 20.0, 1.0)
    center, width = nm_band(800.0, 4.0)
    assert width == pytest.approx(2 * pi * c * 4e-9 / (800e-9) ** 2, rel=1e-4)
    assert center == pytest.approx(2 * pi * c / 800e-9, rel=1e-5)
    roi = RoiSpec.from_wavelengths((615, 750), (850, 1070))
    assert roi.signal_band[0] > roi.idler_band[1]
    with pytest.raises(ValueError):
        RoiSpec((1.0, 3.0), (2.0, 4.0))


def test_band_g2_of_single_mode_bin(ensemble):
    center = ensemble.omega[ensemble.signal_mask][20]
    g2, se = band_g2(ensemble, center, 1.0)
    assert abs(g2 - 2.0) < 4 * se


def positive_jsa_covariance():
    x = np.linspace(-5, 5, 70)
    xi, xs = np.meshgrid(x, x, indexing="ij")
    amp = np.exp(-((xs + xi) ** 2) / 8 - (xs - xi) ** 2 / 0.5)
    ws, wi = 2.6e15 + 1e13 * x, 2.0e15 + 1e13 * x
    d = 1e13 * (x[1] - x[0])
    cov = CovarianceMatrix(wi, ws, amp**2 * d * d, 1000, "cross")
    return cov, JointSpectrum(ws, wi, amp.astype(complex))


def test_reconstruction_of_positive_amplitude_is_exact():
    cov, js = positive_jsa_covariance()
    rec = reconstruct_modes(cov)
    dec = schmidt_decompose(js, rank=70, cumulative=1.0)
    sv = np.sqrt(dec.raw_lambdas)
    np.testing.assert_allclose(rec.weights[:5], (sv / sv.sum())[:5], rtol=1e-8)
    fid = np.abs(np.sum(rec.signal_modes[0].conj() * dec.signal_modes[0]) * dec.d_signal) ** 2
    assert fid == pytest.approx(1.0, abs=1e-10)
    assert rec.negative_mass == 0.0
    assert rec.g2 == pytest.approx(1 + 1 / rec.K)


def test_reconstruction_rank_and_threshold():
    cov, _ = positive_jsa_covariance()
    r3 = reconstruct_modes(cov, rank=3)
    assert len(r3.weights) == 3 and r3.weights.sum() == pytest.approx(1.0)
    assert r3.truncation_residual > 0
    rt = reconstruct_modes(cov, rel_threshold=0.5)
    assert np.all(rt.singular_values >= 0.5 * rt.singular_values[0])


def test_reconstruction_rejects_negative_mass():
    cov, _ = positive_jsa_covariance()
    bad = CovarianceMatrix(cov.row_omega, cov.col_omega, cov.values - 0.5 * cov.values.max(), 10, "cross")
    with pytest.raises(FlatPhaseError, match="negative covariance mass"):
        reconstruct_modes(bad)
    with pytest.raises(ValueError):
        reconstruct_modes(CovarianceMatrix(cov.row_omega, cov.row_omega, cov.values, 10, "full"))


def ridge(angle_deg, n=80):
    """Correlation map with a Gaussian ridge at angle_deg in (w_s, -w_i) coordinates."""
    ws = np.linspace(2.5e15, 2.7e15, n)
    wi = np.linspace(1.9e15, 2.1e15, n)
    yy, xx = np.meshgrid(-wi, ws, indexing="ij")
    x, y = xx - xx.mean(), yy - yy.mean()
    t = np.radians(angle_deg)
    dist = -x * np.sin(t) + y * np.cos(t)
    vals = np.exp(-(dist**2) / (2 * (5e12) ** 2))
    return CorrelationMatrix(wi, ws, vals, np.ones_like(vals, bool), 0.0, "cross")


@pytest.mark.parametrize("angle", [-60.0, -45.0, 0.0, 30.0, 45.0, 70.0, 90.0])
def test_tilt_recovers_ridge_angle(angle):
    assert tilt_angle(ridge(angle)) == pytest.approx(angle, abs=0.5)


def test_tilt_requires_bins():
    r = ridge(45.0)
    with pytest.raises(StatisticsError):
        tilt_angle(r, threshold=0.5, min_bins=10**6)
    masked = CorrelationMatrix(r.row_omega, r.col_omega, r.values, np.zeros_like(r.mask), 0.0, "cross")
    with pytest.raises(StatisticsError):
        tilt_angle(masked)


def test_constant_shots_have_zero_covariance():
    ens = ShotEnsemble(np.arange(4.0), np.tile([1.0, 2.0, 3.0, 4.0], (20, 1)))
    np.testing.assert_array_equal(covariance_matrix(ens, "full").values, 0.0)
    with pytest.raises(StatisticsError):
        covariance_matrix(ShotEnsemble(np.arange(4.0), np.ones((1, 4))), "full")


def test_anticorrelated_bins():
    a = np.random.default_rng(2).exponential(size=300)
    ens = ShotEnsemble(np.arange(2.0), np.column_stack([a, 5.0 - a]))
    assert correlation_matrix(ens, "full").values[0, 1] == pytest.approx(-1.0, abs=1e-9)


def test_reconstruction_is_scale_invariant(ensemble):
    rec = reconstruct_modes(covariance_matrix(ensemble))
    big = reconstruct_modes(covariance_matrix(ensemble.scaled(37.5)))
    np.testing.assert_allclose(big.weights, rec.weights, atol=1e-10)
    assert big.K == pytest.approx(rec.K, rel=1e-10)


def test_dead_bin_leaves_statistics_unchanged(ensemble):
    # a zero bin just above the signal band
    w = np.append(ensemble.omega, ensemble.omega[-1] + 1e13)
    padded = ShotEnsemble(w, np.column_stack([ensemble.shots, np.zeros(ensemble.nshots)]),
                          ensemble.signal_band, ensemble.idler_band)
    a = correlation_matrix(ensemble, "full")
    b = correlation_matrix(padded, "full")
    np.testing.assert_allclose(b.values[:-1, :-1], a.values, rtol=1e-12)
    assert not b.mask[-1].any()
    assert reconstruct_modes(covariance_matrix(padded)).K == pytest.approx(
        reconstruct_modes(covariance_matrix(ensemble)).K, rel=1e-12)


def test_full_band_g2_matches_mode_number():
    from conftest import synthetic_decomposition
    from twinbeam.schmidt import g2_from_K, highgain_weights
    dec = synthetic_decomposition([0.5, 0.3, 0.2], n=40)
    ens = sample_ensemble(dec, 3.0, 4000, seed=5)
    sig = ens.omega[ens.signal_mask]
    g2, se = band_g2(ens, 0.5 * (sig[0] + sig[-1]), sig[-1] - sig[0])
    expected = g2_from_K(highgain_weights(dec, 3.0).schmidt_number)
    assert abs(g2 - expected) < 3 * se


def test_rank_one_covariance_returns_its_modes():
    from conftest import synthetic_decomposition
    dec = synthetic_decomposition([1.0], n=64)
    phi, chi = dec.signal_modes[0].real, dec.idler_modes[0].real
    cov = CovarianceMatrix(dec.idler, dec.signal, (4.0 * np.outer(chi, phi)) ** 2, 1000, "cross")
    rec = reconstruct_modes(cov)
    assert rec.K == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(np.abs(rec.signal_modes[0]), np.abs(phi), atol=1e-8 * np.abs(phi).max())
    np.testing.assert_allclose(np.abs(rec.idler_modes[0]), np.abs(chi), atol=1e-8 * np.abs(chi).max())
