"""Config-driven stages shared by the CLI and the scan driver."""
from __future__ import annotations

import csv
import hashlib
import io as _io
import os
from dataclasses import replace

import numpy as np
from scipy.constants import c, pi

from . import gnlse, io, jsa, pump as pump_mod, sampler, schmidt, statistics
from .config import SCAN_AXES, ExperimentConfig
from .dispersion import FiberGasSystem, FiberGeometry, GasState, omega_from_wavelength
from .ensemble import ShotEnsemble
from .errors import NotFoundError, StatisticsError, TwinbeamError

THZ = 2 * pi * 1e12
DEPLETION_LEVEL = -0.3
SIDEBAND_FLOOR = 10.0  # photons per bin; the seeded vacuum level is 1
SIDEBAND_RISE = 10.0  # sideband peak over the valley that separates it from the pump


def build_system(cfg: ExperimentConfig) -> FiberGasSystem:
    f, g = cfg["fiber"], cfg["gas"]
    geo = FiberGeometry(
        core_diameter=f["core_diameter_um"] * 1e-6,
        wall_thickness=f["wall_thickness_nm"] * 1e-9,
        s_parameter=f["s_parameter"],
        length=f["length_m"],
    )
    return FiberGasSystem(geo, GasState(g["species"], g["pressure_bar"], g["temperature_K"]))


def _with_energy(p: pump_mod.PumpPulse, energy):
    scale = np.sqrt(energy / p.energy)
    return replace(p, amplitude=p.amplitude * scale, energy=energy)


def build_pump(cfg: ExperimentConfig) -> pump_mod.PumpPulse:
    """Pump from a TL duration, a bandpass-filtered laser, or a tabulated spectrum.

    The configured energy is the energy launched into the fiber, so
    filtered pumps are rescaled to it after the filter.
    """
    p, g = cfg["pump"], cfg["grid"]
    grid = pump_mod.PumpGrid(g["n"], g["span_thz"] * THZ)
    lam = p["center_nm"] * 1e-9
    energy = p["energy_nJ"] * 1e-9
    chirp = p["chirp_fs2"] * 1e-30
    if p["tl_duration_fs"] is not None:
        return pump_mod.synthesize_pump(lam, p["tl_duration_fs"] * 1e-15, chirp, energy, grid)
    if p["spectrum_csv"] is not None:
        return pump_mod.load_pump_spectrum(p["spectrum_csv"], energy, chirp, grid, lam)
    laser = pump_mod.synthesize_pump(lam, p["laser_tl_duration_fs"] * 1e-15, 0.0, energy, grid)
    filtered = pump_mod.apply_bandpass(laser, lam, p["bandpass_fwhm_nm"] * 1e-9)
    return _with_energy(pump_mod.with_chirp(filtered, chirp), energy)


def peak_power(cfg, pump):
    pp = cfg.get("jsa", "peak_power_W")
    return pump_mod.pulse_metrics(pump)["peak_power"] if pp is None else pp


def analytic_gain(cfg, system, pump):
    """G = gamma * P_peak(input) * L unless the config fixes it."""
    g = cfg.get("sim", "gain")
    if g is not None:
        return float(g)
    pp = pump_mod.pulse_metrics(pump)["peak_power"]
    return float(system.gamma(np.array(pump.center)) * pp * system.geometry.length)


def _band(nm):
    lo, hi = sorted(nm)
    return omega_from_wavelength(hi * 1e-9), omega_from_wavelength(lo * 1e-9)


def run_jsa(cfg, system=None, pump=None):
    system = system or build_system(cfg)
    pump = pump or build_pump(cfg)
    j = cfg["jsa"]
    pp = peak_power(cfg, pump)
    js = jsa.compute_jsa(
        pump, system, system.geometry.length, pp, _band(j["signal_nm"]), _band(j["idler_nm"]),
        resolution=j["resolution"], allow_pump_overlap=j["allow_pump_overlap"],
    )
    try:
        pm = jsa.pm_geometry(system, pump.center, system.geometry.length, pp)
    except NotFoundError:
        pm = None
    return js, pm


def run_schmidt(cfg, js):
    s = cfg["schmidt"]
    return schmidt.schmidt_decompose(js, s["rank"], s["cumulative"])


def detection_from_cfg(cfg) -> sampler.DetectionConfig:
    d = cfg["detection"]
    return sampler.DetectionConfig(
        notch=None if d["notch_nm"] is None else tuple(x * 1e-9 for x in d["notch_nm"]),
        floor_db=d["floor_dB"],
        cutoff=None if d["cutoff_nm"] is None else d["cutoff_nm"] * 1e-9,
        read_noise_var=d["read_noise_var"],
        seed=d["seed"],
    )


def run_sample(cfg, dec, gain) -> ShotEnsemble:
    s = cfg["sim"]
    ens = sampler.sample_ensemble(dec, gain, s["nshots"], s["seed"], s["sampler_variant"], s["threads"])
    return sampler.apply_detection(ens, detection_from_cfg(cfg))


def propagation_config(cfg) -> gnlse.PropagationConfig:
    g, s = cfg["gnlse"], cfg["sim"]
    return gnlse.PropagationConfig(
        n=g["n"],
        time_span=g["time_span_ps"] * 1e-12,
        dz=g["dz_m"],
        error_goal=g["error_goal"],
        kerr=g["kerr"],
        self_steepening=g["self_steepening"],
        loss_db_per_m=g["loss_dB_per_m"],
        seed=s["seed"],
        z_saves=g["z_saves"],
    )


def run_gnlse(cfg, nshots=None) -> ShotEnsemble:
    system, pump = build_system(cfg), build_pump(cfg)
    n = cfg.get("sim", "nshots") if nshots is None else nshots
    ens = gnlse.run_mc_ensemble(pump, system, propagation_config(cfg), n, n_jobs=cfg.get("sim", "threads"))
    return sampler.apply_detection(ens, detection_from_cfg(cfg))


def pump_core(ens: ShotEnsemble, level=1e-2):
    """Contiguous bins around the spectral maximum with mean >= ``level`` of the peak."""
    mean = ens.shots.mean(axis=0)
    k = int(np.argmax(mean))
    lo = hi = k
    thr = level * mean[k]
    while lo > 0 and mean[lo - 1] >= thr:
        lo -= 1
    while hi < len(mean) - 1 and mean[hi + 1] >= thr:
        hi += 1
    return lo, hi


def _sideband(mean, omega, level):
    """Band of a sideband on one side of the pump, ordered outward from it.

    The pump tail falls monotonically; the sideband is the peak that rises
    highest above the running minimum (the valley) before it.
    """
    if len(mean) == 0:
        return None
    valley = np.minimum.accumulate(mean)
    rise = mean / np.maximum(valley, 1e-300)
    k = int(np.argmax(rise))
    if rise[k] < SIDEBAND_RISE or mean[k] < SIDEBAND_FLOOR:
        return None
    start = int(np.argmin(mean[:k + 1]))
    m, w = mean[start:], omega[start:]
    peak = int(np.argmax(m))
    sel = w[m >= level * m[peak]]
    return float(sel.min()), float(sel.max())


def auto_roi(ens: ShotEnsemble, level=0.01, pump_level=1e-4) -> statistics.RoiSpec:
    """Sideband bands on either side of the pump.

    The pump is the contiguous region above ``pump_level`` of the spectral
    peak. On each side the sideband starts after the valley separating it
    from the pump tail and spans the bins whose mean reaches ``level`` of
    the sideband maximum.
    """
    mean = ens.shots.mean(axis=0)
    lo, hi = pump_core(ens, pump_level)
    blue = _sideband(mean[hi + 1:], ens.omega[hi + 1:], level)
    red = _sideband(mean[:lo][::-1], ens.omega[:lo][::-1], level)
    if blue is None or red is None:
        raise StatisticsError("no sideband separated from the pump tail; set analysis.signal_nm and analysis.idler_nm")
    return statistics.RoiSpec(blue, red)


def resolve_roi(cfg, ens: ShotEnsemble):
    a = cfg["analysis"]
    if a["signal_nm"] is not None and a["idler_nm"] is not None:
        return statistics.RoiSpec(_band(a["signal_nm"]), _band(a["idler_nm"]))
    if ens.signal_band is not None and ens.idler_band is not None:
        return statistics.RoiSpec(ens.signal_band, ens.idler_band)
    return auto_roi(ens)


def depletion_fraction(ens: ShotEnsemble, roi, level=DEPLETION_LEVEL, variance_floor=1e-10):
    """Fraction of pump x sideband correlation entries below ``level``."""
    lo, hi = pump_core(ens)
    pump_bins = np.zeros(ens.nbins, dtype=bool)
    pump_bins[lo:hi + 1] = True
    side = ens.band_mask(roi.signal_band) | ens.band_mask(roi.idler_band)
    keep = pump_bins | side
    sub = ShotEnsemble(ens.omega[keep], ens.shots[:, keep])
    corr = statistics.correlation_matrix(sub, "full", variance_floor)
    p, s = pump_bins[keep], side[keep]
    block = corr.values[np.ix_(p, s)]
    v = block[np.isfinite(block)]
    return float(np.mean(v < level)) if v.size else 0.0


def pump_width(ens: ShotEnsemble, window=40 * THZ):
    """1/e^2 spectral width (Hz) of the mean spectrum amplitude near the pump."""
    mean = ens.shots.mean(axis=0)
    k = int(np.argmax(mean))
    m = np.abs(ens.omega - ens.omega[k]) <= window
    return pump_mod.spectral_width_1e2(ens.omega[m], np.sqrt(mean[m]))


def analyze(cfg, ens: ShotEnsemble, full_spectrum=None):
    """Covariance, correlation, reconstruction, g2 and tilt of one ensemble.

    Returns ``(summary, artifacts)``; artifacts hold the cross covariance,
    cross correlation and reconstruction.
    """
    a = cfg["analysis"]
    roi = resolve_roi(cfg, ens)
    e2 = ens.with_bands(roi.signal_band, roi.idler_band)
    cov = statistics.covariance_matrix(e2, "cross")
    corr = statistics.correlation_matrix(e2, "cross", a["variance_floor"])
    rec = statistics.reconstruct_modes(cov, rank=a["rank_cutoff"])
    es = e2.shots[:, e2.signal_mask].sum(axis=1)
    seed = cfg.get("sim", "seed")
    g2e, g2e_se = statistics.g2_from_energies(es, a["bootstrap_resamples"], seed)
    summary = {
        "nshots": ens.nshots,
        "signal_band_nm": [2 * pi * c / w * 1e9 for w in roi.signal_band[::-1]],
        "idler_band_nm": [2 * pi * c / w * 1e9 for w in roi.idler_band[::-1]],
        "K": rec.K,
        "g2_from_K": rec.g2,
        "g2_energy": g2e,
        "g2_energy_se": g2e_se,
        "negative_mass": rec.negative_mass,
        "truncation_residual": rec.truncation_residual,
        "sideband_photons": float(es.mean() + e2.shots[:, e2.idler_mask].sum(axis=1).mean()),
    }
    try:
        summary["tilt_deg"] = statistics.tilt_angle(corr, threshold=a["tilt_threshold"])
    except StatisticsError as exc:
        summary["tilt_deg"] = None
        summary["tilt_error"] = str(exc)
    center_nm = a["band_center_nm"]
    if center_nm is None:
        sig = e2.shots[:, e2.signal_mask].mean(axis=0)
        center = float(e2.omega[e2.signal_mask][np.argmax(sig)])
        center_nm = 2 * pi * c / center * 1e9
    bc, bw = statistics.nm_band(center_nm, a["band_width_nm"])
    g2b, g2b_se = statistics.band_g2(e2, bc, bw, a["bootstrap_resamples"], seed)
    summary.update(band_center_nm=center_nm, band_g2=g2b, band_g2_se=g2b_se)
    if full_spectrum is not None:
        summary["pump_width_thz"] = pump_width(full_spectrum) / 1e12
        summary["depletion_fraction"] = depletion_fraction(full_spectrum, roi, variance_floor=a["variance_floor"])
    return summary, {"roi": roi, "covariance": cov, "correlation": corr, "reconstruction": rec}


def run_point(cfg: ExperimentConfig):
    """One pipeline evaluation; returns ``(summary, ensemble)``."""
    system, pump = build_system(cfg), build_pump(cfg)
    if cfg.get("scan", "pipeline") == "gnlse":
        ens = gnlse.run_mc_ensemble(
            pump, system, propagation_config(cfg), cfg.get("sim", "nshots"), n_jobs=cfg.get("sim", "threads")
        )
        ens = sampler.apply_detection(ens, detection_from_cfg(cfg))
        summary, _ = analyze(cfg, ens, full_spectrum=ens)
        summary["gain"] = ens.meta["gain"]
        return summary, ens
    js, pm = run_jsa(cfg, system, pump)
    dec = run_schmidt(cfg, js)
    gain = analytic_gain(cfg, system, pump)
    ens = run_sample(cfg, dec, gain)
    summary, _ = analyze(cfg, ens)
    summary["gain"] = gain
    summary["schmidt_K_gain0"] = schmidt.schmidt_number(dec.lambdas)
    summary["K_theory"] = highgain_K(dec, gain)
    summary["pump_width_thz"] = pump_mod.spectral_width_1e2(pump.omega, pump.amplitude) / 1e12
    summary["phi_pm_deg"] = None if pm is None else pm.phi_pm
    return summary, ens


def highgain_K(dec, gain):
    return schmidt.highgain_weights(dec, gain).schmidt_number


SUMMARY_COLUMNS = [
    "index", "axis", "value", "status", "reason", "K", "K_theory", "g2_from_K", "g2_energy",
    "g2_energy_se", "band_g2", "tilt_deg", "phi_pm_deg", "pump_width_thz", "sideband_photons",
    "depletion_fraction", "gain", "file",
]


def config_digest(cfg: ExperimentConfig):
    return hashlib.sha256(cfg.result_dumps().encode()).hexdigest()[:16]


def _read_summary(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_scan(cfg: ExperimentConfig, out_dir, fmt="bin", log=None):
    """Evaluate the pipeline at every scan value and write ``scan_summary.csv``.

    A point whose row already exists for the same config digest is skipped,
    so re-running a finished scan leaves every file untouched. Failed points
    keep a ``failed`` row with the reason. Returns the list of rows.
    """
    axis = cfg.get("scan", "axis")
    values = cfg.get("scan", "values")
    if axis is None:
        raise ValueError("config has no [scan] axis")
    section, key = SCAN_AXES[axis]
    os.makedirs(out_dir, exist_ok=True)
    digest = config_digest(cfg)
    summary_path = os.path.join(out_dir, "scan_summary.csv")
    stamp_path = os.path.join(out_dir, "scan_config.toml")

    done = {}
    if os.path.exists(summary_path) and os.path.exists(stamp_path):
        with open(stamp_path) as fh:
            if digest in fh.readline():
                done = {int(r["index"]): r for r in _read_summary(summary_path)}

    rows = []
    changed = False
    for i, v in enumerate(values):
        if i in done:
            rows.append(done[i])
            continue
        changed = True
        row = {k: "" for k in SUMMARY_COLUMNS}
        row.update(index=i, axis=axis, value=repr(float(v)))
        try:
            point = cfg.replace(section, key, float(v))
            summary, ens = run_point(point)
            name = f"point_{i:03d}.{'tbe' if fmt == 'bin' else 'csv'}"
            path = os.path.join(out_dir, name)
            if fmt == "bin":
                io.write_ensemble(path, ens, provenance={"config": point.result_dumps()})
            else:
                io.write_ensemble_csv(path, ens)
            row["status"] = "ok"
            row["file"] = name
            for col in SUMMARY_COLUMNS:
                if col in summary and summary[col] is not None:
                    row[col] = repr(float(summary[col]))
        except (TwinbeamError, ValueError) as exc:
            row["status"] = "failed"
            row["reason"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        if log:
            log(f"{axis}={v}: {row['status']}")
        rows.append(row)

    if changed:
        buf = _io.StringIO()
        w = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in SUMMARY_COLUMNS})
        io.atomic_write_text(summary_path, buf.getvalue())
        io.atomic_write_text(stamp_path, f"# digest {digest}\n" + cfg.dumps())
    return rows
