"""Command-line interface: ``twinbeam <subcommand> [options]``.

Exit status: 0 success, 2 configuration or usage error, 3 numerical
failure, 4 file I/O or format error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
from scipy.constants import c, pi

from . import config as config_mod
from . import gnlse, io, pipeline, schmidt
from .dispersion import beta_derivatives, find_zdw, omega_from_wavelength
from .errors import ConfigError, FileFormatError, TwinbeamError

THZ = io.THZ


def _load(args) -> config_mod.ExperimentConfig:
    cfg = config_mod.load_config(args.config) if args.config else config_mod.default_config()
    if args.seed is not None:
        cfg = cfg.replace("sim", "seed", args.seed)
    if args.threads is not None:
        cfg = cfg.replace("sim", "threads", args.threads)
    return cfg


def _provenance(cfg, command):
    return {"command": command, "config": cfg.result_dumps()}


def _out(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _emit(args, summary, name="summary.json"):
    text = json.dumps(summary, indent=2, sort_keys=True, default=_jsonable) + "\n"
    io.atomic_write_text(_out(args, name), text)
    sys.stdout.write(text)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x).__name__}")


def _write_matrix(args, cfg, stem, values, rows, cols, units, command, meta=None):
    mat = io.MatrixFile(np.asarray(values, dtype=float), rows, cols, units, _provenance(cfg, command), meta or {})
    if args.format == "csv":
        path = _out(args, stem + ".csv")
        io.write_matrix_csv(path, mat)
    else:
        path = _out(args, stem + ".tbm")
        io.write_matrix(path, mat)
    return os.path.basename(path)


def _write_ensemble(args, cfg, ens, command):
    stem = command
    if args.format == "csv":
        path = _out(args, stem + ".csv")
        io.write_ensemble_csv(path, ens)
    else:
        path = _out(args, stem + ".tbe")
        io.write_ensemble(path, ens, _provenance(cfg, command))
    return os.path.basename(path)


def _r(*xs):
    """Comma-joined exact reprs of plain floats."""
    return ",".join(repr(float(x)) for x in xs)


def _echo_config(args, cfg):
    io.atomic_write_text(_out(args, "effective_config.toml"), cfg.dumps())


def cmd_dispersion(args, cfg):
    system = pipeline.build_system(cfg)
    lam = np.linspace(args.range_nm[0], args.range_nm[1], args.points) * 1e-9
    w = omega_from_wavelength(lam)
    lines = ["wavelength_nm,beta_per_m,beta1_s_per_m,beta2_fs2_per_cm,beta3_fs3_per_cm"]
    for l, x in zip(lam, w):
        b = float(system.beta(x))
        b1 = float(beta_derivatives(system, x, 1))
        b2 = float(beta_derivatives(system, x, 2)) * 1e30 / 100
        b3 = float(beta_derivatives(system, x, 3)) * 1e45 / 100
        lines.append(_r(l * 1e9, b, b1, b2, b3))
    io.atomic_write_text(_out(args, "dispersion.csv"), "\n".join(lines) + "\n")
    try:
        zdw = find_zdw(system, (args.zdw_window_nm[0] * 1e-9, args.zdw_window_nm[1] * 1e-9)) * 1e9
    except TwinbeamError as exc:
        zdw = None
        print(f"warning: {exc}", file=sys.stderr)
    _emit(args, {"zdw_nm": zdw, "pressure_bar": cfg.get("gas", "pressure_bar"), "table": "dispersion.csv"})


def cmd_jsa(args, cfg):
    js, pm = pipeline.run_jsa(cfg)
    name = _write_matrix(
        args, cfg, "jsi", js.intensity, js.idler, js.signal,
        {"rows": "idler rad/s", "cols": "signal rad/s", "values": "|F|^2"}, "jsa",
    )
    summary = {"jsi": name, "resolution": len(js.signal)}
    if pm is not None:
        summary.update(
            phi_pm_deg=pm.phi_pm,
            delta_pm_rad_per_s=pm.delta_pm,
            signal_nm=2 * pi * c / pm.omega_s * 1e9,
            idler_nm=2 * pi * c / pm.omega_i * 1e9,
        )
    _emit(args, summary)


def cmd_schmidt(args, cfg):
    system, pump = pipeline.build_system(cfg), pipeline.build_pump(cfg)
    js, _ = pipeline.run_jsa(cfg, system, pump)
    dec = pipeline.run_schmidt(cfg, js)
    gain = pipeline.analytic_gain(cfg, system, pump)
    hg = schmidt.highgain_weights(dec, gain)
    schmidt.export_modes_csv(dec, _out(args, "modes.csv"), n_modes=args.modes, unit_scale=1 / THZ)
    lines = ["n,lambda,weight_high_gain,photons"]
    for k in range(dec.n_modes):
        lines.append(f"{k}," + _r(dec.lambdas[k], hg.weights[k], hg.photons[k]))
    io.atomic_write_text(_out(args, "weights.csv"), "\n".join(lines) + "\n")
    _emit(args, {
        "n_modes": dec.n_modes,
        "K_gain0": schmidt.schmidt_number(dec.lambdas),
        "gain": gain,
        "K": hg.schmidt_number,
        "g2_from_K": schmidt.g2_from_K(hg.schmidt_number),
        "truncation_residual": dec.truncation_residual,
    })


def cmd_sample(args, cfg):
    system, pump = pipeline.build_system(cfg), pipeline.build_pump(cfg)
    js, _ = pipeline.run_jsa(cfg, system, pump)
    dec = pipeline.run_schmidt(cfg, js)
    gain = pipeline.analytic_gain(cfg, system, pump)
    ens = pipeline.run_sample(cfg, dec, gain)
    name = _write_ensemble(args, cfg, ens, "sample")
    _emit(args, {"ensemble": name, "nshots": ens.nshots, "nbins": ens.nbins, "gain": gain,
                 "K_theory": pipeline.highgain_K(dec, gain)})


def _read_any_ensemble(path):
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == io.ENSEMBLE_MAGIC:
        return io.read_ensemble(path)
    if head in (io.MATRIX_MAGIC,):
        raise FileFormatError(f"{path} is a matrix file, not an ensemble")
    return io.read_ensemble_csv(path)


def cmd_analyze(args, cfg):
    ens = _read_any_ensemble(args.ensemble)
    summary, art = pipeline.analyze(cfg, ens)
    cov, corr, rec = art["covariance"], art["correlation"], art["reconstruction"]
    units = {"rows": "idler rad/s", "cols": "signal rad/s"}
    summary["covariance"] = _write_matrix(args, cfg, "covariance", cov.values, cov.row_omega, cov.col_omega,
                                          dict(units, values="photons^2"), "analyze")
    summary["correlation"] = _write_matrix(args, cfg, "correlation", corr.values, corr.row_omega, corr.col_omega,
                                           dict(units, values="C_ij (NaN = masked)"), "analyze")
    dec = schmidt.from_modes(rec.signal, rec.idler, rec.signal_modes, rec.idler_modes, rec.weights)
    schmidt.export_modes_csv(dec, _out(args, "modes.csv"), n_modes=args.modes, unit_scale=1 / THZ)
    summary["modes"] = "modes.csv"
    summary["weights"] = [float(x) for x in rec.weights[: args.modes]]
    _emit(args, summary)


def cmd_gnlse(args, cfg):
    system, pump = pipeline.build_system(cfg), pipeline.build_pump(cfg)
    pc = pipeline.propagation_config(cfg)
    nshots = args.nshots if args.nshots is not None else cfg.get("sim", "nshots")
    if nshots == 1:
        from . import rng as rng_mod

        start = gnlse.pump_field(pump, pc)
        noise = gnlse.seed_quantum_noise(pc, pump.center, rng_mod.shot_stream(pc.seed, 0))
        out = gnlse.propagate(gnlse.FieldSnapshot(start.field + noise.field, pump.center, pc.dt), system, pc)
        w = out.omega()
        lines = ["frequency_thz,wavelength_nm,photons_per_bin"]
        lines += [_r(x / THZ, 2 * pi * c / x * 1e9, p) for x, p in zip(w, out.photons_per_bin())]
        io.atomic_write_text(_out(args, "spectrum.csv"), "\n".join(lines) + "\n")
        summary = {"spectrum": "spectrum.csv", "energy_j": out.energy}
        if out.history:
            z = np.array([s.z for s in out.history])
            stack = np.array([s.photons_per_bin() for s in out.history])
            summary["zstack"] = _write_matrix(args, cfg, "zstack", stack, z, w,
                                              {"rows": "z m", "cols": "rad/s", "values": "photons per bin"}, "gnlse")
        _emit(args, summary)
        return
    ens = gnlse.run_mc_ensemble(pump, system, pc, nshots, n_jobs=cfg.get("sim", "threads"))
    name = _write_ensemble(args, cfg, ens, "gnlse")
    _emit(args, {"ensemble": name, "nshots": ens.nshots, "nbins": ens.nbins, "gain": ens.meta["gain"]})


def cmd_scan(args, cfg):
    rows = pipeline.run_scan(cfg, args.out, args.format, log=lambda m: print(m, file=sys.stderr))
    ok = sum(r["status"] == "ok" for r in rows)
    print(json.dumps({"summary": "scan_summary.csv", "points": len(rows), "ok": ok}, indent=2))
    if ok == 0:
        return 3
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML experiment config (default: built-in defaults)")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--seed", type=int, help="override sim.seed")
    common.add_argument("--threads", type=int, help="override sim.threads")
    common.add_argument("--format", choices=("bin", "csv"), default="bin", help="matrix/ensemble file format")

    p = argparse.ArgumentParser(prog="twinbeam", description="Twin-beam spectral correlation toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dispersion", parents=[common], help="beta, beta1, beta2 tables and the ZDW")
    d.add_argument("--range-nm", nargs=2, type=float, default=(500.0, 1200.0))
    d.add_argument("--points", type=int, default=141)
    d.add_argument("--zdw-window-nm", nargs=2, type=float, default=(600.0, 1000.0))
    d.set_defaults(func=cmd_dispersion)

    sub.add_parser("jsa", parents=[common], help="joint spectral intensity and phase-matching geometry").set_defaults(func=cmd_jsa)

    s = sub.add_parser("schmidt", parents=[common], help="Schmidt modes and high-gain weights")
    s.add_argument("--modes", type=int, default=8, help="modes to export")
    s.set_defaults(func=cmd_schmidt)

    sub.add_parser("sample", parents=[common], help="Monte-Carlo single-shot ensemble").set_defaults(func=cmd_sample)

    a = sub.add_parser("analyze", parents=[common], help="statistics of an ensemble file (TBE1 or CSV)")
    a.add_argument("ensemble", help="ensemble path (.tbe, or CSV with a THz axis row)")
    a.add_argument("--modes", type=int, default=8)
    a.set_defaults(func=cmd_analyze)

    g = sub.add_parser("gnlse", parents=[common], help="GNLSE single shot or ensemble")
    g.add_argument("--nshots", type=int, help="1 for a single shot; default sim.nshots")
    g.set_defaults(func=cmd_gnlse)

    sub.add_parser("scan", parents=[common], help="run the [scan] axis of the config").set_defaults(func=cmd_scan)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
        _echo_config(args, cfg)
        rc = args.func(args, cfg)
        return int(rc or 0)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileFormatError as exc:
        print(f"file error [{exc.code}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except TwinbeamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
