"""Matrix (TBM1) and ensemble (TBE1) files, plus CSV interchange.

Binary layout, all little-endian::

    magic      4 bytes   b"TBM1" or b"TBE1"
    version    uint16
    hlen       uint32    length of the JSON header in bytes
    header     hlen      UTF-8 JSON (axes, units, provenance, metadata)
    payload    float64   row-major (matrix) or shot-major (ensemble)

Writes go to a temporary file in the target directory and are renamed into
place, so a reader never sees a partial file.

CSV files carry frequencies in THz (``omega / 2 pi``); values are written
with ``repr`` so they re-import exactly, while the axis conversion to THz
and back agrees to about 1e-15 relative.
"""
from __future__ import annotations

import csv
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import pi

from .ensemble import ShotEnsemble
from .errors import FileFormatError, MagicError, TruncatedError, VersionError

MATRIX_MAGIC = b"TBM1"
ENSEMBLE_MAGIC = b"TBE1"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")
THZ = 2 * pi * 1e12


@dataclass(frozen=True, eq=False)
class MatrixFile:
    values: np.ndarray
    row_axis: np.ndarray
    col_axis: np.ndarray
    units: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def equals(self, other):
        return (
            np.array_equal(self.values, other.values, equal_nan=True)
            and np.array_equal(self.row_axis, other.row_axis)
            and np.array_equal(self.col_axis, other.col_axis)
            and self.units == other.units
            and self.provenance == other.provenance
            and self.meta == other.meta
        )


def atomic_write_bytes(path, data: bytes):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def _pack(magic, header, payload: np.ndarray) -> bytes:
    h = json.dumps(header, sort_keys=True).encode("utf-8")
    body = np.ascontiguousarray(payload, dtype="<f8").tobytes()
    return _PREFIX.pack(magic, VERSION, len(h)) + h + body


def _unpack(path, magic):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise FileFormatError(f"cannot read {path}: {exc}") from exc
    if len(raw) < _PREFIX.size:
        raise TruncatedError(f"{path}: file shorter than the fixed header")
    got, version, hlen = _PREFIX.unpack_from(raw)
    if got != magic:
        raise MagicError(f"{path}: magic {got!r}, expected {magic!r}")
    if version > VERSION:
        raise VersionError(f"{path}: format version {version} is newer than this reader ({VERSION})")
    start = _PREFIX.size + hlen
    if len(raw) < start:
        raise TruncatedError(f"{path}: header truncated")
    try:
        header = json.loads(raw[_PREFIX.size:start].decode("utf-8"))
    except ValueError as exc:
        raise FileFormatError(f"{path}: corrupt header: {exc}") from exc
    return header, raw[start:]


def _payload(path, body, count):
    if len(body) < 8 * count:
        raise TruncatedError(f"{path}: payload has {len(body)} bytes, expected {8 * count}")
    if len(body) > 8 * count:
        raise FileFormatError(f"{path}: {len(body) - 8 * count} trailing bytes after payload")
    return np.frombuffer(body, dtype="<f8").astype(float)


def write_matrix(path, mat: MatrixFile):
    values = np.asarray(mat.values, dtype=float)
    if values.shape != (len(mat.row_axis), len(mat.col_axis)):
        raise ValueError("matrix shape does not match its axes")
    for ax in (mat.row_axis, mat.col_axis):
        if len(ax) > 1 and not (np.all(np.diff(ax) > 0) or np.all(np.diff(ax) < 0)):
            raise ValueError("axes must be strictly monotone")
    header = {
        "rows": values.shape[0],
        "cols": values.shape[1],
        "row_axis": [float(x) for x in mat.row_axis],
        "col_axis": [float(x) for x in mat.col_axis],
        "units": mat.units,
        "provenance": mat.provenance,
        "meta": mat.meta,
    }
    atomic_write_bytes(path, _pack(MATRIX_MAGIC, header, values))


def read_matrix(path) -> MatrixFile:
    header, body = _unpack(path, MATRIX_MAGIC)
    rows, cols = header["rows"], header["cols"]
    values = _payload(path, body, rows * cols).reshape(rows, cols)
    return MatrixFile(
        values,
        np.array(header["row_axis"], dtype=float),
        np.array(header["col_axis"], dtype=float),
        header.get("units", {}),
        header.get("provenance", {}),
        header.get("meta", {}),
    )


def write_ensemble(path, ens: ShotEnsemble, provenance=None):
    header = {
        "nshots": ens.nshots,
        "nbins": ens.nbins,
        "axis": [float(x) for x in ens.omega],
        "units": {"axis": "rad/s", "values": "photons per bin"},
        "seed": ens.meta.get("seed"),
        "signal_band": None if ens.signal_band is None else list(ens.signal_band),
        "idler_band": None if ens.idler_band is None else list(ens.idler_band),
        "meta": ens.meta,
        "provenance": provenance or {},
    }
    atomic_write_bytes(path, _pack(ENSEMBLE_MAGIC, header, ens.shots))


def read_ensemble(path, with_provenance=False):
    header, body = _unpack(path, ENSEMBLE_MAGIC)
    n, m = header["nshots"], header["nbins"]
    shots = _payload(path, body, n * m).reshape(n, m)
    sb, ib = header.get("signal_band"), header.get("idler_band")
    ens = ShotEnsemble(
        np.array(header["axis"], dtype=float),
        shots,
        signal_band=None if sb is None else tuple(sb),
        idler_band=None if ib is None else tuple(ib),
        meta=header.get("meta", {}),
    )
    if with_provenance:
        return ens, header.get("provenance", {})
    return ens


def _fmt(x):
    return repr(float(x))


def write_matrix_csv(path, mat: MatrixFile):
    """First row: blank corner then column frequencies (THz); then one row per row-bin."""
    lines = []
    lines.append(",".join(["THz"] + [_fmt(x / THZ) for x in mat.col_axis]))
    for r, row in zip(mat.row_axis, np.asarray(mat.values)):
        lines.append(",".join([_fmt(r / THZ)] + [_fmt(v) for v in row]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_matrix_csv(path) -> MatrixFile:
    rows = _read_rows(path)
    if len(rows) < 2:
        raise FileFormatError(f"{path}: matrix CSV needs a header row and at least one data row")
    cols = np.array(rows[0][1:], dtype=float) * THZ
    r = np.array([row[0] for row in rows[1:]], dtype=float) * THZ
    vals = np.array([row[1:] for row in rows[1:]], dtype=float)
    return MatrixFile(vals, r, cols)


def write_ensemble_csv(path, ens: ShotEnsemble):
    """First row: frequency axis in THz; each following row is one shot."""
    lines = [",".join(_fmt(x / THZ) for x in ens.omega)]
    lines += [",".join(_fmt(v) for v in shot) for shot in ens.shots]
    atomic_write_text(path, "\n".join(lines) + "\n")


def _read_rows(path):
    try:
        with open(path, newline="") as fh:
            return [row for row in csv.reader(fh) if row and any(x.strip() for x in row)]
    except OSError as exc:
        raise FileFormatError(f"cannot read {path}: {exc}") from exc


def read_ensemble_csv(path) -> ShotEnsemble:
    """Plain CSV spectra: first row frequencies (THz), then one shot per row.

    Columns are sorted to ascending frequency, so spectra exported in
    wavelength order load unchanged.
    """
    rows = _read_rows(path)
    if len(rows) < 3:
        raise FileFormatError(f"{path}: need a frequency row and at least two shots")
    try:
        axis = np.array(rows[0], dtype=float) * THZ
        shots = np.array(rows[1:], dtype=float)
    except ValueError as exc:
        raise FileFormatError(f"{path}: non-numeric or ragged CSV: {exc}") from exc
    if shots.ndim != 2 or shots.shape[1] != len(axis):
        raise FileFormatError(f"{path}: every shot row must have {len(axis)} values")
    order = np.argsort(axis)
    return ShotEnsemble(axis[order], shots[:, order], meta={"kind": "csv", "source": os.path.basename(path)})
