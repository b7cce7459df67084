"""Split-step propagation of the generalized nonlinear Schroedinger equation.

The envelope ``A(t)`` is in sqrt(W) on a uniform time grid in the frame
moving with the carrier group velocity. Spectra follow the pump module's
``exp(-i Omega t)`` convention::

    A(t) = d_omega / sqrt(2 pi) * sum_k A~(Omega_k) exp(-i Omega_k t)

so that ``sum |A|^2 dt == sum |A~|^2 d_omega`` (energy, J). Photons per
spectral bin are ``|A~|^2 d_omega / (hbar omega_k)``.

The model is

    dA~/dz = i (beta(w) - beta0 - beta1 Omega) A~ - (alpha/2) A~
             + i gamma (w / w0) F[|A|^2 A]

with the shock factor ``w / w0`` switchable. There is no Raman term, which
is exact for monatomic gases.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.constants import hbar, pi
from threadpoolctl import threadpool_limits

from . import rng as rng_mod
from .dispersion import beta_derivatives
from .ensemble import ShotEnsemble
from .errors import AliasingError, DivergenceError, StiffnessError
from .pump import PumpPulse

MIN_STEP = 1e-9
GUARD_FRACTION = 0.1
GUARD_LEVEL = 1e-6


@dataclass(frozen=True)
class PropagationConfig:
    """Numerical settings for ``propagate``.

    n : grid size, a power of two
    time_span : full time window (s)
    dz : fixed step (m); None selects the adaptive step-doubling controller
    error_goal : local relative error goal per step for the adaptive controller
    kerr, self_steepening : nonlinearity switches
    loss_db_per_m : flat power loss
    seed : base seed for the quantum-noise substreams
    z_saves : number of evenly spaced snapshots to keep (0 for none)
    """

    n: int = 2048
    time_span: float = 4e-12
    dz: float | None = None
    error_goal: float = 1e-6
    kerr: bool = True
    self_steepening: bool = True
    loss_db_per_m: float = 0.0
    seed: int = 0
    z_saves: int = 0
    initial_step: float = 1e-4

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"grid size must be a power of two, got {self.n}")
        if self.time_span <= 0:
            raise ValueError("time_span must be positive")
        if self.dz is not None and self.dz <= 0:
            raise ValueError("dz must be positive")
        if self.error_goal <= 0:
            raise ValueError("error_goal must be positive")

    @property
    def dt(self):
        return self.time_span / self.n

    @property
    def d_omega(self):
        return 2 * pi / self.time_span

    def time(self):
        return (np.arange(self.n) - self.n // 2) * self.dt

    def detuning(self):
        """Angular-frequency detuning in FFT order."""
        return 2 * pi * np.fft.fftfreq(self.n, self.dt)

    def omega(self, carrier):
        """Ascending absolute angular-frequency axis."""
        return carrier + np.fft.fftshift(self.detuning())


@dataclass(frozen=True, eq=False)
class FieldSnapshot:
    """Complex envelope (sqrt W) on the centred time grid."""

    field: np.ndarray
    carrier: float
    dt: float
    z: float = 0.0
    history: tuple = field(default=(), repr=False)

    @property
    def n(self):
        return len(self.field)

    @property
    def d_omega(self):
        return 2 * pi / (self.n * self.dt)

    @property
    def energy(self):
        return float(np.sum(np.abs(self.field) ** 2) * self.dt)

    def spectrum(self):
        """A~ in FFT order (sqrt(J s))."""
        return to_frequency(self.field, self.dt)

    def omega(self):
        return self.carrier + np.fft.fftshift(2 * pi * np.fft.fftfreq(self.n, self.dt))

    def photons_per_bin(self):
        """Photon number per bin on the ascending axis ``omega()``."""
        s = np.fft.fftshift(self.spectrum())
        return np.abs(s) ** 2 * self.d_omega / (hbar * self.omega())

    def spectral_energy(self):
        return float(np.sum(np.abs(self.spectrum()) ** 2) * self.d_omega)


def to_time(spec, dt):
    n = len(spec)
    dw = 2 * pi / (n * dt)
    return np.fft.fftshift(np.fft.fft(spec)) * dw / np.sqrt(2 * pi)


def to_frequency(a, dt):
    n = len(a)
    return np.fft.ifft(np.fft.ifftshift(a)) * n * dt / np.sqrt(2 * pi)


def seed_quantum_noise(config: PropagationConfig, carrier, rng: np.random.Generator) -> FieldSnapshot:
    """One photon per spectral bin with uniform random phase.

    Each bin gets ``|A~|^2 d_omega = hbar omega_k``, so the noise energy is
    ``sum_k hbar omega_k`` exactly.
    """
    w = carrier + config.detuning()
    if np.any(w <= 0):
        raise AliasingError("time grid too fine: frequency axis reaches zero")
    phase = rng.uniform(0, 2 * pi, config.n)
    spec = np.sqrt(hbar * w / config.d_omega) * np.exp(1j * phase)
    return FieldSnapshot(to_time(spec, config.dt), carrier, config.dt)


def pump_field(pump: PumpPulse, config: PropagationConfig) -> FieldSnapshot:
    """Pump resampled onto the simulation grid, carrier at the pump centre.

    The pump energy outside the central 80% of the spectral window and in
    the outer 10% of the time window on each side must be negligible. The
    resampled field is rescaled to carry exactly the pump energy.
    """
    w = pump.center + config.detuning()
    alpha = pump.resample(w)
    spec = np.sqrt(hbar * pump.center) * alpha
    e = np.sum(np.abs(spec) ** 2) * config.d_omega
    if e > 0:
        spec = spec * np.sqrt(pump.energy / e)
    a = to_time(spec, config.dt)
    snap = FieldSnapshot(a, pump.center, config.dt)
    total = np.sum(np.abs(spec) ** 2)
    shifted = np.abs(np.fft.fftshift(spec)) ** 2
    g = max(1, int(GUARD_FRACTION * config.n))
    if total > 0 and (shifted[:g].sum() + shifted[-g:].sum()) > GUARD_LEVEL * total:
        raise AliasingError("pump spectrum extends into the 20% spectral guard band; widen the grid")
    p = np.abs(a) ** 2
    if p.sum() > 0 and (p[:g].sum() + p[-g:].sum()) > GUARD_LEVEL * p.sum():
        raise AliasingError("pump pulse extends into the 20% temporal guard band; widen time_span")
    return snap


class _Stepper:
    def __init__(self, system, carrier, config: PropagationConfig):
        self.config = config
        self.dt = config.dt
        om = config.detuning()
        w = carrier + om
        system.check_omega(w)
        b = system.beta_excess(w)
        b0 = system.beta_excess(np.array(carrier))
        b1 = beta_derivatives(system, carrier, 1) - system.linear_slope
        self.lin = b - b0 - b1 * om
        self.loss = 0.5 * config.loss_db_per_m * np.log(10) / 10
        self.gamma = float(system.gamma(np.array(carrier))) if config.kerr else 0.0
        self.shock = 1 + om / carrier if config.self_steepening else None
        self._cache = {}

    def _linear(self, spec, h):
        op = self._cache.get(h)
        if op is None:
            op = np.exp((1j * self.lin - self.loss) * h)
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[h] = op
        return spec * op

    def _rhs(self, spec):
        a = to_time(spec, self.dt)
        nl = to_frequency(np.abs(a) ** 2 * a, self.dt)
        return 1j * self.gamma * self.shock * nl

    def _nonlinear(self, spec, h):
        if self.gamma == 0:
            return spec
        if self.shock is None:
            a = to_time(spec, self.dt)
            return to_frequency(a * np.exp(1j * self.gamma * np.abs(a) ** 2 * h), self.dt)
        k1 = self._rhs(spec)
        k2 = self._rhs(spec + 0.5 * h * k1)
        k3 = self._rhs(spec + 0.5 * h * k2)
        k4 = self._rhs(spec + h * k3)
        return spec + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    def step(self, spec, h):
        s = self._linear(spec, h / 2)
        s = self._nonlinear(s, h)
        return self._linear(s, h / 2)


def propagate(inp: FieldSnapshot, system, config: PropagationConfig, length=None) -> FieldSnapshot:
    """Propagate ``inp`` over ``length`` (default: the fiber length).

    Symmetric split step with the full dispersion operator. With ``dz`` unset
    the step is chosen by step doubling: a full step is compared with two
    half steps, the two-half-step result is kept, and the step is adapted to
    hold the relative difference near ``error_goal``. Snapshots requested by
    ``z_saves`` are returned in ``history``.
    """
    if inp.n != config.n or not np.isclose(inp.dt, config.dt, rtol=1e-12):
        raise ValueError("input field does not match the configured grid")
    if length is None:
        length = system.geometry.length
    stepper = _Stepper(system, inp.carrier, config)
    spec = inp.spectrum()
    z = inp.z
    z_end = inp.z + length
    saves = list(np.linspace(inp.z, z_end, config.z_saves + 1)[1:]) if config.z_saves else []
    history = []
    h = config.dz if config.dz is not None else min(config.initial_step, length)

    while z < z_end * (1 - 1e-15) and z_end - z > 1e-15:
        target = saves[0] if saves else z_end
        h_try = min(h, target - z)
        if config.dz is not None:
            new = stepper.step(spec, h_try)
            err = 0.0
        else:
            coarse = stepper.step(spec, h_try)
            new = stepper.step(stepper.step(spec, h_try / 2), h_try / 2)
            nrm = np.linalg.norm(new)
            err = np.linalg.norm(new - coarse) / nrm if nrm > 0 else 0.0
            if not np.isfinite(err):
                raise DivergenceError(f"non-finite field at z = {z:.6g} m")
            if err > 2 * config.error_goal:
                h = h_try / 2
                if h < MIN_STEP:
                    raise StiffnessError(f"step underflow at z = {z:.6g} m (dz < {MIN_STEP} m)")
                continue
        if not np.all(np.isfinite(new)):
            raise DivergenceError(f"non-finite field at z = {z:.6g} m")
        spec = new
        z += h_try
        if saves and abs(z - saves[0]) <= 1e-12 * max(1.0, abs(z_end)):
            z = saves.pop(0)
            history.append(FieldSnapshot(to_time(spec, config.dt), inp.carrier, config.dt, z))
        # a step clipped to land on a save point leaves h unchanged
        if config.dz is None and h_try == h:
            if err > config.error_goal:
                h = h / 2 ** (1 / 3)
            elif err < 0.5 * config.error_goal:
                h = h * 2 ** (1 / 3)
    return FieldSnapshot(to_time(spec, config.dt), inp.carrier, config.dt, z_end, tuple(history))


def mi_gain_analytic(beta2, gamma, peak_power, omega):
    """Small-signal modulational-instability power gain g(Omega) in 1/m.

    g = |beta2 Omega| sqrt(Omega_c^2 - Omega^2) for |Omega| < Omega_c with
    Omega_c^2 = 4 gamma P / |beta2|, zero elsewhere and zero for normal
    dispersion.
    """
    om = np.abs(np.asarray(omega, dtype=float))
    if beta2 >= 0 or gamma * peak_power <= 0:
        return np.zeros_like(om)
    wc2 = 4 * gamma * peak_power / abs(beta2)
    return np.where(om < np.sqrt(wc2), abs(beta2) * om * np.sqrt(np.maximum(wc2 - om**2, 0)), 0.0)


def mi_peak(beta2, gamma, peak_power):
    """Location and value of the MI gain maximum, ``(Omega_max, 2 gamma P)``."""
    wc = np.sqrt(4 * gamma * peak_power / abs(beta2))
    return wc / np.sqrt(2), 2 * gamma * peak_power


def _one_shot(pump_snap, system, config, k, length):
    noise = seed_quantum_noise(config, pump_snap.carrier, rng_mod.shot_stream(config.seed, k))
    start = FieldSnapshot(pump_snap.field + noise.field, pump_snap.carrier, config.dt)
    try:
        out = propagate(start, system, config, length)
    except DivergenceError as exc:
        raise DivergenceError(f"shot {k} (seed {config.seed}): {exc}") from exc
    return out.photons_per_bin()


def run_mc_ensemble(
    pump: PumpPulse, system, config: PropagationConfig, nshots, length=None, n_jobs=1, band=None
) -> ShotEnsemble:
    """Monte-Carlo ensemble of full output spectra in photons per bin.

    Shot ``k`` adds quantum noise from substream (seed, k) to the pump and
    propagates it. ``band = (omega_lo, omega_hi)`` crops the recorded axis.
    Results do not depend on ``n_jobs``.
    """
    if nshots < 2:
        raise ValueError("nshots must be >= 2")
    if length is None:
        length = system.geometry.length
    snap = pump_field(pump, config)
    omega = config.omega(pump.center)
    keep = np.ones(config.n, dtype=bool)
    if band is not None:
        keep = (omega >= band[0]) & (omega <= band[1])

    def job(k):
        with threadpool_limits(1):
            return _one_shot(snap, system, config, k, length)[keep]

    if n_jobs == 1:
        rows = [job(k) for k in range(nshots)]
    else:
        rows = Parallel(n_jobs=n_jobs)(delayed(job)(k) for k in range(nshots))
    peak = float(np.max(pump.power()[1]))
    gamma = float(system.gamma(np.array(pump.center)))
    meta = {
        "kind": "gnlse",
        "seed": int(config.seed),
        "rng": rng_mod.ALGORITHM,
        "length_m": float(length),
        "peak_power_w": peak,
        "gain_definition": "G = gamma * P_peak(input) * L",
        "gain": gamma * peak * float(length),
        "energy_j": float(pump.energy),
        "chirp_s2": float(pump.chirp),
        "grid_n": int(config.n),
        "time_span_s": float(config.time_span),
        "error_goal": float(config.error_goal),
        "dz": config.dz,
        "self_steepening": bool(config.self_steepening),
        "detection": None,
    }
    return ShotEnsemble(omega[keep], np.array(rows), meta=meta)
