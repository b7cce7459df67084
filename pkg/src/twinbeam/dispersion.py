"""Pressure-tunable dispersion and nonlinearity of a gas-filled hollow-core fiber.

The gas is described by a two-term Sellmeier expansion of the susceptibility
(n^2 - 1) of argon, measured at 273.15 K and 1 bar by Börzsönyi et al.,
Appl. Opt. 47, 4856 (2008)::

    n^2 - 1 = B1 lam^2 / (lam^2 - C1) + B2 lam^2 / (lam^2 - C2)

    B1 = 20332.29e-8,  C1 = 206.12e-6 um^2
    B2 = 34458.31e-8,  C2 = 8.066e-3  um^2

and the susceptibility is scaled linearly with the ideal-gas number density.
The measured range is 0.4-1.0 um; the formula is used on 0.2-3.0 um, far from
the resonances at 14 nm and 90 nm.

The guided mode follows the capillary model with a wavelength-dependent
effective core radius, an empirical fit for kagome-style hollow-core fiber::

    n_eff^2 = n_gas^2 - (u01 c / (a_eff omega))^2
    a_eff   = a_AP / (1 + s lam^2 / (a_AP t))

with a_AP the radius of the circle with the same area as the hexagonal core
of the given flat-to-flat diameter.

All quantities are SI: metres, rad/s, seconds, bar for pressure, kelvin.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.constants import c, pi

from .errors import AmbiguityError, CutoffError, NotFoundError, OutOfRangeError

# first zero of J0
U01 = 2.404825557695773

REFERENCE_TEMPERATURE = 273.15
REFERENCE_PRESSURE = 1.0
DEFAULT_TEMPERATURE = 293.0

# Kerr index at the Sellmeier reference density, m^2/W (Lehmeier et al.,
# Opt. Commun. 56, 67 (1985), 9.8e-24 m^2/W per bar for argon).
ARGON_N2 = 9.8e-24

# capillary fundamental-mode effective area, in units of pi a^2
EFFECTIVE_AREA_FACTOR = 0.48

# central-difference step for beta derivatives
FD_STEP = 2 * pi * 10e9

ZDW_TOLERANCE = 0.1e-9


@dataclass(frozen=True)
class GasSpecies:
    name: str
    b: tuple[float, ...]
    c_um2: tuple[float, ...]
    n2: float
    wavelength_window: tuple[float, float]

    def susceptibility(self, wavelength):
        """n^2 - 1 at the reference density."""
        lam2 = (np.asarray(wavelength, dtype=float) * 1e6) ** 2
        return sum(b * lam2 / (lam2 - cc) for b, cc in zip(self.b, self.c_um2))


ARGON = GasSpecies(
    name="argon",
    b=(20332.29e-8, 34458.31e-8),
    c_um2=(206.12e-6, 8.066e-3),
    n2=ARGON_N2,
    wavelength_window=(0.2e-6, 3.0e-6),
)

SPECIES = {"argon": ARGON}


@dataclass(frozen=True)
class FiberGeometry:
    """Kagomé-style fiber geometry.

    Parameters
    ----------
    core_diameter : float
        Flat-to-flat core diameter in m.
    wall_thickness : float
        Core wall thickness in m.
    s_parameter : float
        Empirical parameter of the effective-radius model, in (0, 1).
    length : float
        Fiber length in m.
    """

    core_diameter: float = 18.5e-6
    wall_thickness: float = 240e-9
    s_parameter: float = 0.03
    length: float = 0.3

    def __post_init__(self):
        if min(self.core_diameter, self.wall_thickness, self.length) <= 0:
            raise ValueError("fiber dimensions must be positive")
        if not 0 <= self.s_parameter < 1:
            raise ValueError(f"s_parameter must lie in [0, 1), got {self.s_parameter}")
        if self.core_diameter <= 10 * self.wall_thickness:
            raise ValueError("core diameter must be much larger than the wall thickness")

    @property
    def area_preserving_radius(self):
        # hexagon of flat-to-flat D has area sqrt(3)/2 D^2
        return self.core_diameter * np.sqrt(np.sqrt(3) / (2 * pi))

    def effective_radius(self, wavelength):
        a = self.area_preserving_radius
        return a / (1 + self.s_parameter * np.asarray(wavelength) ** 2 / (a * self.wall_thickness))


@dataclass(frozen=True)
class GasState:
    species: str = "argon"
    pressure: float = 0.0
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        if self.species not in SPECIES:
            raise ValueError(f"unknown gas species {self.species!r}; known: {sorted(SPECIES)}")
        if self.pressure < 0:
            raise ValueError("pressure must be >= 0")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")

    @property
    def properties(self) -> GasSpecies:
        return SPECIES[self.species]

    @property
    def relative_density(self):
        """Ideal-gas number density relative to the Sellmeier reference state."""
        return (self.pressure / REFERENCE_PRESSURE) * (REFERENCE_TEMPERATURE / self.temperature)


def _check_wavelength(gas: GasState, wavelength):
    lo, hi = gas.properties.wavelength_window
    lam = np.asarray(wavelength, dtype=float)
    if np.any(lam < lo) or np.any(lam > hi):
        raise OutOfRangeError(
            f"wavelength outside the {gas.species} validity window "
            f"[{lo * 1e9:.0f} nm, {hi * 1e9:.0f} nm]"
        )
    return lam


def gas_susceptibility(gas: GasState, wavelength):
    """n^2 - 1 of the gas at its density."""
    lam = _check_wavelength(gas, wavelength)
    return gas.properties.susceptibility(lam) * gas.relative_density


def gas_refractive_index(gas: GasState, wavelength):
    """Refractive index of the gas at vacuum ``wavelength`` (m)."""
    return np.sqrt(1 + gas_susceptibility(gas, wavelength))


@dataclass(frozen=True)
class FiberGasSystem:
    """Gas-filled hollow-core fiber: geometry plus gas state.

    ``beta_excess`` returns beta(omega) - omega/c. Every physical combination
    used downstream (phase mismatch, dispersion operator, derivatives of
    order >= 2) is insensitive to terms linear in omega, and dropping the
    vacuum term avoids catastrophic cancellation in finite differences.
    """

    geometry: FiberGeometry
    gas: GasState
    linear_slope: float = field(default=1 / c, init=False)

    @property
    def window(self):
        """Angular-frequency validity window (rad/s)."""
        lo, hi = self.gas.properties.wavelength_window
        return 2 * pi * c / hi, 2 * pi * c / lo

    def check_omega(self, omega):
        w = np.asarray(omega, dtype=float)
        lo, hi = self.window
        if np.any(w < lo) or np.any(w > hi):
            raise OutOfRangeError(
                f"angular frequency outside validity window [{lo:.4g}, {hi:.4g}] rad/s"
            )
        return w

    def index_excess(self, omega):
        """n_eff - 1."""
        w = self.check_omega(omega)
        lam = 2 * pi * c / w
        a = self.geometry.effective_radius(lam)
        x = gas_susceptibility(self.gas, lam) - (U01 * c / (a * w)) ** 2
        if np.any(x <= -1):
            raise CutoffError("frequency below the waveguide cutoff (n_eff^2 < 0)")
        return x / (1 + np.sqrt(1 + x))

    def beta_excess(self, omega):
        w = np.asarray(omega, dtype=float)
        return w * self.index_excess(w) / c

    def beta(self, omega):
        w = np.asarray(omega, dtype=float)
        return w / c + self.beta_excess(w)

    def gamma(self, omega):
        w = self.check_omega(omega)
        n2 = self.gas.properties.n2 * self.gas.relative_density
        area = EFFECTIVE_AREA_FACTOR * pi * self.geometry.area_preserving_radius**2
        return n2 * w / (c * area)

    def with_pressure(self, pressure):
        return FiberGasSystem(self.geometry, GasState(self.gas.species, pressure, self.gas.temperature))


@dataclass(frozen=True)
class TaylorDispersion:
    """Dispersion given by Taylor coefficients about ``omega0``.

    ``betas`` holds (beta2, beta3, ...) in s^k/m. Used as an analytic test
    profile; ``gamma`` is frequency independent.
    """

    omega0: float
    betas: tuple[float, ...]
    nonlinearity: float = 0.0
    beta1: float = 0.0
    window: tuple[float, float] = (0.0, np.inf)
    linear_slope: float = field(init=False, default=0.0)

    def __post_init__(self):
        object.__setattr__(self, "linear_slope", self.beta1)

    def check_omega(self, omega):
        w = np.asarray(omega, dtype=float)
        lo, hi = self.window
        if np.any(w < lo) or np.any(w > hi):
            raise OutOfRangeError("angular frequency outside validity window")
        return w

    def beta_excess(self, omega):
        dw = self.check_omega(omega) - self.omega0
        return sum(b * dw ** (k + 2) / factorial(k + 2) for k, b in enumerate(self.betas))

    def beta(self, omega):
        w = np.asarray(omega, dtype=float)
        return self.beta1 * (w - self.omega0) + self.beta_excess(w)

    def gamma(self, omega):
        return np.full_like(np.asarray(omega, dtype=float), self.nonlinearity)


def effective_beta(system, omega):
    """Propagation constant beta(omega) in rad/m."""
    return system.beta(omega)


def beta_derivatives(system, omega, order, step=FD_STEP):
    """d^k beta / d omega^k for k = 1, 2, 3 by central differences.

    The stencil must stay inside the validity window; ``step`` defaults to
    2 pi x 10 GHz.
    """
    w = np.asarray(omega, dtype=float)
    f = system.beta_excess
    h = step
    if order == 1:
        return system.linear_slope + (f(w + h) - f(w - h)) / (2 * h)
    if order == 2:
        return (f(w + h) - 2 * f(w) + f(w - h)) / h**2
    if order == 3:
        return (f(w + 2 * h) - 2 * f(w + h) + 2 * f(w - h) - f(w - 2 * h)) / (2 * h**3)
    raise ValueError(f"order must be 1, 2 or 3, got {order}")


def nonlinear_parameter(system, omega):
    """Kerr nonlinear parameter gamma in 1/(W m)."""
    return system.gamma(omega)


def find_zdw(system, window, samples=2001):
    """Zero-dispersion wavelength (m) inside ``window = (lam_min, lam_max)``.

    beta2 is sampled on ``samples`` points; exactly one sign change is
    required, which is then bisected to 0.1 nm.
    """
    lo, hi = sorted(window)
    lam = np.linspace(lo, hi, samples)
    b2 = beta_derivatives(system, 2 * pi * c / lam, 2)
    sign = np.sign(b2)
    crossings = np.flatnonzero(sign[:-1] * sign[1:] < 0)
    crossings = np.union1d(crossings, np.flatnonzero(sign == 0))
    if len(crossings) == 0:
        raise NotFoundError(f"beta2 has no sign change in [{lo * 1e9:.1f}, {hi * 1e9:.1f}] nm")
    if len(crossings) > 1:
        raise AmbiguityError(
            f"beta2 changes sign {len(crossings)} times in [{lo * 1e9:.1f}, {hi * 1e9:.1f}] nm"
        )
    i = crossings[0]
    a, b = lam[i], lam[min(i + 1, samples - 1)]
    fa = b2[i]
    while b - a > ZDW_TOLERANCE:
        m = 0.5 * (a + b)
        fm = beta_derivatives(system, 2 * pi * c / m, 2)
        if fm == 0:
            return float(m)
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b = m
    return float(0.5 * (a + b))


def omega_from_wavelength(wavelength):
    return 2 * pi * c / np.asarray(wavelength, dtype=float)


def wavelength_from_omega(omega):
    return 2 * pi * c / np.asarray(omega, dtype=float)
