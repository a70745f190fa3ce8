"""Closed-form plane-wave solutions of the linearized isothermal system.

A single Fourier mode on a uniform self-gravitating background either
oscillates (wavelength below the Jeans length), grows exponentially
(above it), or, with gravity switched off, travels as an ordinary sound
wave.  These solutions serve as the analytic oracle for both numerical
solvers, and their t = 0 slices define every initial condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import UnitSystem, default_units

GROWING = "growing"
OSCILLATING = "oscillating"
SOUND = "sound"


class RegimeError(ValueError):
    """Raised when a quantity is undefined in the requested wave regime."""


def dispersion(k_mag: float, units: UnitSystem | None = None) -> float:
    """omega^2 for wavenumber magnitude k: c_s^2 k^2 - 4*pi*G*rho0."""
    u = units or default_units()
    return (u.c_s * k_mag) ** 2 - u.four_pi_g * u.rho0


def oscillation_frequency(k_mag: float, units: UnitSystem | None = None) -> float:
    om2 = dispersion(k_mag, units)
    if om2 <= 0.0:
        raise RegimeError(f"k = {k_mag} is not in the oscillating regime")
    return math.sqrt(om2)


def growth_rate(k_mag: float, units: UnitSystem | None = None) -> float:
    om2 = dispersion(k_mag, units)
    if om2 >= 0.0:
        raise RegimeError(f"k = {k_mag} is not in the growing regime")
    return math.sqrt(-om2)


def e_folding_time(k_mag: float, units: UnitSystem | None = None) -> float:
    return 1.0 / growth_rate(k_mag, units)


def phase_speed(k_mag: float, units: UnitSystem | None = None) -> float:
    if k_mag <= 0.0:
        raise RegimeError("phase speed needs a positive wavenumber")
    return oscillation_frequency(k_mag, units) / k_mag


def velocity_amplitude(amplitude: float, k_mag: float,
                       units: UnitSystem | None = None, gravity: bool = True,
                       branch: int = +1) -> float:
    """Velocity amplitude paired with density amplitude `amplitude`.

    Oscillating and sound regimes give +-v_p * amplitude / rho0 (branch picks
    the propagation direction); the growing regime has the fixed value
    -(alpha/k) * amplitude / rho0 of the growing eigenmode.
    """
    u = units or default_units()
    if k_mag <= 0.0:
        raise RegimeError("velocity amplitude needs a positive wavenumber")
    if branch not in (+1, -1):
        raise ValueError("branch must be +1 or -1")
    if not gravity:
        return branch * u.c_s * amplitude / u.rho0
    om2 = dispersion(k_mag, u)
    if om2 > 0.0:
        return branch * (math.sqrt(om2) / k_mag) * amplitude / u.rho0
    if om2 < 0.0:
        return -(math.sqrt(-om2) / k_mag) * amplitude / u.rho0
    raise RegimeError("mode sits exactly on the Jeans wavenumber")


@dataclass(frozen=True)
class WaveMode:
    """One plane-wave mode: amplitude, wavevector, regime, and rates."""

    amplitude: float
    wavevector: np.ndarray
    units: UnitSystem
    gravity: bool
    regime: str
    rate: float        # alpha when growing, omega otherwise
    v_amplitude: float

    @property
    def k_mag(self) -> float:
        return float(np.linalg.norm(self.wavevector))

    @property
    def direction(self) -> np.ndarray:
        return self.wavevector / self.k_mag

    @property
    def dimension(self) -> int:
        return self.wavevector.shape[0]


def make_mode(amplitude: float, wavevector, units: UnitSystem | None = None,
              gravity: bool = True, branch: int = +1) -> WaveMode:
    u = units or default_units()
    k_vec = np.atleast_1d(np.asarray(wavevector, dtype=float))
    k_mag = float(np.linalg.norm(k_vec))
    if amplitude <= 0.0:
        raise ValueError("amplitude must be positive")
    if k_mag == 0.0:
        raise RegimeError("wavevector must be nonzero")
    if not gravity:
        regime, rate = SOUND, branch * u.c_s * k_mag
    else:
        om2 = dispersion(k_mag, u)
        if om2 > 0.0:
            regime, rate = OSCILLATING, branch * math.sqrt(om2)
        elif om2 < 0.0:
            regime, rate = GROWING, math.sqrt(-om2)
        else:
            raise RegimeError("mode sits exactly on the Jeans wavenumber")
    v1a = velocity_amplitude(amplitude, k_mag, u, gravity=gravity, branch=branch)
    return WaveMode(amplitude=amplitude, wavevector=k_vec, units=u,
                    gravity=gravity, regime=regime, rate=rate, v_amplitude=v1a)


@dataclass(frozen=True)
class ModeFields:
    """Field arrays sampled from a mode: density, velocity, potential, gravity."""

    rho: np.ndarray    # (...,)
    v: np.ndarray      # (..., d)
    phi: np.ndarray    # (...,)
    g: np.ndarray      # (..., d)


def evaluate_mode(mode: WaveMode, x, t) -> ModeFields:
    """Evaluate the mode at spatial points x (..., d) and time(s) t.

    The potential is the mean-free solution of the perturbed Poisson
    equation, phi1 = -4*pi*G*rho1 / k^2, which encodes the convention of
    sourcing gravity by the density contrast only.
    """
    u = mode.units
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and mode.dimension == 1:
        x = x[:, None]
    if x.shape[-1] != mode.dimension:
        raise ValueError("x must have one column per mode dimension")
    t = np.asarray(t, dtype=float)
    k_vec, k_mag = mode.wavevector, mode.k_mag
    kx = x @ k_vec

    if mode.regime == GROWING:
        envelope = mode.amplitude * np.exp(mode.rate * t)
        rho1 = envelope * np.cos(kx)
        v_scalar = mode.v_amplitude * np.exp(mode.rate * t) * np.sin(kx)
    else:
        theta = mode.rate * t - kx
        rho1 = mode.amplitude * np.cos(theta)
        v_scalar = mode.v_amplitude * np.cos(theta)

    rho = u.rho0 + rho1
    v = v_scalar[..., None] * mode.direction

    if mode.gravity:
        phi = -u.four_pi_g * rho1 / k_mag**2
        # g = -grad(phi) = (4*pi*G/k^2) * grad(rho1); grad(rho1) = -amp*sin(.)*k
        if mode.regime == GROWING:
            g_scalar = -(u.four_pi_g / k_mag) * mode.amplitude \
                * np.exp(mode.rate * t) * np.sin(kx)
        else:
            g_scalar = (u.four_pi_g / k_mag) * mode.amplitude * np.sin(theta)
        g = g_scalar[..., None] * mode.direction
    else:
        phi = np.zeros_like(rho)
        g = np.zeros_like(v)

    return ModeFields(rho=rho, v=v, phi=phi, g=g)


def initial_condition(mode: WaveMode, x) -> tuple[np.ndarray, np.ndarray]:
    """Density and velocity at t = 0.

    The growing branch pairs rho = rho0 + a*cos(k.x) with the eigenmode
    velocity v = v1a*sin(k.x) (v1a negative); traveling branches take the
    t = 0 slice of the running wave.
    """
    u = mode.units
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and mode.dimension == 1:
        x = x[:, None]
    kx = x @ mode.wavevector
    rho = u.rho0 + mode.amplitude * np.cos(kx)
    if mode.regime == GROWING:
        v_scalar = mode.v_amplitude * np.sin(kx)
    else:
        v_scalar = mode.v_amplitude * np.cos(kx)
    return rho, v_scalar[..., None] * mode.direction
