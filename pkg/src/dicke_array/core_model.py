"""Array geometry, unit conversions and the single-excitation Dicke basis.

Positions are fixed at ``z_j = j * h`` for ``j = 1..N``. A common offset of
all positions only multiplies every basis vector by a global phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# reduced Planck constant, meV * ps (CODATA 2018)
HBAR_MEV_PS = 0.6582119569
SPEED_OF_LIGHT_NM_PS = 299792.458


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = HBAR_MEV_PS


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class ArrayParams:
    """Geometry and rates of a 1-D array of identical two-level emitters.

    Lengths are in nm, the light speed in nm/ps and ``gamma_tle`` in inverse
    dimensionless time units, one of which lasts ``time_unit`` picoseconds.
    """

    n_emitters: int
    spacing: float
    wavevector: float
    light_speed: float = SPEED_OF_LIGHT_NM_PS
    gamma_tle: float = 1.0
    time_unit: float = 10.0

    def __post_init__(self):
        if int(self.n_emitters) != self.n_emitters or self.n_emitters < 1:
            raise ValueError(f"n_emitters must be a positive integer, got {self.n_emitters!r}")
        for name in ("spacing", "light_speed", "gamma_tle", "time_unit"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not math.isfinite(self.wavevector):
            raise ValueError(f"wavevector must be finite, got {self.wavevector!r}")

    @property
    def positions(self) -> np.ndarray:
        return self.spacing * np.arange(1, self.n_emitters + 1)

    @property
    def length(self) -> float:
        return self.n_emitters * self.spacing

    @property
    def delay(self) -> float:
        """Nearest-neighbour light transit time ``h / v`` in time units."""
        return self.spacing / self.light_speed / self.time_unit

    @property
    def k0_length(self) -> float:
        """``k0 * L``; the retarded model assumes this is large."""
        return abs(self.wavevector) * self.length

    def replace(self, **changes) -> "ArrayParams":
        fields = dict(
            n_emitters=self.n_emitters,
            spacing=self.spacing,
            wavevector=self.wavevector,
            light_speed=self.light_speed,
            gamma_tle=self.gamma_tle,
            time_unit=self.time_unit,
        )
        fields.update(changes)
        return ArrayParams(**fields)


def mqw_params(n_emitters: int, **overrides) -> ArrayParams:
    """GaAs/AlGaAs multiple-quantum-well array in the Bragg arrangement.

    Period 400 nm, ``k0 h = pi``, one time unit = 10 ps and
    ``Gamma_TLE = 100 / ns`` (= 1 per time unit).
    """
    spacing = overrides.pop("spacing", 400.0)
    time_unit = overrides.pop("time_unit", 10.0)
    params = dict(
        n_emitters=n_emitters,
        spacing=spacing,
        wavevector=math.pi / spacing,
        light_speed=SPEED_OF_LIGHT_NM_PS,
        gamma_tle=per_ns_to_rate(100.0, time_unit),
        time_unit=time_unit,
    )
    params.update(overrides)
    return ArrayParams(**params)


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size == 0:
            raise ValueError("amplitudes must be a non-empty 1-D array")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def inner(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def _phases(params: ArrayParams) -> np.ndarray:
    return np.exp(1j * params.wavevector * params.positions)


def dicke_plus_state(params: ArrayParams) -> StateVector:
    """Symmetric state ``sum_j exp(i k0 z_j) |j> / sqrt(N)``."""
    n = params.n_emitters
    return StateVector(_phases(params) / math.sqrt(n))


def dicke_basis(params: ArrayParams) -> list[StateVector]:
    """``|+>`` followed by the N-1 orthogonal single-excitation Dicke states.

    Member ``m`` puts equal weight on sites ``1..m`` and weight ``-m`` on site
    ``m + 1``, each multiplied by the site phase ``exp(i k0 z_j)``.
    """
    n = params.n_emitters
    if n < 2:
        raise ValueError("orthogonal Dicke states need at least two emitters")
    phases = _phases(params)
    basis = [dicke_plus_state(params)]
    for m in range(1, n):
        amps = np.zeros(n, dtype=complex)
        amps[:m] = phases[:m]
        amps[m] = -m * phases[m]
        basis.append(StateVector(amps / math.sqrt(m * (m + 1))))
    return basis


def pair_sum(x, n: int) -> np.ndarray:
    """``sum_{i,j} cos(x (i - j))`` over ``N`` sites, i.e.
    ``N + 2 sum_{xi=1}^{N-1} (N - xi) cos(xi x)``."""
    x = np.asarray(x, dtype=float)
    xi = np.arange(1, n)
    out = np.full(x.shape, float(n))
    for start in range(0, xi.size, 256):
        part = xi[start:start + 256]
        out = out + 2 * (np.cos(np.multiply.outer(x, part)) @ (n - part))
    return out


def energy_to_rate(energy_mev: float) -> float:
    """Angular frequency in rad/ps for an energy in meV."""
    return energy_mev / CONSTANTS.hbar


def rate_to_energy(rate_rad_ps: float) -> float:
    return rate_rad_ps * CONSTANTS.hbar


def per_ns_to_rate(rate_per_ns: float, time_unit_ps: float) -> float:
    """Convert a rate in 1/ns into inverse time units."""
    return rate_per_ns * 1e-3 * time_unit_ps
