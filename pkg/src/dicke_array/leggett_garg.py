"""Leggett-Garg functionals of the effective cavity model.

``lg_original`` is the three-correlator combination for the dichotomic
``Q = |k0><k0| - |+><+| - |vac><vac|``; ``lg_markovian`` is the population
variant ``|2 p(t) - p(2t)|`` for a deterministically prepared state, whose
bound is the prepared population, 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .open_system import Liouvillian, DensityOperator, PLUS, population_correlator, projective_two_time, projector

VARIANTS = ("original_equal_intervals", "markovian_plus", "markovian_k0")

# values within rounding of the bound are not counted as violations
VIOLATION_TOL = 1e-12


@dataclass(frozen=True)
class LGTrace:
    times: np.ndarray
    values: np.ndarray
    bound: float
    variant: str = ""
    signed_values: np.ndarray | None = None

    @property
    def violation_mask(self) -> np.ndarray:
        return self.values > self.bound + VIOLATION_TOL

    def argmax(self) -> tuple[float, float]:
        i = int(np.argmax(self.values))
        return float(self.times[i]), float(self.values[i])


def lg_original(L: Liouvillian, rho0, t1, t2, mode: str = "projective", signed: bool = False):
    """``|C(0, t1) + C(t1, t1 + t2) - C(0, t1 + t2)|``.

    With ``signed=True`` the combination is returned without the modulus;
    its quantum maximum for a two-level exchange is 3/2, while the modulus
    also picks up the lower lobe that reaches 3.
    """
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    zero = np.zeros(np.broadcast(t1, t2).shape)
    first = projective_two_time(L, rho0, zero, t1 + zero, mode=mode)
    second = projective_two_time(L, rho0, t1 + zero, t2 + zero, mode=mode)
    outer = projective_two_time(L, rho0, zero, t1 + t2, mode=mode)
    out = first + second - outer
    if not signed:
        out = np.abs(out)
    return float(out) if out.ndim == 0 else out


def lg_markovian(L: Liouvillian, q_state: str, t):
    """``|2 <P(t) P> - <P(2t) P>|`` with ``P(0) = 1``."""
    t = np.asarray(t, dtype=float)
    out = np.abs(2 * population_correlator(L, q_state, t) - population_correlator(L, q_state, 2 * t))
    return float(out) if out.ndim == 0 else out


def lg_scan(L: Liouvillian, variant: str, t_max: float, dt: float, rho0=None,
            mode: str = "projective", interval_ratio: float = 1.0) -> LGTrace:
    """Evaluate a variant on ``0, dt, ..., t_max``.

    The original functional uses ``t1 = t`` and ``t2 = interval_ratio * t``
    (equal intervals by default) starting from ``rho0`` (default ``|+><+|``).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_max >= 0:
        raise ValueError("t_max must be non-negative")
    times = dt * np.arange(int(np.floor(t_max / dt + 1e-9)) + 1)
    signed = None
    if variant == "original_equal_intervals":
        start = projector(PLUS) if rho0 is None else rho0
        if isinstance(start, DensityOperator):
            start = start.matrix
        signed = np.atleast_1d(lg_original(L, start, times, interval_ratio * times, mode=mode, signed=True))
        values = np.abs(signed)
    elif variant == "markovian_plus":
        values = lg_markovian(L, "plus", times)
    elif variant == "markovian_k0":
        values = lg_markovian(L, "k0", times)
    else:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return LGTrace(times, np.atleast_1d(values), 1.0, variant, signed)


def violation_regions(trace: LGTrace) -> list[tuple[float, float]]:
    """Maximal intervals with value above the bound, edges linearly interpolated."""
    t, v, bound = trace.times, trace.values, trace.bound
    above = trace.violation_mask
    regions = []
    i = 0
    n = v.size
    while i < n:
        if not above[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and above[j + 1]:
            j += 1
        if i == 0:
            start = t[0]
        else:
            start = t[i - 1] + (bound - v[i - 1]) * (t[i] - t[i - 1]) / (v[i] - v[i - 1])
        if j == n - 1:
            end = t[-1]
        else:
            end = t[j] + (v[j] - bound) * (t[j + 1] - t[j]) / (v[j] - v[j + 1])
        regions.append((float(start), float(end)))
        i = j + 1
    return regions


def summarize(trace: LGTrace) -> dict:
    t_star, v_star = trace.argmax()
    out = {
        "variant": trace.variant,
        "bound": trace.bound,
        "max_value": v_star,
        "argmax": t_star,
        "violated": bool(np.any(trace.violation_mask)),
        "violation_intervals": [list(r) for r in violation_regions(trace)],
    }
    if trace.signed_values is not None:
        i = int(np.argmax(trace.signed_values))
        out["signed_max_value"] = float(trace.signed_values[i])
        out["signed_argmax"] = float(trace.times[i])
    return out
