"""Retarded decay of the symmetric Dicke amplitude b(t).

Two independent routes are provided:

* ``solve_dde`` integrates the delay equation obtained after doing the
  photon-momentum integral analytically::

      db/dt = -(G / 2N) [N b(t) + 2 sum_xi (N - xi) b(t - xi h / v)]

* ``solve_volterra_quadrature`` keeps the momentum integral and discretizes
  the memory kernel and the memory integral with the trapezoid rule.

Times are in dimensionless units and rates in inverse time units.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import czt, lfilter

from .core_model import ArrayParams, pair_sum
from .errors import ConvergenceError
from .serialization import fmt


@dataclass(frozen=True)
class AmplitudeTrace:
    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 1:
            raise ValueError("trace values must be 1-D")
        if values.size and np.max(np.abs(values)) > 1 + 1e-9:
            raise ValueError("amplitude modulus exceeds 1")
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class DelaySystem:
    """``db/dt = -c0 b(t) - sum_k w_k b(t - tau_k)`` with ``b = 0`` for t < 0."""

    n_emitters: int
    gamma: float
    unit_delay: float
    zeroth_coefficient: float
    delays: np.ndarray = field(default_factory=lambda: np.zeros(0))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def base_delay(self) -> float | None:
        return float(self.delays[0]) if self.delays.size else None

    @property
    def total_coefficient(self) -> float:
        return self.zeroth_coefficient + float(np.sum(self.weights))


def build_delay_system(params: ArrayParams) -> DelaySystem:
    n = params.n_emitters
    gamma = params.gamma_tle
    xi = np.arange(1, n)
    return DelaySystem(
        n_emitters=n,
        gamma=gamma,
        unit_delay=params.delay,
        # half of the equal-time delta sits inside the memory integral
        zeroth_coefficient=gamma / 2,
        delays=xi * params.delay,
        weights=gamma * (n - xi) / n,
    )


def max_dde_step(system: DelaySystem) -> float:
    return min(1.0 / (system.n_emitters * system.gamma), system.unit_delay) / 4


def solve_dde(system: DelaySystem, t_max: float, dt: float) -> AmplitudeTrace:
    """Classical RK4 for the delay equation with ``b(0) = 1``.

    The step is shrunk to ``tau / m`` (``m`` integer) so that every delay
    breakpoint ``xi * tau`` is a grid point; the half-step history values
    come from cubic Hermite interpolation using the stored derivatives.
    The trace therefore has a step no larger than ``dt``.
    """
    if not (dt > 0 and t_max > 0):
        raise ValueError("dt and t_max must be positive")
    bound = max_dde_step(system)
    if dt >= bound:
        raise ValueError(f"dt={dt!r} violates the step bound {bound!r}")

    a = system.zeroth_coefficient
    lags = np.zeros(0, dtype=int)
    block = 0
    if system.base_delay is not None:
        m = math.ceil(system.base_delay / dt - 1e-9)
        dt = system.base_delay / m
        lags = m * np.arange(1, system.delays.size + 1)
        # the history needed by m - 1 consecutive steps is already final
        block = m - 1
    w = np.asarray(system.weights, dtype=float)
    n_steps = math.ceil(t_max / dt - 1e-9)

    b = np.zeros(n_steps + 1, dtype=complex)
    mid = np.zeros(n_steps, dtype=complex)
    d_start = np.zeros(n_steps, dtype=complex)
    d_mid = np.zeros(n_steps, dtype=complex)
    d_end = np.zeros(n_steps, dtype=complex)
    b[0] = 1.0

    def delayed(source, rows, first=0):
        # history is zero before index `first`; b jumps from 0 to 1 at t = 0,
        # so step ends landing on a breakpoint take the left limit (first=1)
        idx = rows[:, None] - lags[None, :]
        vals = np.where(idx >= first, source[np.maximum(idx, 0)], 0.0)
        return vals @ w

    half = dt / 2

    def step(y, dg0, dm, dg1):
        k1 = -a * y - dg0
        k2 = -a * (y + half * k1) - dm
        k3 = -a * (y + half * k2) - dm
        k4 = -a * (y + dt * k3) - dg1
        return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), k1

    if not lags.size:
        # no history: every step multiplies by the same RK4 stability factor
        ratio = step(1.0, 0.0, 0.0, 0.0)[0]
        b[1:] = lfilter([1.0], [1.0, -ratio], np.zeros(n_steps), zi=[ratio])[0]
        return AmplitudeTrace(0.0, dt, b)

    k = 0
    while k < n_steps:
        stop = min(k + block, n_steps)
        rows = np.arange(k, stop)
        d_start[k:stop] = delayed(b, rows)
        d_mid[k:stop] = delayed(mid, rows)
        d_end[k:stop] = delayed(b, rows + 1, first=1)
        for j in range(k, stop):
            y = b[j]
            dg1 = d_end[j]
            y1, k1 = step(y, d_start[j], d_mid[j], dg1)
            f1 = -a * y1 - dg1
            mid[j] = 0.5 * (y + y1) + dt / 8 * (k1 - f1)
            b[j + 1] = y1
        k = stop
    return AmplitudeTrace(0.0, dt, b)


def memory_kernel(params: ArrayParams, q_halfwidth: float, n_q: int, times: np.ndarray) -> np.ndarray:
    """Trapezoid evaluation of ``K(s) = G/(2 pi N) int du cos(u s) S(u tau)``.

    ``u = v q`` in rad per time unit; ``S`` is the emitter pair sum.
    """
    n = params.n_emitters
    u_max = q_halfwidth * params.light_speed * params.time_unit
    u = np.linspace(-u_max, u_max, n_q)
    du = u[1] - u[0]
    weights = np.full(n_q, du)
    weights[0] = weights[-1] = du / 2
    amp = weights * pair_sum(u / (params.light_speed * params.time_unit) * params.spacing, n)
    dt = times[1] - times[0]
    # the sum over the uniform u grid evaluated on a uniform time grid is a chirp-z transform
    spectrum = czt(amp.astype(complex), m=times.size, w=np.exp(-1j * du * dt), a=np.exp(1j * du * times[0]))
    kernel = np.real(np.exp(1j * u_max * times) * spectrum)
    return params.gamma_tle / (2 * math.pi * n) * kernel


def default_quadrature_grid(params: ArrayParams, t_max: float, resolution: float = 8000.0):
    """Momentum cutoff, grid size and time step that give ~1e-4 accuracy.

    The cutoff scales with the superradiant rate ``N G``; the time step
    resolves the kernel's sinc width and ``n_q`` avoids kernel aliasing
    within ``t_max``.
    """
    u_max = resolution * params.n_emitters * params.gamma_tle
    q_halfwidth = u_max / (params.light_speed * params.time_unit)
    dt = math.pi / (4 * u_max)
    n_q = max(2001, 2 * math.ceil(u_max * t_max / math.pi) + 1)
    return q_halfwidth, n_q, dt


def solve_volterra_quadrature(params: ArrayParams, q_halfwidth: float, n_q: int, t_max: float, dt: float) -> AmplitudeTrace:
    """Integrate ``db/dt = -int_0^t K(t - t') b(t') dt'`` with ``b(0) = 1``.

    Both the time integral of ``db/dt`` and the memory integral use the
    trapezoid rule; the resulting scheme is implicit only in ``K(0) b_n``.
    """
    if n_q < 2001:
        raise ValueError("n_q must be at least 2001")
    if not (q_halfwidth > 0 and t_max > 0 and dt > 0):
        raise ValueError("q_halfwidth, t_max and dt must be positive")
    u_max = q_halfwidth * params.light_speed * params.time_unit
    if dt > math.pi / (2 * u_max):
        raise ValueError(f"dt={dt!r} does not resolve the kernel (need <= {math.pi / (2 * u_max)!r})")
    du = 2 * u_max / (n_q - 1)
    if t_max >= 2 * math.pi / du:
        raise ValueError("momentum grid too coarse: kernel aliases inside [0, t_max]")

    n_steps = math.ceil(t_max / dt - 1e-9)
    times = dt * np.arange(n_steps + 1)
    kernel = memory_kernel(params, q_halfwidth, n_q, times)

    b_re = np.zeros(n_steps + 1)
    b_im = np.zeros(n_steps + 1)
    b_re[0] = 1.0
    k0 = kernel[0]
    denom = 1 + dt * dt / 4 * k0
    f_prev = 0.0 + 0.0j
    for i in range(1, n_steps + 1):
        # kernel[i-1], ..., kernel[1] against b_1, ..., b_{i-1}
        rev = kernel[i - 1:0:-1]
        inner = complex(rev @ b_re[1:i], rev @ b_im[1:i])
        known = dt * (0.5 * kernel[i] + inner)
        b_new = (complex(b_re[i - 1], b_im[i - 1]) - dt / 2 * f_prev - dt / 2 * known) / denom
        f_prev = known + dt / 2 * k0 * b_new
        b_re[i] = b_new.real
        b_im[i] = b_new.imag
    return AmplitudeTrace(0.0, dt, b_re + 1j * b_im)


def quadrature_convergence(params: ArrayParams, q_halfwidth: float, n_q: int, t_max: float, dt: float,
                           tol: float = 1e-4) -> tuple[AmplitudeTrace, float]:
    """Solve twice, doubling the momentum range and grid and halving ``dt``.

    Returns the coarse trace and the largest population change on the coarse
    grid; raises ``ConvergenceError`` when that change exceeds ``tol``.
    """
    coarse = solve_volterra_quadrature(params, q_halfwidth, n_q, t_max, dt)
    fine = solve_volterra_quadrature(params, 2 * q_halfwidth, 2 * n_q - 1, coarse.times[-1], dt / 2)
    change = float(np.max(np.abs(population(coarse) - population(fine)[::2])))
    if change > tol:
        raise ConvergenceError(f"quadrature not converged: doubling the grid changed the population by {change:.3g}",
                               residual=change)
    return coarse, change


def population(trace: AmplitudeTrace) -> np.ndarray:
    return np.abs(trace.values) ** 2


def resample(trace: AmplitudeTrace, times: np.ndarray) -> np.ndarray:
    """Population of ``trace`` linearly interpolated onto ``times``."""
    return np.interp(times, trace.times, population(trace))


def fit_decay_rate(pop: np.ndarray, times: np.ndarray, window: tuple[float, float]) -> float:
    """Least-squares slope of ``-ln(pop)`` over ``window``."""
    t_a, t_b = window
    if t_a >= t_b or t_a < times[0] - 1e-12 or t_b > times[-1] + 1e-12:
        raise ValueError(f"window {window!r} outside the trace domain [{times[0]}, {times[-1]}]")
    sel = (times >= t_a - 1e-12) & (times <= t_b + 1e-12)
    if np.count_nonzero(sel) < 2:
        raise ValueError("window contains fewer than two samples")
    if np.any(pop[sel] <= 0):
        raise ValueError("population must be positive on the fit window")
    slope = np.polyfit(times[sel], np.log(pop[sel]), 1)[0]
    return float(-slope)


def early_window(params: ArrayParams) -> tuple[float, float]:
    """One superradiant lifetime, ``[0, 1/(N G)]``."""
    return 0.0, 1.0 / (params.n_emitters * params.gamma_tle)


def local_maxima(pop: np.ndarray, times: np.ndarray, rel_floor: float = 1e-10) -> np.ndarray:
    """Interior maxima positions refined by a parabola through 3 samples."""
    pop = np.asarray(pop, dtype=float)
    if pop.size < 3:
        return np.zeros(0)
    centre = pop[1:-1]
    is_max = (centre > pop[:-2]) & (centre >= pop[2:]) & (centre > rel_floor * np.max(pop))
    idx = np.nonzero(is_max)[0] + 1
    y0, y1, y2 = pop[idx - 1], pop[idx], pop[idx + 1]
    curv = y0 - 2 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        shift = np.where(curv != 0, 0.5 * (y0 - y2) / curv, 0.0)
    step = times[1] - times[0]
    return times[idx] + shift * step


def oscillation_period(pop: np.ndarray, times: np.ndarray) -> float | None:
    peaks = local_maxima(pop, times)
    if peaks.size < 2:
        return None
    return float(np.mean(np.diff(peaks)))


def write_trace_csv(trace: AmplitudeTrace, path: Path) -> None:
    pop = population(trace)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "re_b", "im_b", "population"])
        for t, b, p in zip(trace.times, trace.values, pop):
            writer.writerow([fmt(t), fmt(b.real), fmt(b.imag), fmt(p)])
