"""Photonic density of states of the array and its Lorentzian reduction.

The unnormalized density of states is the emitter pair sum
``D(q) = sum_{i,j} cos(q (z_i - z_j))``, a Fejer-type kernel peaked at
``q = k_z - k0 = 0`` whose central lobe becomes Lorentzian-like for large N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core_model import CONSTANTS, ArrayParams, pair_sum
from .errors import FitError


@dataclass(frozen=True)
class SpectralDensity:
    q_grid: np.ndarray
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        q = np.asarray(self.q_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if q.shape != v.shape or q.ndim != 1:
            raise ValueError("q_grid and values must be 1-D arrays of equal length")
        if np.any(v < 0):
            raise ValueError("density of states must be non-negative")
        object.__setattr__(self, "q_grid", q)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class LorentzianFit:
    center: float
    fwhm: float
    amplitude: float
    residual: float
    window: tuple[float, float] = (-math.inf, math.inf)
    iterations: int = 0

    def __call__(self, q):
        hw = self.fwhm / 2
        return self.amplitude * hw**2 / ((np.asarray(q) - self.center) ** 2 + hw**2)


@dataclass(frozen=True)
class EffectiveModel:
    """Rates of the effective cavity model in rad (or 1) per time unit."""

    g: float
    kappa: float
    gamma: float

    def __post_init__(self):
        for name in ("g", "kappa", "gamma"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be a non-negative rate, got {value!r}")

    def in_mev(self, time_unit: float) -> dict:
        """Energies ``hbar * rate`` with rates converted to rad/ps."""
        return {k: CONSTANTS.hbar * getattr(self, k) / time_unit for k in ("g", "kappa", "gamma")}


def fejer_kernel(x, n: int) -> np.ndarray:
    """``[sin(N x / 2) / sin(x / 2)]^2`` with the limit ``N^2`` at ``x = 2 pi k``."""
    x = np.asarray(x, dtype=float)
    s = np.sin(x / 2)
    near = np.abs(s) < 1e-12
    safe = np.where(near, 1.0, s)
    return np.where(near, float(n * n), (np.sin(n * x / 2) / safe) ** 2)


def dos(params: ArrayParams, q_grid) -> SpectralDensity:
    q = np.asarray(q_grid, dtype=float)
    if not np.all(np.isfinite(q)):
        raise ValueError("q grid must be finite")
    values = pair_sum(q * params.spacing, params.n_emitters)
    # the pair sum is a square; clip round-off below zero near the nodes
    return SpectralDensity(q, np.clip(values, 0.0, None), normalized=False)


def normalize(density: SpectralDensity) -> SpectralDensity:
    peak = np.max(density.values) if density.values.size else 0.0
    if not peak > 0:
        raise ValueError("cannot normalize an all-zero density of states")
    return replace(density, values=density.values / peak, normalized=True)


def central_lobe(params: ArrayParams) -> tuple[float, float]:
    """Interval between the first zeros ``q = +-2 pi / (N h)``."""
    edge = 2 * math.pi / (params.n_emitters * params.spacing)
    return -edge, edge


def lorentzian(q, amplitude, center, fwhm):
    hw = fwhm / 2
    return amplitude * hw**2 / ((np.asarray(q) - center) ** 2 + hw**2)


def _half_height_width(x, y, i_peak):
    half = y[i_peak] / 2
    left = x[0]
    for i in range(i_peak, 0, -1):
        if y[i - 1] <= half:
            left = x[i - 1] + (half - y[i - 1]) * (x[i] - x[i - 1]) / (y[i] - y[i - 1])
            break
    right = x[-1]
    for i in range(i_peak, x.size - 1):
        if y[i + 1] <= half:
            right = x[i] + (y[i] - half) * (x[i + 1] - x[i]) / (y[i] - y[i + 1])
            break
    return right - left


def lorentzian_fit(density: SpectralDensity, window: tuple[float, float], max_iter: int = 200,
                   xtol: float = 1e-12) -> LorentzianFit:
    """Damped Gauss-Newton fit of ``A (w/2)^2 / ((q - q0)^2 + (w/2)^2)``.

    Starts from the peak height, the arg-max and the half-height width, so the
    result does not depend on a user-supplied guess. Raises ``FitError`` if
    the relative parameter step has not dropped below ``xtol`` after
    ``max_iter`` iterations.
    """
    lo, hi = window
    q_all, y_all = density.q_grid, density.values
    sel = (q_all >= lo) & (q_all <= hi)
    if np.count_nonzero(sel) < 7:
        raise ValueError("fit window must contain at least 7 samples")
    q, y = q_all[sel], y_all[sel]
    # compared by value: a periodic density has several equal global maxima
    if np.max(y) < np.max(y_all) * (1 - 1e-12):
        raise ValueError(f"fit window {window!r} does not contain the global maximum")

    # scaled abscissa keeps the 3x3 normal matrix well conditioned
    centre = 0.5 * (q[0] + q[-1])
    scale = 0.5 * (q[-1] - q[0])
    x = (q - centre) / scale
    i_peak = int(np.argmax(y))
    p = np.array([y[i_peak], x[i_peak], 0.5 * _half_height_width(x, y, i_peak)])

    def residual(p):
        amp, x0, hw = p
        return amp * hw**2 / ((x - x0) ** 2 + hw**2) - y

    def jacobian(p):
        amp, x0, hw = p
        d = x - x0
        den = d**2 + hw**2
        return np.column_stack([
            hw**2 / den,
            2 * amp * hw**2 * d / den**2,
            2 * amp * hw * d**2 / den**2,
        ])

    r = residual(p)
    cost = r @ r
    damping = 1e-3
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        jac = jacobian(p)
        diag = np.sqrt(np.maximum(np.sum(jac**2, axis=0), 1e-300))
        aug = np.vstack([jac, math.sqrt(damping) * np.diag(diag)])
        rhs = np.concatenate([-r, np.zeros(3)])
        step = np.linalg.lstsq(aug, rhs, rcond=None)[0]
        trial = p + step
        # relative step, with the window half-width as the floor scale for x0
        small = np.all(np.abs(step) <= xtol * np.maximum(np.abs(p), 1.0))
        if trial[2] > 0:
            r_trial = residual(trial)
            cost_trial = r_trial @ r_trial
        else:
            cost_trial = math.inf
        if cost_trial <= cost:
            p, r, cost = trial, r_trial, cost_trial
            damping = max(damping / 10, 1e-12)
        else:
            damping *= 10
        if small:
            converged = True
            break
    rms = math.sqrt(cost / y.size)
    if not converged:
        raise FitError(f"Lorentzian fit did not converge in {max_iter} iterations (rms residual {rms:.3g})",
                       residual=rms)
    amp, x0, hw = p
    return LorentzianFit(
        center=float(centre + scale * x0),
        fwhm=float(2 * abs(hw) * scale),
        amplitude=float(amp),
        residual=rms,
        window=(float(lo), float(hi)),
        iterations=iterations,
    )


def coupling_from_period(period: float) -> float:
    """Resonant two-level population ``cos^2(g t)`` has period ``pi / g``."""
    if not period > 0:
        raise ValueError("period must be positive")
    return math.pi / period


def collective_coupling(params: ArrayParams) -> float:
    """``sqrt(N) g_k0`` with the photon quantization length set to the array
    length, so that ``g_k0^2 = G v / (N h)`` and ``g = sqrt(G v / h)``."""
    return math.sqrt(params.gamma_tle / params.delay)


def kappa_from_width(fwhm: float, params: ArrayParams) -> float:
    """Photon loss rate ``v * dq`` per time unit (energy width ``hbar v dq``)."""
    return params.light_speed * fwhm * params.time_unit


def effective_model_from(fit: LorentzianFit, period_T: float | None, params: ArrayParams,
                         gamma: float) -> EffectiveModel:
    g = coupling_from_period(period_T) if period_T is not None else collective_coupling(params)
    return EffectiveModel(g=g, kappa=kappa_from_width(fit.fwhm, params), gamma=gamma)
