"""Stages behind the command line: dynamics, density of states, LG scans.

Each stage writes its files under ``<out>/<stage>/`` and returns the derived
quantities so that ``run_pipeline`` can chain them and record a manifest.
"""

from __future__ import annotations

import contextlib
import json
import logging
import math
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .core_model import CONSTANTS, energy_to_rate, per_ns_to_rate
from .dynamics import (
    build_delay_system,
    default_quadrature_grid,
    early_window,
    fit_decay_rate,
    local_maxima,
    max_dde_step,
    oscillation_period,
    population,
    resample,
    solve_dde,
    solve_volterra_quadrature,
    write_trace_csv,
)
from .errors import ConfigError, ConvergenceError
from .leggett_garg import lg_scan, summarize
from .open_system import BASIS_LABELS, DensityOperator, build_liouvillian, evolve, population_correlator, projector, PLUS
from .serialization import sha256, write_columns, write_json
from .spectral import (
    EffectiveModel,
    central_lobe,
    collective_coupling,
    coupling_from_period,
    dos,
    kappa_from_width,
    lorentzian_fit,
    normalize,
)

log = logging.getLogger(__name__)

# reference values quoted for the quantum-well realization
REFERENCE_PERIOD_UNITS = 0.54
REFERENCE_G_MEV = 8.3
REFERENCE_KAPPA_MEV = 3.3

CONVENTIONS = {
    "basis_order": list(BASIS_LABELS),
    "superoperator_stacking": "column",
    "kappa_convention": "kappa = v * fwhm_q (energy width hbar * v * fwhm_q)",
    "g_from_period": "g = pi / T (population period of cos^2(g t))",
    "site_positions": "z_j = j * h, j = 1..N",
    "time": "dimensionless units of time_unit_ps; rates per time unit",
}


class Recorder:
    """Tracks files written below ``root`` for the manifest."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.files: list[Path] = []

    def path(self, *parts: str) -> Path:
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        if p not in self.files:
            self.files.append(p)
        return p

    def inventory(self) -> list[dict]:
        return [
            {"path": p.relative_to(self.root).as_posix(), "sha256": sha256(p), "bytes": p.stat().st_size}
            for p in sorted(self.files)
        ]


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except ConvergenceError as exc:
        raise ConvergenceError(f"stage {name}: {exc}", residual=exc.residual) from exc
    except ConfigError:
        raise
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise ConvergenceError(f"stage {name}: {exc}") from exc


def run_dynamics(cfg: RunConfig, rec: Recorder) -> dict:
    dyn = cfg["dynamics"]
    method = dyn["method"]
    runs = []
    for n in dyn["n"]:
        params = cfg.array_params(n)
        system = build_delay_system(params)
        entry = {"n": n, "method": method, "delay_units": params.delay, "k0L": params.k0_length}
        dde = None
        if method in ("dde", "both"):
            dt = dyn["dt"] if dyn["dt"] is not None else max_dde_step(system) / 2
            dde = solve_dde(system, dyn["t_max"], dt)
            if cfg.wants("csv"):
                write_trace_csv(dde, rec.path("dynamics", f"trace_N{n}_dde.csv"))
            entry.update(_trace_summary(dde, params))
            entry["dt"] = dde.dt
            entry["t_max"] = dyn["t_max"]
        if method in ("quadrature", "both"):
            t_quad = dyn["quadrature_t_max"] or min(dyn["t_max"], 3.0 / (n * params.gamma_tle))
            q_half, n_q, dt_q = default_quadrature_grid(params, t_quad, dyn["quadrature_resolution"])
            quad = solve_volterra_quadrature(params, q_half, n_q, t_quad, dt_q)
            if cfg.wants("csv"):
                write_trace_csv(quad, rec.path("dynamics", f"trace_N{n}_quadrature.csv"))
            entry["quadrature"] = {"q_halfwidth_per_nm": q_half, "n_q": n_q, "dt": dt_q, "t_max": t_quad}
            if dde is None:
                entry.update(_trace_summary(quad, params))
            else:
                deviation = np.abs(resample(dde, quad.times) - population(quad))
                entry["max_population_deviation"] = float(np.max(deviation))
        runs.append(entry)
        log.info("dynamics N=%d: rate=%s period=%s", n, entry.get("early_decay_rate"), entry.get("period"))
    summary = {"conventions": CONVENTIONS, "runs": runs}
    if cfg.wants("json"):
        write_json(summary, rec.path("dynamics", "summary.json"))
    return summary


def _trace_summary(trace, params) -> dict:
    pop = population(trace)
    times = trace.times
    window = early_window(params)
    rate = None
    if window[1] <= times[-1]:
        rate = fit_decay_rate(pop, times, window)
    peaks = local_maxima(pop, times)
    return {
        "early_window": list(window),
        "early_decay_rate": rate,
        "early_rate_over_gamma_tle": None if rate is None else rate / params.gamma_tle,
        "period": oscillation_period(pop, times),
        "n_maxima": int(peaks.size),
    }


def run_dos(cfg: RunConfig, rec: Recorder, period: float | None = None) -> dict:
    spec = cfg["spectral"]
    n = spec["n"]
    params = cfg.array_params(n)
    lobe = central_lobe(params)
    q_half = spec["q_halfwidth_per_nm"] or 4 * lobe[1]
    q = np.linspace(-q_half, q_half, spec["n_q"])
    density = normalize(dos(params, q))
    window = tuple(spec["fit_window_per_nm"]) if spec["fit_window_per_nm"] else lobe
    fit = lorentzian_fit(density, window)
    kappa = kappa_from_width(fit.fwhm, params)
    if period is not None:
        g, g_source = coupling_from_period(period), "period"
    else:
        g, g_source = collective_coupling(params), "collective"
    to_mev = CONSTANTS.hbar / cfg.time_unit
    sidecar = {
        "n": n,
        "center": fit.center,
        "fwhm": fit.fwhm,
        "amplitude": fit.amplitude,
        "residual": fit.residual,
        "iterations": fit.iterations,
        "window_lo": fit.window[0],
        "window_hi": fit.window[1],
        "kappa_meV": kappa * to_mev,
        "g_meV": g * to_mev,
        "g_source": g_source,
        "kappa_convention": CONVENTIONS["kappa_convention"],
    }
    if cfg.wants("csv"):
        write_columns(rec.path("dos", f"dos_N{n}.csv"), ["q", "dos"], [density.q_grid, density.values])
        sel = (density.q_grid >= window[0]) & (density.q_grid <= window[1])
        write_columns(rec.path("dos", f"dos_fit_N{n}.csv"), ["q", "dos", "fit"],
                      [density.q_grid[sel], density.values[sel], fit(density.q_grid[sel])])
    if cfg.wants("json"):
        write_json(sidecar, rec.path("dos", f"fit_N{n}.json"))
    return {"fit": fit, "kappa": kappa, "g": g, "sidecar": sidecar}


def resolve_model(cfg: RunConfig, period: float | None = None, fit_fwhm: float | None = None) -> tuple[EffectiveModel, dict]:
    eff = cfg["effective"]
    tu = cfg.time_unit
    params = cfg.array_params(cfg["spectral"]["n"])
    sources = {"g": eff["g_source"], "kappa": eff["kappa_source"]}
    if eff["g_source"] == "explicit":
        g = energy_to_rate(eff["g_mev"]) * tu
    elif eff["g_source"] == "collective":
        g = collective_coupling(params)
    elif period is not None:
        g = coupling_from_period(period)
    else:
        raise ConfigError("effective.g_source", "missing effective model input: no oscillation period available "
                          "(run dynamics first or give effective.g_mev)")
    if eff["kappa_source"] == "explicit":
        kappa = energy_to_rate(eff["kappa_mev"]) * tu
    elif fit_fwhm is not None:
        kappa = kappa_from_width(fit_fwhm, params)
    else:
        raise ConfigError("effective.kappa_source", "missing effective model input: no Lorentzian fit available "
                          "(run dos first or give effective.kappa_mev)")
    gamma = per_ns_to_rate(eff["gamma_per_ns"], tu)
    return EffectiveModel(g=g, kappa=kappa, gamma=gamma), sources


def upstream_products(cfg: RunConfig) -> tuple[float | None, float | None]:
    """Period and fit width from earlier ``dynamics`` / ``dos`` runs, if present."""
    root = cfg.out_dir
    period = fwhm = None
    summary = root / "dynamics" / "summary.json"
    if summary.exists():
        runs = json.loads(summary.read_text())["runs"]
        periods = [r["period"] for r in sorted(runs, key=lambda r: r["n"]) if r.get("period")]
        period = periods[-1] if periods else None
    fit = root / "dos" / f"fit_N{cfg['spectral']['n']}.json"
    if fit.exists():
        fwhm = json.loads(fit.read_text())["fwhm"]
    return period, fwhm


def run_lg(cfg: RunConfig, rec: Recorder, model: EffectiveModel, sources: dict) -> dict:
    lg = cfg["lg"]
    L = build_liouvillian(model)
    if model.g > 0:
        t_max = lg["t_max"] or 4 * math.pi / model.g
        dt = lg["dt"] or 1e-3 / model.g
    else:
        t_max = lg["t_max"] or 1.0
        dt = lg["dt"] or t_max / 4000
    summaries = []
    for variant in lg["variants"]:
        trace = lg_scan(L, variant, t_max, dt, mode=lg["mode"], interval_ratio=lg["interval_ratio"])
        summaries.append(summarize(trace))
        if cfg.wants("csv"):
            write_columns(rec.path("lg", f"lg_{variant}.csv"), ["t", "L_value", "bound", "violated"],
                          [trace.times, trace.values, np.full(trace.times.size, trace.bound), trace.violation_mask])
    times = dt * np.arange(int(np.floor(t_max / dt + 1e-9)) + 1)
    to_mev = CONSTANTS.hbar / cfg.time_unit
    effective = {
        "rates_per_time_unit": {"g": model.g, "kappa": model.kappa, "gamma": model.gamma},
        "rates_rad_per_ps": {k: v / cfg.time_unit for k, v in (("g", model.g), ("kappa", model.kappa), ("gamma", model.gamma))},
        "energies_meV": {k: v * to_mev for k, v in (("g", model.g), ("kappa", model.kappa), ("gamma", model.gamma))},
        "sources": sources,
        "conventions": CONVENTIONS,
    }
    payload = {"t_max": t_max, "dt": dt, "mode": lg["mode"], "interval_ratio": lg["interval_ratio"],
               "scans": summaries}
    if cfg.wants("csv"):
        for q_state in ("plus", "k0"):
            write_columns(rec.path("lg", f"correlator_{q_state}.csv"), ["t", "value"],
                          [times, population_correlator(L, q_state, times)])
    if cfg.wants("json"):
        write_json(payload, rec.path("lg", "lg_summary.json"))
        write_json(effective, rec.path("lg", "effective_model.json"))
        rho = evolve(L, projector(PLUS), t_max)
        write_json(DensityOperator(0.5 * (rho + rho.conj().T)).to_json() | {"t": t_max, "initial": "+"},
                   rec.path("lg", "rho_plus_final.json"))
    return {"effective": effective, "lg": payload}


def config_echo(cfg: RunConfig) -> dict:
    echo = json.loads(json.dumps(cfg.raw, default=str))
    echo["output"].pop("directory", None)
    return echo


def write_manifest(cfg: RunConfig, rec: Recorder, derived: dict, command: str) -> Path:
    manifest_path = rec.root / "manifest.json"
    manifest = {
        "tool": "dicke-array",
        "version": __version__,
        "command": command,
        "config": config_echo(cfg),
        "derived": derived,
        "files": [f for f in rec.inventory() if f["path"] != "manifest.json"],
    }
    write_json(manifest, manifest_path)
    return manifest_path


def run_pipeline(cfg: RunConfig, rec: Recorder) -> dict:
    with stage("dynamics"):
        dyn = run_dynamics(cfg, rec)
    oscillating = [r for r in sorted(dyn["runs"], key=lambda r: r["n"]) if r.get("period")]
    period = oscillating[-1]["period"] if oscillating else None
    period_n = oscillating[-1]["n"] if oscillating else None
    with stage("dos"):
        spectral = run_dos(cfg, rec, period=period)
    with stage("effective"):
        model, sources = resolve_model(cfg, period=period, fit_fwhm=spectral["fit"].fwhm)
    with stage("lg"):
        lg = run_lg(cfg, rec, model, sources)
    to_mev = CONSTANTS.hbar / cfg.time_unit
    g_from_period = coupling_from_period(period) * to_mev if period else None
    calibration = {
        "period_units": period,
        "period_from_n": period_n,
        "reference_period_units": REFERENCE_PERIOD_UNITS,
        "period_ratio_to_reference": None if period is None else period / REFERENCE_PERIOD_UNITS,
        "g_meV_from_period": g_from_period,
        "g_meV_collective": collective_coupling(cfg.array_params(cfg["spectral"]["n"])) * to_mev,
        "reference_g_meV": REFERENCE_G_MEV,
        "g_ratio_to_reference": None if g_from_period is None else g_from_period / REFERENCE_G_MEV,
        "kappa_meV_from_fit": spectral["sidecar"]["kappa_meV"],
        "reference_kappa_meV": REFERENCE_KAPPA_MEV,
        "kappa_ratio_to_reference": spectral["sidecar"]["kappa_meV"] / REFERENCE_KAPPA_MEV,
        "asserted": False,
    }
    if cfg.wants("json"):
        write_json(calibration, rec.path("calibration.json"))
    derived = {
        "dynamics": [{k: r.get(k) for k in ("n", "early_decay_rate", "period", "n_maxima", "max_population_deviation")}
                     for r in dyn["runs"]],
        "fit": {k: spectral["sidecar"][k] for k in ("n", "center", "fwhm", "amplitude", "residual", "kappa_meV")},
        "effective_model": lg["effective"],
        "lg": lg["lg"]["scans"],
        "calibration": calibration,
    }
    write_manifest(cfg, rec, derived, "pipeline")
    return derived
