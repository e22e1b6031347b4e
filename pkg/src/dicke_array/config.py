"""Run configuration: a nested YAML document plus command-line overrides.

Every section is validated before any computation starts; errors carry the
dotted path of the offending field.
"""

from __future__ import annotations

import copy
import math
import os
from dataclasses import dataclass
from pathlib import Path

import yaml

from .core_model import SPEED_OF_LIGHT_NM_PS, ArrayParams, per_ns_to_rate
from .dynamics import build_delay_system, max_dde_step
from .errors import ConfigError
from .leggett_garg import VARIANTS

OUT_DIR_ENV = "DICKE_ARRAY_OUT"

DEFAULTS = {
    "array": {
        "spacing_nm": 400.0,
        "wavevector_per_nm": None,  # Bragg: pi / spacing
        "light_speed_nm_per_ps": SPEED_OF_LIGHT_NM_PS,
        "gamma_tle_per_ns": 100.0,
        "time_unit_ps": 10.0,
    },
    "dynamics": {
        "n": [20, 60, 200],
        "dt": None,
        "t_max": 1.0,
        "method": "dde",
        "quadrature_t_max": None,
        "quadrature_resolution": 8000.0,
    },
    "spectral": {
        "n": 200,
        "q_halfwidth_per_nm": None,
        "n_q": 4001,
        "fit_window_per_nm": None,
    },
    "effective": {
        "g_source": "period",
        "kappa_source": "fit",
        "g_mev": None,
        "kappa_mev": None,
        "gamma_per_ns": 100.0,
    },
    "lg": {
        "variants": list(VARIANTS),
        "t_max": None,
        "dt": None,
        "interval_ratio": 1.0,
        "mode": "projective",
    },
    "output": {
        "directory": None,
        "formats": ["csv", "json"],
    },
}


@dataclass(frozen=True)
class RunConfig:
    raw: dict

    def __getitem__(self, key):
        return self.raw[key]

    def array_params(self, n: int) -> ArrayParams:
        a = self.raw["array"]
        spacing = a["spacing_nm"]
        k0 = a["wavevector_per_nm"]
        return ArrayParams(
            n_emitters=n,
            spacing=spacing,
            wavevector=math.pi / spacing if k0 is None else k0,
            light_speed=a["light_speed_nm_per_ps"],
            gamma_tle=per_ns_to_rate(a["gamma_tle_per_ns"], a["time_unit_ps"]),
            time_unit=a["time_unit_ps"],
        )

    @property
    def time_unit(self) -> float:
        return self.raw["array"]["time_unit_ps"]

    @property
    def out_dir(self) -> Path:
        return Path(self.raw["output"]["directory"])

    def wants(self, fmt: str) -> bool:
        return fmt in self.raw["output"]["formats"]


def _merge(base: dict, update: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(where, "unknown key")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(where, "expected a mapping")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def load_config(path: str | os.PathLike | None = None, overrides: dict | None = None) -> RunConfig:
    data = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from exc
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError("--config", f"not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("--config", "top level must be a mapping")
    raw = _merge(DEFAULTS, data)
    for dotted, value in (overrides or {}).items():
        section, key = dotted.split(".")
        raw[section][key] = value
    if raw["output"]["directory"] is None:
        raw["output"]["directory"] = os.environ.get(OUT_DIR_ENV, "out")
    validate(raw)
    return RunConfig(raw)


def _number(raw, path, *, positive=False, non_negative=False, allow_none=False):
    section, key = path.split(".")
    value = raw[section][key]
    if value is None and allow_none:
        return
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(path, f"expected a finite number, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(path, f"must be positive, got {value!r}")
    if non_negative and value < 0:
        raise ConfigError(path, f"must be non-negative, got {value!r}")


def _n_value(value, path):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(path, f"expected a positive integer, got {value!r}")


def validate(raw: dict) -> None:
    for key in ("spacing_nm", "light_speed_nm_per_ps", "gamma_tle_per_ns", "time_unit_ps"):
        _number(raw, f"array.{key}", positive=True)
    _number(raw, "array.wavevector_per_nm", allow_none=True)

    dyn = raw["dynamics"]
    if not isinstance(dyn["n"], list) or not dyn["n"]:
        raise ConfigError("dynamics.n", "expected a non-empty list of emitter numbers")
    for i, n in enumerate(dyn["n"]):
        _n_value(n, f"dynamics.n[{i}]")
    _number(raw, "dynamics.t_max", positive=True)
    _number(raw, "dynamics.dt", positive=True, allow_none=True)
    _number(raw, "dynamics.quadrature_t_max", positive=True, allow_none=True)
    _number(raw, "dynamics.quadrature_resolution", positive=True)
    if dyn["method"] not in ("dde", "quadrature", "both"):
        raise ConfigError("dynamics.method", f"expected dde, quadrature or both, got {dyn['method']!r}")
    if dyn["dt"] is not None:
        for n in dyn["n"]:
            bound = max_dde_step(build_delay_system(RunConfig(raw).array_params(n)))
            if dyn["dt"] >= bound:
                raise ConfigError("dynamics.dt", f"{dyn['dt']!r} exceeds the step bound {bound!r} for N={n}")

    spec = raw["spectral"]
    _n_value(spec["n"], "spectral.n")
    _number(raw, "spectral.q_halfwidth_per_nm", positive=True, allow_none=True)
    if isinstance(spec["n_q"], bool) or not isinstance(spec["n_q"], int) or spec["n_q"] < 7:
        raise ConfigError("spectral.n_q", f"expected an integer >= 7, got {spec['n_q']!r}")
    window = spec["fit_window_per_nm"]
    if window is not None:
        if (not isinstance(window, list) or len(window) != 2
                or not all(isinstance(w, (int, float)) and not isinstance(w, bool) for w in window)
                or window[0] >= window[1]):
            raise ConfigError("spectral.fit_window_per_nm", f"expected [lo, hi] with lo < hi, got {window!r}")
        if not window[0] <= 0 <= window[1]:
            # the density of states peaks at q = 0
            raise ConfigError("spectral.fit_window_per_nm", f"window {window!r} does not contain the peak at q = 0")

    eff = raw["effective"]
    if eff["g_source"] not in ("period", "explicit", "collective"):
        raise ConfigError("effective.g_source", f"expected period, explicit or collective, got {eff['g_source']!r}")
    if eff["kappa_source"] not in ("fit", "explicit"):
        raise ConfigError("effective.kappa_source", f"expected fit or explicit, got {eff['kappa_source']!r}")
    _number(raw, "effective.g_mev", non_negative=True, allow_none=True)
    _number(raw, "effective.kappa_mev", non_negative=True, allow_none=True)
    _number(raw, "effective.gamma_per_ns", non_negative=True)
    if eff["g_source"] == "explicit" and eff["g_mev"] is None:
        raise ConfigError("effective.g_mev", "required when g_source is explicit")
    if eff["kappa_source"] == "explicit" and eff["kappa_mev"] is None:
        raise ConfigError("effective.kappa_mev", "required when kappa_source is explicit")

    lg = raw["lg"]
    if not isinstance(lg["variants"], list) or not lg["variants"]:
        raise ConfigError("lg.variants", "expected a non-empty list")
    for i, v in enumerate(lg["variants"]):
        if v not in VARIANTS:
            raise ConfigError(f"lg.variants[{i}]", f"unknown variant {v!r}; expected one of {list(VARIANTS)}")
    _number(raw, "lg.t_max", positive=True, allow_none=True)
    _number(raw, "lg.dt", positive=True, allow_none=True)
    _number(raw, "lg.interval_ratio", positive=True)
    if lg["mode"] not in ("projective", "regression"):
        raise ConfigError("lg.mode", f"expected projective or regression, got {lg['mode']!r}")

    out = raw["output"]
    if not isinstance(out["directory"], (str, os.PathLike)) or not str(out["directory"]):
        raise ConfigError("output.directory", "expected a path")
    if not isinstance(out["formats"], list) or not out["formats"]:
        raise ConfigError("output.formats", "expected a non-empty list")
    for i, f in enumerate(out["formats"]):
        if f not in ("csv", "json"):
            raise ConfigError(f"output.formats[{i}]", f"unknown format {f!r}")


def dump_default_config() -> str:
    return yaml.safe_dump(DEFAULTS, sort_keys=False)
