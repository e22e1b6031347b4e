"""JSON Schema descriptions of every JSON file the command line writes.

Plain dictionaries so that any Draft 2020-12 validator can consume them.
"""

NUMBER = {"type": "number"}
NULLABLE_NUMBER = {"type": ["number", "null"]}
INTERVAL = {"type": "array", "items": NUMBER, "minItems": 2, "maxItems": 2}

CONVENTIONS = {
    "type": "object",
    "required": ["basis_order", "superoperator_stacking", "kappa_convention", "g_from_period"],
    "properties": {
        "basis_order": {"const": ["+", "k0", "vac"]},
        "superoperator_stacking": {"const": "column"},
    },
}

DYNAMICS_RUN = {
    "type": "object",
    "required": ["n", "method", "delay_units", "early_decay_rate", "period", "n_maxima"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "method": {"enum": ["dde", "quadrature", "both"]},
        "delay_units": NUMBER,
        "early_decay_rate": NULLABLE_NUMBER,
        "period": NULLABLE_NUMBER,
        "n_maxima": {"type": "integer", "minimum": 0},
        "max_population_deviation": NUMBER,
    },
}

DYNAMICS_SUMMARY = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["conventions", "runs"],
    "properties": {"conventions": CONVENTIONS, "runs": {"type": "array", "minItems": 1, "items": DYNAMICS_RUN}},
}

FIT_SIDECAR = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["center", "fwhm", "amplitude", "residual", "window_lo", "window_hi", "kappa_meV", "g_meV"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "center": NUMBER,
        "fwhm": {"type": "number", "exclusiveMinimum": 0},
        "amplitude": {"type": "number", "exclusiveMinimum": 0},
        "residual": {"type": "number", "minimum": 0},
        "iterations": {"type": "integer", "minimum": 0},
        "window_lo": NUMBER,
        "window_hi": NUMBER,
        "kappa_meV": {"type": "number", "minimum": 0},
        "g_meV": {"type": "number", "minimum": 0},
        "g_source": {"enum": ["period", "collective"]},
        "kappa_convention": {"type": "string"},
    },
}

LG_SCAN = {
    "type": "object",
    "required": ["variant", "bound", "max_value", "argmax", "violated", "violation_intervals"],
    "properties": {
        "variant": {"enum": ["original_equal_intervals", "markovian_plus", "markovian_k0"]},
        "bound": NUMBER,
        "max_value": {"type": "number", "minimum": 0},
        "argmax": {"type": "number", "minimum": 0},
        "violated": {"type": "boolean"},
        "violation_intervals": {"type": "array", "items": INTERVAL},
        "signed_max_value": NUMBER,
        "signed_argmax": NUMBER,
    },
}

LG_SUMMARY = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["t_max", "dt", "mode", "interval_ratio", "scans"],
    "properties": {
        "t_max": NUMBER,
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "mode": {"enum": ["projective", "regression"]},
        "interval_ratio": {"type": "number", "exclusiveMinimum": 0},
        "scans": {"type": "array", "minItems": 1, "items": LG_SCAN},
    },
}

RATES = {
    "type": "object",
    "required": ["g", "kappa", "gamma"],
    "properties": {k: {"type": "number", "minimum": 0} for k in ("g", "kappa", "gamma")},
}

EFFECTIVE_MODEL = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["rates_per_time_unit", "rates_rad_per_ps", "energies_meV", "sources", "conventions"],
    "properties": {
        "rates_per_time_unit": RATES,
        "rates_rad_per_ps": RATES,
        "energies_meV": RATES,
        "sources": {
            "type": "object",
            "required": ["g", "kappa"],
            "properties": {
                "g": {"enum": ["period", "explicit", "collective"]},
                "kappa": {"enum": ["fit", "explicit"]},
            },
        },
        "conventions": CONVENTIONS,
    },
}

DENSITY_OPERATOR = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["basis", "layout", "entries"],
    "properties": {
        "basis": {"const": ["+", "k0", "vac"]},
        "layout": {"const": "row-major"},
        "entries": {"type": "array", "minItems": 9, "maxItems": 9, "items": INTERVAL},
    },
}

CALIBRATION = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["period_units", "reference_period_units", "period_ratio_to_reference", "g_meV_from_period",
                 "reference_g_meV", "kappa_meV_from_fit", "reference_kappa_meV", "asserted"],
    "properties": {
        "period_units": NULLABLE_NUMBER,
        "period_ratio_to_reference": NULLABLE_NUMBER,
        "g_meV_from_period": NULLABLE_NUMBER,
        "asserted": {"const": False},
    },
}

MANIFEST = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["tool", "version", "command", "config", "derived", "files"],
    "properties": {
        "tool": {"const": "dicke-array"},
        "version": {"type": "string"},
        "command": {"enum": ["dynamics", "dos", "lg", "pipeline"]},
        "config": {"type": "object"},
        "derived": {"type": "object"},
        "files": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["path", "sha256", "bytes"],
                "properties": {
                    "path": {"type": "string"},
                    "sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
                    "bytes": {"type": "integer", "minimum": 0},
                },
            },
        },
    },
}

# file name pattern -> schema
BY_FILE = {
    "manifest.json": MANIFEST,
    "calibration.json": CALIBRATION,
    "dynamics/summary.json": DYNAMICS_SUMMARY,
    "dos/fit_N*.json": FIT_SIDECAR,
    "lg/lg_summary.json": LG_SUMMARY,
    "lg/effective_model.json": EFFECTIVE_MODEL,
    "lg/rho_plus_final.json": DENSITY_OPERATOR,
}
