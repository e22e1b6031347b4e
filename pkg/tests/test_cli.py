import fnmatch
import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np
import pytest
import yaml

from dicke_array import cli, schemas
from dicke_array.config import DEFAULTS, load_config
from dicke_array.errors import ConfigError

ROOT = Path(__file__).resolve().parents[1]
SMALL = {"dynamics": {"n": [20, 200], "t_max": 0.2}, "spectral": {"n": 200, "n_q": 1601}}

HEADERS = {
    "dynamics/trace_*.csv": "t,re_b,im_b,population",
    "dos/dos_N*.csv": "q,dos",
    "dos/dos_fit_N*.csv": "q,dos,fit",
    "lg/lg_*.csv": "t,L_value,bound,violated",
    "lg/correlator_*.csv": "t,value",
}


def write_config(tmp_path, payload, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(payload))
    return str(path)


def run(*argv):
    return cli.main([str(a) for a in argv])


def all_files(root):
    return sorted(p.relative_to(root).as_posix() for p in Path(root).rglob("*") if p.is_file())


@pytest.fixture(scope="module")
def pipeline_dirs(tmp_path_factory):
    base = tmp_path_factory.mktemp("pipeline")
    cfg = write_config(base, SMALL)
    dirs = [base / "a", base / "b"]
    for d in dirs:
        assert run("pipeline", "--config", cfg, "--out-dir", d) == 0
    return dirs


def test_pipeline_is_deterministic(pipeline_dirs):
    a, b = pipeline_dirs
    assert all_files(a) == all_files(b)
    for rel in all_files(a):
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_manifest_lists_every_file(pipeline_dirs):
    root = pipeline_dirs[0]
    manifest = json.loads((root / "manifest.json").read_text())
    listed = sorted(f["path"] for f in manifest["files"])
    assert listed == [p for p in all_files(root) if p != "manifest.json"]
    derived = manifest["derived"]
    assert derived["effective_model"]["energies_meV"]["g"] > 0
    assert derived["effective_model"]["rates_rad_per_ps"]["g"] > 0
    assert {s["variant"] for s in derived["lg"]} == set(DEFAULTS["lg"]["variants"])
    assert derived["calibration"]["asserted"] is False
    assert any(r["period"] for r in derived["dynamics"])


def test_json_outputs_match_schemas(pipeline_dirs):
    root = pipeline_dirs[0]
    checked = 0
    for rel in all_files(root):
        if not rel.endswith(".json"):
            continue
        schema = next(s for pattern, s in schemas.BY_FILE.items() if fnmatch.fnmatch(rel, pattern))
        jsonschema.validate(json.loads((root / rel).read_text()), schema)
        checked += 1
    assert checked == len(schemas.BY_FILE)


def test_csv_headers(pipeline_dirs):
    root = pipeline_dirs[0]
    csvs = [p for p in all_files(root) if p.endswith(".csv")]
    assert csvs
    for rel in csvs:
        header = next(h for pattern, h in HEADERS.items() if fnmatch.fnmatch(rel, pattern))
        assert (root / rel).read_text().splitlines()[0] == header, rel


def test_dynamics_summary_has_period_for_200(tmp_path):
    out = tmp_path / "out"
    assert run("dynamics", "--n", 20, 60, 200, "--t-max", 0.3, "--out-dir", out) == 0
    runs = {r["n"]: r for r in json.loads((out / "dynamics" / "summary.json").read_text())["runs"]}
    assert runs[200]["period"] is not None
    assert runs[20]["period"] is None
    assert runs[60]["early_decay_rate"] / runs[20]["early_decay_rate"] == pytest.approx(3, rel=0.1)
    assert sorted(p.name for p in (out / "dynamics").glob("*.csv")) == [
        "trace_N200_dde.csv", "trace_N20_dde.csv", "trace_N60_dde.csv"]


def test_dynamics_both_reports_deviation(tmp_path):
    cfg = write_config(tmp_path, {"dynamics": {"n": [5], "t_max": 0.6, "method": "both"}})
    assert run("dynamics", "--config", cfg, "--out-dir", tmp_path / "out") == 0
    entry = json.loads((tmp_path / "out" / "dynamics" / "summary.json").read_text())["runs"][0]
    assert entry["max_population_deviation"] < 1e-3
    assert (tmp_path / "out" / "dynamics" / "trace_N5_quadrature.csv").exists()


def test_dos_two_emitters_matches_closed_form(tmp_path):
    out = tmp_path / "out"
    assert run("dos", "--n", 2, "--out-dir", out) == 0
    data = np.loadtxt(out / "dos" / "dos_N2.csv", delimiter=",", skiprows=1)
    q, d = data.T
    np.testing.assert_allclose(d, (2 + 2 * np.cos(q * 400.0)) / 4, atol=1e-12)


def test_dos_n300_peak_at_zero(tmp_path):
    out = tmp_path / "out"
    assert run("dos", "--n", 300, "--out-dir", out) == 0
    q, d = np.loadtxt(out / "dos" / "dos_N300.csv", delimiter=",", skiprows=1).T
    assert d[np.argmin(np.abs(q))] == 1.0 and q[np.argmax(d)] == 0.0
    side = json.loads((out / "dos" / "fit_N300.json").read_text())
    assert {"center", "fwhm", "amplitude", "residual", "window_lo", "window_hi", "kappa_meV", "g_meV"} <= set(side)


def test_lg_explicit_fig4_parameters(tmp_path):
    out = tmp_path / "out"
    assert run("lg", "--config", ROOT / "configs" / "fig4_explicit.yaml", "--out-dir", out) == 0
    scans = json.loads((out / "lg" / "lg_summary.json").read_text())["scans"]
    assert len(scans) == 3
    for scan in scans:
        assert scan["violation_intervals"], scan["variant"]
        assert scan["max_value"] > 1


def test_lg_undamped_maxima(tmp_path):
    out = tmp_path / "out"
    code = run("lg", "--g-mev", 8.3, "--kappa-mev", 0.0, "--gamma-per-ns", 0.0, "--out-dir", out)
    assert code == 0
    scans = {s["variant"]: s for s in json.loads((out / "lg" / "lg_summary.json").read_text())["scans"]}
    assert scans["original_equal_intervals"]["signed_max_value"] == pytest.approx(1.5, abs=1e-4)
    assert scans["markovian_plus"]["max_value"] == pytest.approx(1.25, abs=1e-4)
    assert scans["markovian_k0"]["max_value"] == pytest.approx(1.25, abs=1e-4)


def test_lg_grid_overrides(tmp_path):
    out = tmp_path / "out"
    assert run("lg", "--g-mev", 8.3, "--kappa-mev", 3.3, "--t-max", 0.05, "--dt", 0.001,
               "--variant", "markovian_k0", "--out-dir", out) == 0
    summary = json.loads((out / "lg" / "lg_summary.json").read_text())
    assert summary["t_max"] == 0.05 and summary["dt"] == 0.001
    assert [s["variant"] for s in summary["scans"]] == ["markovian_k0"]
    assert len((out / "lg" / "lg_markovian_k0.csv").read_text().splitlines()) == 52


def test_lg_uses_upstream_products(tmp_path):
    out = tmp_path / "out"
    assert run("dynamics", "--n", 200, "--t-max", 0.2, "--out-dir", out) == 0
    assert run("dos", "--out-dir", out) == 0
    assert run("lg", "--out-dir", out) == 0
    model = json.loads((out / "lg" / "effective_model.json").read_text())
    assert model["sources"] == {"g": "period", "kappa": "fit"}
    period = json.loads((out / "dynamics" / "summary.json").read_text())["runs"][0]["period"]
    assert model["rates_per_time_unit"]["g"] == pytest.approx(math.pi / period)


def test_lg_without_effective_inputs_is_config_error(tmp_path, capsys):
    assert run("lg", "--out-dir", tmp_path / "out") == 2
    assert "effective.g_source" in capsys.readouterr().err


@pytest.mark.parametrize("payload, field", [
    ({"dynamics": {"n": []}}, "dynamics.n"),
    ({"lg": {"variants": []}}, "lg.variants"),
    ({"lg": {"variants": ["bell"]}}, "lg.variants[0]"),
    ({"array": {"spacing_nm": -1}}, "array.spacing_nm"),
    ({"dynamics": {"dt": 1.0}}, "dynamics.dt"),
    ({"spectral": {"fit_window_per_nm": [0.001, 0.002]}}, "spectral.fit_window_per_nm"),
    ({"effective": {"g_source": "explicit"}}, "effective.g_mev"),
    ({"typo": {}}, "typo"),
    ({"array": {"spacing": 400}}, "array.spacing"),
])
def test_invalid_config_fails_fast_without_output(tmp_path, capsys, payload, field):
    cfg = write_config(tmp_path, payload)
    out = tmp_path / "out"
    start = time.perf_counter()
    code = run("pipeline", "--config", cfg, "--out-dir", out)
    elapsed = time.perf_counter() - start
    assert code == 2
    assert field in capsys.readouterr().err
    assert not out.exists()
    assert elapsed < 0.1


def test_load_config_error_carries_path():
    with pytest.raises(ConfigError) as err:
        load_config(overrides={"dynamics.n": [0]})
    assert err.value.path == "dynamics.n[0]"


def test_missing_config_file(tmp_path):
    assert run("dynamics", "--config", tmp_path / "nope.yaml", "--out-dir", tmp_path / "out") == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, {"spectral": {"n_q": 9, "q_halfwidth_per_nm": 1.0}})
    assert run("dos", "--config", cfg, "--out-dir", tmp_path / "out") == 3
    assert "stage dos" in capsys.readouterr().err


def test_io_error_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run("dos", "--n", 2, "--out-dir", blocker / "sub") == 4


def test_environment_sets_default_directory(tmp_path, monkeypatch):
    monkeypatch.setenv("DICKE_ARRAY_OUT", str(tmp_path / "env_out"))
    assert run("dos", "--n", 2) == 0
    assert (tmp_path / "env_out" / "dos" / "dos_N2.csv").exists()


def test_json_only_output(tmp_path):
    cfg = write_config(tmp_path, {"output": {"formats": ["json"]}})
    out = tmp_path / "out"
    assert run("dos", "--config", cfg, "--n", 2, "--out-dir", out) == 0
    assert all(p.endswith(".json") for p in all_files(out))


def test_shipped_configs_load():
    for path in (ROOT / "configs").glob("*.yaml"):
        load_config(path)


def test_show_config_round_trips(capsys):
    assert run("show-config") == 0
    assert yaml.safe_load(capsys.readouterr().out) == DEFAULTS


def test_module_entry_point(tmp_path):
    env = dict(os.environ, DICKE_ARRAY_OUT=str(tmp_path / "out"))
    proc = subprocess.run([sys.executable, "-m", "dicke_array", "dos", "--n", "2"], env=env,
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "out" / "manifest.json").exists()
