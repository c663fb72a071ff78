import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from stratscat import geometry, io
from stratscat.cli import EXIT_CONFIG, EXIT_IO, main
from stratscat.inverse import layer_strip, PrefactorTable

CONST = {"c_plus": 1.0, "c_minus": 1.0, "y_M": 1.0,
         "layers": [{"y_lo": -1, "y_hi": 1, "poly_coeffs": [1.0]}], "lambda": 2.0,
         "numerics": {"band_limit": 4}}
TIR = {"c_plus": 1.0, "c_minus": 2.0, "y_M": 1.0,
       "layers": [{"y_lo": -1, "y_hi": 0.2, "poly_coeffs": [0.8]}, {"y_lo": 0.2, "y_hi": 1, "poly_coeffs": [1.5]}],
       "lambda": 2.0}
SLAB = {"c_plus": 1.0, "c_minus": 1.0, "y_M": 1.0,
        "layers": [{"y_lo": -1, "y_hi": -0.5, "poly_coeffs": [1.0]}, {"y_lo": -0.5, "y_hi": 0.5, "poly_coeffs": [0.6]},
                   {"y_lo": 0.5, "y_hi": 1, "poly_coeffs": [1.0]}]}
PERT = {"c_plus": 1.0, "c_minus": 1.0, "y_M": 1.0,
        "layers": [{"y_lo": -1, "y_hi": 0, "poly_coeffs": [0.8]}, {"y_lo": 0, "y_hi": 1, "poly_coeffs": [1.0]}],
        "lambda": 2.0, "hypothesis": "H2",
        "perturbation": {"J": 4, "n": 3, "terms": [
            {"order": 4, "hemisphere": h, "band_limit": 1, "coeffs": [0.3, 0.1, 0.2, -0.1]}
            for h in ("upper", "lower")]}}


def _cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def _run(tmp_path, doc, *argv, out="out"):
    d = tmp_path / out
    code = main([argv[0], "--config", _cfg(tmp_path, doc), "--out", str(d), "--no-timestamp", *argv[1:]])
    return code, d


def test_modes_constant_profile_is_empty(tmp_path):
    code, d = _run(tmp_path, CONST, "modes", "--kappa", "3")
    assert code == 0
    table = json.loads((d / "modes.json").read_text())
    assert table["eigenvalues"] == [] and table["kappa"] == 3
    man = json.loads((d / "manifest.json").read_text())
    assert man["conventions"]["D_y"] == "-i d/dy" and "numerics" in man and "timestamp" not in man


def test_modes_dispersion_columns(tmp_path):
    code, d = _run(tmp_path, SLAB, "modes", "--kappa", "6", "--kappa-range", "4", "8", "5")
    assert code == 0
    cols = io.read_csv(d / "dispersion.csv")
    assert list(cols) == ["kappa", "j", "lambda_j"]
    assert len(json.loads((d / "modes.json").read_text())["eigenvalues"]) == 3
    # dispersion branches increase with kappa
    for j in np.unique(cols["j"]):
        lj = cols["lambda_j"][cols["j"] == j]
        assert np.all(np.diff(lj) > 0)


def test_coeffs_total_internal_reflection_plateau(tmp_path):
    code, d = _run(tmp_path, TIR, "coeffs", "--samples", "100")
    assert code == 0
    cols = io.read_csv(d / "coeffs.csv")
    assert list(cols) == ["omega_n", "Re R", "Im R", "Re T", "Im T", "regime"]
    absR = np.hypot(cols["Re R"], cols["Im R"])
    crit = np.sqrt(1 - 0.25)
    below = cols["omega_n"] < crit - 0.05
    assert below.sum() > 30
    assert np.max(np.abs(absR[below] - 1)) < 1e-10
    assert np.all(cols["regime"][below] == "evanescent")
    assert np.all(absR[cols["omega_n"] > crit + 0.05] < 1 - 1e-3)


def test_maps_prints_json(tmp_path, capsys):
    code, d = _run(tmp_path, TIR, "maps", "--omega-n", "0.95")
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    w = np.array([np.sqrt(1 - 0.95**2), 0, 0.95])
    assert np.allclose(out["reflected"], geometry.map_reflect(w))
    assert out["transmitted"] is not None


def test_parametrix_outputs(tmp_path):
    code, d = _run(tmp_path, PERT, "parametrix", "--omega", "0.3,0.2,0.9", "--order", "1", "--prefix", "run")
    assert code == 0
    summary = json.loads((d / "run.json").read_text())
    assert summary["orders"] == [3] and summary["branches"] == ["I", "R", "T"]
    assert len(summary["excluded_disks"]) == 3
    assert summary["decay"]["upper"]["slope"] < -4.7
    cols = io.read_csv(d / "run_I_m3.csv")
    assert list(cols) == ["s", "theta_tilde", "Re b", "Im b"]
    n_s, n_theta = io.NUMERICS_DEFAULTS["n_s"], io.NUMERICS_DEFAULTS["n_theta"]
    assert cols["s"].size == n_s * n_theta


def test_roundtrip_and_reingestion(tmp_path):
    code, d = _run(tmp_path, CONST, "roundtrip", "--orders", "4..5", "--seed", "3")
    assert code == 0
    rep = json.loads((d / "report.json").read_text())
    assert rep["status"] == "ok" and rep["rel_error"] < 1e-3
    assert {r["order"] for r in rep["per_order"]} == {4, 5}
    assert all(r["residual"] is not None for r in rep["per_order"])
    rec = io.read_csv(d / "recovery.csv")
    assert list(rec["order"]) == [4.0, 5.0]
    # the symbol file re-enters both the library and the recover command
    sym = io.symbols_from_dict(io.read_json(d / "symbols.json"))
    prof = io.load_config(CONST).profile
    res = layer_strip(sym, prof, 2.0, [4, 5], band_limit=4, prefactors=PrefactorTable(prof, 2.0, sym.mode))
    assert res.status == "ok"
    code2 = main(["recover", "--config", _cfg(tmp_path, CONST), "--out", str(tmp_path / "rec"),
                  "--symbols", str(d / "symbols.json"), "--orders", "4..5", "--no-timestamp"])
    assert code2 == 0
    a = json.loads((d / "layers.json").read_text())
    b = json.loads((tmp_path / "rec" / "layers.json").read_text())
    assert np.allclose(a["layers"][0]["coeffs"], b["layers"][0]["coeffs"], atol=1e-14)
    grid = io.read_csv(tmp_path / "rec" / "layer_4.csv")
    assert list(grid) == ["theta", "phi", "W"] and grid["W"].size == 32 * 64


def test_roundtrip_reflected_mode(tmp_path):
    code, d = _run(tmp_path, TIR, "roundtrip", "--seed", "1")
    assert code == 0
    rep = json.loads((d / "report.json").read_text())
    assert rep["mode"] == "reflected" and rep["rel_error"] < 1e-3


def test_invert1d_from_coeffs(tmp_path):
    bump = {"c_plus": 1.0, "c_minus": 1.0, "y_M": 1.0,
            "layers": [{"y_lo": -1, "y_hi": 1, "poly_coeffs": [1.02, 0, -0.06, 0, 0.06, 0, -0.02]}],
            "lambda": 10.0}
    code, d = _run(tmp_path, bump, "coeffs", "--samples", "300", out="c")
    assert code == 0
    code, d2 = _run(tmp_path, bump, "invert1d", "--reflection", str(d / "coeffs.csv"),
                    "--x-range", "-2", "2", "--nodes", "300", out="i")
    assert code == 0
    prof = io.load_config(bump).profile
    cols = io.read_csv(d2 / "profile.csv")
    inside = np.abs(cols["y"]) < 1.5
    assert np.max(np.abs(cols["c0"][inside] - prof.speed(cols["y"][inside]))) < 2e-3


def test_error_json_and_exit_codes(tmp_path, capsys):
    bad = dict(CONST, numerics={"bogus": 1})
    code, _ = _run(tmp_path, bad, "modes", "--kappa", "1")
    err = json.loads(capsys.readouterr().err)
    assert code == EXIT_CONFIG and err["error"] == "ConfigInvalid" and err["exit_code"] == EXIT_CONFIG
    code = main(["modes", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path), "--kappa", "1"])
    err = json.loads(capsys.readouterr().err)
    assert code == EXIT_IO and err["error"] == "IoFailure"
    code, _ = _run(tmp_path, dict(CONST, delta_eq=0.7), "modes", "--kappa", "1")
    assert code == EXIT_CONFIG
    code, _ = _run(tmp_path, CONST, "parametrix", "--omega", "0,0,1")
    assert code == EXIT_CONFIG  # no perturbation in the config


def _hashes(d):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(d.iterdir())}


def test_cli_determinism(tmp_path):
    cfg = _cfg(tmp_path, CONST)
    outs = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        subprocess.run([sys.executable, "-m", "stratscat.cli", "roundtrip", "--config", cfg, "--out", str(d),
                        "--seed", "7", "--orders", "4..5", "--no-timestamp"], check=True)
        outs.append(_hashes(d))
    assert outs[0] == outs[1] and len(outs[0]) >= 6
