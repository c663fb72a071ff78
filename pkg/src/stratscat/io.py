"""Configuration ingestion and deterministic JSON/CSV emission."""

import csv
import datetime
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import ConfigInvalid, IoFailure
from .geometry import DELTA_BAND
from .media import AngularTerm, Layer, PerturbationExpansion, StratifiedProfile
from .parametrix.assemble import DELTA_ANT, N_MAX
from .spectral1d import DELTA_CRIT

NUMERICS_DEFAULTS = {
    "delta_eq": 0.05,
    "delta_band": DELTA_BAND,
    "delta_crit": DELTA_CRIT,
    "delta_ant": DELTA_ANT,
    "n_max": N_MAX,
    "N": 2,
    "n_s": 128,
    "n_theta": 64,
    "n_phi": 64,
    "n_y": 32,
    "band_limit": 8,
    "n_t": 64,
    "strip_tol": 1e-6,
    "marchenko_nodes": 512,
    "marchenko_cond_max": 1e10,
}

CONVENTIONS = {
    "laplacian": "positive, Delta = -sum d^2",
    "D_y": "-i d/dy",
    "incident_wave": "exp(i q_+ y) + R exp(-i q_+ y) above, T exp(i q_- y) below",
    "outgoing": "exp(-i lam |z| / c)",
    "vertical_axis": "last coordinate",
    "evanescent_root": "q_- = -i sqrt(.)",
}


# ------------------------------------------------------------------ ingestion


@dataclass
class RunConfig:
    profile: StratifiedProfile
    perturbation: PerturbationExpansion = None
    hypothesis: str = None
    lam: float = None
    numerics: dict = field(default_factory=lambda: dict(NUMERICS_DEFAULTS))
    seed: int = 0
    source: str = None


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path} is not valid JSON: {exc.msg}") from exc


def _positive(doc, key, default=None):
    v = doc.get(key, default)
    if v is None:
        raise ConfigInvalid(f"missing key {key!r}")
    try:
        v = float(v)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"{key!r} must be a number") from exc
    if not v > 0 or not math.isfinite(v):
        raise ConfigInvalid(f"{key!r} must be positive")
    return v


def profile_from_dict(doc):
    """StratifiedProfile from keys c_plus, c_minus, y_M and layers [{y_lo, y_hi, poly_coeffs}]."""
    cp, cm, yM = _positive(doc, "c_plus"), _positive(doc, "c_minus"), _positive(doc, "y_M")
    layers = doc.get("layers")
    if not layers:
        layers = [{"y_lo": -yM, "y_hi": yM, "poly_coeffs": [cp]}]
    try:
        ls = tuple(Layer(float(l["y_lo"]), float(l["y_hi"]), tuple(float(c) for c in l["poly_coeffs"]))
                   for l in layers)
    except (KeyError, TypeError) as exc:
        raise ConfigInvalid(f"layer entries need y_lo, y_hi, poly_coeffs ({exc})") from exc
    kw = {k: float(doc[k]) for k in ("c_m", "c_M") if doc.get(k) is not None}
    return StratifiedProfile(ls, c_plus=cp, c_minus=cm, y_M=yM, **kw)


def profile_to_dict(profile):
    return {
        "c_plus": profile.c_plus,
        "c_minus": profile.c_minus,
        "y_M": profile.y_M,
        "c_m": profile.c_m,
        "c_M": profile.c_M,
        "layers": [{"y_lo": l.y_lo, "y_hi": l.y_hi, "poly_coeffs": list(l.coeffs)} for l in profile.layers],
    }


def perturbation_from_dict(doc, r0=None, delta_eq=0.05):
    """PerturbationExpansion from {J, n, terms: [{order, hemisphere, band_limit, coeffs}]}."""
    try:
        J = int(doc["J"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid("perturbation needs an integer J") from exc
    terms = []
    for t in doc.get("terms", []):
        try:
            term = AngularTerm(int(t["order"]), t["hemisphere"], np.asarray(t["coeffs"], dtype=float))
        except (KeyError, TypeError) as exc:
            raise ConfigInvalid(f"perturbation term needs order, hemisphere, coeffs ({exc})") from exc
        except ValueError as exc:
            raise ConfigInvalid(f"bad coefficient table: {exc}") from exc
        if "band_limit" in t and int(t["band_limit"]) != term.band_limit:
            raise ConfigInvalid(f"band_limit {t['band_limit']} does not match {term.coeffs.size} coefficients")
        terms.append(term)
    return PerturbationExpansion(J=J, terms=tuple(terms), n=int(doc.get("n", 3)), r0=r0, delta_eq=delta_eq)


def perturbation_to_dict(pert):
    return {
        "J": pert.J,
        "n": pert.n,
        "terms": [{"order": t.order, "hemisphere": t.hemisphere, "band_limit": t.band_limit,
                   "coeffs": t.coeffs.tolist()} for t in pert.terms],
    }


def load_config(source, overrides=None):
    """RunConfig from a JSON path or an already parsed dict.

    Besides the profile keys, recognized entries are ``perturbation`` (inline
    dict or path), ``hypothesis``, ``r0``, ``delta_eq``, ``lambda``, ``seed``
    and a ``numerics`` block overriding :data:`NUMERICS_DEFAULTS`.
    """
    path = None
    if isinstance(source, (str, os.PathLike)):
        path = os.fspath(source)
        doc = read_json(path)
    else:
        doc = dict(source)
    doc.update(overrides or {})
    prof_doc = doc.get("profile", doc)
    if isinstance(prof_doc, str):
        prof_doc = read_json(_relative(prof_doc, path))
    profile = profile_from_dict(prof_doc)
    numerics = dict(NUMERICS_DEFAULTS)
    unknown = set(doc.get("numerics", {})) - set(numerics)
    if unknown:
        raise ConfigInvalid(f"unknown numerics keys: {sorted(unknown)}")
    numerics.update(doc.get("numerics", {}))
    delta_eq = float(doc.get("delta_eq", numerics["delta_eq"]))
    if not 0 < delta_eq < 0.5:
        raise ConfigInvalid("delta_eq must lie in (0, 0.5)")
    numerics["delta_eq"] = delta_eq
    for k in ("delta_band", "delta_crit", "delta_ant"):
        if not 0 < float(numerics[k]) < 0.5:
            raise ConfigInvalid(f"{k} must lie in (0, 0.5)")
    pert = None
    if doc.get("perturbation") is not None:
        pdoc = doc["perturbation"]
        if isinstance(pdoc, str):
            pdoc = read_json(_relative(pdoc, path))
        r0 = doc.get("r0")
        pert = perturbation_from_dict(pdoc, r0=None if r0 is None else _positive(doc, "r0"), delta_eq=delta_eq)
    hyp = doc.get("hypothesis")
    if hyp is not None and hyp not in ("H1", "H2"):
        raise ConfigInvalid("hypothesis must be 'H1' or 'H2'")
    lam = doc.get("lambda")
    lam = None if lam is None else float(lam)
    return RunConfig(profile=profile, perturbation=pert, hypothesis=hyp, lam=lam, numerics=numerics,
                     seed=int(doc.get("seed", 0)), source=path)


def _relative(p, base):
    if base is None or os.path.isabs(p):
        return p
    return os.path.join(os.path.dirname(base), p)


# ------------------------------------------------------------------ emission


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _plain(obj.real), "im": _plain(obj.imag)}
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj):
    """Sorted keys, fixed indentation; non-finite floats become null."""
    try:
        with open(path, "w") as fh:
            json.dump(_plain(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc.strerror}") from exc
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    """Tidy CSV: one observation per row; floats written with full precision."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc.strerror}") from exc
    return path


def read_csv(path):
    """(header, float array) of a numeric CSV; string columns are kept as strings."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc.strerror}") from exc
    if not rows:
        raise ConfigInvalid(f"{path} is empty")
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in body]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = np.array(vals)
    return cols


def manifest(command, numerics, calibration=None, extra=None, timestamp=True):
    """Run manifest: version, conventions, tolerances and the calibration constant."""
    doc = {
        "command": command,
        "version": __version__,
        "conventions": dict(CONVENTIONS),
        "numerics": dict(numerics),
        "calibration": calibration,
    }
    doc.update(extra or {})
    if timestamp:
        doc["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return doc


# ------------------------------------------------------------------ symbol files


def symbols_to_dict(data):
    """Symbol file: {lam, mode, calibration, records: [{order, grid, values_re, values_im, prefactor_tag}]}."""
    grid = {"poles": np.asarray(data.poles).tolist(), "weights": np.asarray(data.weights).tolist(), "n_t": data.n_t}
    cal = data.calibration
    return {
        "lam": data.lam,
        "mode": data.mode,
        "calibration": None if cal is None else {"re": float(np.real(cal)), "im": float(np.imag(cal))},
        "records": [{"order": int(k), "grid": grid, "values_re": np.real(v).tolist(),
                     "values_im": np.imag(v).tolist(), "prefactor_tag": data.prefactor_tag}
                    for k, v in sorted(data.orders.items())],
    }


def symbols_from_dict(doc):
    from .inverse.strip import ScatteringSymbolData

    try:
        recs = doc["records"]
        g = recs[0]["grid"]
        poles = np.asarray(g["poles"], dtype=float)
        weights = np.asarray(g["weights"], dtype=float)
        orders = {int(r["order"]): np.asarray(r["values_re"]) + 1j * np.asarray(r["values_im"]) for r in recs}
        tag = recs[0]["prefactor_tag"]
        cal = doc.get("calibration")
        cal = None if cal is None else complex(cal["re"], cal["im"])
        data = ScatteringSymbolData(float(doc["lam"]), doc["mode"], poles, weights, int(g["n_t"]), orders, tag, cal)
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"malformed symbol file ({exc})") from exc
    for k, v in orders.items():
        if v.shape != (len(poles), data.n_t):
            raise ConfigInvalid(f"order {k}: values shape {v.shape} does not match the grid")
    return data
