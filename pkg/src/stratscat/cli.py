"""Command-line driver: forward sweeps, parametrix assembly and inversion round trips.

Every command writes its artifacts plus ``manifest.json`` into ``--out``.
Errors are reported as one JSON object on stderr with a nonzero exit code.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

# single-threaded BLAS keeps reductions in a fixed order, so reruns are bit-identical;
# --threads parallelizes over independent parameter points instead
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np  # noqa: E402

from . import geometry, harmonics, io, spectral1d
from .errors import ConfigInvalid, IoFailure, StratScatError
from .media import AngularTerm, PerturbationExpansion

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


# ------------------------------------------------------------------ helpers


def _vector(text):
    try:
        v = np.array([float(x) for x in text.replace(",", " ").split()])
    except ValueError as exc:
        raise ConfigInvalid(f"cannot parse vector {text!r}") from exc
    if v.shape != (3,) or not np.linalg.norm(v) > 0:
        raise ConfigInvalid("direction must have three components, not all zero")
    return v / np.linalg.norm(v)


def _orders(text):
    try:
        if ".." in text:
            a, b = text.split("..")
            out = list(range(int(a), int(b) + 1))
        else:
            out = [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise ConfigInvalid(f"cannot parse orders {text!r}") from exc
    if not out:
        raise ConfigInvalid("empty order range")
    return out


def _need(cfg):
    if cfg is None:
        raise ConfigInvalid("this command needs --config")
    return cfg


def _lam(args, cfg):
    lam = args.lam if getattr(args, "lam", None) is not None else (cfg.lam if cfg else None)
    if lam is None:
        raise ConfigInvalid("lambda must be given (--lambda or config key 'lambda')")
    if lam == 0:
        raise ConfigInvalid("lambda must be nonzero")
    return float(lam)


def _out(args, name):
    return os.path.join(args.out, name)


def _finish(args, cfg, extra=None, calibration=None, files=()):
    numerics = cfg.numerics if cfg else dict(io.NUMERICS_DEFAULTS)
    doc = io.manifest(args.command, numerics, calibration,
                      extra={"seed": args.seed, "threads": args.threads, "files": sorted(files), **(extra or {})},
                      timestamp=not args.no_timestamp)
    io.write_json(_out(args, "manifest.json"), doc)
    return EXIT_OK


# ------------------------------------------------------------------ commands


def cmd_modes(args, cfg):
    prof = _need(cfg).profile
    files = []
    if args.kappa is not None:
        spec = spectral1d.guided_modes(prof, args.kappa, with_thresholds=True)
        table = {"kappa": args.kappa, "eigenvalues": spec.eigenvalues.tolist(),
                 "thresholds": [float(t) for t in spec.thresholds]}
        files.append(io.write_json(_out(args, "modes.json"), table))
    if args.kappa_range is not None:
        a, b, n = args.kappa_range
        kappas = np.linspace(a, b, int(n))
        with ThreadPoolExecutor(args.threads) as ex:
            eigs = list(ex.map(lambda k: spectral1d.eigenvalues(prof, k), kappas))
        rows = [(k, j + 1, float(np.sqrt(mu))) for k, ev in zip(kappas, eigs) for j, mu in enumerate(ev)]
        files.append(io.write_csv(_out(args, "dispersion.csv"), ["kappa", "j", "lambda_j"], rows))
    if not files:
        raise ConfigInvalid("modes needs --kappa or --kappa-range")
    return _finish(args, cfg, files=[os.path.basename(f) for f in files])


def _coeff_row(prof, lam, wn, delta):
    try:
        rt, _ = spectral1d.solve_phi_plus(prof, lam, wn, delta_crit=delta)
    except StratScatError:
        return None
    return (wn, rt.R.real, rt.R.imag, rt.T.real, rt.T.imag, rt.regime)


def cmd_coeffs(args, cfg):
    cfg = _need(cfg)
    lam = _lam(args, cfg)
    if args.omega_n is not None:
        wns = [args.omega_n]
    else:
        wns = np.linspace(1.0 / args.samples, 1.0, args.samples)
    delta = cfg.numerics["delta_crit"]
    with ThreadPoolExecutor(args.threads) as ex:
        rows = [r for r in ex.map(lambda w: _coeff_row(cfg.profile, lam, float(w), delta), wns) if r is not None]
    if not rows:
        raise ConfigInvalid("every requested omega_n lies in an excluded band")
    io.write_csv(_out(args, "coeffs.csv"), ["omega_n", "Re R", "Im R", "Re T", "Im T", "regime"], rows)
    return _finish(args, cfg, extra={"lambda": lam}, files=["coeffs.csv"])


def cmd_maps(args, cfg):
    prof = cfg.profile if cfg else None
    if prof is None:
        raise ConfigInvalid("maps needs --config for the limiting speeds")
    if args.omega is not None:
        omega = _vector(args.omega)
    else:
        wn = args.omega_n
        if wn is None or not -1.0 < wn < 1.0:
            raise ConfigInvalid("maps needs --omega or --omega-n in (-1, 1)")
        omega = np.array([np.sqrt(1.0 - wn**2), 0.0, wn])
    out = {"omega": omega.tolist(), "reflected": geometry.map_reflect(omega).tolist()}
    for key, fun in (("transmitted", lambda: geometry.map_transmit(omega, prof, cfg.numerics["delta_band"])),
                     ("transmitted_carrier", lambda: geometry.transmitted_carrier(omega, prof))):
        try:
            out[key] = fun().tolist()
        except StratScatError as exc:
            out[key] = None
            out[key + "_reason"] = type(exc).__name__
    io.write_json(_out(args, "maps.json"), out)
    print(json.dumps(out, sort_keys=True))
    return _finish(args, cfg, files=["maps.json"])


def cmd_parametrix(args, cfg):
    from .parametrix import assemble_parametrix, residual_decay_check

    cfg = _need(cfg)
    if cfg.perturbation is None:
        raise ConfigInvalid("parametrix needs a perturbation in the config")
    lam = _lam(args, cfg)
    omega = _vector(args.omega)
    nm = cfg.numerics
    N = args.order if args.order is not None else nm["N"]
    P = assemble_parametrix(cfg.profile, cfg.perturbation, lam, omega, N=N, n_s=nm["n_s"],
                            n_theta=nm["n_theta"], n_phi=nm["n_phi"], n_y=nm["n_y"],
                            delta_ant=nm["delta_ant"], delta=nm["delta_band"], n_max=nm["n_max"])
    prefix = args.prefix or "amplitude"
    files = []
    for name, b in sorted(P.branches.items()):
        S, T = b.grid.mesh()
        for m, amp in sorted(b.amplitudes.items()):
            fn = f"{prefix}_{name}_m{m}.csv"
            rows = zip(S.ravel(), T.ravel(), amp.real.ravel(), amp.imag.ravel())
            io.write_csv(_out(args, fn), ["s", "theta_tilde", "Re b", "Im b"], rows)
            files.append(fn)
    decay = residual_decay_check(P)
    summary = {
        "lambda": lam,
        "omega": omega.tolist(),
        "N": N,
        "orders": P.orders,
        "branches": sorted(P.branches),
        "excluded_disks": P.excluded_disks(),
        "decay": decay,
        "jumps": {str(m): j for m, j in P.jumps.items()},
    }
    io.write_json(_out(args, f"{prefix}.json"), summary)
    files.append(f"{prefix}.json")
    return _finish(args, cfg, files=files)


def _emit_layers(args, result, band_limit, n_grid=32):
    """Harmonic-coefficient JSON plus gridded CSV (theta, phi, W) per recovered layer."""
    files = []
    doc = {"layers": [{"order": l.order, "band_limit": band_limit, "coeffs": np.asarray(l.coeffs).tolist()}
                      for l in result.layers],
           "perturbation": io.perturbation_to_dict(result.perturbation)}
    io.write_json(_out(args, "layers.json"), doc)
    files.append("layers.json")
    th = np.pi * (np.arange(n_grid) + 0.5) / n_grid
    ph = 2.0 * np.pi * np.arange(2 * n_grid) / (2 * n_grid)
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    dirs = np.stack([np.sin(TH) * np.cos(PH), np.sin(TH) * np.sin(PH), np.cos(TH)], axis=-1).reshape(-1, 3)
    for l in result.layers:
        vals = harmonics.evaluate(l.coeffs, dirs)
        fn = f"layer_{l.order}.csv"
        io.write_csv(_out(args, fn), ["theta", "phi", "W"], zip(TH.ravel(), PH.ravel(), vals))
        files.append(fn)
    return files


def _report(result, errors=None):
    rows = [{"order": k, "residual": v, "imag_ratio": result.imag_parts.get(k),
             "rel_error": None if errors is None else errors.get(k)} for k, v in sorted(result.residuals.items())]
    out = {"status": result.status, "halted_at": result.halted_at, "per_order": rows}
    if errors is not None:
        out["rel_error"] = max(errors.values()) if errors else None
    return out


def _emit_recovery_csv(args, report):
    """Recovery error vs order as tidy CSV (empty cells where a value is not defined)."""
    rows = [(r["order"], r["residual"], "" if r["imag_ratio"] is None else r["imag_ratio"],
             "" if r["rel_error"] is None else r["rel_error"]) for r in report["per_order"]]
    io.write_csv(_out(args, "recovery.csv"), ["order", "residual", "imag_ratio", "rel_error"], rows)
    return "recovery.csv"


def cmd_recover(args, cfg):
    from .inverse import PrefactorTable, layer_strip

    cfg = _need(cfg)
    data = io.symbols_from_dict(io.read_json(args.symbols))
    mode = args.mode or data.mode
    if mode != data.mode:
        raise ConfigInvalid(f"symbol file holds {data.mode} data, not {mode}")
    orders = _orders(args.orders) if args.orders else sorted(data.orders)
    missing = [k for k in orders if k not in data.orders]
    if missing:
        raise ConfigInvalid(f"symbol file lacks orders {missing}")
    nm = cfg.numerics
    pref = PrefactorTable(cfg.profile, data.lam, mode, delta=nm["delta_band"])
    res = layer_strip(data, cfg.profile, data.lam, orders, band_limit=nm["band_limit"], mode=mode,
                      prefactors=pref, delta_eq=nm["delta_eq"], tol=nm["strip_tol"])
    files = _emit_layers(args, res, nm["band_limit"])
    rep = _report(res)
    io.write_json(_out(args, "report.json"), rep)
    files += ["report.json", _emit_recovery_csv(args, rep)]
    return _finish(args, cfg, calibration=data.calibration, files=files)


def cmd_roundtrip(args, cfg):
    from .inverse import (REFLECTED_MODE, TRANSMITTED_MODE, PrefactorTable, layer_strip, recoverable_slots,
                          recovered_gamma, symbol_grid, synthesize_symbols)

    cfg = _need(cfg)
    prof, nm = cfg.profile, cfg.numerics
    lam = _lam(args, cfg)
    mode = TRANSMITTED_MODE if np.isclose(prof.c_plus, prof.c_minus) else REFLECTED_MODE
    L = nm["band_limit"]
    if cfg.perturbation is not None:
        pert = cfg.perturbation
        orders = sorted(pert.orders)
    else:
        # planted layers drawn from the seed, restricted to recoverable slots
        rng = np.random.default_rng(args.seed)
        J = 4
        orders = _orders(args.orders) if args.orders else [J]
        terms = []
        for k in orders:
            c = np.where(recoverable_slots(L, k, mode), rng.normal(size=harmonics.n_coeffs(L)), 0.0)
            terms.append(AngularTerm(k, "upper", c))
            if mode == TRANSMITTED_MODE:
                terms.append(AngularTerm(k, "lower", c))
        pert = PerturbationExpansion(J=min(orders), terms=tuple(terms))
    grid = symbol_grid(L, n_t=nm["n_t"])
    pref = PrefactorTable(prof, lam, mode, delta=nm["delta_band"])
    sym = synthesize_symbols(prof, pert, lam, orders, grid, mode, pref)
    io.write_json(_out(args, "symbols.json"), io.symbols_to_dict(sym))
    res = layer_strip(sym, prof, lam, orders, J=pert.J, band_limit=L, mode=mode, prefactors=pref,
                      delta_eq=nm["delta_eq"], tol=nm["strip_tol"])
    errors = {}
    for k in orders:
        got = recovered_gamma(res, k)
        planted = sum((t.coeffs for t in pert.terms if t.order == k and t.hemisphere == "upper"),
                      np.zeros(harmonics.n_coeffs(L)))
        if got is not None:
            errors[k] = float(np.linalg.norm(got - planted) / max(np.linalg.norm(planted), 1e-300))
    files = ["symbols.json"] + _emit_layers(args, res, L)
    rep = _report(res, errors)
    rep.update({"mode": mode, "lambda": lam, "planted": io.perturbation_to_dict(pert)})
    io.write_json(_out(args, "report.json"), rep)
    files += ["report.json", _emit_recovery_csv(args, rep)]
    return _finish(args, cfg, calibration=sym.calibration, files=files)


def cmd_invert1d(args, cfg):
    from .inverse import marchenko_invert_1d, recover_c0_from_coefficients

    cols = io.read_csv(args.reflection)
    nm = cfg.numerics if cfg else io.NUMERICS_DEFAULTS
    x_range = tuple(args.x_range) if args.x_range else (-3.0, 3.0)
    n = args.nodes or nm["marchenko_nodes"]
    extra = {}
    if "omega_n" in cols:
        cfg = _need(cfg)
        lam = _lam(args, cfg)
        R = cols["Re R"] + 1j * cols["Im R"]
        est = recover_c0_from_coefficients(cols["omega_n"], R, lam, cfg.profile.c_plus, cfg.profile.c_minus,
                                           x_range=x_range, n=n)
        pot = est.potential
        rows = zip(est.y, pot.q, est.c0)
        io.write_csv(_out(args, "profile.csv"), ["y", "q", "c0"], rows)
        extra["lambda"] = lam
    elif "k" in cols:
        R = cols["Re R"] + 1j * cols["Im R"]
        pot = marchenko_invert_1d(cols["k"], R, (), x_range, n)
        io.write_csv(_out(args, "profile.csv"), ["y", "q"], zip(pot.x, pot.q))
    else:
        raise ConfigInvalid("reflection CSV needs an 'omega_n' or a 'k' column")
    extra["condition"] = pot.condition
    return _finish(args, cfg, extra=extra, files=["profile.csv"])


COMMANDS = {
    "modes": cmd_modes,
    "coeffs": cmd_coeffs,
    "maps": cmd_maps,
    "parametrix": cmd_parametrix,
    "recover": cmd_recover,
    "invert1d": cmd_invert1d,
    "roundtrip": cmd_roundtrip,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config (profile, perturbation, numerics)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--no-timestamp", action="store_true", help="omit the manifest timestamp")

    p = argparse.ArgumentParser(prog="stratscat", parents=[common],
                                description="Scattering on perturbed stratified media.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("modes", parents=[common], help="guided-mode table and dispersion curves")
    s.add_argument("--kappa", type=float)
    s.add_argument("--kappa-range", type=float, nargs=3, metavar=("LO", "HI", "N"))

    s = sub.add_parser("coeffs", parents=[common], help="R and T of the plane-wave problem")
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--omega-n", type=float)
    s.add_argument("--samples", type=int, default=200, help="sweep size when --omega-n is absent")

    s = sub.add_parser("maps", parents=[common], help="reflected/transmitted singularity directions")
    s.add_argument("--omega-n", type=float)
    s.add_argument("--omega", help="incident direction 'x,y,z'")

    s = sub.add_parser("parametrix", parents=[common], help="assemble the parametrix")
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--omega", required=True, help="incident direction 'x,y,z'")
    s.add_argument("--order", type=int, help="truncation N")
    s.add_argument("--prefix", help="file prefix inside --out")

    s = sub.add_parser("recover", parents=[common], help="layer stripping from a symbol file")
    s.add_argument("--symbols", required=True)
    s.add_argument("--mode", choices=("transmitted", "reflected"))
    s.add_argument("--orders", help="J..L or a comma list")

    s = sub.add_parser("invert1d", parents=[common], help="Marchenko inversion of reflection data")
    s.add_argument("--reflection", required=True, help="CSV with omega_n or k, 'Re R', 'Im R'")
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--x-range", type=float, nargs=2)
    s.add_argument("--nodes", type=int)

    s = sub.add_parser("roundtrip", parents=[common], help="synthesize symbols and recover them")
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--orders", help="planted orders when the config has no perturbation")
    return p


def run(args):
    """Execute parsed arguments; returns the exit status."""
    if args.threads < 1:
        raise ConfigInvalid("--threads must be positive")
    cfg = io.load_config(args.config) if args.config else None
    if args.seed is None:
        args.seed = cfg.seed if cfg else 0
    os.makedirs(args.out, exist_ok=True)
    return COMMANDS[args.command](args, cfg)


def _error(exc, code):
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigInvalid as exc:
        return _error(exc, EXIT_CONFIG)
    except (IoFailure, OSError) as exc:
        return _error(exc, EXIT_IO)
    except StratScatError as exc:
        return _error(exc, EXIT_NUMERIC)


if __name__ == "__main__":
    sys.exit(main())
