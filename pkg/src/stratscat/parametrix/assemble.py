"""Order-by-order assembly of the approximate Poisson operator for one incident direction.

Away from the layers the ansatz has three branches, each a carrier exponential
times a series in |z|^-m:

* incident (I): exp(i lam z.w / c_+), base amplitude 1, upper region;
* reflected (R): exp(i lam z.w* / c_+), w* = (w_bar, -w_n), base amplitude R_+;
* transmitted (T): exp(i lam z.w_T / c_-), base amplitude T_+, lower region
  (absent when the transmitted wave is evanescent).

Inside the layers the ansatz is exp(i lam x.w_bar / c_+) sum_m |x|^-m b_M,m(x/|x|, y)
with b_M,0 = phi_+. Order m of the outer branches solves away the error
coefficient of order m + 1; the middle slab at order m is a Robin problem in y
whose upper datum is the incident amplitude on the equator, and whose boundary
values fix the equatorial data of the R and T transports.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import geometry, ode, spectral1d
from ..errors import ConfigInvalid, EquatorialInput
from . import slab
from .sphere_grid import GeodesicGrid
from .transport import (
    INCIDENT,
    MIDDLE,
    REFLECTED,
    TRANSMITTED,
    ErrorCoefficient,
    SphericalAmplitude,
    constant_fields,
    error_from_fields,
    g_series,
    grid_fields,
    transport_incident_values,
    transport_offset_values,
)

N_MAX = 4
DELTA_ANT = 0.1
MARGIN = 0.05


@dataclass
class Branch:
    name: str
    grid: GeodesicGrid
    c_b: float
    base: complex
    side: str
    amplitudes: dict = field(default_factory=dict)  # m -> (n_s, n_theta), m >= 1
    s0: np.ndarray = None  # equator crossing per theta column (R, T)
    phi0: np.ndarray = None  # azimuth of that crossing
    disk: np.ndarray = None  # centre of the excluded antipodal disk

    @property
    def carrier(self):
        return self.grid.source

    def fields(self, upto):
        out = {0: constant_fields(self.base, self.grid.shape)}
        for m, v in self.amplitudes.items():
            if m <= upto:
                out[m] = grid_fields(self.grid, v)
        return out

    def covers(self, directions):
        s, _ = self.grid.frame.coordinates(directions)
        return (s >= self.grid.s_a - 1e-12) & (s <= self.grid.s_b + 1e-12)


def _trig_interp(values, phi):
    """Periodic interpolation in the last axis (uniform samples on [0, 2 pi)) at angles ``phi``.

    ``values`` has shape (npts, n_phi); row i is evaluated at phi[i].
    """
    n = values.shape[-1]
    F = np.fft.fft(values, axis=-1) / n
    k = np.fft.fftfreq(n, d=1.0 / n)
    E = np.exp(1j * np.outer(phi, k))
    if n % 2 == 0:
        E[:, n // 2] = np.cos(0.5 * n * phi)
    return np.sum(F * E, axis=-1)


def _d_phi(values, order=1):
    n = values.shape[-1]
    k = np.fft.fftfreq(n, d=1.0 / n)
    if order % 2 == 1 and n % 2 == 0:
        k[n // 2] = 0.0
    return np.fft.ifft(np.fft.fft(values, axis=-1) * (1j * k) ** order, axis=-1)


def incident_wave(profile, lam, omega):
    """Phi(z) = exp(i lam x.w_bar / c_+) phi_+(y), the unperturbed generalized plane wave."""
    omega = geometry.normalize(omega)
    rt, sol = spectral1d.solve_phi_plus(profile, lam, float(omega[-1]))
    k = lam * omega[:-1] / profile.c_plus

    def Phi(z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return np.exp(1j * z[:, :-1] @ k) * sol(z[:, -1])

    Phi.coefficients = rt
    Phi.solution = sol
    return Phi


@dataclass
class MiddleSlab:
    grid: object
    phi: np.ndarray
    c0: np.ndarray
    upper: np.ndarray  # node lies in a segment above y = 0
    base: np.ndarray  # phi_+ at the nodes
    amplitudes: dict = field(default_factory=dict)  # m -> (ny, n_phi)
    derivatives: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)  # E_rest,m with L b_m = -E_rest,m
    evanescent: bool = False

    def value(self, m):
        return self.base[:, None] * np.ones(self.phi.size) if m == 0 else self.amplitudes[m]

    def at(self, m, y, derivative=False):
        tab = self.derivatives[m] if derivative else self.amplitudes[m]
        return self.grid.interp(tab, y)


class PiecewiseParametrix:
    """Assembled ansatz with its per-order records; built by :func:`assemble_parametrix`."""

    def __init__(self, profile, perturbation, lam, omega, N, rt, plane, branches, middle,
                 corrections, jumps, matching, delta_ant):
        self.profile = profile
        self.perturbation = perturbation
        self.lam = lam
        self.omega = omega
        self.N = N
        self.rt = rt
        self.plane = plane
        self.branches = branches
        self.middle = middle
        self.corrections = corrections
        self.jumps = jumps
        self.matching = matching
        self.delta_ant = delta_ant

    @property
    def orders(self):
        J = self.perturbation.J
        return list(range(J - 1, J + self.N - 1)) if self.N > 0 else []

    @property
    def top_order(self):
        return max(self.orders, default=0)

    def excluded_disks(self):
        return [{"branch": b.name, "center": b.disk.tolist(), "radius": self.delta_ant}
                for b in self.branches.values() if b.disk is not None]

    def amplitude(self, branch, m):
        if branch == MIDDLE:
            return SphericalAmplitude(MIDDLE, m, self.middle.amplitudes[m], None, "exp(i lam x.w_bar / c_+)")
        b = self.branches[branch]
        return SphericalAmplitude(branch, m, b.amplitudes[m], None, _carrier_tag(b), b.grid)

    # -- errors ----------------------------------------------------------

    def error_grid(self, branch, k, upto=None):
        b = self.branches[branch]
        upto = self.top_order if upto is None else upto
        return _branch_error(b, self.perturbation, self.lam, k, upto)

    def residual_coefficients(self, branch):
        """All nonzero error coefficients {k: grid} of the truncated ansatz on a branch."""
        b = self.branches[branch]
        jmax = self.perturbation.max_order
        kmax = self.top_order + 2 + 2 * jmax
        out = {}
        for k in range(1, kmax + 1):
            E = _branch_error(b, self.perturbation, self.lam, k, self.top_order)
            if np.any(E):
                out[k] = E
        return out

    # -- evaluation ------------------------------------------------------

    def evaluate(self, z):
        """Ansatz values at points z (rows); NaN inside excluded disks and at x = 0 in the slab."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        y = z[:, -1]
        r = np.linalg.norm(z, axis=1)
        theta = z / r[:, None]
        out = np.full(len(z), np.nan, dtype=complex)
        yM = self.profile.y_M
        top, bot = y > yM, y < -yM
        mid = ~(top | bot)
        if np.any(top):
            out[top] = self._outer(z[top], theta[top], r[top], (INCIDENT, REFLECTED))
        if np.any(bot):
            if TRANSMITTED in self.branches:
                out[bot] = self._outer(z[bot], theta[bot], r[bot], (TRANSMITTED,))
            else:
                out[bot] = self._inner(z[bot])
        if np.any(mid):
            out[mid] = self._inner(z[mid])
        return out

    def _outer(self, z, theta, r, names):
        total = np.zeros(len(z), dtype=complex)
        for name in names:
            b = self.branches[name]
            ok = b.covers(theta)
            val = np.full(len(z), np.nan, dtype=complex)
            if np.any(ok):
                series = np.full(ok.sum(), b.base, dtype=complex)
                for m, tab in b.amplitudes.items():
                    series += r[ok] ** (-m) * b.grid.interpolate_directions(tab, theta[ok])
                val[ok] = np.exp(1j * self.lam * (z[ok] @ b.carrier) / b.c_b) * series
            total += val
        return total

    def _inner(self, z):
        x, y = z[:, :-1], z[:, -1]
        rho = np.linalg.norm(x, axis=1)
        phi = np.arctan2(x[:, 1], x[:, 0]) % (2 * np.pi)
        series = self.plane(y).astype(complex)
        inside = np.abs(y) <= self.profile.y_M
        lo = self.middle.grid.breakpoints[0]
        for m in self.orders:
            rows = np.zeros((len(z), self.middle.phi.size), dtype=complex)
            ing = y >= lo
            if np.any(ing):
                rows[ing] = self.middle.at(m, y[ing])
            if m in self.corrections and np.any(inside):
                rows[inside] += self.corrections[m].evaluate(y[inside])
            with np.errstate(divide="ignore", invalid="ignore"):
                series += rho ** (-float(m)) * _trig_interp(rows, phi)
        vals = np.exp(1j * self.lam * (x @ self.omega[:-1]) / self.profile.c_plus) * series
        vals[rho == 0] = np.nan
        return vals


def _carrier_tag(b):
    w = ", ".join(f"{v:.6g}" for v in b.carrier)
    return f"exp(i lam z.({w}) / {b.c_b:.6g})"


def _branch_error(b, pert, lam, k, upto):
    dirs = b.grid.directions()
    K = max(k, 1)
    gam = {j: pert.gamma(j, dirs, side=b.side) for j in pert.orders if j <= K}
    g = g_series(gam, b.c_b, K)
    S = b.grid.mesh()[0]
    return error_from_fields(k, b.fields(upto), g, S, lam, b.c_b, n=pert.n)


def error_coefficients(parametrix, branch, order, upto=None):
    """E_order on the branch grid from the stored amplitudes of order <= ``upto``.

    ``upto`` defaults to order - 1, i.e. the coefficient left after the ansatz
    has been corrected through the amplitude that is meant to remove it.
    """
    upto = order - 1 if upto is None else upto
    b = parametrix.branches[branch]
    vals = _branch_error(b, parametrix.perturbation, parametrix.lam, order, upto)
    return ErrorCoefficient(branch, order, vals, b.grid)


def _equator_dirs(phi):
    return np.stack([np.cos(phi), np.sin(phi), np.zeros_like(phi)], axis=-1)


def _validate_direction(profile, omega, delta):
    wn = float(omega[-1])
    if wn <= 0:
        raise ConfigInvalid("incidence from above (omega_n > 0) required")
    if wn < delta:
        raise EquatorialInput("omega_n inside the equatorial band")
    if profile.c_minus > profile.c_plus and abs(wn - profile.critical_omega_n()) < delta:
        raise EquatorialInput("omega_n inside the critical band")


def _middle_source(mid, m, pert, lam, kx, kperp):
    """E_rest,m: everything in the order-m slab error except L b_M,m."""
    J = pert.J
    c2 = (mid.c0**2)[:, None]
    G = mid.G
    E = np.zeros((mid.grid.size, mid.phi.size), dtype=complex)

    def A(l):  # a b_l - b_l''
        return (lam**2 * mid.value(l) - (mid.sources.get(l, 0.0))) / c2

    def T(l):  # x-transport part of the operator on r^-l b_l
        if l == 0:
            return np.zeros_like(E)
        b = mid.value(l)
        return -2j * (-l * kx * b + kperp * _d_phi(b))

    def Kc(l):
        if l == 0:
            return np.zeros_like(E)
        b = mid.value(l)
        return -(l * l * b + _d_phi(b, 2))

    def known(l):
        return l == 0 or l in mid.amplitudes

    for j in range(J, m + 1):
        if j in G and known(m - j):
            E += G[j] * A(m - j)
    if m - 1 >= 1 and known(m - 1):
        E += c2 * T(m - 1)
    for j in range(J, m):
        if j in G and m - 1 - j >= 1 and known(m - 1 - j):
            E += G[j] * T(m - 1 - j)
    if m - 2 >= 1 and known(m - 2):
        E += c2 * Kc(m - 2)
    for j in range(J, m - 1):
        if j in G and m - 2 - j >= 1 and known(m - 2 - j):
            E += G[j] * Kc(m - 2 - j)
    return E


def assemble_parametrix(profile, perturbation, lam, omega, N=2, n_s=128, n_theta=64, n_phi=64,
                        n_y=32, delta_ant=DELTA_ANT, delta=geometry.DELTA_BAND, n_max=N_MAX):
    """Run the order loop m = J-1, ..., J+N-2 and return the assembled ansatz.

    Each step: error extraction on the I/R/T grids, incident transport,
    middle Robin solve (or the evanescent lower solve), matching at the
    equator, offset transports for R and T, and the C^1 corrections at
    y = +-y_M.
    """
    if N < 0 or N > n_max:
        raise ConfigInvalid(f"truncation N must lie in [0, {n_max}]")
    omega = geometry.normalize(omega)
    _validate_direction(profile, omega, delta)
    wn = float(omega[-1])
    wbar = omega[:-1]
    wb = float(np.linalg.norm(wbar))
    cp, cm = profile.c_plus, profile.c_minus
    rt, plane = spectral1d.solve_phi_plus(profile, lam, wn)
    evanescent = rt.regime == spectral1d.EVANESCENT
    q_plus, q_minus = rt.q_plus.real, rt.q_minus

    # outer branch grids
    s_top = min(0.5 * np.pi + np.arccos(wn) + MARGIN, np.pi - delta_ant)
    branches = {INCIDENT: Branch(INCIDENT, GeodesicGrid(omega, (0.0, s_top), n_s, n_theta), cp, 1.0, "upper",
                                 disk=-omega)}
    w_star = np.concatenate([wbar, [-wn]])
    fr = geometry.GeodesicFrame(w_star)
    s0 = fr.crossing(2 * np.pi * np.arange(n_theta) / n_theta)
    gR = GeodesicGrid(w_star, (max(s0.min() - MARGIN, 1e-3), np.pi - delta_ant), n_s, n_theta)
    branches[REFLECTED] = Branch(REFLECTED, gR, cp, rt.R, "upper", s0=s0, disk=-w_star)
    if not evanescent:
        w_T = geometry.transmitted_carrier(omega, profile)
        frT = geometry.GeodesicFrame(w_T)
        sT = frT.crossing(2 * np.pi * np.arange(n_theta) / n_theta)
        gT = GeodesicGrid(w_T, (max(sT.min() - MARGIN, 1e-3), np.pi - delta_ant), n_s, n_theta)
        branches[TRANSMITTED] = Branch(TRANSMITTED, gT, cm, rt.T, "lower", s0=sT, disk=-w_T)
    for b in branches.values():
        if b.s0 is not None:
            p0 = b.grid.frame.point(b.s0, b.grid.theta)
            b.phi0 = np.arctan2(p0[:, 1], p0[:, 0]) % (2 * np.pi)

    # middle slab
    if evanescent:
        ygrid = slab.lower_grid(profile, lam, wb, n=n_y)
    else:
        ygrid = slab.slab_grid(profile, n_y)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    c0 = ode.sample_speed(profile, ygrid)
    mids = np.array([0.5 * (ygrid.breakpoints[k] + ygrid.breakpoints[k + 1]) for k in range(len(ygrid.sizes))])
    upper = (mids > 0)[ygrid.segment]
    mid = MiddleSlab(ygrid, phi, c0, upper, plane(ygrid.nodes), evanescent=evanescent)
    eq = _equator_dirs(phi)
    K = perturbation.max_order + 2 * N + 2
    p = np.zeros((K + 1, ygrid.size, n_phi))
    for j in perturbation.orders:
        if j <= K:
            p[j] = np.where(upper[:, None], perturbation.gamma(j, eq, side="upper")[None, :],
                            perturbation.gamma(j, eq, side="lower")[None, :])
    Gs = 2.0 * c0[None, :, None] * p + _self_product(p, K)
    mid.G = {j: Gs[j] for j in range(1, K + 1) if np.any(Gs[j])}
    kx = lam / cp * (wbar[0] * np.cos(phi) + wbar[1] * np.sin(phi))
    kperp = lam / cp * (-wbar[0] * np.sin(phi) + wbar[1] * np.cos(phi))

    J = perturbation.J
    corrections, jumps, matching = {}, {}, {}
    yM = profile.y_M
    ep = np.exp(1j * q_plus * yM)
    for m in range(J - 1, J + N - 1):
        # incident amplitude of order m
        bI = branches[INCIDENT]
        EI = _branch_error(bI, perturbation, lam, m + 1, m - 1)
        bI.amplitudes[m] = transport_incident_values(bI.grid, EI, lam, cp, m)
        bI_eq = bI.grid.interpolate_directions(bI.amplitudes[m], eq)

        # middle slab of order m
        Erest = _middle_source(mid, m, perturbation, lam, kx, kperp)
        alpha1 = -2j * q_plus * ep * bI_eq
        if evanescent:
            sol = slab.evanescent_lower_solve(profile, lam, wb, -Erest, alpha1, grid=ygrid)
        else:
            sol = slab.middle_bvp_solve(profile, lam, wb, -Erest, alpha1, 0.0, grid=ygrid)
        mid.amplitudes[m] = sol.values
        mid.derivatives[m] = sol.derivative
        mid.sources[m] = Erest
        top_v = ygrid.interp(sol.values, [yM])[0]
        top_d = ygrid.interp(sol.derivative, [yM])[0]
        bot_v = ygrid.interp(sol.values, [-yM])[0]
        bot_d = ygrid.interp(sol.derivative, [-yM])[0]
        mc = slab.match_layers(m, bI_eq, top_v, None if evanescent else bot_v, q_plus, q_minus, yM)

        # offset transports of the R and T branches
        for name, rho in ((REFLECTED, mc.rho_R), (TRANSMITTED, mc.rho_T)):
            if name not in branches:
                continue
            b = branches[name]
            E = _branch_error(b, perturbation, lam, m + 1, m - 1)
            rho_c = _trig_interp(np.tile(rho, (n_theta, 1)), b.phi0)
            C = slab.offset_constant(rho_c, b.s0, lam, b.c_b, m)
            b.amplitudes[m] = transport_offset_values(b.grid, E, lam, b.c_b, m, b.s0, C)
            if name == REFLECTED:
                mc.C_R = C
            else:
                mc.C_T = C
        matching[m] = mc

        # C^1 corrections at y = +-y_M
        bR_eq = branches[REFLECTED].grid.interpolate_directions(branches[REFLECTED].amplitudes[m], eq)
        outer_top = (ep * bI_eq + bR_eq / ep, 1j * q_plus * (ep * bI_eq - bR_eq / ep))
        if evanescent:
            outer_bot = (bot_v, bot_d)
        else:
            bT = branches[TRANSMITTED]
            bT_eq = bT.grid.interpolate_directions(bT.amplitudes[m], eq)
            em = np.exp(-1j * q_minus * yM)
            outer_bot = (em * bT_eq, 1j * q_minus * em * bT_eq)
        corr = slab.c1_correction(yM, outer_top, (top_v, top_d), outer_bot, (bot_v, bot_d))
        corrections[m] = corr
        jumps[m] = _jump_report(corr, outer_top, (top_v, top_d), outer_bot, (bot_v, bot_d), yM)

    return PiecewiseParametrix(profile, perturbation, lam, omega, N, rt, plane, branches, mid,
                               corrections, jumps, matching, delta_ant)


def _self_product(p, K):
    out = np.zeros_like(p)
    for i in range(1, K + 1):
        if not np.any(p[i]):
            continue
        for j in range(1, K + 1 - i):
            out[i + j] += p[i] * p[j]
    return out


def _jump_report(corr, outer_top, inner_top, outer_bot, inner_bot, yM):
    """Value and derivative jumps at +-y_M before and after adding the corrector."""
    up = corr.evaluate([yM])[0], corr.evaluate([yM], derivative=True)[0]
    lo = corr.evaluate([-yM])[0], corr.evaluate([-yM], derivative=True)[0]
    scale = max(np.max(np.abs(outer_top[0])), np.max(np.abs(inner_top[0])), 1e-300)
    pre = max(np.max(np.abs(corr.beta_U)), np.max(np.abs(corr.gamma_U)),
              np.max(np.abs(corr.beta_L)), np.max(np.abs(corr.gamma_L)))
    post = max(np.max(np.abs(outer_top[0] - inner_top[0] - up[0])),
               np.max(np.abs(outer_top[1] - inner_top[1] - up[1])),
               np.max(np.abs(outer_bot[0] - inner_bot[0] - lo[0])),
               np.max(np.abs(outer_bot[1] - inner_bot[1] - lo[1])))
    return {"pre": float(pre), "post": float(post), "scale": float(scale)}


# ------------------------------------------------------------------ residual diagnostics


def default_directions(parametrix, n=24, seed=0, delta_eq=None):
    """Sample directions away from the equatorial band and the excluded disks, inside the branch grids."""
    rng = np.random.default_rng(seed)
    delta_eq = parametrix.perturbation.delta_eq if delta_eq is None else delta_eq
    out = []
    while len(out) < n:
        d = geometry.normalize(rng.normal(size=3))
        if abs(d[-1]) < np.sin(delta_eq) + 0.05:
            continue
        names = (INCIDENT, REFLECTED) if d[-1] > 0 else (TRANSMITTED,)
        if any(nm not in parametrix.branches for nm in names):
            continue
        ok = True
        for nm in names:
            b = parametrix.branches[nm]
            s, _ = b.grid.frame.coordinates(d)
            if not (b.grid.s_a + 0.02 <= s <= b.grid.s_b - 0.02):
                ok = False
        if ok:
            out.append(d)
    return np.array(out)


def residual_envelope(parametrix, radii, directions):
    """|(c^2 Delta - lam^2) ansatz| per (radius, direction) in the outer regions.

    The operator is applied exactly through the finite Laurent series of
    error coefficients (c^2 is polynomial in 1/|z| and the amplitudes are
    homogeneous), so no finite-difference cancellation enters.
    """
    radii = np.asarray(radii, dtype=float)
    directions = np.atleast_2d(directions)
    env = np.zeros((radii.size, len(directions)))
    for i, d in enumerate(directions):
        names = (INCIDENT, REFLECTED) if d[-1] > 0 else (TRANSMITTED,)
        for nm in names:
            if nm not in parametrix.branches:
                continue
            b = parametrix.branches[nm]
            coeffs = parametrix.residual_coefficients(nm) if not hasattr(b, "_res") else b._res
            b._res = coeffs
            total = np.zeros(radii.size, dtype=complex)
            for k, E in coeffs.items():
                total += radii ** (-float(k)) * b.grid.interpolate_directions(E, d[None, :])[0]
            env[:, i] += np.abs(total)
    return env


def residual_decay_check(parametrix, radii=None, directions=None, floor=1e-300):
    """Fitted slope of log|residual| against log r, per region.

    Returns a dict per region ("upper", "lower") with ``slope`` (median over
    directions), ``band`` (min, max over directions) and ``status`` ("fit" or
    "floor" when the residual vanishes identically).
    """
    radii = np.logspace(2, 4, 9) if radii is None else np.asarray(radii, dtype=float)
    if directions is None:
        directions = default_directions(parametrix)
    directions = np.atleast_2d(directions)
    env = residual_envelope(parametrix, radii, directions)
    out = {}
    for region, mask in (("upper", directions[:, -1] > 0), ("lower", directions[:, -1] < 0)):
        if not np.any(mask):
            continue
        e = env[:, mask]
        if np.all(e <= floor):
            out[region] = {"slope": None, "band": None, "status": "floor", "max": float(e.max())}
            continue
        slopes = []
        for col in e.T:
            if np.all(col > floor):
                slopes.append(np.polyfit(np.log(radii), np.log(col), 1)[0])
        slopes = np.array(slopes)
        out[region] = {"slope": float(np.median(slopes)), "band": (float(slopes.min()), float(slopes.max())),
                       "status": "fit", "max": float(e.max())}
    return out
