"""Vertical boundary-value problems of the parametrix inside and below the layers.

All solves act on  c0^2 (a + D_y^2) b - lam^2 b = f  with a = lam^2 |w|^2 / c_+^2,
written as b'' - (a - lam^2 / c0^2) b = -f / c0^2 and discretized by the
piecewise collocation of :mod:`stratscat.ode`. Several right-hand sides (one per
horizontal direction) share one factorization.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import ode
from ..errors import NonOrthogonalSource, SingularBoundarySystem

DET_TOL = 1e-12


def _wavenumbers(profile, lam, omega_bar_norm):
    cp, cm = profile.c_plus, profile.c_minus
    a = lam**2 * omega_bar_norm**2 / cp**2
    wn = np.sqrt(max(0.0, 1.0 - omega_bar_norm**2))
    q_plus = lam * wn / cp
    qm2 = lam**2 * (1.0 / cm**2 - omega_bar_norm**2 / cp**2)
    return a, q_plus, qm2


def slab_grid(profile, n=32, extra=(0.0,), lower=None):
    """Collocation grid over the layers; y = 0 is a breakpoint so hemisphere jumps stay sharp."""
    pts = [e for e in extra if -profile.y_M < e < profile.y_M]
    return ode.profile_grid(profile, n, lower=lower, extra_points=pts)


@dataclass
class SlabSolution:
    grid: object
    values: np.ndarray
    derivative: np.ndarray
    determinant: float = np.nan
    P: np.ndarray = field(default=None, repr=False)

    def at(self, y):
        return self.grid.interp(self.values, y)

    def end_values(self):
        """(b(-y_M), b'(-y_M)) and (b(y_M), b'(y_M)) from the outermost nodes."""
        return (self.values[0], self.derivative[0]), (self.values[-1], self.derivative[-1])


def _boundary_determinant(profile, a, lam, q_top, q_bot):
    """Normalized top Robin functional applied to the bottom-admissible solution."""
    start = np.array([1.0, 1j * q_bot], dtype=complex)
    u, du = ode.propagate(profile, a, lam**2, start, -profile.y_M, profile.y_M)
    D = -1j * q_top * u - du
    scale = abs(q_top) * abs(u) + abs(du)
    return abs(D) / max(scale, 1e-300)


def middle_bvp_solve(profile, lam, omega_bar, f, alpha1, alpha2=0.0, grid=None, n=32):
    """Solve the slab problem with the radiation conditions

        -i q_+ b(y_M) - b'(y_M) = alpha1,   b'(-y_M) - i q_- b(-y_M) = alpha2,

    q_+ = lam omega_n / c_+, q_- = lam sqrt(1/c_-^2 - |w|^2/c_+^2).

    Parameters
    ----------
    omega_bar : array_like or float
        Horizontal part of the incident direction (or its norm).
    f : array_like or callable
        Source sampled on ``grid.nodes`` (optionally with trailing columns), or a
        function of y.
    """
    wb = float(np.linalg.norm(np.atleast_1d(omega_bar)))
    a, q_plus, qm2 = _wavenumbers(profile, lam, wb)
    if qm2 < 0:
        raise SingularBoundarySystem("lower side is evanescent; use evanescent_lower_solve")
    q_minus = np.sign(lam) * np.sqrt(qm2)
    det = _boundary_determinant(profile, a, lam, q_plus, q_minus)
    if det < DET_TOL:
        raise SingularBoundarySystem(f"boundary determinant {det:.3e} below {DET_TOL}")
    grid = slab_grid(profile, n) if grid is None else grid
    c = ode.sample_speed(profile, grid)
    P = a - lam**2 / c**2
    F = f(grid.nodes) if callable(f) else np.asarray(f)
    src = -F / (c**2).reshape((-1,) + (1,) * (F.ndim - 1))
    b, _ = ode.solve_bvp(grid, P, src, left=(-1j * q_minus, 1.0), right=(-1j * q_plus, -1.0),
                         left_rhs=alpha2, right_rhs=alpha1)
    return SlabSolution(grid, b, grid.diff(b), det, P)


def evanescent_lower_solve(profile, lam, omega_bar, d, alpha1, n=32, depth=30.0, grid=None):
    """Solve on (-inf, y_M] with decay below and the upper radiation condition.

    The half-line is truncated at -y_M - depth / p with the exact decaying Robin
    condition b' = p b, p = |lam| sqrt(|w|^2 / c_+^2 - 1 / c_-^2).
    """
    wb = float(np.linalg.norm(np.atleast_1d(omega_bar)))
    a, q_plus, qm2 = _wavenumbers(profile, lam, wb)
    if qm2 >= 0:
        raise SingularBoundarySystem("lower side propagates; use middle_bvp_solve")
    p = np.sqrt(-qm2)
    if grid is None:
        grid = lower_grid(profile, lam, wb, n=n, depth=depth)
    c = ode.sample_speed(profile, grid)
    P = a - lam**2 / c**2
    F = d(grid.nodes) if callable(d) else np.asarray(d)
    src = -F / (c**2).reshape((-1,) + (1,) * (F.ndim - 1))
    b, _ = ode.solve_bvp(grid, P, src, left=(-p, 1.0), right=(-1j * q_plus, -1.0),
                         left_rhs=0.0, right_rhs=alpha1)
    return SlabSolution(grid, b, grid.diff(b), np.nan, P)


def lower_grid(profile, lam, omega_bar_norm, n=32, depth=30.0):
    _, _, qm2 = _wavenumbers(profile, lam, omega_bar_norm)
    p = np.sqrt(abs(qm2))
    bottom = -profile.y_M - depth / p
    # split the tail so each segment spans a few decay lengths
    k = max(2, int(np.ceil(depth / 6.0)))
    tail = list(np.linspace(bottom, -profile.y_M, k + 1)[:-1])
    return slab_grid(profile, n, extra=(0.0,) + tuple(tail), lower=bottom)


def bvp_residual(sol, profile, lam, omega_bar, f):
    """Max collocation residual of the ODE at interior nodes, relative to the source scale."""
    grid = sol.grid
    c = ode.sample_speed(profile, grid)
    F = f(grid.nodes) if callable(f) else np.asarray(f)
    b = sol.values
    lhs = c.reshape((-1,) + (1,) * (b.ndim - 1)) ** 2 * (-grid.diff(grid.diff(b))) + \
        (c**2 * (lam**2 * float(np.linalg.norm(np.atleast_1d(omega_bar))) ** 2 / profile.c_plus**2) - lam**2).reshape((-1,) + (1,) * (b.ndim - 1)) * b
    interior = np.ones(grid.size, dtype=bool)
    for sl in grid.slices():
        interior[sl.start] = interior[sl.stop - 1] = False
    res = np.abs(lhs - F)[interior]
    scale = max(np.abs(F).max(), np.abs(lhs).max(), 1e-300)
    return float(res.max() / scale)


# ------------------------------------------------------------------ matching


@dataclass
class MatchingConstants:
    order: int
    rho_R: np.ndarray  # reflected amplitude on the equator, per equatorial azimuth
    rho_T: np.ndarray  # transmitted amplitude on the equator
    C_R: np.ndarray = None  # per theta_tilde of the reflected grid
    C_T: np.ndarray = None


def match_layers(m, b_I_eq, top, bottom, q_plus, q_minus, y_M):
    """Equatorial branch amplitudes implied by the middle solution at order m.

    ``top`` = b_M(y_M), ``bottom`` = b_M(-y_M) per azimuth. The reflected
    amplitude on the equator is (b_M(y_M) - e^{i q_+ y_M} b_I) e^{i q_+ y_M}; the
    transmitted one is b_M(-y_M) e^{i q_- y_M}.
    """
    ep = np.exp(1j * q_plus * y_M)
    rho_R = (np.asarray(top) - ep * np.asarray(b_I_eq)) * ep
    rho_T = np.asarray(bottom) * np.exp(1j * q_minus * y_M) if bottom is not None else None
    return MatchingConstants(order=m, rho_R=rho_R, rho_T=rho_T)


def offset_constant(rho, s0, lam, c, m):
    """C with i C / (2 lam c sin^m s0) = rho, the transport initial data at the crossing."""
    return rho * 2.0 * lam * c * np.sin(s0) ** m / 1j


def matching_residuals(m, b_I_eq, sol_top, sol_bottom, b_R_eq, b_T_eq, q_plus, q_minus, y_M):
    """The four continuity equations at y = +-y_M (value and derivative), as residual arrays."""
    ep, em = np.exp(1j * q_plus * y_M), np.exp(-1j * q_plus * y_M)
    (vt, dt), (vb, db) = sol_top, sol_bottom
    r1 = ep * b_I_eq + em * b_R_eq - vt
    r2 = 1j * q_plus * (ep * b_I_eq - em * b_R_eq) - dt
    out = [r1, r2]
    if b_T_eq is not None:
        et = np.exp(-1j * q_minus * y_M)
        out += [et * b_T_eq - vb, 1j * q_minus * et * b_T_eq - db]
    return out


# ------------------------------------------------------------------ C^1 correction


def _psi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def cutoff(t):
    """Smooth chi with chi = 1 on |t| <= 1 and chi = 0 on |t| >= 2."""
    a = np.abs(np.asarray(t, dtype=float))
    num = _psi(2.0 - a)
    return num / (num + _psi(a - 1.0))


@dataclass
class C1Correction:
    y_M: float
    beta_U: np.ndarray
    gamma_U: np.ndarray
    beta_L: np.ndarray
    gamma_L: np.ndarray

    def evaluate(self, y, derivative=False):
        """Corrector inside the layers: chi(3(y - y_M)/y_M)[beta_U + (y - y_M) gamma_U] + lower analogue.

        The lower term is centred at -y_M (with (y + y_M) gamma_L). Rows follow
        ``y``; columns follow the angular samples of the jumps.
        """
        y = np.atleast_1d(np.asarray(y, dtype=float))[:, None]
        yM = self.y_M
        tu = 3.0 * (y - yM) / yM
        tl = 3.0 * (y + yM) / yM
        inside = np.abs(y) <= yM
        cu, cl = cutoff(tu), cutoff(tl)
        if not derivative:
            val = cu * (self.beta_U + (y - yM) * self.gamma_U) + cl * (self.beta_L + (y + yM) * self.gamma_L)
            return np.where(inside, val, 0.0)
        h = 1e-6 * yM
        dcu = (cutoff(tu + 3 * h / yM) - cutoff(tu - 3 * h / yM)) / (2 * h)
        dcl = (cutoff(tl + 3 * h / yM) - cutoff(tl - 3 * h / yM)) / (2 * h)
        der = dcu * (self.beta_U + (y - yM) * self.gamma_U) + cu * self.gamma_U + \
            dcl * (self.beta_L + (y + yM) * self.gamma_L) + cl * self.gamma_L
        return np.where(inside, der, 0.0)


def c1_correction(y_M, outer_top, inner_top, outer_bottom, inner_bottom):
    """Jumps (outer minus inner one-sided values and y-derivatives) and their corrector.

    Each argument is a pair (value, derivative) of arrays over angular samples.
    """
    (vo, do), (vi, di) = outer_top, inner_top
    (wo, eo), (wi, ei) = outer_bottom, inner_bottom
    return C1Correction(y_M, np.asarray(vo) - vi, np.asarray(do) - di, np.asarray(wo) - wi, np.asarray(eo) - ei)


# ------------------------------------------------------------------ mode channels


def _weighted_inner(spectrum, u, f):
    cs = ode.sample_speed(spectrum.profile, spectrum.grid)
    return np.tensordot(spectrum.grid.weights / cs**2 * f, u, axes=(0, 0))


def mode_channel_decompose(d, spectrum, j):
    """d = d_perp + coeff * f_j with d_perp orthogonal to f_j in L^2(c0^-2 dy).

    ``d`` is sampled on ``spectrum.grid.nodes`` (rows), optionally with angular
    columns; it is taken to vanish beyond the grid.
    """
    d = np.asarray(d)
    f = spectrum.modes[j]
    cs = ode.sample_speed(spectrum.profile, spectrum.grid)
    fn2 = float(np.sum(spectrum.grid.weights * f * f / cs**2))
    coeff = _weighted_inner(spectrum, d, f) / fn2
    shape = (-1,) + (1,) * (d.ndim - 1)
    return d - f.reshape(shape) * coeff, coeff


def mode_channel_solve(profile, lam, kappa, d_perp, spectrum, j, tol=1e-8):
    """Solve (c0^2 (D_y^2 + kappa^2) - lam^2) g = d_perp, lam^2 the j-th eigenvalue at kappa.

    The operator annihilates f_j; the solution is fixed by orthogonality to f_j
    in L^2(c0^-2 dy) (bordered collocation). Beyond the grid g continues with
    the decaying exponentials.
    """
    grid = spectrum.grid
    d = np.asarray(d_perp, dtype=complex)
    f = spectrum.modes[j]
    cs = ode.sample_speed(profile, grid)
    proj = _weighted_inner(spectrum, d, f)
    size = np.sqrt(np.max(np.abs(_weighted_inner(spectrum, np.abs(d) ** 2, np.ones_like(f)))))
    if np.max(np.abs(proj)) > tol * max(1.0, float(size)):
        raise NonOrthogonalSource(f"source has weighted projection {np.max(np.abs(proj)):.3e} on mode {j}")
    pm = np.sqrt(max(kappa**2 - lam**2 / profile.c_minus**2, 0.0))
    pp = np.sqrt(max(kappa**2 - lam**2 / profile.c_plus**2, 0.0))
    P = kappa**2 - lam**2 / cs**2
    shape = (-1,) + (1,) * (d.ndim - 1)
    src = -d / (cs**2).reshape(shape)
    w = grid.weights * f / cs**2
    g, _ = ode.solve_bvp(grid, P, src, left=(-pm, 1.0), right=(pp, 1.0), border=(f / cs**2, w))
    return g
