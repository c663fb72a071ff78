"""One-dimensional reduced problems of a stratified medium.

Everything here integrates u'' = (a - b / c0(y)^2) u through the layers:

* generalized plane waves ``phi_+`` (a = lam^2 (1 - omega_n^2) / c_+^2, b = lam^2),
  with their reflection/transmission coefficients;
* guided modes of ``c0^2 (kappa^2 + D_y^2)`` (a = kappa^2, b = mu), located by a
  Pruefer-phase count so no eigenvalue is missed;
* thresholds and the inverse dispersion map lambda -> kappa_j(lambda).

Convention: D_y = -i d/dy, so D_y^2 = -d^2/dy^2.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import ode
from .errors import BelowThreshold, ConfigInvalid, CriticalAngle, NonzeroLambdaRequired

DELTA_CRIT = 1e-3
PROPAGATING = "propagating"
EVANESCENT = "evanescent"


@dataclass(frozen=True)
class RTCoefficients:
    R: complex
    T: complex
    omega_n: float
    lam: float
    regime: str
    q_plus: complex
    q_minus: complex


@dataclass
class PlaneWaveSolution:
    """phi(y) = e^{i q+ y} + R e^{-i q+ y} above the layers, T e^{i q- y} below."""

    profile: object
    coeffs: RTCoefficients
    a: float
    b: float
    y: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    mirrored: bool = False

    def __call__(self, y, derivative=False):
        y = np.asarray(y, dtype=float)
        if self.mirrored:
            v, d = _evaluate_plane(self.profile, self.coeffs, self.a, self.b, -y)
            return -d if derivative else v
        v, d = _evaluate_plane(self.profile, self.coeffs, self.a, self.b, y)
        return d if derivative else v

    def wronskian(self):
        """phi conj(phi)' - phi' conj(phi) on the stored grid (constant for real profiles)."""
        return self.phi * np.conj(self.dphi) - self.dphi * np.conj(self.phi)

    def wronskian_variation(self):
        W = self.wronskian()
        scale = np.max(np.abs(self.phi) * np.abs(self.dphi))
        return float(np.max(np.abs(W - W[len(W) // 2])) / max(scale, 1e-300))


def _scatter(profile, a, b, q_top, q_bot):
    """R, T for e^{i q_top y} + R e^{-i q_top y} (top) and T e^{i q_bot y} (bottom)."""
    yM = profile.y_M
    # propagate the bottom solution normalized to 1 at -y_M
    start = np.array([1.0, 1j * q_bot], dtype=complex)
    u, du = ode.propagate(profile, a, b, start, -yM, yM)
    ep, em = np.exp(1j * q_top * yM), np.exp(-1j * q_top * yM)
    # tau * (u, du) = (ep + R em, i q (ep - R em)); unknowns (tau, R)
    A = np.array([[u, -em], [du, 1j * q_top * em]])
    rhs = np.array([ep, 1j * q_top * ep])
    tau, R = np.linalg.solve(A, rhs)
    T = tau * np.exp(1j * q_bot * yM)  # T e^{-i q_bot y_M} = tau
    return complex(R), complex(T)


def _evaluate_plane(profile, rt, a, b, y):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    yM = profile.y_M
    qp, qm = rt.q_plus, rt.q_minus
    val = np.zeros(y.shape, dtype=complex)
    der = np.zeros(y.shape, dtype=complex)
    top = y > yM
    bot = y < -yM
    val[top] = np.exp(1j * qp * y[top]) + rt.R * np.exp(-1j * qp * y[top])
    der[top] = 1j * qp * (np.exp(1j * qp * y[top]) - rt.R * np.exp(-1j * qp * y[top]))
    val[bot] = rt.T * np.exp(1j * qm * y[bot])
    der[bot] = 1j * qm * val[bot]
    mid = ~(top | bot)
    if np.any(mid):
        order = np.argsort(y[mid])
        ys = y[mid][order]
        start = rt.T * np.exp(-1j * qm * yM) * np.array([1.0, 1j * qm])
        _, states = ode.propagate(profile, a, b, start, -yM, yM, record=ys)
        v = np.empty(ys.size, dtype=complex)
        d = np.empty(ys.size, dtype=complex)
        v[order] = states[:, 0]
        d[order] = states[:, 1]
        val[mid] = v
        der[mid] = d
    return val, der


def _check_lambda(lam):
    if lam == 0:
        raise NonzeroLambdaRequired("lambda must be nonzero")


def solve_phi_plus(profile, lam, omega_n, delta_crit=DELTA_CRIT, y_max=None, n_grid=401, check_critical=True):
    """Plane wave incident from above with vertical direction cosine ``omega_n`` in (0, 1].

    Solves -phi'' = (lam^2 / c0^2 - lam^2 (1 - omega_n^2) / c_+^2) phi. Below the
    layers the transmitted factor is exp(i q_- y) with q_-^2 = lam^2 (1/c_-^2 -
    (1 - omega_n^2)/c_+^2); when q_-^2 < 0 the root is taken so that it decays as
    y -> -infinity.

    Returns
    -------
    RTCoefficients, PlaneWaveSolution
    """
    _check_lambda(lam)
    if not 0.0 < omega_n <= 1.0:
        raise ConfigInvalid("omega_n must lie in (0, 1]")
    cp, cm = profile.c_plus, profile.c_minus
    if omega_n < delta_crit:
        raise CriticalAngle("omega_n inside the grazing band")
    if check_critical and cm > cp:
        crit = np.sqrt(1.0 - cp**2 / cm**2)
        if abs(omega_n - crit) <= delta_crit:
            raise CriticalAngle(f"omega_n within {delta_crit} of the critical value {crit:.6g}")
    a = lam**2 * (1.0 - omega_n**2) / cp**2
    b = lam**2
    q_plus = lam * omega_n / cp
    qm2 = lam**2 * (1.0 / cm**2 - (1.0 - omega_n**2) / cp**2)
    if qm2 >= 0:
        q_minus = np.sign(lam) * np.sqrt(qm2) + 0j
        regime = PROPAGATING
    else:
        q_minus = -1j * np.sqrt(-qm2)
        regime = EVANESCENT
    R, T = _scatter(profile, a, b, q_plus, q_minus)
    rt = RTCoefficients(R=R, T=T, omega_n=float(omega_n), lam=float(lam), regime=regime,
                        q_plus=complex(q_plus), q_minus=complex(q_minus))
    y_max = 2.0 * profile.y_M if y_max is None else y_max
    y = np.linspace(-y_max, y_max, n_grid)
    phi, dphi = _evaluate_plane(profile, rt, a, b, y)
    return rt, PlaneWaveSolution(profile, rt, a, b, y, phi, dphi)


def solve_phi_minus(profile, lam, omega_n, delta_crit=DELTA_CRIT, y_max=None, n_grid=401):
    """Plane wave incident from below; ``omega_n`` may be given with either sign.

    Computed as ``solve_phi_plus`` of the mirrored profile c0(-y), so R and T
    refer to the mirrored picture: phi_-(y) = phi_mirror(-y).
    """
    mirror = profile.mirrored()
    rt, sol = solve_phi_plus(mirror, lam, abs(omega_n), delta_crit=delta_crit, y_max=y_max,
                             n_grid=n_grid, check_critical=mirror.c_minus > mirror.c_plus)
    sol.mirrored = True
    sol.y = -sol.y[::-1]
    sol.phi = sol.phi[::-1]
    sol.dphi = -sol.dphi[::-1]
    return rt, sol


def reflection_of_k(profile, lam, k):
    """R(k) for the Schroedinger form -u'' + q u = k^2 u, q = -lam^2 (1/c0^2 - 1/c_+^2).

    Only meaningful when c_+ = c_-; vectorized over an array of k (k = 0 gives -1
    unless the potential vanishes, and is returned as the limit from k > 0 is not
    attempted: callers should avoid k = 0).
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    out = np.empty(k.shape, dtype=complex)
    for i, kk in enumerate(k):
        a = lam**2 / profile.c_plus**2 - kk**2
        R, _ = _scatter(profile, a, lam**2, abs(kk), abs(kk))
        out[i] = R if kk > 0 else np.conj(R)
    return out


# ------------------------------------------------------------------ guided modes


@dataclass
class ModeSpectrum:
    kappa: float
    eigenvalues: np.ndarray
    grid: object = None
    modes: np.ndarray = None  # (n_modes, grid.size), normalized in L^2(c0^-2 dy)
    decay: np.ndarray = None  # (n_modes, 2): rates below and above the layers
    thresholds: list = field(default_factory=list)
    profile: object = None

    @property
    def count(self):
        return len(self.eigenvalues)

    def evaluate(self, j, y):
        """Mode j (0-based) at arbitrary y, with exact exponential tails beyond the grid."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        f = self.modes[j]
        lo, hi = self.grid.breakpoints[0], self.grid.breakpoints[-1]
        out = np.empty(y.shape)
        top, bot = y > hi, y < lo
        mid = ~(top | bot)
        out[top] = f[-1] * np.exp(-self.decay[j, 1] * (y[top] - hi))
        out[bot] = f[0] * np.exp(self.decay[j, 0] * (y[bot] - lo))
        if np.any(mid):
            out[mid] = self.grid.interp(f, y[mid]).real
        return out

    def uniform_grid(self, n=801):
        """Samples on [-y_max, y_max] with y_max = y_M + 15 / (smallest decay rate)."""
        rate = np.min(self.decay) if self.count else 1.0
        y_max = self.profile.y_M + 15.0 / rate
        y = np.linspace(-y_max, y_max, n)
        return y, np.array([self.evaluate(j, y) for j in range(self.count)])

    def gram(self, weighted=True):
        """Gram matrix of the mode functions including the analytic tails."""
        cs = ode.sample_speed(self.profile, self.grid)
        cp, cm = self.profile.c_plus, self.profile.c_minus
        wfun = 1.0 / cs**2 if weighted else np.ones_like(cs)
        wt = (1.0 / cm**2, 1.0 / cp**2) if weighted else (1.0, 1.0)
        F = self.modes
        G = (F * (self.grid.weights * wfun)) @ F.T
        lo = F[:, 0][:, None] * F[:, 0][None, :] / (self.decay[:, 0][:, None] + self.decay[:, 0][None, :])
        hi = F[:, -1][:, None] * F[:, -1][None, :] / (self.decay[:, 1][:, None] + self.decay[:, 1][None, :])
        return G + wt[0] * lo + wt[1] * hi


def _phase_gap(profile, kappa, mu):
    """Pruefer phase at y_M minus the decaying-branch target angle (continuous in mu, kappa)."""
    cp, cm = profile.c_plus, profile.c_minus
    a = kappa**2
    pm = np.sqrt(max(a - mu / cm**2, 0.0))
    pp = np.sqrt(max(a - mu / cp**2, 0.0))
    zeros, u = ode.count_zeros(profile, a, mu, np.array([1.0, pm]), -profile.y_M, profile.y_M)
    theta = zeros * np.pi + (np.arctan2(u[0], u[1]) % np.pi)
    theta_R = np.arctan2(1.0, -pp)
    return theta - theta_R


def mode_count(profile, kappa, mu):
    """Number of guided eigenvalues strictly below mu (Sturm oscillation count)."""
    g = _phase_gap(profile, kappa, mu)
    return 0 if g <= 0 else int(np.floor(g / np.pi)) + 1


def _mu_bracket(profile, kappa):
    lo = profile.c_m**2 * kappa**2
    hi = profile.c_plus**2 * kappa**2
    return lo, hi


def _refine(fun, lo, hi, target):
    """Root of fun(x) = target on a bracket where the count jumps; falls back to bisection ends."""
    flo, fhi = fun(lo) - target, fun(hi) - target
    if flo == 0:
        return lo
    if flo * fhi > 0:
        return 0.5 * (lo + hi)
    return brentq(lambda x: fun(x) - target, lo, hi, xtol=1e-15 * max(abs(hi), 1.0), rtol=1e-15, maxiter=200)


def eigenvalues(profile, kappa, rtol=1e-12):
    """Guided eigenvalues mu_j = lambda_j^2(kappa) below c_+^2 kappa^2, ascending."""
    if kappa <= 0:
        raise ConfigInvalid("kappa must be positive")
    lo, hi = _mu_bracket(profile, kappa)
    if hi <= lo:
        return np.array([])
    total = mode_count(profile, kappa, hi)
    out = []
    for j in range(1, total + 1):
        a, b = lo, hi
        # bisection on the count until [a, b] holds exactly the j-th eigenvalue
        while not (mode_count(profile, kappa, a) == j - 1 and mode_count(profile, kappa, b) == j):
            m = 0.5 * (a + b)
            if mode_count(profile, kappa, m) >= j:
                b = m
            else:
                a = m
            if b - a < rtol * hi:
                break
        mu = _refine(lambda m: _phase_gap(profile, kappa, m), a, b, (j - 1) * np.pi)
        out.append(mu)
        lo = mu
    return np.array(out)


def _mode_function(profile, kappa, mu, grid):
    cp, cm = profile.c_plus, profile.c_minus
    yM = profile.y_M
    pm = np.sqrt(kappa**2 - mu / cm**2)
    pp = np.sqrt(kappa**2 - mu / cp**2)
    ys = grid.nodes
    inside = (ys >= -yM) & (ys <= yM)
    end, states = ode.propagate(profile, kappa**2, mu, np.array([1.0, pm]), -yM, yM, record=ys[inside])
    f = np.empty(ys.size)
    f[inside] = states[:, 0].real
    f[ys < -yM] = np.exp(pm * (ys[ys < -yM] + yM))
    f[ys > yM] = end[0].real * np.exp(-pp * (ys[ys > yM] - yM))
    cs = ode.sample_speed(profile, grid)
    norm2 = grid.integrate(f**2 / cs**2) + f[0] ** 2 / (2 * pm * cm**2) + f[-1] ** 2 / (2 * pp * cp**2)
    f = f / np.sqrt(norm2)
    if f[np.argmax(np.abs(f))] < 0:
        f = -f
    return f, (pm, pp)


def mode_grid(profile, rate, n_per_segment=48, depth=30.0):
    """Layer grid extended by ``depth`` decay lengths on both sides, tails split every 6 lengths."""
    yM = profile.y_M
    L = depth / rate
    k = max(2, int(np.ceil(depth / 6.0)))
    tails = list(np.linspace(-yM - L, -yM, k + 1)[1:-1]) + list(np.linspace(yM, yM + L, k + 1)[1:-1])
    return ode.profile_grid(profile, n_per_segment, lower=-yM - L, upper=yM + L, extra_points=tails)


def guided_modes(profile, kappa, n_per_segment=48, with_thresholds=True, depth=30.0):
    """Eigenpairs of c0^2 (kappa^2 + D_y^2) below the continuum edge c_+^2 kappa^2.

    Mode functions are sampled on a piecewise Chebyshev grid covering the
    layers and ``depth`` decay lengths of the slowest-decaying tail, and are
    normalized in L^2(c0^-2 dy) (the analytic remainder beyond the grid included).
    """
    mus = eigenvalues(profile, kappa)
    rates = [(np.sqrt(kappa**2 - mu / profile.c_minus**2), np.sqrt(kappa**2 - mu / profile.c_plus**2)) for mu in mus]
    slowest = min((min(r) for r in rates), default=kappa)
    grid = mode_grid(profile, slowest, n_per_segment, depth)
    modes, decay = [], []
    for mu in mus:
        f, r = _mode_function(profile, kappa, mu, grid)
        modes.append(f)
        decay.append(r)
    th = []
    if with_thresholds and len(mus):
        th = [threshold(profile, j) for j in range(1, len(mus) + 1)]
    return ModeSpectrum(kappa=float(kappa), eigenvalues=mus, grid=grid,
                        modes=np.array(modes).reshape(len(mus), grid.size),
                        decay=np.array(decay, dtype=float).reshape(len(mus), 2),
                        thresholds=th, profile=profile)


def total_count(profile, kappa):
    """Number of guided modes at horizontal wavenumber kappa."""
    return mode_count(profile, kappa, profile.c_plus**2 * kappa**2)


def threshold_kappa(profile, j, rtol=1e-12):
    """kappa_j^0 = inf{kappa : at least j guided modes}; inf if no such kappa exists."""
    if profile.c_m >= profile.c_plus:
        return np.inf
    if j == 1 and profile.c_plus == profile.c_minus and _well_strength(profile) > 0:
        # a net attractive 1D well binds at every kappa > 0
        return 0.0
    hi = 1.0 / profile.y_M
    while total_count(profile, hi) < j:
        hi *= 2.0
        if hi > 1e8:
            return np.inf
    if total_count(profile, 1e-9 * hi) >= j:
        return 0.0  # channel open down to kappa -> 0 (e.g. the ground mode of a symmetric well)
    lo = 1e-9 * hi
    while hi - lo > rtol * hi:
        m = 0.5 * (lo + hi)
        if total_count(profile, m) >= j:
            hi = m
        else:
            lo = m
    return hi


def _well_strength(profile):
    """Integral of 1/c0^2 - 1/c_+^2 over the layers."""
    grid = ode.profile_grid(profile, 32)
    return float(grid.integrate(1.0 / ode.sample_speed(profile, grid) ** 2 - 1.0 / profile.c_plus**2))


def threshold(profile, j):
    return profile.c_plus**2 * threshold_kappa(profile, j) ** 2


def thresholds(profile, lam):
    """Open channel count T(lam) = #{j : t_j < lam^2} and those thresholds."""
    _check_lambda(lam)
    if profile.c_m >= profile.c_plus:
        return 0, []
    T = total_count(profile, abs(lam) / profile.c_plus)
    return T, [threshold(profile, j) for j in range(1, T + 1)]


def kappa_of_lambda(profile, lam, j):
    """kappa_j(lam): the horizontal wavenumber where lambda_j^2(kappa) = lam^2.

    Negative ``lam`` gives the negative wavenumber.
    """
    _check_lambda(lam)
    T, _ = thresholds(profile, lam)
    if j > T:
        raise BelowThreshold(f"lam^2 = {lam**2:g} does not exceed threshold t_{j}")
    L = abs(lam)
    lo = L / profile.c_plus * (1.0 + 1e-14)
    hi = L / profile.c_m
    while hi - lo > 1e-6 * hi:
        m = 0.5 * (lo + hi)
        if mode_count(profile, m, lam**2) >= j:
            lo = m
        else:
            hi = m
    k = _refine(lambda kk: _phase_gap(profile, kk, lam**2), lo, hi, (j - 1) * np.pi)
    return float(np.sign(lam) * k)
