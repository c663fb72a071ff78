"""1D inverse scattering for the reduced Schroedinger problem by the Marchenko equation.

With c_+ = c_- the vertical problem at fixed lambda reads

    -u'' + q(y) u = k^2 u,    q = -lam^2 (1/c0^2 - 1/c_+^2),    k = lam omega_n / c_+.

We use the right (x -> +inf) Marchenko equation

    K(x, y) + F(x + y) + int_x^inf K(x, t) F(t + y) dt = 0,   y >= x,
    F(x) = (1/2pi) int R_r(k) e^{ikx} dk + sum_j c_j^2 e^{-kappa_j x},
    q(x) = -2 d/dx K(x, x),

where R_r is the reflection coefficient of the solution e^{-ikx} + R_r e^{ikx}
for x -> +inf and c_j are the right norming constants
(psi_j ~ c_j e^{-kappa_j x}, int psi_j^2 = 1). The forward solver uses the
incoming wave e^{iky}, so R_r(k) = conj(R(k)).
"""

from dataclasses import dataclass, field

import numpy as np

from .. import spectral1d
from ..errors import ConfigInvalid, IllPosedKernel, SteplikeUnsupported
from ..media import StratifiedProfile

COND_MAX = 1e10


@dataclass
class Potential1D:
    """q sampled on a uniform grid, with the data used to build it."""

    x: np.ndarray
    q: np.ndarray
    bound_states: tuple = ()
    condition: float = field(default=np.nan, repr=False)

    def __call__(self, x):
        return np.interp(x, self.x, self.q, left=0.0, right=0.0)

    def l2_error(self, q_true):
        """Relative L^2 error against a callable or an array on ``self.x``."""
        ref = q_true(self.x) if callable(q_true) else np.asarray(q_true)
        num = np.trapezoid((self.q - ref) ** 2, self.x)
        den = np.trapezoid(ref**2, self.x)
        return float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num))


def potential_from_profile(profile, lam):
    """q(y) = -lam^2 (1/c0^2 - 1/c_+^2) as a callable."""
    cp = profile.c_plus

    def q(y):
        return -(lam**2) * (1.0 / np.asarray(profile.speed(y)) ** 2 - 1.0 / cp**2)

    return q


def kernel_data(k, R, bound_states=()):
    """F(x) from right reflection samples R_r(k), trapezoid rule in k.

    On a symmetric grid the Fourier integral is taken as given. On a grid of
    k >= 0, R_r(-k) = conj(R_r(k)) (real potential) gives
    (1/pi) Re int_0^kmax R_r(k) e^{ikx} dk. Data beyond the grid are taken as zero.
    """
    k = np.asarray(k, dtype=float)
    R = np.asarray(R, dtype=complex)
    if k.ndim != 1 or k.size != R.size or k.size < 2:
        raise ConfigInvalid("k and R must be 1D arrays of equal length >= 2")
    if np.any(np.diff(k) <= 0):
        raise ConfigInvalid("k must be increasing")
    scale = 1.0 / (2.0 * np.pi) if k[0] < 0 else 1.0 / np.pi
    bs = tuple((float(kap), float(c)) for kap, c in bound_states)
    dk = np.diff(k)
    wR = np.zeros(k.size)
    wR[:-1] += 0.5 * dk
    wR[1:] += 0.5 * dk
    wR = wR * R

    def F(x):
        x = np.asarray(x, dtype=float)
        out = (np.exp(1j * np.multiply.outer(x, k)) @ wR).real * scale
        for kap, c in bs:
            out = out + c**2 * np.exp(-kap * x)
        return out

    return F


def marchenko_invert_1d(k, R, bound_states=(), x_range=(-3.0, 3.0), n=512, tail=None):
    """Recover q on ``x_range`` from right reflection data.

    Parameters
    ----------
    k, R : arrays
        Samples of R_r(k) on an increasing grid, either symmetric or k >= 0
        (right convention, see module docstring).
    bound_states : sequence of (kappa_j, c_j)
        Decay rate (energy -kappa_j^2) and right norming constant; F gets c_j^2.
    x_range : (x_lo, x_hi)
        x_hi must lie to the right of the support of q.
    n : int
        Nystroem nodes on [x_lo, x_hi + tail] (plus two guard nodes).
    tail : float, optional
        Extra length for the truncated integral; defaults to the x-range length.

    Raises
    ------
    IllPosedKernel
        If a Nystroem system has condition number above 1e10.
    """
    x_lo, x_hi = map(float, x_range)
    if not x_hi > x_lo:
        raise ConfigInvalid("empty x range")
    tail = (x_hi - x_lo) if tail is None else float(tail)
    F = kernel_data(k, R, bound_states)
    # two guard nodes on the left for the 5-point derivative
    h = (x_hi + tail - x_lo) / (n - 1)
    grid = x_lo - 2.0 * h + h * np.arange(n + 2)
    n = grid.size
    stop = int(np.searchsorted(grid, x_hi + 0.5 * h)) + 2
    # on a uniform grid x_i + x_j depends only on i + j
    sums = F(2.0 * grid[0] + h * np.arange(2 * n - 1))
    idx = np.arange(n)
    Fmat = sums[idx[:, None] + idx[None, :]]
    diag = np.empty(stop)
    worst = 1.0
    for i in range(stop):
        w = _gregory_weights(n - i, h)
        # rows: y = t_j, unknowns K(x, t_l)
        A = np.eye(n - i) + Fmat[i:, i:] * w[None, :]
        cond = np.linalg.cond(A)
        worst = max(worst, cond)
        if not np.isfinite(cond) or cond > COND_MAX:
            raise IllPosedKernel(f"Marchenko system ill-conditioned at x={grid[i]:.3g} (cond {cond:.2e})")
        diag[i] = np.linalg.solve(A, -Fmat[i:, i])[0]
    xs = grid[2:stop - 2]
    q = -2.0 * (diag[:-4] - 8.0 * diag[1:-3] + 8.0 * diag[3:-1] - diag[4:]) / (12.0 * h)
    return Potential1D(x=xs, q=q, bound_states=tuple(bound_states), condition=worst)


def _gregory_weights(m, h):
    """Trapezoid weights with fourth-order Gregory end corrections."""
    w = np.full(m, h)
    if m < 8:
        w[0] = w[-1] = 0.5 * h
        return w
    end = h * np.array([3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0])
    w[:3] = end
    w[-3:] = end[::-1]
    return w


def reflectionless_potential(kappa, c):
    """One-soliton potential with bound state (kappa, c): -2 kappa^2 sech^2(kappa (x - x0))."""
    x0 = np.log(c**2 / (2.0 * kappa)) / (2.0 * kappa)
    return lambda x: -2.0 * kappa**2 / np.cosh(kappa * (np.asarray(x) - x0)) ** 2


def bound_states_from_modes(profile, lam, n_per_segment=48):
    """(kappa_j, c_j) of -u'' + q u from the guided modes at the given lam.

    Bound states are the modes with eigenvalue lam^2, at horizontal wavenumber
    K_j = kappa_j(lam); the energy is -(K_j^2 - lam^2 / c_+^2).
    """
    _check_symmetric(profile)
    T, _ = spectral1d.thresholds(profile, lam)
    out = []
    for j in range(1, T + 1):
        K = spectral1d.kappa_of_lambda(profile, lam, j)
        spec = spectral1d.guided_modes(profile, K, n_per_segment, with_thresholds=False)
        idx = int(np.argmin(np.abs(spec.eigenvalues - lam**2)))
        f = spec.modes[idx]
        pm, pp = spec.decay[idx]
        norm2 = spec.grid.integrate(f**2) + f[0] ** 2 / (2 * pm) + f[-1] ** 2 / (2 * pp)
        hi = spec.grid.breakpoints[-1]
        c = abs(f[-1]) * np.exp(pp * hi) / np.sqrt(norm2)
        out.append((float(pp), float(c)))
    return tuple(out)


def _check_symmetric(profile):
    if not np.isclose(profile.c_plus, profile.c_minus):
        raise SteplikeUnsupported("Marchenko inversion requires c_+ = c_-")


@dataclass
class ProfileEstimate:
    y: np.ndarray
    c0: np.ndarray
    potential: Potential1D
    lam: float
    c_plus: float

    def to_profile(self, y_M=None):
        """Piecewise-constant profile from cell averages of the recovered speed."""
        y_M = float(y_M if y_M is not None else max(abs(self.y[0]), abs(self.y[-1])))
        edges = np.linspace(-y_M, y_M, min(len(self.y), 257))
        mid = 0.5 * (edges[1:] + edges[:-1])
        c = np.interp(mid, self.y, self.c0, left=self.c_plus, right=self.c_plus)
        return StratifiedProfile.piecewise_constant(edges, c, self.c_plus, self.c_plus)


def recover_c0_from_coefficients(omega_n, R_plus, lam, c_plus, c_minus, bound_states=(),
                                 x_range=(-3.0, 3.0), n=512):
    """Estimate c0 from R_+(lam, omega_n) at one frequency.

    Samples at k = lam omega_n / c_+ cover only k <= lam / c_+; the data are
    truncated there. Large lam and a barrier (c0 >= c_+, no bound states) keep
    the truncation error small. Guided modes can be supplied as bound states.
    """
    if not np.isclose(c_plus, c_minus):
        raise SteplikeUnsupported("Marchenko inversion requires c_+ = c_-")
    if lam <= 0:
        raise ConfigInvalid("lam must be positive")
    omega_n = np.asarray(omega_n, dtype=float)
    order = np.argsort(omega_n)
    k = lam * omega_n[order] / c_plus
    Rr = np.conj(np.asarray(R_plus, dtype=complex)[order])
    if k[0] > 0:
        # |R| -> 1 as k -> 0, so the gap below the first sample is not negligible
        k = np.concatenate([[0.0], k])
        Rr = np.concatenate([[Rr[0]], Rr])
    pot = marchenko_invert_1d(k, Rr, bound_states, x_range, n)
    inv2 = 1.0 / c_plus**2 - pot.q / lam**2
    if np.any(inv2 <= 0):
        raise IllPosedKernel("recovered potential implies a non-positive 1/c0^2")
    return ProfileEstimate(y=pot.x, c0=1.0 / np.sqrt(inv2), potential=pot, lam=float(lam), c_plus=float(c_plus))


def certify_roundtrip(estimate, omega_n, R_plus, y_M=None):
    """Max |R_recovered - R_data| after re-solving the forward problem on the estimate."""
    prof = estimate.to_profile(y_M)
    k = estimate.lam * np.asarray(omega_n, dtype=float) / estimate.c_plus
    R_new = spectral1d.reflection_of_k(prof, estimate.lam, k)
    return float(np.max(np.abs(R_new - np.asarray(R_plus))))
