"""Weighted geodesic ray transforms on S^2, order reduction and Funk inversion.

Great circles are indexed by their pole nu. On the circle with pole nu we use
the frame e1 = (e_n x nu) / |e_n x nu| (a point on the equator) and
e2 = nu x e1, whose vertical component sin(beta) = sqrt(1 - nu_n^2) is >= 0, so
p(t) = cos t e1 + sin t e2 starts upward from the equator at t = 0. A family
of half-geodesics on one circle is then

    I_k(t) = int_0^pi W(p(t + s)) sin(s)^(k-2) ds.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .. import harmonics
from ..errors import ConfigInvalid, DegenerateMultiplier, EquatorBand, InsufficientFamilyResolution
from ..geometry import GeodesicFrame, fold_even_extension, normalize


@dataclass
class AngularLayer:
    """W_{-k} as a real spherical-harmonic table on the whole sphere."""

    order: int
    coeffs: np.ndarray

    @property
    def band_limit(self):
        return harmonics.band_limit_of(np.asarray(self.coeffs).size)

    def __call__(self, directions):
        return harmonics.evaluate(self.coeffs, directions)


@dataclass
class RayIntegralData:
    """I_k sampled on a circle family: values[c, j] for pole c and start t_j."""

    order: int
    poles: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    mask: np.ndarray = field(default=None, repr=False)  # True where a sample was filled

    @property
    def n_t(self):
        return self.values.shape[1]

    @property
    def t(self):
        return 2.0 * np.pi * np.arange(self.n_t) / self.n_t


def _as_function(W):
    if callable(W):
        return W
    coeffs = np.asarray(W)
    return lambda d: harmonics.evaluate(coeffs, d)


def circle_frames(poles):
    """(e1, e2) per pole; e1 on the equator and e2 with nonnegative vertical component."""
    nu = normalize(poles)
    up = np.zeros_like(nu)
    up[..., 2] = 1.0
    e1 = np.cross(up, nu)
    n1 = np.linalg.norm(e1, axis=-1, keepdims=True)
    xaxis = np.zeros_like(nu)
    xaxis[..., 0] = 1.0
    e1 = np.where(n1 > 1e-12, e1 / np.where(n1 > 1e-12, n1, 1.0), xaxis)
    e2 = np.cross(nu, e1)
    return e1, e2


def circle_points(poles, t):
    """Points p(t) on each circle: shape (n_c, len(t), 3)."""
    e1, e2 = circle_frames(poles)
    t = np.asarray(t, dtype=float)
    return np.cos(t)[None, :, None] * e1[:, None, :] + np.sin(t)[None, :, None] * e2[:, None, :]


def weighted_ray_integral(W, omega, theta_tilde, k, reflected=False, n_quad=64):
    """int_0^pi W(point(s, theta_tilde)) sin(s)^(k-2) ds along the geodesic from omega.

    Gauss-Legendre quadrature in s. With ``reflected`` the integrand is the even
    fold W(phi_bar, |phi_n|) of an upper-hemisphere function.
    """
    if k < 2:
        raise ConfigInvalid("weight exponent k - 2 must be >= 0")
    f = _as_function(W)
    if reflected:
        f = fold_even_extension(f)
    frame = GeodesicFrame(omega)
    x, w = np.polynomial.legendre.leggauss(n_quad)
    th = np.atleast_1d(np.asarray(theta_tilde, dtype=float))
    if reflected and abs(frame.source[2]) > 1e-14:
        # the fold has a kink where the geodesic meets the equator: one rule per side
        s0 = frame.crossing(th)[:, None]
        s = np.concatenate([0.5 * s0 * (x + 1.0), s0 + 0.5 * (np.pi - s0) * (x + 1.0)], axis=1)
        w = np.concatenate([0.5 * s0 * w, 0.5 * (np.pi - s0) * w], axis=1)
    else:
        s = np.broadcast_to(0.5 * np.pi * (x + 1.0), (th.size, n_quad))
        w = np.broadcast_to(0.5 * np.pi * w, (th.size, n_quad))
    w = w * np.sin(s) ** (k - 2)
    pts = frame.point(s, th[:, None])
    vals = f(pts.reshape(-1, 3)).reshape(s.shape)
    out = np.sum(vals * w, axis=1)
    return out if np.ndim(theta_tilde) else out[0]


@lru_cache(maxsize=64)
def _kernel_hat(k, M):
    """w_n = int_0^pi e^{i n s} sin(s)^(k-2) ds for the FFT frequencies of length M."""
    n = np.fft.fftfreq(M, d=1.0 / M)
    x, wq = np.polynomial.legendre.leggauss(M + 64)
    s = 0.5 * np.pi * (x + 1.0)
    wq = 0.5 * np.pi * wq * np.sin(s) ** (k - 2)
    return np.exp(1j * np.outer(n, s)) @ wq


def ray_family(W, poles, n_t, k, oversample=4, reflected=False):
    """I_k(t_j) on every circle, t_j = 2 pi j / n_t, by exact circular convolution.

    W is sampled at ``oversample * n_t`` points per circle; the result is exact
    for functions whose restriction to great circles has degree below
    oversample * n_t / 2.
    """
    f = _as_function(W)
    if reflected:
        f = fold_even_extension(f)
    M = oversample * n_t
    t = 2.0 * np.pi * np.arange(M) / M
    pts = circle_points(poles, t)
    vals = f(pts.reshape(-1, 3)).reshape(len(poles), M)
    F = np.fft.fft(vals, axis=1)
    I = np.fft.ifft(F * _kernel_hat(k, M)[None, :], axis=1)
    I = I[:, ::oversample]
    # a real kernel keeps real data real
    return I.real if np.isrealobj(vals) else I


def reduce_order(I_k, k, tol=1e-8):
    """I_{k-2} = (I_k'' + (k-2)^2 I_k) / ((k-2)(k-3)), derivatives along the start parameter.

    ``I_k`` is an array (n_c, n_t) or :class:`RayIntegralData`. Differentiation
    is spectral in t; the family must be resolved (negligible top Fourier modes).
    """
    if k < 4:
        raise ConfigInvalid("order reduction needs k >= 4")
    data = I_k if isinstance(I_k, RayIntegralData) else None
    V = np.asarray(data.values if data is not None else I_k)
    n_t = V.shape[-1]
    F = np.fft.fft(V, axis=-1)
    n = np.fft.fftfreq(n_t, d=1.0 / n_t)
    top = np.abs(n) >= n_t // 2 - 1
    scale = np.max(np.abs(F)) if F.size else 0.0
    if scale > 0 and np.max(np.abs(F[..., top])) > tol * scale:
        raise InsufficientFamilyResolution("family not resolved in the start parameter; increase n_t")
    d2 = np.fft.ifft(-(n**2) * F, axis=-1)
    out = (d2 + (k - 2) ** 2 * np.fft.ifft(F, axis=-1)) / ((k - 2) * (k - 3))
    if np.isrealobj(V):
        out = out.real
    if data is not None:
        return RayIntegralData(k - 2, data.poles, data.weights, out, data.mask)
    return out


def reduce_to_base(data):
    """Apply :func:`reduce_order` until the weight exponent is 0 (k even) or 1 (k odd)."""
    k = data.order
    while k >= 4:
        data = reduce_order(data, k)
        k -= 2
    return data


def full_circle_integrals(I2):
    """G = I_2(t) + I_2(t + pi), averaged over t (requires even n_t)."""
    V = I2.values if isinstance(I2, RayIntegralData) else np.asarray(I2)
    n_t = V.shape[-1]
    if n_t % 2:
        raise ConfigInvalid("n_t must be even")
    return np.mean(V + np.roll(V, -n_t // 2, axis=-1), axis=-1)


def equatorial_odd_integrals(I3):
    """Q = I_3(0) - I_3(pi) = int_0^2pi W(p(s)) sin s ds for equator-starting geodesics."""
    V = I3.values if isinstance(I3, RayIntegralData) else np.asarray(I3)
    n_t = V.shape[-1]
    if n_t % 2:
        raise ConfigInvalid("n_t must be even")
    return V[..., 0] - V[..., n_t // 2]


# ------------------------------------------------------------------ Funk transform


def funk_transform(f, poles, n_circle=128):
    """Integrals of f over the great circles with the given poles (trapezoid rule)."""
    g = _as_function(f)
    t = 2.0 * np.pi * np.arange(n_circle) / n_circle
    pts = circle_points(poles, t)
    return g(pts.reshape(-1, 3)).reshape(len(poles), n_circle).sum(axis=1) * (2.0 * np.pi / n_circle)


def pole_grid(band_limit, extra=4):
    """Quadrature grid of poles exact for products of degree-(band_limit + extra // 2) harmonics."""
    n_polar = band_limit + extra
    return harmonics.sphere_quadrature(n_polar, 2 * n_polar)


@lru_cache(maxsize=16)
def _multiplier_matrix(band_limit):
    dirs, w = pole_grid(band_limit)
    n = harmonics.n_coeffs(band_limit)
    n_circle = 2 * band_limit + 8
    t = 2.0 * np.pi * np.arange(n_circle) / n_circle
    pts = circle_points(dirs, t).reshape(-1, 3)
    T = harmonics.basis_matrix(band_limit, pts).reshape(len(dirs), n_circle, n).sum(axis=1) * (2.0 * np.pi / n_circle)
    B = harmonics.basis_matrix(band_limit, dirs)
    return B.T @ (w[:, None] * T)


def funk_multipliers(band_limit):
    """Per-coefficient multipliers of the Funk transform, computed from the basis itself.

    Returns ``(mu, deviation)``: mu[a] is the diagonal entry for harmonic a and
    ``deviation`` the largest off-diagonal entry.
    """
    M = _multiplier_matrix(band_limit)
    mu = np.diag(M).copy()
    off = M - np.diag(mu)
    return mu, float(np.max(np.abs(off))) if off.size else 0.0


def funk_invert_even(G, poles, weights, band_limit, tol=1e-12):
    """Even function whose great-circle integrals are G (given at quadrature poles).

    Even-degree coefficients are divided by the numerically computed
    multipliers; odd-degree coefficients are set to zero.
    """
    g = harmonics.project(G, poles, weights, band_limit)
    mu, _ = funk_multipliers(band_limit)
    deg = harmonics.degrees(band_limit)
    even = deg % 2 == 0
    if np.any(np.abs(mu[even]) < tol):
        raise DegenerateMultiplier("vanishing Funk multiplier on an even degree")
    out = np.zeros_like(g)
    out[even] = g[even] / mu[even]
    return out


def recover_odd_part(Q, poles, weights, band_limit, delta_eq=0.05, n_fit=None):
    """Odd W from Q(nu) = int_0^2pi W(p(s)) sin s ds on equator-starting geodesics.

    On such a geodesic p_n(s) = sin(beta) sin(s), so sin(beta) Q is the Funk
    transform of the even function h = phi_n W. h is inverted as an even
    function and W = h / phi_n is fitted off the band |phi_n| < sin(delta_eq).
    """
    if not 0.0 < delta_eq < 0.5:
        raise EquatorBand("delta_eq must lie in (0, 0.5)")
    nu = normalize(poles)
    sin_beta = np.sqrt(np.clip(1.0 - nu[:, 2] ** 2, 0.0, None))
    h = funk_invert_even(sin_beta * np.asarray(Q), poles, weights, band_limit + 1)
    n_fit = n_fit or band_limit + 6
    dirs, _ = harmonics.sphere_quadrature(n_fit, 2 * n_fit)
    keep = np.abs(dirs[:, 2]) > np.sin(delta_eq)
    d = dirs[keep]
    vals = harmonics.evaluate(h, d) / d[:, 2]
    return harmonics.fit(vals, d, band_limit, parity="odd")
