"""Tensor grids in geodesic polar coordinates (s, theta_tilde) about a source direction.

s runs over Gauss-Legendre nodes on [s_a, s_b]; theta_tilde is uniform on
[0, 2 pi). Values are arrays of shape (n_s, n_theta); derivatives are spectral
(Legendre series in s, Fourier series in theta_tilde).
"""

import numpy as np
from numpy.polynomial import legendre as leg

from ..geometry import GeodesicFrame


def _legendre_vander(x, n):
    return leg.legvander(np.asarray(x, dtype=float), n - 1)


def _barycentric_diff(x, w):
    """Differentiation matrix on Gauss-Legendre nodes (barycentric form, O(n^2) roundoff growth)."""
    bw = (-1.0) ** np.arange(len(x)) * np.sqrt((1.0 - x * x) * w)
    X = x[:, None] - x[None, :]
    np.fill_diagonal(X, 1.0)
    D = (bw[None, :] / bw[:, None]) / X
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


class GeodesicGrid:
    def __init__(self, source, s_range, n_s=128, n_theta=64):
        self.frame = GeodesicFrame(source)
        self.source = self.frame.source
        self.s_a, self.s_b = float(s_range[0]), float(s_range[1])
        self.n_s, self.n_theta = n_s, n_theta
        x, w = leg.leggauss(n_s)
        self._x, self._w = x, w
        self.half = 0.5 * (self.s_b - self.s_a)
        self.s = self.s_a + self.half * (x + 1.0)
        self.weights = self.half * w
        self.theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        V = _legendre_vander(x, n_s)
        # analysis matrix: coefficients = A @ values, exact for degree < n_s
        self._analysis = (V * w[:, None]).T * ((2 * np.arange(n_s) + 1) / 2.0)[:, None]
        # integration raises the degree by one; keep the full series for evaluation
        self._Qfull = np.stack([leg.legint(np.eye(n_s)[l], lbnd=-1.0) for l in range(n_s)], axis=1)
        self.ds_matrix = _barycentric_diff(x, w) / self.half
        self.k = np.fft.fftfreq(n_theta, d=1.0 / n_theta)
        self._transport_cache = {}

    @property
    def shape(self):
        return (self.n_s, self.n_theta)

    def mesh(self):
        return np.meshgrid(self.s, self.theta, indexing="ij")

    def directions(self):
        S, TH = self.mesh()
        return self.frame.point(S, TH)

    def _x_of(self, s):
        return (np.asarray(s, dtype=float) - self.s_a) / self.half - 1.0

    # -- derivatives -----------------------------------------------------

    def d_s(self, values):
        return np.tensordot(self.ds_matrix, values, axes=(1, 0))

    def d_theta(self, values, order=1):
        F = np.fft.fft(values, axis=-1)
        k = self.k.copy()
        if order % 2 == 1 and self.n_theta % 2 == 0:
            k[self.n_theta // 2] = 0.0
        return np.fft.ifft(F * (1j * k) ** order, axis=-1)

    def sphere_laplacian(self, values):
        """b_ss + cot s b_s + b_tt / sin^2 s."""
        bs = self.d_s(values)
        bss = self.d_s(bs)
        btt = self.d_theta(values, 2)
        s = self.s[:, None]
        return bss + np.cos(s) / np.sin(s) * bs + btt / np.sin(s) ** 2

    # -- integration -----------------------------------------------------

    def antiderivative_at(self, values, s_eval):
        """F(s_eval[j], column j) with F(s) = int_{s_a}^s values ds, per theta column."""
        coef = self._analysis @ values  # (n_s, n_theta)
        full = self._Qfull @ coef  # (n_s + 1, n_theta), in x units
        s_eval = np.asarray(s_eval, dtype=float)
        P = leg.legvander(self._x_of(s_eval), self.n_s)  # (..., n_s+1)
        if s_eval.ndim == 1 and s_eval.shape[0] == self.n_theta:
            return self.half * np.einsum("jl,lj->j", P, full)
        return self.half * (P @ full)

    def antiderivative(self, values):
        """int_{s_a}^{s} on the nodes, per column."""
        coef = self._analysis @ values
        full = self._Qfull @ coef
        return self.half * (leg.legvander(self._x, self.n_s) @ full)

    def incident_transport_matrix(self, m, n_quad=64):
        """K with (K f)(s_i) = s_i / sin(s_i) * int_0^1 (sin(s_i t) / sin s_i)^(m-1) f(s_i t) dt.

        Requires s_a = 0. Then int_0^s sin^(m-1) f / sin^m s = (K f)(s); the
        scaled form avoids cancellation near the source.
        """
        key = (m, n_quad)
        if key in self._transport_cache:
            return self._transport_cache[key]
        t, wt = leg.leggauss(n_quad)
        t = 0.5 * (t + 1.0)
        wt = 0.5 * wt
        s = self.s
        pts = s[:, None] * t[None, :]  # (n_s, n_q)
        interp = _legendre_vander(self._x_of(pts.ravel()), self.n_s) @ self._analysis  # (n_s*n_q, n_s)
        interp = interp.reshape(self.n_s, n_quad, self.n_s)
        ratio = (np.sin(pts) / np.sin(s)[:, None]) ** (m - 1)
        K = np.einsum("iq,iqk->ik", (s / np.sin(s))[:, None] * ratio * wt[None, :], interp)
        self._transport_cache[key] = K
        return K

    # -- interpolation ---------------------------------------------------

    def coefficients(self, values):
        """Legendre (rows) x Fourier (columns) coefficient table."""
        return np.fft.fft(self._analysis @ values, axis=-1) / self.n_theta

    def evaluate_coeffs(self, coeffs, s, theta):
        s = np.asarray(s, dtype=float)
        theta = np.asarray(theta, dtype=float)
        P = _legendre_vander(self._x_of(s.ravel()), self.n_s)
        k = self.k.copy()
        if self.n_theta % 2 == 0:
            # split the Nyquist mode symmetrically so real data interpolates to real values
            k[self.n_theta // 2] = 0.0
        E = np.exp(1j * np.outer(theta.ravel(), k))
        if self.n_theta % 2 == 0:
            E[:, self.n_theta // 2] = np.cos(0.5 * self.n_theta * theta.ravel())
        out = np.einsum("pl,lk,pk->p", P, coeffs, E)
        return out.reshape(s.shape)

    def interpolate(self, values, s, theta):
        return self.evaluate_coeffs(self.coefficients(values), s, theta)

    def interpolate_directions(self, values, directions):
        s, th = self.frame.coordinates(directions)
        return self.interpolate(values, s, th)
