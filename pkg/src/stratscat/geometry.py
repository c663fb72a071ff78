"""Geodesic coordinates on the unit sphere, equatorial crossings, and the
reflection/transmission point maps of the scattering matrix.

Directions are arrays ``(..., 3)`` with the vertical component last.
"""

import numpy as np

from .errors import AntipodeProximity, EquatorialInput, NoCrossing, TotalInternalReflection

DELTA_BAND = 1e-3


def normalize(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def tangent_frame(source):
    """Orthonormal tangent vectors (e1, e2) at ``source``.

    e1 is the normalized projection of the vertical axis (Gram-Schmidt), so
    theta_tilde = 0 points toward the north pole; at the poles the x-axis is used.
    """
    w = normalize(source)
    up = np.zeros_like(w)
    up[..., 2] = 1.0
    e1 = up - (w[..., 2:3]) * w
    n1 = np.linalg.norm(e1, axis=-1, keepdims=True)
    xaxis = np.zeros_like(w)
    xaxis[..., 0] = 1.0
    alt = xaxis - w[..., 0:1] * w
    na = np.linalg.norm(alt, axis=-1, keepdims=True)
    alt = alt / np.where(na > 0, na, 1.0)
    e1 = np.where(n1 > 1e-12, e1 / np.where(n1 > 1e-12, n1, 1.0), alt)
    e2 = np.cross(w, e1)
    return e1, e2


class GeodesicFrame:
    """Geodesic polar coordinates (s, theta_tilde) about a source direction."""

    def __init__(self, source):
        self.source = normalize(source)
        self.e1, self.e2 = tangent_frame(self.source)

    def tangent(self, theta):
        theta = np.asarray(theta, dtype=float)[..., None]
        return np.cos(theta) * self.e1 + np.sin(theta) * self.e2

    def point(self, s, theta):
        s = np.asarray(s, dtype=float)[..., None]
        return np.cos(s) * self.source + np.sin(s) * self.tangent(theta)

    def coordinates(self, direction):
        """Inverse map: (s, theta_tilde) of unit vectors."""
        d = normalize(direction)
        c = np.clip(d @ self.source, -1.0, 1.0)
        s = np.arccos(c)
        t = d - c[..., None] * self.source
        theta = np.arctan2(t @ self.e2, t @ self.e1) % (2 * np.pi)
        return s, theta

    def crossing(self, theta):
        """s_0(theta) in (0, pi) where the geodesic meets the equator."""
        A = self.source[2]
        B = self.tangent(theta)[..., 2]
        if abs(A) < 1e-14:
            raise NoCrossing("source lies on the equator")
        # cos s A + sin s B = 0
        return np.arctan2(abs(A), -np.sign(A) * B)


def geodesic_point(source, s, theta_tilde):
    return GeodesicFrame(source).point(s, theta_tilde)


def equator_crossing(source, theta_tilde):
    return GeodesicFrame(source).crossing(theta_tilde)


def _split(omega):
    omega = np.asarray(omega, dtype=float)
    return omega[..., :-1], omega[..., -1]


def map_reflect(omega):
    """(omega_bar, omega_n) -> (-omega_bar, omega_n)."""
    wb, wn = _split(omega)
    if np.any(wn == 0):
        raise EquatorialInput("reflection map undefined on the equator")
    return np.concatenate([-wb, wn[..., None]], axis=-1)


def map_transmit(omega, profile, delta=DELTA_BAND):
    """Image of the transmitted singularity.

    Upper incidence with omega_n above the critical value goes to
    (-c_- w / c_+, -sqrt(1 - c_-^2 |w|^2 / c_+^2)); lower incidence goes to
    (-c_+ w / c_-, +sqrt(1 - c_+^2 |w|^2 / c_-^2)). For c_+ = c_- this is
    the antipodal map.
    """
    wb, wn = _split(omega)
    wn = np.asarray(wn)
    cp, cm = profile.c_plus, profile.c_minus
    crit = np.sqrt(max(0.0, 1.0 - cp**2 / cm**2))
    if np.any(np.abs(wn) < delta):
        raise EquatorialInput("omega_n inside the equatorial band")
    if cm > cp and np.any((wn > 0) & (np.abs(wn - crit) < delta)):
        raise EquatorialInput("omega_n inside the critical band")
    if np.any((wn > 0) & (wn < crit)):
        raise TotalInternalReflection("no downward transmission below the critical angle")
    wb2 = np.sum(wb * wb, axis=-1)
    up = wn > 0
    ratio = np.where(up, cm / cp, cp / cm)
    out_bar = -ratio[..., None] * wb
    out_n = np.sqrt(np.clip(1.0 - ratio**2 * wb2, 0.0, None))
    out_n = np.where(up, -out_n, out_n)
    return np.concatenate([out_bar, out_n[..., None]], axis=-1)


def transmitted_carrier(omega, profile):
    """Phase direction (c_- w / c_+, sqrt(1 - c_-^2 |w|^2 / c_+^2)) of the transmitted wave below the layers."""
    wb, wn = _split(omega)
    r = profile.c_minus / profile.c_plus
    arg = 1.0 - r**2 * np.sum(wb * wb, axis=-1)
    if np.any(arg < 0):
        raise TotalInternalReflection("transmitted wave is evanescent")
    return np.concatenate([r * wb, np.sqrt(arg)[..., None]], axis=-1)


def fold_even_extension(W):
    """W~(phi) = W(phi_bar, |phi_n|): the even extension of an upper-hemisphere function."""

    def folded(phi):
        phi = np.array(phi, dtype=float, copy=True)
        phi[..., -1] = np.abs(phi[..., -1])
        return W(phi)

    return folded


def check_antipode(s, delta_ant):
    if np.any(np.asarray(s) > np.pi - delta_ant):
        raise AntipodeProximity(f"s within {delta_ant} of the antipode")
