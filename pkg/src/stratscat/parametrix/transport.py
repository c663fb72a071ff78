"""Error coefficients of the outer ansatz and the geodesic transport solves.

In a region where c0 is the constant c_b, a branch of the ansatz is

    u = exp(i lam z.w / c_b) * sum_m |z|^-m b_m(theta),

with b_0 the constant base amplitude. With c = c_b + p and c^2 = c_b^2 + g, the
operator c^2 Delta - lam^2 (Delta = -sum d^2) maps u to exp(i lam z.w / c_b)
sum_k |z|^-k E_k with

    E_k = - c_b^2 Lap(b_{k-2}) - sum_{j+m+2=k} g_j Lap(b_m)
          + 2 i lam c_b [(k-1) cos s b_{k-1} + sin s d_s b_{k-1}]
          + 2 i (lam / c_b) sum_{j+m+1=k} g_j [m cos s b_m + sin s d_s b_m]
          + (lam^2 / c_b^2) sum_{j+m=k} g_j b_m,

where s is the distance from w and Lap(b_m) = m(m + 2 - n) b_m + Delta_S b_m.
Because c^2 is a polynomial in 1/|z|, this expansion is exact.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import AntipodeProximity, ConfigInvalid
from ..media import speed_squared_series

INCIDENT, REFLECTED, TRANSMITTED, MIDDLE = "I", "R", "T", "M"


@dataclass
class SphericalAmplitude:
    branch: str
    order: int
    values: np.ndarray
    source: np.ndarray
    carrier: str = ""
    grid: object = field(default=None, repr=False)


@dataclass
class ErrorCoefficient:
    branch: str
    order: int
    values: np.ndarray
    grid: object = field(default=None, repr=False)


@dataclass
class Fields:
    """Amplitude b, d_s b and Delta_S b sampled at a common set of points."""

    b: np.ndarray
    bs: np.ndarray
    lap_s: np.ndarray


def grid_fields(grid, values):
    values = np.asarray(values, dtype=complex)
    return Fields(values, grid.d_s(values), grid.sphere_laplacian(values))


def constant_fields(value, shape):
    z = np.zeros(shape, dtype=complex)
    return Fields(np.full(shape, value, dtype=complex), z, z.copy())


def g_series(gammas, c_b, K):
    """g_k, k = 0..K: coefficients of |z|^-k in c^2 - c_b^2 from gamma_k samples (dict or array)."""
    if isinstance(gammas, dict):
        shape = next(iter(gammas.values())).shape if gammas else ()
        p = np.zeros((K + 1,) + shape)
        for j, v in gammas.items():
            if j <= K:
                p[j] = v
    else:
        p = np.asarray(gammas)[: K + 1]
    return speed_squared_series(p, c_b, K)


def error_from_fields(k, fields, g, s, lam, c_b, n=3):
    """E_k from amplitude fields {m: Fields} and the g-series, at points with distance s."""
    cs, sn = np.cos(s), np.sin(s)
    out = np.zeros(np.shape(s), dtype=complex)

    def lap(m):
        f = fields[m]
        return m * (m + 2 - n) * f.b + f.lap_s

    if (k - 2) in fields:
        out -= c_b**2 * lap(k - 2)
    if (k - 1) in fields:
        f = fields[k - 1]
        out += 2j * lam * c_b * ((k - 1) * cs * f.b + sn * f.bs)
    for m, f in fields.items():
        j = k - m - 2
        if 1 <= j < len(g) and np.any(g[j]):
            out -= g[j] * lap(m)
        j = k - m - 1
        if 1 <= j < len(g) and np.any(g[j]):
            out += 2j * (lam / c_b) * g[j] * (m * cs * f.b + sn * f.bs)
        j = k - m
        if 1 <= j < len(g) and np.any(g[j]):
            out += (lam**2 / c_b**2) * g[j] * f.b
    return out


def transport_incident_values(grid, E, lam, c_b, m):
    """b_m = i / (2 lam c_b sin^m s) int_0^s sin^(m-1) E: the solution regular at the source."""
    if grid.s_a != 0.0:
        raise ConfigInvalid("incident transport needs a grid starting at the source")
    if m < 1:
        raise ConfigInvalid("amplitude order must be >= 1")
    K = grid.incident_transport_matrix(m)
    return 1j / (2.0 * lam * c_b) * (K @ np.asarray(E, dtype=complex))


def transport_offset_values(grid, E, lam, c_b, m, s0, C):
    """b_m = i / (2 lam c_b sin^m s) [int_{s0}^s sin^(m-1) E + C], per theta column."""
    S = grid.s[:, None]
    integrand = np.sin(S) ** (m - 1) * np.asarray(E, dtype=complex)
    F = grid.antiderivative(integrand)
    F0 = grid.antiderivative_at(integrand, s0)
    return 1j / (2.0 * lam * c_b * np.sin(S) ** m) * (F - F0[None, :] + np.asarray(C)[None, :])


def transport_step_incident(d, lam, c_speed, delta_ant=0.1):
    """Amplitude of order d.order - 1 solving away the error d along geodesics from the source.

    At s = 0 the value is the finite limit i d(0) / (2 lam c (j - 1)).
    """
    grid = d.grid
    if grid.s_b > np.pi - delta_ant + 1e-12:
        raise AntipodeProximity("incident transport grid reaches the antipodal disk")
    j = d.order
    if j < 2:
        raise ConfigInvalid("error order must be >= 2")
    vals = transport_incident_values(grid, d.values, lam, c_speed, j - 1)
    return SphericalAmplitude(INCIDENT, j - 1, vals, grid.source, "exp(i lam z.w / c)", grid)


def transport_step_offset(d, lam, c_speed, s0, C, delta_ant=0.1, branch=REFLECTED):
    """Amplitude of order d.order - 1 with initial data C at the equator crossing s0."""
    grid = d.grid
    if grid.s_b > np.pi - delta_ant + 1e-12:
        raise AntipodeProximity("offset transport grid reaches the antipodal disk")
    j = d.order
    vals = transport_offset_values(grid, d.values, lam, c_speed, j - 1, s0, C)
    return SphericalAmplitude(branch, j - 1, vals, grid.source, "", grid)


def incident_limit_at_source(d0, lam, c_speed, j):
    """Limit of the incident transport solution at s = 0."""
    return 1j * d0 / (2.0 * lam * c_speed * (j - 1))
