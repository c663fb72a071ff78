"""Real spherical harmonics on S^2 with the polar axis along the last (vertical) coordinate.

Coefficient tables are flat arrays indexed ``l*l + l + m`` for ``0 <= l <= L``,
``-l <= m <= l``. The basis is orthonormal on the unit sphere.
"""

import numpy as np


def n_coeffs(band_limit):
    return (band_limit + 1) ** 2


def sh_index(l, m):
    return l * l + l + m


def band_limit_of(n):
    L = int(round(np.sqrt(n))) - 1
    if (L + 1) ** 2 != n:
        raise ValueError(f"coefficient count {n} is not a perfect square")
    return L


def degrees(band_limit):
    """Degree l of each flat coefficient slot."""
    return np.concatenate([np.full(2 * l + 1, l) for l in range(band_limit + 1)])


def _normalized_legendre(band_limit, x):
    """Fully normalized associated Legendre values P[l, m] (m >= 0), shape (L+1, L+1, npts)."""
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    L = band_limit
    P = np.zeros((L + 1, L + 1) + x.shape)
    P[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, L + 1):
        P[m, m] = np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * P[m - 1, m - 1]
    for m in range(0, L):
        P[m + 1, m] = np.sqrt(2.0 * m + 3.0) * x * P[m, m]
    for m in range(0, L + 1):
        for l in range(m + 2, L + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
    return P


def basis_matrix(band_limit, directions):
    """Evaluate every real harmonic up to ``band_limit`` at unit vectors.

    Returns an array of shape ``directions.shape[:-1] + ((L+1)**2,)``.
    """
    d = np.asarray(directions, dtype=float)
    lead = d.shape[:-1]
    d = d.reshape(-1, 3)
    x = np.clip(d[:, 2], -1.0, 1.0)
    phi = np.arctan2(d[:, 1], d[:, 0])
    P = _normalized_legendre(band_limit, x)
    out = np.empty((d.shape[0], n_coeffs(band_limit)))
    root2 = np.sqrt(2.0)
    for l in range(band_limit + 1):
        out[:, sh_index(l, 0)] = P[l, 0]
        for m in range(1, l + 1):
            out[:, sh_index(l, m)] = root2 * P[l, m] * np.cos(m * phi)
            out[:, sh_index(l, -m)] = root2 * P[l, m] * np.sin(m * phi)
    return out.reshape(lead + (out.shape[1],))


def evaluate(coeffs, directions):
    coeffs = np.asarray(coeffs)
    L = band_limit_of(coeffs.shape[-1])
    return basis_matrix(L, directions) @ coeffs


def sphere_quadrature(n_polar, n_azimuth=None):
    """Gauss-Legendre in the vertical component times a uniform azimuth grid.

    Exact for harmonics of degree < min(2*n_polar, n_azimuth). Returns
    ``(directions, weights)`` with directions of shape ``(n_polar*n_azimuth, 3)``.
    """
    if n_azimuth is None:
        n_azimuth = 2 * n_polar
    x, w = np.polynomial.legendre.leggauss(n_polar)
    phi = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
    X, PHI = np.meshgrid(x, phi, indexing="ij")
    W = np.repeat(w[:, None] * (2.0 * np.pi / n_azimuth), n_azimuth, axis=1)
    s = np.sqrt(1.0 - X**2)
    dirs = np.stack([s * np.cos(PHI), s * np.sin(PHI), X], axis=-1)
    return dirs.reshape(-1, 3), W.ravel()


def project(values, directions, weights, band_limit):
    """Quadrature projection onto the real harmonic basis."""
    B = basis_matrix(band_limit, directions)
    return B.T @ (np.asarray(weights) * np.asarray(values))


def fit(values, directions, band_limit, parity=None, rcond=1e-12):
    """Least-squares harmonic coefficients from scattered samples.

    ``parity`` restricts the fit to ``"even"`` or ``"odd"`` degrees; the other
    slots are returned as zero.
    """
    B = basis_matrix(band_limit, directions)
    deg = degrees(band_limit)
    if parity == "even":
        keep = deg % 2 == 0
    elif parity == "odd":
        keep = deg % 2 == 1
    else:
        keep = np.ones(deg.shape, dtype=bool)
    sol, *_ = np.linalg.lstsq(B[:, keep], np.asarray(values), rcond=rcond)
    out = np.zeros(B.shape[1], dtype=sol.dtype)
    out[keep] = sol
    return out


def parity_split(coeffs):
    """Split a table into its even-degree and odd-degree parts."""
    coeffs = np.asarray(coeffs)
    deg = degrees(band_limit_of(coeffs.shape[-1]))
    even = np.where(deg % 2 == 0, coeffs, 0.0)
    return even, coeffs - even
