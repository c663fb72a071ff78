"""Scattering-symbol data, leading-symbol extraction and layer stripping.

Symbol model. For an incident direction omega and a direction theta_tilde at
omega, the order-k symbol of the transmitted (or reflected) part is

    S_k(omega, theta_tilde) = P(omega_n) * K * I_k[U_k](omega, theta_tilde),

where U_k is the |z|^-k coefficient of U = lam^2 (c0^-2 - c^-2), I_k the
weighted half-geodesic integral, P the plane-wave prefactor (T_+ or R_+ on the
incidence side) and K = i c / (2 lam) the transport constant. K is calibrated
by running the geodesic transport on a planted single layer.

Symbols are stored on circle families (see :mod:`stratscat.inverse.rays`):
the sample (c, j) is the half-geodesic that starts at p_c(t_j) and follows the
great circle with pole c.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from .. import harmonics, spectral1d
from ..errors import ConfigInvalid, SteplikeUnsupported, VanishingCoefficient
from ..geometry import DELTA_BAND, normalize
from ..media import AngularTerm, PerturbationExpansion, perturbation_series, potential_series
from ..parametrix.sphere_grid import GeodesicGrid
from ..parametrix.transport import constant_fields, error_from_fields, g_series
from .rays import (
    AngularLayer,
    RayIntegralData,
    circle_points,
    equatorial_odd_integrals,
    full_circle_integrals,
    funk_invert_even,
    pole_grid,
    ray_family,
    recover_odd_part,
    reduce_to_base,
)

TRANSMITTED_MODE = "transmitted"
REFLECTED_MODE = "reflected"


@dataclass
class ScatteringSymbolData:
    lam: float
    mode: str
    poles: np.ndarray
    weights: np.ndarray
    n_t: int
    orders: dict = field(default_factory=dict)  # k -> complex (n_c, n_t)
    prefactor_tag: str = "T+"
    calibration: complex = None

    @property
    def t(self):
        return 2.0 * np.pi * np.arange(self.n_t) / self.n_t

    def starts(self):
        return circle_points(self.poles, self.t)

    def minus(self, other):
        out = ScatteringSymbolData(self.lam, self.mode, self.poles, self.weights, self.n_t, {},
                                   self.prefactor_tag, self.calibration)
        for k, v in self.orders.items():
            out.orders[k] = v - other.orders.get(k, 0.0)
        return out


def _check_mode(profile, mode):
    if mode == TRANSMITTED_MODE:
        if profile.c_plus != profile.c_minus:
            raise SteplikeUnsupported("transmitted symbols are used only when c_+ = c_-")
    elif mode == REFLECTED_MODE:
        if not profile.c_plus < profile.c_minus:
            raise ConfigInvalid("reflected symbols are used when c_+ < c_-")
    else:
        raise ConfigInvalid(f"unknown mode {mode!r}")


def transport_constant(profile, lam):
    return 1j * profile.c_plus / (2.0 * lam)


class PrefactorTable:
    """Plane-wave prefactor P(omega_n): T_+ / T_- (transmitted) or R_+ (reflected).

    Tabulated on Chebyshev points in [delta, 1] per side and interpolated; both
    synthesis and extraction use the same table.
    """

    def __init__(self, profile, lam, mode, delta=DELTA_BAND, n=96):
        _check_mode(profile, mode)
        self.mode, self.delta = mode, delta
        k = np.arange(n)
        x = 0.5 * (1 + delta) + 0.5 * (1 - delta) * np.cos(np.pi * (k + 0.5) / n)
        self.crit = profile.critical_omega_n() if profile.c_minus > profile.c_plus else None
        up, down = [], []
        for wn in x:
            if mode == TRANSMITTED_MODE:
                up.append(spectral1d.solve_phi_plus(profile, lam, wn)[0].T)
                down.append(spectral1d.solve_phi_minus(profile, lam, wn)[0].T)
            else:
                rt = spectral1d.solve_phi_plus(profile, lam, wn, check_critical=False)[0]
                up.append(rt.R)
                down.append(rt.R)
        # closed-form weights for Chebyshev points of the first kind
        bw = (-1.0) ** k * np.sin(np.pi * (k + 0.5) / n)
        self._up = BarycentricInterpolator(x, np.array(up), wi=bw)
        self._down = BarycentricInterpolator(x, np.array(down), wi=bw)
        self.tag = "T+" if mode == TRANSMITTED_MODE else "R+"

    def __call__(self, wn):
        wn = np.asarray(wn, dtype=float)
        a = np.clip(np.abs(wn), self.delta, 1.0)
        out = np.where(wn > 0, self._up(a), self._down(a))
        return out

    def masked(self, wn):
        """Samples inside the equatorial (or critical) band."""
        wn = np.abs(np.asarray(wn, dtype=float))
        m = wn < self.delta
        if self.crit is not None:
            m |= np.abs(wn - self.crit) < self.delta
        return m


def potential_layer(profile, perturbation, lam, k, folded=False):
    """U_k as a function of direction; the hemisphere selects the table and c_+/c_-.

    With ``folded`` only the upper table is used, evaluated at (phi_bar, |phi_n|).
    """

    def U(d):
        d = np.array(d, dtype=float, copy=True)
        if folded:
            d[..., -1] = np.abs(d[..., -1])
        up = d[..., -1] >= 0
        out = np.zeros(d.shape[:-1])
        for side, c_b, mask in (("upper", profile.c_plus, up), ("lower", profile.c_minus, ~up)):
            if not np.any(mask):
                continue
            p = perturbation_series(perturbation, d[mask], k, side=side)
            out[mask] = -potential_series(p, c_b, lam, k)[k]
        return out

    return U


def symbol_grid(band_limit, n_t=64, extra=4):
    poles, weights = pole_grid(band_limit, extra)
    return poles, weights, n_t


def synthesize_symbols(profile, perturbation, lam, orders, grid, mode=TRANSMITTED_MODE, prefactors=None,
                       calibration=None):
    """Forward symbol tables S_k for the given perturbation on a circle-family grid."""
    poles, weights, n_t = grid
    prefactors = prefactors or PrefactorTable(profile, lam, mode)
    K = transport_constant(profile, lam) if calibration is None else calibration
    data = ScatteringSymbolData(lam, mode, poles, weights, n_t, {}, prefactors.tag, K)
    wn = data.starts()[..., 2]
    P = prefactors(wn)
    for k in orders:
        if not perturbation.terms:
            data.orders[k] = np.zeros((len(poles), n_t), dtype=complex)
            continue
        U = potential_layer(profile, perturbation, lam, k, folded=(mode == REFLECTED_MODE))
        data.orders[k] = P * K * ray_family(U, poles, n_t, k)
    return data


def leading_symbol_from_transport(profile, perturbation, lam, omega, k, n_s=128, n_theta=64, mode=TRANSMITTED_MODE):
    """Order-k symbol at one incident direction from the geodesic transport itself.

    The amplitude of order k - 1 solving away the order-k error of the bare
    ansatz is i / (2 lam c sin^(k-1) s) int_0^s sin^(k-2) E_k; its antipodal
    symbol is the s -> pi limit of sin^(k-1) s times it, multiplied by the
    plane-wave prefactor. Returns (theta_tilde, symbol).
    """
    omega = normalize(omega)
    c = profile.c_plus
    grid = GeodesicGrid(omega, (0.0, np.pi), n_s, n_theta)
    dirs = grid.directions()
    if mode == REFLECTED_MODE:
        dirs = dirs.copy()
        dirs[..., -1] = np.abs(dirs[..., -1])
    gam = {j: perturbation.gamma(j, dirs, side="upper" if mode == REFLECTED_MODE else None)
           for j in perturbation.orders if j <= k}
    g = g_series(gam, c, k)
    S = grid.mesh()[0]
    E = error_from_fields(k, {0: constant_fields(1.0, grid.shape)}, g, S, lam, c, n=perturbation.n)
    integral = grid.antiderivative_at(np.sin(S) ** (k - 2) * E, np.full(n_theta, np.pi))
    table = PrefactorTable(profile, lam, mode)
    return grid.theta, table(omega[-1]) * 1j / (2.0 * lam * c) * integral


def calibrate(profile, lam, k=4, band_limit=2, seed=0, mode=TRANSMITTED_MODE):
    """Transport constant measured on a planted single layer against the ray-integral model."""
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=harmonics.n_coeffs(band_limit))
    coeffs[0] += 2.0
    terms = [AngularTerm(k, "upper", coeffs)]
    if mode == TRANSMITTED_MODE:
        terms.append(AngularTerm(k, "lower", coeffs))
    pert = PerturbationExpansion(J=k, terms=tuple(terms))
    omega = normalize(np.array([0.3, 0.2, 0.9]))
    theta, sym = leading_symbol_from_transport(profile, pert, lam, omega, k, mode=mode)
    from .rays import weighted_ray_integral

    U = potential_layer(profile, pert, lam, k, folded=(mode == REFLECTED_MODE))
    ray = weighted_ray_integral(U, omega, theta, k)
    table = PrefactorTable(profile, lam, mode)
    ratio = sym / (table(omega[-1]) * ray)
    return complex(np.median(ratio.real) + 1j * np.median(ratio.imag))


def fill_masked(values, mask, degree):
    """Replace masked samples of each circle by a least-squares trigonometric fit of the rest.

    Unmasked samples are returned unchanged.
    """
    values = np.array(values, copy=True)
    n_t = values.shape[1]
    t = 2.0 * np.pi * np.arange(n_t) / n_t
    freqs = np.arange(-degree, degree + 1)
    basis = np.exp(1j * np.outer(t, freqs))
    for c in range(values.shape[0]):
        m = mask[c]
        if not np.any(m):
            continue
        if np.sum(~m) < 2 * degree + 2:
            raise VanishingCoefficient("too few usable samples on a circle to fill masked points")
        coef, *_ = np.linalg.lstsq(basis[~m], values[c, ~m], rcond=None)
        values[c, m] = basis[m] @ coef
    return values


def extract_leading_symbol(symbols, k, prefactors, fill_degree=None, divisor_tol=1e-10):
    """Ray data I_k = S_k / (P(omega_n) K) with banded or vanishing divisors masked and filled."""
    S = symbols.orders[k]
    wn = symbols.starts()[..., 2]
    P = prefactors(wn) * symbols.calibration
    mask = prefactors.masked(wn) | (np.abs(P) < divisor_tol)
    with np.errstate(divide="ignore", invalid="ignore"):
        I = np.where(mask, 0.0, S / np.where(mask, 1.0, P))
    fill_degree = fill_degree or symbols.n_t // 4
    I = fill_masked(I, mask, fill_degree)
    return RayIntegralData(k, symbols.poles, symbols.weights, I, mask)


@dataclass
class StripResult:
    layers: list
    perturbation: PerturbationExpansion
    residuals: dict
    status: str
    halted_at: int = None
    imag_parts: dict = field(default_factory=dict)


def invert_layer(data, band_limit, delta_eq=0.05):
    """W_{-k} from ray data: even part through the Funk transform (k even), odd part otherwise."""
    base = reduce_to_base(data)
    if data.order % 2 == 0:
        G = full_circle_integrals(base)
        re = funk_invert_even(G.real, data.poles, data.weights, band_limit)
        im = funk_invert_even(G.imag, data.poles, data.weights, band_limit)
    else:
        Q = equatorial_odd_integrals(base)
        re = recover_odd_part(Q.real, data.poles, data.weights, band_limit, delta_eq)
        im = recover_odd_part(Q.imag, data.poles, data.weights, band_limit, delta_eq)
    return re, im


def layer_strip(symbols, profile, lam, orders, J=None, band_limit=8, mode=None, prefactors=None,
                delta_eq=0.05, tol=1e-6):
    """Recover gamma_k order by order from symbol differences against the bare background.

    At each k the symbol of the perturbation recovered so far is resynthesized
    and subtracted; the remainder is converted to ray data, inverted, and the
    new layer is linearized into gamma_k = c^3 W_{-k} / (2 lam^2).
    """
    mode = mode or symbols.mode
    orders = list(orders)
    J = orders[0] if J is None else J
    prefactors = prefactors or PrefactorTable(profile, lam, mode)
    grid = (symbols.poles, symbols.weights, symbols.n_t)
    terms, layers, residuals, imag = [], [], {}, {}
    status, halted = "ok", None
    c = profile.c_plus
    for k in orders:
        current = PerturbationExpansion(J=J, terms=tuple(terms))
        model = synthesize_symbols(profile, current, lam, [k], grid, mode, prefactors, symbols.calibration)
        diff = ScatteringSymbolData(lam, mode, symbols.poles, symbols.weights, symbols.n_t,
                                    {k: symbols.orders[k] - model.orders[k]}, symbols.prefactor_tag,
                                    symbols.calibration)
        data = extract_leading_symbol(diff, k, prefactors, fill_degree=min(band_limit + 4, symbols.n_t // 2 - 2))
        W_re, W_im = invert_layer(data, band_limit, delta_eq)
        imag[k] = float(np.linalg.norm(W_im) / max(np.linalg.norm(W_re), 1e-300))
        layers.append(AngularLayer(k, W_re))
        gamma = W_re * c**3 / (2.0 * lam**2)
        terms.append(AngularTerm(k, "upper", gamma))
        if mode == TRANSMITTED_MODE:
            terms.append(AngularTerm(k, "lower", gamma))
        updated = PerturbationExpansion(J=J, terms=tuple(terms))
        check = synthesize_symbols(profile, updated, lam, [k], grid, mode, prefactors, symbols.calibration)
        ok = ~prefactors.masked(symbols.starts()[..., 2])
        scale = max(np.max(np.abs(symbols.orders[k][ok])), 1e-300)
        residuals[k] = float(np.max(np.abs(symbols.orders[k] - check.orders[k])[ok]) / scale)
        if residuals[k] > tol:
            status, halted = "halted", k
            break
    return StripResult(layers, PerturbationExpansion(J=J, terms=tuple(terms)), residuals, status, halted, imag)


def recovered_gamma(result, k, side="upper"):
    """Summed gamma_k table of a strip result (zeros if order k was not reached)."""
    tabs = [t.coeffs for t in result.perturbation.terms if t.order == k and t.hemisphere == side]
    return np.sum(tabs, axis=0) if tabs else None


def recoverable_slots(band_limit, k, mode=TRANSMITTED_MODE):
    """Mask of the coefficient slots a single order-k inversion determines.

    Even k recovers even degrees and odd k odd degrees; reflected data see the
    fold of the upper table, which keeps only even l with even m.
    """
    l = harmonics.degrees(band_limit)
    m = np.concatenate([np.arange(-d, d + 1) for d in range(band_limit + 1)])
    keep = l % 2 == k % 2
    if mode == REFLECTED_MODE:
        keep = (l % 2 == 0) & (m % 2 == 0)
    return keep
