"""Sound-speed profiles, the perturbation's expansion at infinity, and the effective potential."""

from dataclasses import dataclass, field

import numpy as np

from . import harmonics
from .errors import BelowExpansionRadius, ConfigInvalid, EquatorialEvaluation

UPPER = "upper"
LOWER = "lower"


@dataclass(frozen=True)
class Layer:
    y_lo: float
    y_hi: float
    coeffs: tuple  # speed(y) = sum_i coeffs[i] * y**i

    @property
    def is_constant(self):
        return all(c == 0.0 for c in self.coeffs[1:])

    def speed(self, y):
        return np.polynomial.polynomial.polyval(y, np.asarray(self.coeffs, dtype=float))

    def extrema(self):
        """Min and max of the speed over the closed layer."""
        c = np.asarray(self.coeffs, dtype=float)
        pts = [self.y_lo, self.y_hi]
        if len(c) > 2:
            for r in np.polynomial.polynomial.polyroots(np.polynomial.polynomial.polyder(c)):
                if abs(r.imag) < 1e-12 and self.y_lo < r.real < self.y_hi:
                    pts.append(r.real)
        vals = self.speed(np.array(pts))
        return float(vals.min()), float(vals.max())


@dataclass(frozen=True)
class StratifiedProfile:
    """Piecewise-polynomial background speed c0(y), constant outside [-y_M, y_M].

    ``strict=False`` skips the ``c_minus >= c_plus`` requirement; it is used for
    the mirrored profiles that describe incidence from below.
    """

    layers: tuple
    c_plus: float
    c_minus: float
    y_M: float
    c_m: float = None
    c_M: float = None
    strict: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        layers = tuple(sorted((l if isinstance(l, Layer) else Layer(*l) for l in self.layers),
                              key=lambda l: l.y_lo))
        object.__setattr__(self, "layers", layers)
        if self.y_M <= 0:
            raise ConfigInvalid("y_M must be positive")
        if self.c_plus <= 0 or self.c_minus <= 0:
            raise ConfigInvalid("limiting speeds must be positive")
        if self.strict and self.c_minus < self.c_plus:
            raise ConfigInvalid("c_minus >= c_plus required")
        if layers:
            if not np.isclose(layers[0].y_lo, -self.y_M) or not np.isclose(layers[-1].y_hi, self.y_M):
                raise ConfigInvalid("layers must cover [-y_M, y_M]")
            for a, b in zip(layers[:-1], layers[1:]):
                if not np.isclose(a.y_hi, b.y_lo):
                    raise ConfigInvalid(f"layer gap/overlap at y={a.y_hi}")
            for l in layers:
                if l.y_hi <= l.y_lo:
                    raise ConfigInvalid("empty layer")
        lo, hi = self._range()
        if lo <= 0:
            raise ConfigInvalid("speed must stay positive")
        if self.c_m is None:
            object.__setattr__(self, "c_m", lo)
        if self.c_M is None:
            object.__setattr__(self, "c_M", hi)
        if not (0 < self.c_m <= lo + 1e-14 and hi <= self.c_M + 1e-14):
            raise ConfigInvalid(f"speed range [{lo}, {hi}] outside declared bounds [{self.c_m}, {self.c_M}]")

    @classmethod
    def constant(cls, c, y_M=1.0):
        return cls(layers=(Layer(-y_M, y_M, (float(c),)),), c_plus=c, c_minus=c, y_M=y_M)

    @classmethod
    def piecewise_constant(cls, interfaces, speeds, c_plus, c_minus, **kw):
        """Layers between sorted ``interfaces`` (first = -y_M, last = y_M)."""
        interfaces = [float(v) for v in interfaces]
        if len(speeds) != len(interfaces) - 1:
            raise ConfigInvalid("need one speed per interval")
        layers = tuple(Layer(a, b, (float(c),)) for a, b, c in zip(interfaces[:-1], interfaces[1:], speeds))
        return cls(layers=layers, c_plus=c_plus, c_minus=c_minus, y_M=interfaces[-1], **kw)

    def _range(self):
        vals = [self.c_plus, self.c_minus]
        for l in self.layers:
            vals.extend(l.extrema())
        return min(vals), max(vals)

    @property
    def breakpoints(self):
        return np.array([l.y_lo for l in self.layers] + [self.layers[-1].y_hi])

    @property
    def is_piecewise_constant(self):
        return all(l.is_constant for l in self.layers)

    def speed(self, y):
        """c0(y); exact limiting speeds outside [-y_M, y_M]."""
        y = np.asarray(y, dtype=float)
        out = np.where(y > self.y_M, self.c_plus, self.c_minus).astype(float)
        for i, l in enumerate(self.layers):
            last = i == len(self.layers) - 1
            mask = (y >= l.y_lo) & ((y <= l.y_hi) if last else (y < l.y_hi))
            if np.any(mask):
                out = np.where(mask, l.speed(y), out)
        return out if out.ndim else float(out)

    def mirrored(self):
        """Profile of c0(-y); limits swap."""
        layers = []
        for l in reversed(self.layers):
            c = np.asarray(l.coeffs, dtype=float) * (-1.0) ** np.arange(len(l.coeffs))
            layers.append(Layer(-l.y_hi, -l.y_lo, tuple(c)))
        return StratifiedProfile(tuple(layers), c_plus=self.c_minus, c_minus=self.c_plus,
                                 y_M=self.y_M, c_m=self.c_m, c_M=self.c_M, strict=False)

    def critical_omega_n(self):
        return float(np.sqrt(max(0.0, 1.0 - self.c_plus**2 / self.c_minus**2)))


def eval_c0(profile, y):
    return profile.speed(y)


@dataclass(frozen=True)
class AngularTerm:
    order: int
    hemisphere: str
    coeffs: np.ndarray = field(compare=False)

    def __post_init__(self):
        if self.hemisphere not in (UPPER, LOWER):
            raise ConfigInvalid(f"hemisphere must be 'upper' or 'lower', got {self.hemisphere!r}")
        c = np.asarray(self.coeffs, dtype=float)
        harmonics.band_limit_of(c.size)
        object.__setattr__(self, "coeffs", c)

    @property
    def band_limit(self):
        return harmonics.band_limit_of(self.coeffs.size)

    def sup_bound(self):
        """Crude sup-norm bound: sum |a_lm| * sup|Y_lm| <= sum |a_lm| sqrt((2l+1)/4pi)."""
        deg = harmonics.degrees(self.band_limit)
        return float(np.sum(np.abs(self.coeffs) * np.sqrt((2 * deg + 1) / (4 * np.pi))))


@dataclass(frozen=True)
class PerturbationExpansion:
    """c - c0 ~ sum_j gamma_j(z/|z|) |z|^{-j}, each gamma_j tabulated per hemisphere."""

    J: int
    terms: tuple = ()
    n: int = 3
    r0: float = None
    delta_eq: float = 0.05
    truncation: int = None

    def __post_init__(self):
        terms = tuple(t if isinstance(t, AngularTerm) else AngularTerm(**t) for t in self.terms)
        object.__setattr__(self, "terms", terms)
        if self.J < 2:
            raise ConfigInvalid("J >= 2 required")
        if self.n != 3:
            raise ConfigInvalid("only n = 3 is implemented")
        for t in terms:
            if t.order < self.J:
                raise ConfigInvalid(f"term of order {t.order} below leading order J={self.J}")
        if not 0 < self.delta_eq < 0.5:
            raise ConfigInvalid("delta_eq must lie in (0, 0.5)")

    @property
    def orders(self):
        return sorted({t.order for t in self.terms})

    @property
    def max_order(self):
        N = self.truncation
        if N is None:
            N = max(self.orders, default=self.J)
        return N

    def expansion_radius(self, profile):
        return self.r0 if self.r0 is not None else 10.0 * profile.y_M

    def gamma(self, order, directions, side=None):
        """gamma_order at unit directions.

        ``side`` forces the hemisphere table (``"upper"``/``"lower"``) — used for
        one-sided limits at the equator; by default the sign of the vertical
        component selects it.
        """
        d = np.asarray(directions, dtype=float)
        out = np.zeros(d.shape[:-1])
        for t in self.terms:
            if t.order != order:
                continue
            vals = harmonics.evaluate(t.coeffs, d)
            if side is None:
                mask = d[..., 2] > 0 if t.hemisphere == UPPER else d[..., 2] < 0
                out = out + np.where(mask, vals, 0.0)
            elif side == t.hemisphere:
                out = out + vals
        return out

    def with_terms(self, terms):
        return PerturbationExpansion(J=self.J, terms=tuple(terms), n=self.n, r0=self.r0,
                                     delta_eq=self.delta_eq, truncation=self.truncation)


def _increment(profile, perturbation, z, N, check_radius):
    """c0(y) and c - c0 at z."""
    z = np.asarray(z, dtype=float)
    r = np.linalg.norm(z, axis=-1)
    y = z[..., 2]
    c0 = profile.speed(y)
    N = perturbation.max_order if N is None else N
    active = [o for o in perturbation.orders if o <= N]
    dc = np.zeros(np.shape(r))
    if not active:
        return c0, dc
    if np.any(y == 0.0):
        raise EquatorialEvaluation("expansion undefined on y = 0")
    if check_radius and np.any(r < perturbation.expansion_radius(profile)):
        raise BelowExpansionRadius(f"|z| below expansion radius {perturbation.expansion_radius(profile)}")
    theta = z / r[..., None]
    for o in active:
        dc = dc + perturbation.gamma(o, theta) * r ** (-float(o))
    return c0, dc


def eval_c(profile, perturbation, z, N=None, check_radius=True):
    """c(z) = c0(y) + sum_{j=J}^{N} gamma_j(z/|z|) |z|^{-j}."""
    c0, dc = _increment(profile, perturbation, z, N, check_radius)
    return c0 + dc


@dataclass(frozen=True)
class EffectivePotential:
    profile: StratifiedProfile
    perturbation: PerturbationExpansion
    lam: float


def eval_V(pot, z, **kw):
    """V = lam^2 (c^-2 - c0^-2), written as -lam^2 (c - c0)(c + c0) / (c c0)^2 to avoid cancellation."""
    z = np.asarray(z, dtype=float)
    if pot.lam == 0:
        return np.zeros(z.shape[:-1])
    c0, dc = _increment(pot.profile, pot.perturbation, z, kw.get("N"), kw.get("check_radius", True))
    c = c0 + dc
    return -(pot.lam**2) * dc * (c + c0) / (c * c0) ** 2


def _series_mul(a, b, K):
    out = np.zeros((K + 1,) + np.broadcast_shapes(a.shape[1:], b.shape[1:]), dtype=np.result_type(a, b))
    for i in range(min(K + 1, a.shape[0])):
        if not np.any(a[i]):
            continue
        for j in range(min(K + 1 - i, b.shape[0])):
            out[i + j] = out[i + j] + a[i] * b[j]
    return out


def perturbation_series(perturbation, directions, K, side=None):
    """Array p[k] = coefficient of |z|^{-k} in c - c0, k = 0..K, at the given directions."""
    d = np.asarray(directions, dtype=float)
    p = np.zeros((K + 1,) + d.shape[:-1])
    for o in perturbation.orders:
        if o <= min(K, perturbation.max_order):
            p[o] = perturbation.gamma(o, d, side=side)
    return p


def speed_squared_series(p, c_b, K):
    """Coefficients of |z|^{-k} in c^2 - c_b^2 where c = c_b + sum_k p[k]|z|^{-k}."""
    return 2.0 * c_b * p[: K + 1] + _series_mul(p, p, K)


def potential_series(p, c_b, lam, K):
    """Coefficients of |z|^{-k} in lam^2 (c^-2 - c_b^-2), from the binomial series of (1+u)^-2."""
    u = p[: K + 1] / c_b
    total = np.zeros_like(u)
    power = np.zeros_like(u)
    power[0] = 1.0
    for m in range(1, K + 1):
        power = _series_mul(power, u, K)
        if not np.any(power):
            break
        total = total + (-1.0) ** m * (m + 1) * power
    return lam**2 / c_b**2 * total


def validate_hypotheses(profile, perturbation, hypothesis):
    """List the violated clauses of the standing assumptions; empty means admissible."""
    report = []
    if not 0 < profile.c_m <= profile.c_M:
        report.append("0 < c_m <= c_M required")
    lo, hi = profile._range()
    if lo < profile.c_m or hi > profile.c_M:
        report.append("c0 leaves [c_m, c_M]")
    if profile.c_minus < profile.c_plus:
        report.append("c_- >= c_+ required")
    if perturbation.J < 2:
        report.append("J >= 2 required")
    if hypothesis == "H1":
        if perturbation.J != 2:
            report.append("J = 2 required")
        if profile.c_plus != profile.c_minus:
            report.append("c_+ = c_- required")
        if not _is_smooth(profile):
            report.append("smooth c0 required")
    elif hypothesis == "H2":
        if perturbation.J < 4:
            report.append("J >= 4 required")
    else:
        report.append(f"unknown hypothesis {hypothesis!r}")
    return report


def _is_smooth(profile):
    """True when c0 is continuous with continuous derivatives of all orders at every breakpoint."""
    pts = list(profile.breakpoints)
    pieces = [np.array([profile.c_minus])] + [np.asarray(l.coeffs, float) for l in profile.layers] + [np.array([profile.c_plus])]
    P = np.polynomial.polynomial
    for y, a, b in zip(pts, pieces[:-1], pieces[1:]):
        da, db = a, b
        for _ in range(max(len(a), len(b)) + 1):
            if not np.isclose(P.polyval(y, da), P.polyval(y, db), rtol=1e-12, atol=1e-12):
                return False
            da, db = P.polyder(da), P.polyder(db)
            if da.size == 0:
                da = np.array([0.0])
            if db.size == 0:
                db = np.array([0.0])
    return True
