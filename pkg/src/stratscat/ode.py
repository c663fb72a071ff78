"""Layered solvers for u'' = P(y) u (+ source) with P(y) = a - b / c0(y)^2.

Two tools share this module:

* transfer matrices, exact on constant layers and fourth-order Magnus on
  polynomial layers, broadcast over arrays of (a, b);
* piecewise Chebyshev-Lobatto collocation for forced boundary-value problems
  with Robin end conditions and C^1 interface conditions.
"""

import numpy as np
from scipy.interpolate import BarycentricInterpolator

_GL2 = np.array([0.5 - np.sqrt(3.0) / 6.0, 0.5 + np.sqrt(3.0) / 6.0])


def _slowness_sq(layer, y):
    return 1.0 / layer.speed(y) ** 2


def _const_transfer(P, h):
    """Exact propagator of u'' = P u over a step h; P broadcastable."""
    P = np.asarray(P, dtype=complex)
    s = np.sqrt(P)
    sh = s * h
    small = np.abs(sh) < 1e-8
    safe = np.where(small, 1.0, s)
    ch = np.cosh(sh)
    shs = np.where(small, h * (1.0 + P * h * h / 6.0), np.sinh(sh) / safe)
    out = np.empty(P.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = ch
    out[..., 0, 1] = shs
    out[..., 1, 0] = P * shs
    out[..., 1, 1] = ch
    return out


def _expm_traceless(O):
    """exp of traceless 2x2 matrices: cosh(d) I + sinh(d)/d O with d^2 = -det O."""
    d2 = -(O[..., 0, 0] * O[..., 1, 1] - O[..., 0, 1] * O[..., 1, 0])
    d = np.sqrt(d2.astype(complex))
    small = np.abs(d) < 1e-8
    ratio = np.where(small, 1.0 + d2 / 6.0, np.sinh(d) / np.where(small, 1.0, d))
    out = ratio[..., None, None] * O
    c = np.cosh(d)
    out[..., 0, 0] += c
    out[..., 1, 1] += c
    return out


def _magnus_step(layer, a, b, y0, h):
    w = _slowness_sq(layer, y0 + _GL2 * h)
    P1 = a - b * w[0]
    P2 = a - b * w[1]
    shape = np.broadcast(P1, P2).shape
    O = np.zeros(shape + (2, 2), dtype=complex)
    # A(y) = [[0, 1], [P, 0]]; [A2, A1] = diag(P1 - P2, P2 - P1)
    O[..., 0, 1] = h
    O[..., 1, 0] = 0.5 * h * (P1 + P2)
    k = np.sqrt(3.0) * h * h / 12.0 * (P1 - P2)
    O[..., 0, 0] = k
    O[..., 1, 1] = -k
    return _expm_traceless(O)


def _n_substeps(layer, a, b, h):
    ys = np.linspace(layer.y_lo, layer.y_hi, 9)
    pmax = np.max(np.abs(np.asarray(a)[..., None] - np.asarray(b)[..., None] / layer.speed(ys) ** 2))
    return max(4, int(np.ceil(abs(h) * (60.0 * np.sqrt(pmax) + 8.0))))


def layer_transfer(layer, a, b, y0=None, y1=None):
    """Transfer matrix from (u, u') at y0 to y1 inside ``layer`` (defaults: whole layer)."""
    y0 = layer.y_lo if y0 is None else y0
    y1 = layer.y_hi if y1 is None else y1
    a = np.asarray(a)
    b = np.asarray(b)
    h = y1 - y0
    if layer.is_constant:
        return _const_transfer(a - b / layer.coeffs[0] ** 2, h)
    n = _n_substeps(layer, a, b, h)
    step = h / n
    M = None
    for i in range(n):
        S = _magnus_step(layer, a, b, y0 + i * step, step)
        M = S if M is None else S @ M
    return M


def propagate(profile, a, b, state, y_start, y_stop, record=None):
    """Carry the state (u, u') from ``y_start`` to ``y_stop`` (both within [-y_M, y_M]).

    ``state`` has shape ``broadcast(a, b).shape + (2,)``. With ``record`` (sorted
    y-values between start and stop, in travel direction) the intermediate
    states are returned too, shape ``(len(record),) + state.shape``.
    """
    state = np.asarray(state, dtype=complex)
    direction = 1.0 if y_stop >= y_start else -1.0
    bps = profile.breakpoints
    lo, hi = min(y_start, y_stop), max(y_start, y_stop)
    cuts = [y for y in bps if lo < y < hi]
    knots = [y_start] + (cuts if direction > 0 else cuts[::-1]) + [y_stop]
    rec = [] if record is None else list(record)
    out = []
    ri = 0
    for y0, y1 in zip(knots[:-1], knots[1:]):
        mid = 0.5 * (y0 + y1)
        layer = _layer_at(profile, mid)
        ycur = y0
        while ri < len(rec) and (rec[ri] - y1) * direction <= 0:
            M = layer_transfer(layer, a, b, ycur, rec[ri])
            state = np.einsum("...ij,...j->...i", M, state)
            ycur = rec[ri]
            out.append(state)
            ri += 1
        M = layer_transfer(layer, a, b, ycur, y1)
        state = np.einsum("...ij,...j->...i", M, state)
    if record is not None:
        while ri < len(rec):
            out.append(state)
            ri += 1
        return state, np.array(out)
    return state


def _layer_at(profile, y):
    for l in profile.layers:
        if l.y_lo <= y <= l.y_hi:
            return l
    raise ValueError(f"y={y} outside the layered region")


def count_zeros(profile, a, b, state, y_start, y_stop):
    """Propagate a real solution upward and count sign changes of u.

    Counting is exact on constant layers (phase advance for oscillatory
    layers; evanescent solutions vanish at most once) and per substep on
    polynomial layers, which are refined until each substep's phase
    advance is small.
    """
    u = np.array(state, dtype=float)
    zeros = 0
    for layer in profile.layers:
        y0, y1 = max(layer.y_lo, y_start), min(layer.y_hi, y_stop)
        if y1 <= y0:
            continue
        if layer.is_constant:
            P = a - b / layer.coeffs[0] ** 2
            h = y1 - y0
            M = _const_transfer(P, h).real
            new = M @ u
            if P < 0:
                k = np.sqrt(-P)
                # u = A sin(k(y - y0) + phi0): zeros where the phase crosses multiples of pi
                phi0 = np.arctan2(u[0] * k, u[1]) % np.pi
                zeros += int(np.floor((phi0 + k * h) / np.pi))
            elif np.sign(new[0]) != np.sign(u[0]) and new[0] != 0.0:
                zeros += 1  # cosh/sinh combinations vanish at most once
            u = new
        else:
            n = _n_substeps(layer, a, b, y1 - y0)
            step = (y1 - y0) / n
            for i in range(n):
                new = _magnus_step(layer, a, b, y0 + i * step, step).real @ u
                if np.sign(new[0]) != np.sign(u[0]) and new[0] != 0.0:
                    zeros += 1
                u = new
        # keep magnitudes in range without changing signs
        u = u / max(np.abs(u).max(), 1e-300)
    return zeros, u


# ---------------------------------------------------------------- collocation


def cheb_lobatto(n):
    """Nodes x_k = -cos(pi k / (n-1)) ascending on [-1, 1] and the differentiation matrix."""
    N = n - 1
    x = -np.cos(np.pi * np.arange(n) / N)
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c = c * (-1.0) ** np.arange(n)
    X = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (X + np.eye(n))
    D = D - np.diag(D.sum(axis=1))
    return x, D


def clenshaw_curtis_weights(n):
    """Clenshaw-Curtis weights on the Lobatto nodes of ``cheb_lobatto``."""
    N = n - 1
    theta = np.pi * np.arange(n) / N
    w = np.zeros(n)
    v = np.ones(N - 1)
    inner = slice(1, N)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N * N - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(N * theta[inner]) / (N * N - 1)
    else:
        w[0] = w[N] = 1.0 / (N * N)
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2.0 * v / N
    return w


class LayeredGrid:
    """Piecewise Chebyshev-Lobatto grid over segments [y_0, y_1], ..., [y_{K-1}, y_K].

    Interface points appear twice (once per adjacent segment) so one-sided
    values are kept. ``nodes``, ``weights`` and ``segment`` are flat arrays.
    """

    def __init__(self, breakpoints, n=32):
        self.breakpoints = np.asarray(breakpoints, dtype=float)
        K = len(self.breakpoints) - 1
        ns = [n] * K if np.isscalar(n) else list(n)
        self.sizes = ns
        self.offsets = np.concatenate([[0], np.cumsum(ns)])
        nodes, weights, seg, mats = [], [], [], []
        for k in range(K):
            a, b = self.breakpoints[k], self.breakpoints[k + 1]
            x, D = cheb_lobatto(ns[k])
            half = 0.5 * (b - a)
            nodes.append(a + half * (x + 1.0))
            weights.append(half * clenshaw_curtis_weights(ns[k]))
            seg.append(np.full(ns[k], k))
            mats.append(D / half)
        self.nodes = np.concatenate(nodes)
        self.weights = np.concatenate(weights)
        self.segment = np.concatenate(seg)
        self._D = mats

    @property
    def size(self):
        return int(self.offsets[-1])

    def slices(self):
        return [slice(self.offsets[k], self.offsets[k + 1]) for k in range(len(self.sizes))]

    def diff(self, values):
        """Spectral derivative along the first axis, segment by segment."""
        values = np.asarray(values)
        out = np.empty_like(values, dtype=np.result_type(values, float))
        for D, sl in zip(self._D, self.slices()):
            out[sl] = np.tensordot(D, values[sl], axes=(1, 0))
        return out

    def integrate(self, values):
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))

    def interp(self, values, y):
        """Evaluate the piecewise interpolant at points y (inside the grid range)."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        values = np.asarray(values)
        out = np.zeros((y.size,) + values.shape[1:], dtype=values.dtype)
        idx = np.clip(np.searchsorted(self.breakpoints, y, side="right") - 1, 0, len(self.sizes) - 1)
        for k, sl in enumerate(self.slices()):
            m = idx == k
            if np.any(m):
                bw = np.ones(self.sizes[k])
                bw[1::2] = -1.0
                bw[[0, -1]] *= 0.5
                out[m] = BarycentricInterpolator(self.nodes[sl], values[sl], axis=0, wi=bw)(y[m])
        return out

    def matrix_diff(self):
        """Block-diagonal first-derivative matrix."""
        D = np.zeros((self.size, self.size))
        for M, sl in zip(self._D, self.slices()):
            D[sl, sl] = M
        return D


def collocation_system(grid, P, left, right):
    """Matrix of u'' - P u with Robin rows ``alpha u + beta u' `` at both ends and C^1 interfaces.

    ``P`` is sampled on ``grid.nodes``; ``left``/``right`` are (alpha, beta).
    Returns the matrix and the list of interior row indices (where the source goes).
    """
    N = grid.size
    D = grid.matrix_diff()
    D2 = D @ D
    A = (D2 - np.diag(P)).astype(complex)
    interior = []
    sls = grid.slices()
    for k, sl in enumerate(sls):
        interior.extend(range(sl.start + 1, sl.stop - 1))
    A_out = A.copy()
    # segment end rows: Robin at the outer ends, continuity at interfaces
    first, last = sls[0].start, sls[-1].stop - 1
    A_out[first] = left[0] * np.eye(N)[first] + left[1] * D[first]
    A_out[last] = right[0] * np.eye(N)[last] + right[1] * D[last]
    for k in range(len(sls) - 1):
        i_end = sls[k].stop - 1
        i_start = sls[k + 1].start
        A_out[i_end] = np.eye(N)[i_end] - np.eye(N)[i_start]
        A_out[i_start] = D[i_end] - D[i_start]
    return A_out, np.array(interior, dtype=int)


def solve_bvp(grid, P, source, left, right, left_rhs=0.0, right_rhs=0.0, border=None):
    """Solve u'' - P u = source with Robin data at both ends.

    ``source`` may have trailing columns (several right-hand sides sharing P).
    ``left_rhs``/``right_rhs`` broadcast against those columns. ``border`` =
    (v, w) adds a Lagrange multiplier: the equations become
    ``L u + mu v = source`` and ``sum(w * u) = 0``; the multiplier is returned
    as the second output.
    """
    A, interior = collocation_system(grid, P, left, right)
    source = np.asarray(source)
    extra = source.shape[1:]
    rhs = np.zeros((grid.size,) + extra, dtype=complex)
    rhs[interior] = source[interior]
    rhs[0] = left_rhs
    rhs[-1] = right_rhs
    if border is None:
        return np.linalg.solve(A, rhs), None
    v, w = border
    N = grid.size
    B = np.zeros((N + 1, N + 1), dtype=complex)
    B[:N, :N] = A
    vv = np.zeros(N, dtype=complex)
    vv[interior] = np.asarray(v)[interior]
    B[:N, N] = vv
    B[N, :N] = w
    rhs_b = np.zeros((N + 1,) + extra, dtype=complex)
    rhs_b[:N] = rhs
    sol = np.linalg.solve(B, rhs_b)
    return sol[:N], sol[N]


def profile_grid(profile, n=32, lower=None, upper=None, extra_points=()):
    """LayeredGrid over the profile's layers, optionally extended to ``lower``/``upper``."""
    bps = list(profile.breakpoints)
    if lower is not None and lower < bps[0]:
        bps = [lower] + bps
    if upper is not None and upper > bps[-1]:
        bps = bps + [upper]
    bps = sorted(set(bps) | set(extra_points))
    return LayeredGrid(bps, n)


def sample_speed(profile, grid):
    """c0 at grid nodes using the owning segment (one-sided at interfaces)."""
    c = np.empty(grid.size)
    for k, sl in enumerate(grid.slices()):
        mid = 0.5 * (grid.breakpoints[k] + grid.breakpoints[k + 1])
        ys = grid.nodes[sl]
        if mid > profile.y_M:
            c[sl] = profile.c_plus
        elif mid < -profile.y_M:
            c[sl] = profile.c_minus
        else:
            c[sl] = _layer_at(profile, mid).speed(ys)
    return c
