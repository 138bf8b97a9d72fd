"""The Euler primitive of a planar field as a level integral and as a spatial integral.

For a test function h the level integral is

    chi_f(h) = int h(u) chi({f >= u}) du,

and the spatial form integrates the local density

    gamma(x, f, h) = sum_i 1{grad f in Q_i} [ (d_i f)^2 h'(f) + d_ii f h(f) ],
    Q_1 = {(s, t): t < s < 0},   Q_2 = {(s, t): s < t < 0},

with I_f(h) = -int gamma(x, f, h) dx.  The minus sign is applied by
``euler_primitive_integral``; ``gamma_density`` stays unsigned.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import topology
from .fields import Box, Jet2, ScalarField2D, TestFunction
from .seeds import replicate_rng


class NotConvergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    spatial_resolution: int = 512
    level_count: int = 128
    rule: str = "midpoint"  # or "gauss"
    tol: float = 1e-4

    def __post_init__(self):
        if self.spatial_resolution < 64:
            raise ValueError("spatial_resolution must be >= 64")
        if self.level_count < 32:
            raise ValueError("level_count must be >= 32")
        if self.rule not in ("midpoint", "gauss"):
            raise ValueError("rule must be 'midpoint' or 'gauss'")

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        return QuadratureSpec(self.spatial_resolution * factor, self.level_count * factor, self.rule, self.tol)


@dataclass(frozen=True)
class GammaTerm:
    q1_active: bool
    q2_active: bool
    grad_term: complex | float
    hess_term: complex | float


# ---------------------------------------------------------------------------
# density


def quarter_planes(f1, f2):
    q1 = (f2 < f1) & (f1 < 0)
    q2 = (f1 < f2) & (f2 < 0)
    return q1, q2


def gamma_terms(jet: Jet2, h: TestFunction) -> list[GammaTerm]:
    f = jet.value
    f1, f2 = jet.grad
    h11, _, h22 = jet.hess
    q1, q2 = quarter_planes(f1, f2)
    hv = h.h(f)
    dv = h.dh(f)
    return [
        GammaTerm(bool(q1), bool(q2), f1 * f1 * dv, h11 * hv),
        GammaTerm(bool(q1), bool(q2), f2 * f2 * dv, h22 * hv),
    ]


def gamma_density(jet: Jet2, h: TestFunction):
    """Unsigned density sum_i 1{grad f in Q_i}[(d_i f)^2 h'(f) + d_ii f h(f)]."""
    t1, t2 = gamma_terms(jet, h)
    out = 0.0
    if t1.q1_active:
        out = out + t1.grad_term + t1.hess_term
    if t2.q2_active:
        out = out + t2.grad_term + t2.hess_term
    return _scalar(out)


def gamma_i(jet: Jet2, h: TestFunction, i: int):
    t = gamma_terms(jet, h)[i - 1]
    active = t.q1_active if i == 1 else t.q2_active
    return _scalar(t.grad_term + t.hess_term) if active else 0.0


def _scalar(v):
    v = complex(v) if np.iscomplexobj(v) else float(v)
    return v


def gamma_array(jets, h: TestFunction):
    f, f1, f2, f11, _, f22 = jets
    q1, q2 = quarter_planes(f1, f2)
    hv = h.h(f)
    dv = h.dh(f)
    return np.where(q1, f1 * f1 * dv + f11 * hv, 0.0) + np.where(q2, f2 * f2 * dv + f22 * hv, 0.0)


def gamma_rotavg_array(jets, h: TestFunction):
    """Density of the form averaged over the four quarter-turn rotations."""
    f, f1, f2, f11, _, f22 = jets
    hv = h.h(f)
    dv = h.dh(f)
    a1 = np.abs(f1)
    a2 = np.abs(f2)
    return 0.25 * (
        np.where(a2 > a1, f1 * f1 * dv + f11 * hv, 0.0) + np.where(a1 > a2, f2 * f2 * dv + f22 * hv, 0.0)
    )


# ---------------------------------------------------------------------------
# spatial quadrature


def _nodes_1d(lo: float, hi: float, n: int, rule: str):
    if rule == "midpoint":
        d = (hi - lo) / n
        return lo + d * (np.arange(n) + 0.5), np.full(n, d)
    order = 4
    panels = max(1, -(-n // order))
    gx, gw = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    return (mid[:, None] + half[:, None] * gx).ravel(), (half[:, None] * gw).ravel()


def fsum_c(parts) -> complex | float:
    parts = list(parts)
    if any(isinstance(p, complex) for p in parts):
        return complex(math.fsum(p.real for p in parts), math.fsum(complex(p).imag for p in parts))
    return math.fsum(parts)


def integrate_grid(field: ScalarField2D, window: Box, n: int, rule: str, density, chunk_rows: int = 64, workers: int = 1):
    """int_window density(jets) dx on an n x n tensor rule.

    Rows are processed in fixed chunks whose partial sums are combined with
    ``math.fsum`` in chunk order, so the result is the same for any worker count.
    """
    xs, wx = _nodes_1d(window[0], window[1], n, rule)
    ys, wy = _nodes_1d(window[2], window[3], n, rule)

    def part(lo):
        sl = slice(lo, min(lo + chunk_rows, xs.size))
        jets = field.grid_jets(xs[sl], ys)
        d = density(jets)
        s = np.sum(wx[sl, None] * d * wy[None, :])
        return complex(s) if np.iscomplexobj(s) else float(s)

    starts = range(0, xs.size, chunk_rows)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(part, starts))
    else:
        parts = [part(lo) for lo in starts]
    return fsum_c(parts)


def support_window(field: ScalarField2D, h: TestFunction, coarse: int = 256, dilate: int = 2) -> Box | None:
    """Box containing {f >= min supp h} with a margin, or None when that set is empty.

    Fourier test functions have no lower support bound; the full bbox is used.
    """
    if h.fourier:
        return field.bbox
    a = h.support[0]
    x0, x1, y0, y1 = field.bbox
    xs = np.linspace(x0, x1, coarse)
    ys = np.linspace(y0, y1, coarse)
    v = field.grid_values(xs, ys)
    hit = v >= a
    if not hit.any():
        return None
    ii = np.flatnonzero(hit.any(axis=1))
    jj = np.flatnonzero(hit.any(axis=0))
    dx = xs[1] - xs[0]
    dy = ys[1] - ys[0]
    return (
        max(x0, xs[ii[0]] - dilate * dx),
        min(x1, xs[ii[-1]] + dilate * dx),
        max(y0, ys[jj[0]] - dilate * dy),
        min(y1, ys[jj[-1]] + dilate * dy),
    )


def _primitive(field, h, quad, density, window, check, full_output, workers):
    t0 = time.perf_counter()
    if window is None:
        window = support_window(field, h)
    if window is None:
        out = {"value": 0.0, "refined": 0.0, "error": 0.0, "window": None}
        return out if full_output else 0.0
    n = quad.spatial_resolution
    val = -integrate_grid(field, window, n, quad.rule, density, workers=workers)
    ref = err = None
    if check:
        ref = -integrate_grid(field, window, 2 * n, quad.rule, density, workers=workers)
        err = abs(ref - val)
        if err / max(1.0, abs(ref)) > 10.0 * quad.tol:
            raise NotConvergedError(f"I_f not converged: |I_2n - I_n| = {err:.3e} at n = {n}")
    if full_output:
        return {
            "value": val,
            "refined": ref,
            "error": err,
            "window": window,
            "wall_time_ms": 1e3 * (time.perf_counter() - t0),
        }
    return val


def euler_primitive_integral(
    field: ScalarField2D,
    h: TestFunction,
    quad: QuadratureSpec = QuadratureSpec(),
    *,
    window: Box | None = None,
    check: bool = True,
    full_output: bool = False,
    workers: int = 1,
):
    """I_f(h) = -int gamma(x, f, h) dx at ``quad.spatial_resolution`` points per window side.

    The window is the bbox cropped to {f >= min supp h} (gamma vanishes
    elsewhere).  The value at twice the resolution serves as the error
    estimate and convergence check.
    """
    return _primitive(field, h, quad, lambda j: gamma_array(j, h), window, check, full_output, workers)


def euler_primitive_rotavg(
    field: ScalarField2D,
    h: TestFunction,
    quad: QuadratureSpec = QuadratureSpec(),
    *,
    window: Box | None = None,
    check: bool = True,
    full_output: bool = False,
    workers: int = 1,
):
    """-(1/4) sum_i int 1{|d_i' f| > |d_i f|}[(d_i f)^2 h'(f) + d_ii f h(f)] dx."""
    return _primitive(field, h, quad, lambda j: gamma_rotavg_array(j, h), window, check, full_output, workers)


# ---------------------------------------------------------------------------
# level integral


def level_nodes(lo: float, hi: float, count: int):
    d = (hi - lo) / count
    return lo + d * (np.arange(count) + 0.5), np.full(count, d)


def snap_levels(levels: np.ndarray, critical_values, margin: float):
    """Move nodes within ``margin`` of a critical value to the edge of the margin, same side."""
    out = levels.copy()
    cv = np.sort(np.asarray(list(critical_values), dtype=float))
    moved = 0
    for k, u in enumerate(levels):
        if cv.size == 0:
            break
        j = int(np.argmin(np.abs(cv - u)))
        c = cv[j]
        if abs(u - c) < margin:
            step = margin * 1.0001
            out[k] = c - step if u < c else c + step
            moved += 1
    return out, moved


def euler_primitive_direct(
    field: ScalarField2D,
    h: TestFunction,
    quad: QuadratureSpec = QuadratureSpec(),
    ec_method: str = "cubical",
    *,
    spec: topology.GridSpec | None = None,
    points=None,
    full_output: bool = False,
):
    """chi_f(h) = int h(u) chi({f >= u}) du with midpoint level nodes over supp h.

    The lattice has ``quad.spatial_resolution`` sites along the longer bbox
    side.  Level nodes closer than 5 * spacing * max|grad f| to a critical
    value are moved to the edge of that band on their own side; the EC is
    constant between critical values, so the plateau value is unchanged.
    """
    if h.fourier:
        raise ValueError("the level integral needs a compactly supported test function")
    t0 = time.perf_counter()
    a, b = h.support
    levels, w = level_nodes(a, b, quad.level_count)
    if spec is None:
        spec = topology.GridSpec.with_points(field.bbox, quad.spatial_resolution)
    values = None
    margin = 0.0
    if ec_method != "morse":
        xs, ys = spec.xs, spec.ys
        jets = field.grid_jets(xs, ys)
        values = jets[0]
        margin = 5.0 * spec.spacing * float(np.max(np.hypot(jets[1], jets[2])))
        del jets
    if points is None:
        try:
            points = topology.find_critical_points(field)
        except topology.TopologyError:
            points = []  # not Morse: no snapping, the lattice count is used as is
    crit = [p.value for p in points]
    eval_levels, moved = snap_levels(levels, crit, margin if ec_method != "morse" else 2 * topology.VALUE_TOL)
    peak = float(values.max()) if values is not None else max(crit, default=-np.inf)
    active = eval_levels < peak
    chi = np.zeros(levels.size, dtype=np.int64)
    if active.any():
        chi[active] = topology.ec_curve(field, eval_levels[active], ec_method, spec=spec, values=values, points=points)
    hv = h.h(levels)
    val = float(math.fsum(w * hv * chi)) if not np.iscomplexobj(hv) else fsum_c(list(w * hv * chi))
    if full_output:
        return {
            "value": val,
            "levels": levels,
            "chi": chi,
            "snapped": moved,
            "margin": margin,
            "spacing": spec.spacing,
            "wall_time_ms": 1e3 * (time.perf_counter() - t0),
        }
    return val


# ---------------------------------------------------------------------------
# Kac-Rice in one dimension


@dataclass(frozen=True)
class Profile1D:
    f: object
    df: object
    interval: tuple[float, float]
    breakpoints: tuple = ()
    name: str = "profile"


def tent_profile() -> Profile1D:
    """f(x) = max(0, 1 - |x|) on [-2, 2]."""
    return Profile1D(
        f=lambda x: np.maximum(0.0, 1.0 - np.abs(x)),
        df=lambda x: np.where(np.abs(x) < 1.0, -np.sign(x), 0.0),
        interval=(-2.0, 2.0),
        breakpoints=(-1.0, 0.0, 1.0),
        name="tent",
    )


def gaussian_profile(height: float = 1.0, width: float = 1.0, half_length: float = 8.0) -> Profile1D:
    return Profile1D(
        f=lambda x: height * np.exp(-((x / width) ** 2)),
        df=lambda x: -2.0 * x / width**2 * height * np.exp(-((x / width) ** 2)),
        interval=(-half_length, half_length),
        name="gaussian",
    )


def double_gaussian_profile() -> Profile1D:
    """Two bumps with an interior minimum: two up-crossings at mid levels."""
    f = lambda x: np.exp(-((x + 1.2) ** 2)) + 0.8 * np.exp(-((x - 1.2) ** 2))  # noqa: E731
    df = lambda x: -2 * (x + 1.2) * np.exp(-((x + 1.2) ** 2)) - 1.6 * (x - 1.2) * np.exp(-((x - 1.2) ** 2))  # noqa: E731
    return Profile1D(f=f, df=df, interval=(-8.0, 8.0), name="double_gaussian")


PROFILES_1D = {"tent": tent_profile, "gaussian": gaussian_profile, "double_gaussian": double_gaussian_profile}


def _monotone_pieces(p: Profile1D, scan: int = 20001):
    """Split points of the interval between which f is monotone."""
    from scipy.optimize import brentq

    lo, hi = p.interval
    cuts = sorted({lo, hi, *[b for b in p.breakpoints if lo < b < hi]})
    pts = [cuts[0]]
    for a, b in zip(cuts[:-1], cuts[1:]):
        x = np.linspace(a, b, scan)[1:-1]
        d = p.df(x)
        sgn = np.sign(d)
        # exact zeros of f': keep only the ends of each run (flat stretches are one piece)
        z = np.concatenate([[False], sgn == 0, [False]])
        edges = np.flatnonzero(z[1:] != z[:-1])
        found = sorted({float(x[k]) for k in np.concatenate([edges[0::2], edges[1::2] - 1])})
        for k in np.flatnonzero(sgn[:-1] * sgn[1:] < 0):
            found.append(brentq(lambda s: float(p.df(s)), x[k], x[k + 1], xtol=1e-15))
        pts.extend(sorted(found))
        pts.append(b)
    return np.array(pts)


def _gl_composite(fn, edges, per_panel: int = 16, sub: int = 8):
    gx, gw = np.polynomial.legendre.leggauss(per_panel)
    parts = []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        e = np.linspace(a, b, sub + 1)
        mid = 0.5 * (e[:-1] + e[1:])
        half = 0.5 * np.diff(e)
        x = (mid[:, None] + half[:, None] * gx).ravel()
        w = (half[:, None] * gw).ravel()
        parts.append(math.fsum(w * fn(x)))
    return math.fsum(parts)


@dataclass(frozen=True)
class KacRice:
    lhs: float  # int h(u) N+(u) du
    rhs: float  # int h(f(x)) |f'(x)| dx
    lhs_down: float  # int h(u) N-(u) du


def kac_rice_1d(profile: Profile1D, h: TestFunction, quad: QuadratureSpec = QuadratureSpec()) -> KacRice:
    """Both sides of the 1D crossing identity.

    Up-crossings of level u are counted exactly on the monotone pieces of f;
    the level integral is split at the critical values, where the count jumps.
    """
    a, b = h.support
    lo, hi = profile.interval
    fl, fh = float(profile.f(lo)), float(profile.f(hi))
    if fl >= a or fh >= a:
        raise ValueError("boundary condition violated: f must lie below min supp h at both ends")
    pts = _monotone_pieces(profile)
    vals = profile.f(pts)
    v0, v1 = vals[:-1], vals[1:]

    def n_up(u):
        u = np.asarray(u)[..., None]
        return np.sum((v0 < u) & (u <= v1), axis=-1)

    def n_down(u):
        u = np.asarray(u)[..., None]
        return np.sum((v1 < u) & (u <= v0), axis=-1)

    cuts = np.unique(np.clip(np.concatenate([[a, b], vals]), a, b))
    per = max(4, quad.level_count // max(1, len(cuts) - 1) // 8)
    lhs = _gl_composite(lambda u: h.h(u) * n_up(u), cuts, per_panel=16, sub=per)
    lhs_down = _gl_composite(lambda u: h.h(u) * n_down(u), cuts, per_panel=16, sub=per)
    rhs = _gl_composite(lambda x: h.h(profile.f(x)) * np.abs(profile.df(x)), pts, per_panel=16, sub=64)
    return KacRice(float(lhs), float(rhs), float(lhs_down))


# ---------------------------------------------------------------------------
# co-area


def contour_length(values: np.ndarray, spacing: float, u: float) -> float:
    """Length of the marching-squares contour {values = u} on a square lattice.

    Crossings are placed by linear interpolation along cell edges.  In a
    saddle cell the corners joined through the cell centre (mean of the four
    corners) are taken as connected.
    """
    v = values - u
    a = v[:-1, :-1]  # (i, j)
    b = v[1:, :-1]  # (i+1, j)
    c = v[:-1, 1:]  # (i, j+1)
    d = v[1:, 1:]  # (i+1, j+1)
    ia, ib, ic, id_ = a >= 0, b >= 0, c >= 0, d >= 0
    nin = ia.astype(np.int8) + ib + ic + id_
    mixed = (nin > 0) & (nin < 4)
    if not mixed.any():
        return 0.0
    a, b, c, d = a[mixed], b[mixed], c[mixed], d[mixed]
    ia, ib, ic, id_ = ia[mixed], ib[mixed], ic[mixed], id_[mixed]

    def frac(p, q):
        with np.errstate(divide="ignore", invalid="ignore"):
            return p / (p - q)

    # edge crossings in cell-local units: bottom (a-b), right (b-d), top (c-d), left (a-c)
    E = np.full((4, 2, a.size), np.nan)
    eb = ia != ib
    E[0, 0, eb], E[0, 1, eb] = frac(a, b)[eb], 0.0
    er = ib != id_
    E[1, 0, er], E[1, 1, er] = 1.0, frac(b, d)[er]
    et = ic != id_
    E[2, 0, et], E[2, 1, et] = frac(c, d)[et], 1.0
    el = ia != ic
    E[3, 0, el], E[3, 1, el] = 0.0, frac(a, c)[el]

    def seg(p, q, mask):
        return np.hypot(E[p, 0, mask] - E[q, 0, mask], E[p, 1, mask] - E[q, 1, mask])

    count = eb.astype(np.int8) + er + et + el
    total = 0.0
    two = count == 2
    if two.any():
        pts = np.where(np.stack([eb, er, et, el])[:, two])
        # two crossings per cell: gather in order
        idx = np.argsort(pts[1], kind="stable")
        edges = pts[0][idx].reshape(-1, 2)
        cols = np.flatnonzero(two)
        p0 = E[edges[:, 0], :, cols]
        p1 = E[edges[:, 1], :, cols]
        total += float(np.sum(np.hypot(p0[:, 0] - p1[:, 0], p0[:, 1] - p1[:, 1])))
    four = count == 4
    if four.any():
        centre_in = (a + b + c + d) / 4.0 >= 0
        # corners a and d share a class in a saddle cell; if the centre agrees
        # with them they connect, and the contour cuts off corners b and c
        joined_ad = centre_in == ia
        m1 = four & joined_ad
        m2 = four & ~joined_ad
        total += float(np.sum(seg(0, 1, m1)) + np.sum(seg(2, 3, m1)))
        total += float(np.sum(seg(0, 3, m2)) + np.sum(seg(1, 2, m2)))
    return total * spacing


def coarea_check(field: ScalarField2D, h: TestFunction, quad: QuadratureSpec = QuadratureSpec(), *, window: Box | None = None):
    """(int h(u) Per({f >= u}) du, int h(f) |grad f| dx)."""
    if h.fourier:
        raise ValueError("co-area check needs a compactly supported test function")
    if window is None:
        window = support_window(field, h, dilate=4)
    if window is None:
        return 0.0, 0.0
    n = quad.spatial_resolution
    x0, x1, y0, y1 = window
    spacing = max(x1 - x0, y1 - y0) / (n - 1)
    spec = topology.GridSpec.covering(window, spacing, margin=1)
    values = field.grid_values(spec.xs, spec.ys)
    levels, w = level_nodes(*h.support, quad.level_count)
    per = np.array([contour_length(values, spacing, float(u)) for u in levels])
    lhs = math.fsum(w * h.h(levels) * per)

    def dens(j):
        return h.h(j[0]) * np.hypot(j[1], j[2])

    rhs = integrate_grid(field, window, n, quad.rule, dens)
    return float(lhs), float(rhs)


# ---------------------------------------------------------------------------
# continuity in f


_DIRS = (
    (1.0, 0.0),
    (0.0, 1.0),
    (1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)),
    (1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0)),
)


def delta_indicator(grad_f, grad_g) -> float:
    """max over u in {u1, u2, e1, e2} of 1{|d_u f| <= |d_u g|}."""
    for ux, uy in _DIRS:
        if abs(ux * grad_f[0] + uy * grad_f[1]) <= abs(ux * grad_g[0] + uy * grad_g[1]):
            return 1.0
    return 0.0


def delta_indicator_array(f1, f2, g1, g2):
    out = np.zeros(np.broadcast(f1, g1).shape, dtype=bool)
    for ux, uy in _DIRS:
        out |= np.abs(ux * f1 + uy * f2) <= np.abs(ux * g1 + uy * g2)
    return out.astype(float)


def continuity_gap_bound(jet_f: Jet2, jet_g: Jet2, h: TestFunction, i: int) -> tuple[float, float]:
    """(|gamma_i(f + g) - gamma_i(f)|, the pointwise continuity bound)."""
    if i not in (1, 2):
        raise ValueError("i must be 1 or 2")
    k = i - 1
    hk = 0 if i == 1 else 2
    actual = abs(gamma_i(jet_f + jet_g, h, i) - gamma_i(jet_f, h, i))
    dfi, dgi = jet_f.grad[k], jet_g.grad[k]
    a = max(dfi * dfi, abs(jet_f.hess[hk]), 2.0 * abs(dfi) + abs(dgi))
    b = max(delta_indicator(jet_f.grad, jet_g.grad), abs(dgi), abs(jet_g.value), abs(jet_g.hess[hk]))
    return float(actual), float(6.0 * h.n2_bound * a * b)


def continuity_moment_report(
    f: ScalarField2D,
    g_sampler,
    h: TestFunction,
    q: int,
    quad: QuadratureSpec,
    reps: int,
    seed: int,
    g_scale: float = 1.0,
    window: Box | None = None,
) -> dict:
    """Monte Carlo E|I_f(h, W) - I_{f+g}(h, W)|^q and the moment bound without its constant.

    ``g_sampler(rng)`` returns a realization of the random perturbation; the
    replicate generators come from ``seed`` so that calls with different
    ``g_scale`` share common random numbers.
    """
    W = window or f.bbox
    n = quad.spatial_resolution
    xs, wx = _nodes_1d(W[0], W[1], n, "midpoint")
    ys, wy = _nodes_1d(W[2], W[3], n, "midpoint")
    jf = f.grid_jets(xs, ys)
    area_w = wx[:, None] * wy[None, :]
    If = -float(np.sum(area_w * gamma_array(jf, h)))
    diffs = []
    mom = {k: np.zeros((n, n)) for k in ("g", "g1", "g2", "g11", "g22", "delta")}
    for r in range(reps):
        g = g_sampler(replicate_rng(seed, r))
        jg = tuple(g_scale * a for a in g.grid_jets(xs, ys))
        jfg = tuple(u + v for u, v in zip(jf, jg))
        Ifg = -float(np.sum(area_w * gamma_array(jfg, h)))
        diffs.append(abs(If - Ifg) ** q)
        mom["g"] += np.abs(jg[0]) ** (2 * q)
        mom["g1"] += np.abs(jg[1]) ** (2 * q)
        mom["g2"] += np.abs(jg[2]) ** (2 * q)
        mom["g11"] += np.abs(jg[3]) ** (2 * q)
        mom["g22"] += np.abs(jg[5]) ** (2 * q)
        mom["delta"] += delta_indicator_array(jf[1], jf[2], jg[1], jg[2])
    for k in mom:
        mom[k] /= reps
    sides = []
    for i, (fi, fii, gi, gii) in enumerate(((jf[1], jf[3], "g1", "g11"), (jf[2], jf[5], "g2", "g22"))):
        A = np.maximum(np.maximum(fi ** (4 * q), np.abs(fii) ** (2 * q)), 2.0 * np.abs(fi) ** (2 * q) + mom[gi])
        B = np.maximum(np.maximum(mom["g"], mom[gi]), np.maximum(mom[gii], mom["delta"]))
        sides.append(float(np.sum(area_w * (A * B) ** (1.0 / (2 * q)))))
    rhs = h.n2_bound**q * max(sides) ** q
    return {
        "q": q,
        "lhs_q": math.fsum(diffs) / reps,
        "rhs_without_Cq": rhs,
        "reps": reps,
        "seed": seed,
        "g_scale": g_scale,
    }
