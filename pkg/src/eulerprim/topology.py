"""Euler characteristic of excursion sets {f >= u} by three independent routes.

* cubical: V - E + F of the union of closed pixels at occupied lattice sites;
* bicov: signed count of two local 3-site pixel patterns;
* morse: alternating count of critical points above the level.

The two lattice methods also come in "curve" form, which evaluates every
level in one pass by sorting the per-cell thresholds at which each cell
enters the set.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .fields import Box, ScalarField2D


@dataclass(frozen=True)
class GridSpec:
    origin: tuple[float, float]
    spacing: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.spacing <= 0 or self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs spacing > 0 and nx, ny >= 1")

    @classmethod
    def covering(cls, bbox: Box, spacing: float, margin: int = 2) -> "GridSpec":
        """Lattice of the given spacing whose interior covers ``bbox``."""
        x0, x1, y0, y1 = bbox
        nx = int(math.ceil((x1 - x0) / spacing)) + 1 + 2 * margin
        ny = int(math.ceil((y1 - y0) / spacing)) + 1 + 2 * margin
        return cls((x0 - margin * spacing, y0 - margin * spacing), spacing, nx, ny)

    @classmethod
    def with_points(cls, bbox: Box, points: int, margin: int = 2) -> "GridSpec":
        """Lattice with ``points`` sites along the longer bbox side."""
        x0, x1, y0, y1 = bbox
        return cls.covering(bbox, max(x1 - x0, y1 - y0) / (points - 1), margin)

    @property
    def xs(self) -> np.ndarray:
        return self.origin[0] + self.spacing * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.origin[1] + self.spacing * np.arange(self.ny)

    def covers(self, bbox: Box) -> bool:
        x0, x1, y0, y1 = bbox
        xs, ys = self.xs, self.ys
        return xs[0] < x0 and xs[-1] > x1 and ys[0] < y0 and ys[-1] > y1


@dataclass
class BinaryGrid:
    spec: GridSpec
    occupancy: np.ndarray  # bool, shape (nx, ny)
    level: float

    def boundary_occupied(self) -> bool:
        o = self.occupancy
        return bool(o[0].any() or o[-1].any() or o[:, 0].any() or o[:, -1].any())

    def to_text(self) -> str:
        s = self.spec
        buf = io.StringIO()
        buf.write(f"{s.nx} {s.ny} {s.spacing!r} {s.origin[0]!r} {s.origin[1]!r} {self.level!r}\n")
        for row in self.occupancy.astype(np.uint8):
            buf.write("".join("1" if v else "0" for v in row))
            buf.write("\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "BinaryGrid":
        lines = text.strip().splitlines()
        nx, ny, h, ox, oy, lev = lines[0].split()
        nx, ny = int(nx), int(ny)
        rows = lines[1:]
        if len(rows) != nx or any(len(r) != ny for r in rows):
            raise ValueError("raster body does not match header")
        occ = np.array([[c == "1" for c in r] for r in rows], dtype=bool)
        return cls(GridSpec((float(ox), float(oy)), float(h), nx, ny), occ, float(lev))


class TopologyError(ValueError):
    pass


def sample_values(field: ScalarField2D, spec: GridSpec) -> np.ndarray:
    return field.grid_values(spec.xs, spec.ys)


def binarize(field: ScalarField2D, spec: GridSpec, u: float, values: np.ndarray | None = None) -> BinaryGrid:
    if values is None:
        values = sample_values(field, spec)
    grid = BinaryGrid(spec, values >= u, float(u))
    if grid.boundary_occupied():
        raise TopologyError("excursion not compactly contained")
    return grid


# ---------------------------------------------------------------------------
# cubical V - E + F


def _pad(a: np.ndarray, fill) -> np.ndarray:
    return np.pad(a, 1, mode="constant", constant_values=fill)


def euler_char_cubical(grid: BinaryGrid | np.ndarray) -> int:
    occ = grid.occupancy if isinstance(grid, BinaryGrid) else np.asarray(grid, dtype=bool)
    P = _pad(occ, False)
    faces = int(occ.sum())
    rows = P[1:-1, :]
    cols = P[:, 1:-1]
    edges = int((rows[:, :-1] | rows[:, 1:]).sum()) + int((cols[:-1, :] | cols[1:, :]).sum())
    verts = int((P[:-1, :-1] | P[1:, :-1] | P[:-1, 1:] | P[1:, 1:]).sum())
    return verts - edges + faces


def _count_at_least(sorted_vals: np.ndarray, levels: np.ndarray) -> np.ndarray:
    return sorted_vals.size - np.searchsorted(sorted_vals, levels, side="left")


def _check_border(values: np.ndarray, levels: np.ndarray):
    border = max(values[0].max(), values[-1].max(), values[:, 0].max(), values[:, -1].max())
    if np.any(levels <= border):
        raise TopologyError("excursion not compactly contained")


def cubical_curve(values: np.ndarray, levels) -> np.ndarray:
    """Cubical EC of {values >= u} for every u in ``levels``."""
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    _check_border(values, levels)
    P = _pad(values, -np.inf)
    rows = P[1:-1, :]
    cols = P[:, 1:-1]
    vert = np.maximum(np.maximum(P[:-1, :-1], P[1:, :-1]), np.maximum(P[:-1, 1:], P[1:, 1:]))
    ex = np.maximum(rows[:, :-1], rows[:, 1:])
    ey = np.maximum(cols[:-1, :], cols[1:, :])
    chi = np.zeros(levels.size, dtype=np.int64)
    for arr, sign in ((vert, 1), (ex, -1), (ey, -1), (values, 1)):
        a = np.sort(arr[np.isfinite(arr)], kind="stable")
        chi += sign * _count_at_least(a, levels)
    return chi


# ---------------------------------------------------------------------------
# bicovariogram pattern counts


def _bicov_intervals(values: np.ndarray):
    """Level intervals (lo, hi] on which each site shows pattern + or pattern -."""
    P = _pad(values, -np.inf)
    c = P[1:-1, 1:-1]
    # pattern +: f(x) >= u > max(f(x + e1), f(x + e2))
    lo_p = np.maximum(P[2:, 1:-1], P[1:-1, 2:])
    hi_p = c
    # pattern -: min(f(x - e1), f(x - e2)) >= u > f(x)
    lo_m = c
    hi_m = np.minimum(P[:-2, 1:-1], P[1:-1, :-2])
    return (lo_p, hi_p), (lo_m, hi_m)


def _count_in(lo: np.ndarray, hi: np.ndarray, levels: np.ndarray) -> np.ndarray:
    keep = lo < hi
    lo = np.sort(lo[keep])
    hi = np.sort(hi[keep])
    # u in (lo, hi]  <=>  lo < u and not hi < u
    return np.searchsorted(lo, levels, side="left") - np.searchsorted(hi, levels, side="left")


def bicov_curve(values: np.ndarray, levels) -> np.ndarray:
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    _check_border(values, levels)
    (lp, hp), (lm, hm) = _bicov_intervals(values)
    return _count_in(lp, hp, levels) - _count_in(lm, hm, levels)


def euler_char_bicov(field: ScalarField2D, spec: GridSpec, u: float, values: np.ndarray | None = None) -> int:
    if values is None:
        values = sample_values(field, spec)
    return int(bicov_curve(values, [u])[0])


# ---------------------------------------------------------------------------
# Morse critical points


@dataclass(frozen=True)
class CriticalPoint:
    location: tuple[float, float]
    value: float
    index: int  # number of positive Hessian eigenvalues
    hess_det: float


NEWTON_TOL = 1e-10
DEGENERACY_TOL = 1e-8
SEED_RESOLUTION = 64
VALUE_TOL = 1e-9
MAX_ITER = 50


def _grad_hess(field, x, y):
    f, f1, f2, f11, f12, f22 = field.jets(x, y)
    return f, f1, f2, f11, f12, f22


def _seed_points(field, region: Box, res: int):
    xs = np.linspace(region[0], region[1], res)
    ys = np.linspace(region[2], region[3], res)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    f, f1, f2, *_ = field.jets(X, Y)
    g = f1 * f1 + f2 * f2
    P = _pad(g, np.inf)
    c = P[1:-1, 1:-1]
    is_min = np.ones_like(c, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= c <= P[1 + di : P.shape[0] - 1 + di, 1 + dj : P.shape[1] - 1 + dj]
    return X[is_min], Y[is_min], float(np.max(np.abs(f)))


def _newton(field, x, y, newton_tol, max_iter=MAX_ITER):
    for _ in range(max_iter):
        f, f1, f2, f11, f12, f22 = _grad_hess(field, x, y)
        gn = np.hypot(f1, f2)
        active = gn > newton_tol
        if not active.any():
            break
        det = f11 * f22 - f12 * f12
        safe = np.where(det == 0.0, 1.0, det)
        dx = np.where(det == 0.0, -f1, -(f22 * f1 - f12 * f2) / safe)
        dy = np.where(det == 0.0, -f2, -(-f12 * f1 + f11 * f2) / safe)
        step = np.where(active, 1.0, 0.0)
        for _h in range(30):
            nx = x + step * dx
            ny = y + step * dy
            _, g1, g2, *_ = _grad_hess(field, nx, ny)
            worse = active & (np.hypot(g1, g2) >= gn) & (step > 0)
            if not worse.any():
                break
            step = np.where(worse, 0.5 * step, step)
        x, y = x + step * dx, y + step * dy
    # polishing step
    f, f1, f2, f11, f12, f22 = _grad_hess(field, x, y)
    det = f11 * f22 - f12 * f12
    ok = det != 0.0
    safe = np.where(ok, det, 1.0)
    px = np.where(ok, x - (f22 * f1 - f12 * f2) / safe, x)
    py = np.where(ok, y - (-f12 * f1 + f11 * f2) / safe, y)
    _, q1, q2, *_ = _grad_hess(field, px, py)
    better = np.hypot(q1, q2) < np.hypot(f1, f2)
    return np.where(better, px, x), np.where(better, py, y)


def find_critical_points(
    field: ScalarField2D,
    region: Box | None = None,
    seed_resolution: int = SEED_RESOLUTION,
    newton_tol: float = NEWTON_TOL,
    degeneracy_tol: float = DEGENERACY_TOL,
    min_value: float | None = None,
) -> list[CriticalPoint]:
    """Critical points of ``field`` in ``region`` (default: its bbox), by value descending.

    Points with value below ``min_value`` are dropped before classification.
    The default, 1e-8 of the largest |f| on the seed grid, discards the flat
    tail where the gradient is numerically zero but no level of interest lives.
    """
    region = tuple(region or field.bbox)
    sx, sy, fmax = _seed_points(field, region, seed_resolution)
    if min_value is None:
        min_value = 1e-8 * fmax
    x, y = _newton(field, sx, sy, newton_tol)
    f, f1, f2, f11, f12, f22 = _grad_hess(field, x, y)
    ok = (
        (np.hypot(f1, f2) <= newton_tol)
        & (x >= region[0]) & (x <= region[1]) & (y >= region[2]) & (y <= region[3])
        & (f >= min_value)
    )
    pts = []
    radius = 10.0 * newton_tol
    for k in np.flatnonzero(ok):
        loc = (float(x[k]), float(y[k]))
        if any(max(abs(loc[0] - p[0][0]), abs(loc[1] - p[0][1])) <= radius for p in pts):
            continue
        pts.append((loc, k))
    out = []
    for loc, k in pts:
        det = float(f11[k] * f22[k] - f12[k] ** 2)
        if abs(det) <= degeneracy_tol:
            raise TopologyError(f"degenerate critical point at {loc} (det H = {det:.3e})")
        ev = np.linalg.eigvalsh(np.array([[f11[k], f12[k]], [f12[k], f22[k]]]))
        out.append(CriticalPoint(loc, float(f[k]), int(np.sum(ev > 0)), det))
    out.sort(key=lambda p: (-p.value, p.location))
    return out


def morse_counts(points, u: float, value_tol: float = VALUE_TOL) -> tuple[int, int, int]:
    mu = [0, 0, 0]
    for p in points:
        if abs(p.value - u) <= value_tol:
            raise TopologyError(f"critical level: u={u} is within {value_tol} of critical value {p.value}")
        if p.value >= u:
            mu[p.index] += 1
    return tuple(mu)


def euler_char_morse(points, u: float, value_tol: float = VALUE_TOL) -> int:
    m0, m1, m2 = morse_counts(points, u, value_tol)
    return m0 - m1 + m2


def morse_curve(points, levels) -> np.ndarray:
    return np.array([euler_char_morse(points, float(u)) for u in np.atleast_1d(levels)], dtype=np.int64)


def morse_count_stability(field: ScalarField2D, u: float, perturbation: ScalarField2D, eta: float, **finder):
    """mu-triples above ``u`` for ``field`` and for ``field + eta * perturbation``."""
    from .fields import add_fields

    before = morse_counts(find_critical_points(field, **finder), u)
    after = morse_counts(find_critical_points(add_fields(field, perturbation, eta), **finder), u)
    return before, after


def ec_curve(field: ScalarField2D, levels, method: str, spec: GridSpec | None = None, values=None, points=None):
    """EC of {f >= u} for every level by the chosen method ('cubical', 'bicov', 'morse')."""
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    if method == "morse":
        if points is None:
            points = find_critical_points(field)
        return morse_curve(points, levels)
    if values is None:
        values = sample_values(field, spec)
    if method == "cubical":
        return cubical_curve(values, levels)
    if method == "bicov":
        return bicov_curve(values, levels)
    raise ValueError(f"unknown EC method {method!r}")
