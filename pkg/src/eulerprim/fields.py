"""Analytic planar fields and 1D test functions with exact derivative jets.

Every field exposes ``jets(x, y)``, returning the tuple
``(f, f1, f2, f11, f12, f22)`` of arrays broadcast from ``x`` and ``y``.
Grids are indexed ``[i, j]`` with ``x = xs[i]`` and ``y = ys[j]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

Box = tuple[float, float, float, float]  # (xmin, xmax, ymin, ymax)

DEFAULT_TAIL = 1e-12


@dataclass(frozen=True)
class Jet2:
    value: float
    grad: tuple[float, float]
    hess: tuple[float, float, float]  # (f11, f12, f22), symmetric matrix

    def __add__(self, other: "Jet2") -> "Jet2":
        return Jet2(
            self.value + other.value,
            (self.grad[0] + other.grad[0], self.grad[1] + other.grad[1]),
            tuple(a + b for a, b in zip(self.hess, other.hess)),
        )

    def hessian_matrix(self) -> np.ndarray:
        h11, h12, h22 = self.hess
        return np.array([[h11, h12], [h12, h22]])


class ScalarField2D:
    """A deterministic C^2 field on the plane with a bounding box.

    Outside ``bbox`` the field stays below every positive level of interest
    (see ``DEFAULT_TAIL``), so excursion sets at such levels are compactly
    contained in it.
    """

    def __init__(self, jets_fn, bbox: Box, descriptor: dict, value_fn=None):
        self._jets = jets_fn
        self._value = value_fn
        self.bbox = tuple(float(v) for v in bbox)
        self.descriptor = dict(descriptor)

    def jets(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self._jets(x, y)

    def value(self, x, y):
        if self._value is not None:
            return self._value(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return self.jets(x, y)[0]

    def jet_at(self, point) -> Jet2:
        f, f1, f2, f11, f12, f22 = (float(a) for a in self.jets(point[0], point[1]))
        return Jet2(f, (f1, f2), (f11, f12, f22))

    def grid_jets(self, xs, ys):
        X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
        return self.jets(X, Y)

    def grid_values(self, xs, ys):
        X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
        return self.value(X, Y)

    def __repr__(self):
        return f"ScalarField2D({self.descriptor.get('family', '?')}, bbox={self.bbox})"


# ---------------------------------------------------------------------------
# radial family f(x) = psi(|x|^2)


@dataclass(frozen=True)
class RadialProfile:
    """Profile psi on [0, inf) with psi', psi''; the argument is the squared radius."""

    psi: Callable
    dpsi: Callable
    ddpsi: Callable
    name: str
    params: dict = field(default_factory=dict)

    @property
    def psi0(self) -> float:
        return float(self.psi(0.0))

    def cutoff(self, tail: float = DEFAULT_TAIL) -> float:
        """Squared radius beyond which psi <= tail (psi is eventually decreasing)."""
        q = 1.0
        while self.psi(q) > tail or self.dpsi(q) > 0:
            q *= 2.0
            if q > 1e8:
                raise ValueError(f"profile {self.name} does not decay below {tail}")
        lo = q / 2.0 if self.psi(q / 2.0) > tail else 0.0
        if self.psi(lo) <= tail:
            return lo
        return optimize.brentq(lambda r: self.psi(r) - tail, lo, q, xtol=1e-12)


def exp_profile(rate: float = 1.0) -> RadialProfile:
    """psi(r) = exp(-rate r), giving the Gaussian bump exp(-rate |x|^2)."""
    return RadialProfile(
        psi=lambda r: np.exp(-rate * r),
        dpsi=lambda r: -rate * np.exp(-rate * r),
        ddpsi=lambda r: rate * rate * np.exp(-rate * r),
        name="exp",
        params={"rate": float(rate)},
    )


def ring_profile(a: float = 0.5, b: float = 2.0) -> RadialProfile:
    """psi(r) = (a + b r) exp(-r).

    For b > a the maximum sits on the circle r = 1 - a/b, so the field is not
    Morse, and levels between psi(0) = a and the ridge give annuli.
    """
    return RadialProfile(
        psi=lambda r: (a + b * r) * np.exp(-r),
        dpsi=lambda r: (b - a - b * r) * np.exp(-r),
        ddpsi=lambda r: (b * r + a - 2.0 * b) * np.exp(-r),
        name="ring",
        params={"a": float(a), "b": float(b)},
    )


PROFILES = {"exp": exp_profile, "ring": ring_profile}


def make_radial_field(profile: RadialProfile, tail: float = DEFAULT_TAIL) -> ScalarField2D:
    psi, dpsi, ddpsi = profile.psi, profile.dpsi, profile.ddpsi

    def jets(x, y):
        q = x * x + y * y
        p, dp, ddp = psi(q), dpsi(q), ddpsi(q)
        return (
            p,
            2.0 * x * dp,
            2.0 * y * dp,
            2.0 * dp + 4.0 * x * x * ddp,
            4.0 * x * y * ddp,
            2.0 * dp + 4.0 * y * y * ddp,
        )

    R = math.sqrt(profile.cutoff(tail))
    desc = {"family": "radial", "profile": profile.name, **profile.params}
    return ScalarField2D(jets, (-R, R, -R, R), desc, value_fn=lambda x, y: psi(x * x + y * y))


# ---------------------------------------------------------------------------
# Gaussian bump mixtures


def make_bump_mixture(centers, weights, widths, tail: float = DEFAULT_TAIL) -> ScalarField2D:
    """f(x) = sum_k w_k exp(-|x - c_k|^2 / s_k^2)."""
    C = np.atleast_2d(np.asarray(centers, dtype=float))
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    s = np.atleast_1d(np.asarray(widths, dtype=float))
    if C.size == 0 or w.size == 0 or s.size == 0:
        raise ValueError("bump mixture needs at least one bump")
    if not (len(C) == len(w) == len(s)) or C.shape[1] != 2:
        raise ValueError("centers, weights and widths must have the same length")
    if np.any(w <= 0) or np.any(s <= 0):
        raise ValueError("weights and widths must be positive")
    inv = 1.0 / (s * s)

    def jets(x, y):
        f = np.zeros(np.broadcast(x, y).shape)
        f1, f2, f11, f12, f22 = (np.zeros_like(f) for _ in range(5))
        for (cx, cy), wk, ik in zip(C, w, inv):
            dx = x - cx
            dy = y - cy
            e = wk * np.exp(-(dx * dx + dy * dy) * ik)
            gx = -2.0 * ik * dx
            gy = -2.0 * ik * dy
            f += e
            f1 += gx * e
            f2 += gy * e
            f11 += (gx * gx - 2.0 * ik) * e
            f12 += gx * gy * e
            f22 += (gy * gy - 2.0 * ik) * e
        return f, f1, f2, f11, f12, f22

    def value(x, y):
        f = np.zeros(np.broadcast(x, y).shape)
        for (cx, cy), wk, ik in zip(C, w, inv):
            f += wk * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) * ik)
        return f

    # each bump below tail/K outside its box keeps the sum below tail
    K = len(w)
    r = s * np.sqrt(np.log(np.maximum(w * K / tail, 1.0 + 1e-12)))
    bbox = (
        float(np.min(C[:, 0] - r)),
        float(np.max(C[:, 0] + r)),
        float(np.min(C[:, 1] - r)),
        float(np.max(C[:, 1] + r)),
    )
    desc = {"family": "bump_mixture", "n": len(w)}
    for k in range(len(w)):
        desc.update({f"c{k}_x": C[k, 0], f"c{k}_y": C[k, 1], f"w{k}": w[k], f"s{k}": s[k]})
    return ScalarField2D(jets, bbox, desc, value_fn=value)


def make_affine_field(A: float, B1: float, B2: float, bbox: Box = (-1.0, 1.0, -1.0, 1.0)) -> ScalarField2D:
    """x -> A + B1 x1 + B2 x2 (a perturbation; its bbox is nominal)."""

    def jets(x, y):
        z = np.zeros(np.broadcast(x, y).shape)
        return A + B1 * x + B2 * y + z, B1 + z, B2 + z, z, z.copy(), z.copy()

    return ScalarField2D(jets, bbox, {"family": "affine", "A": A, "B1": B1, "B2": B2})


def add_fields(base: ScalarField2D, other: ScalarField2D, eta: float = 1.0, bbox: Box | None = None) -> ScalarField2D:
    """base + eta * other, on the bbox of ``base`` unless given."""

    def jets(x, y):
        a = base.jets(x, y)
        b = other.jets(x, y)
        return tuple(u + eta * v for u, v in zip(a, b))

    def value(x, y):
        return base.value(x, y) + eta * other.value(x, y)

    desc = {"family": "sum", "eta": eta, "base": base.descriptor, "other": other.descriptor}
    return ScalarField2D(jets, bbox or base.bbox, desc, value_fn=value)


def union_box(a: Box, b: Box) -> Box:
    return (min(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), max(a[3], b[3]))


_QUARTER = {0: (1, 0), 1: (0, 1), 2: (-1, 0), 3: (0, -1)}  # (cos, sin)


def rotate_field(fld: ScalarField2D, quarter_turns: int) -> ScalarField2D:
    """f^theta(x) = f(r_theta x), r_theta the clockwise rotation by quarter_turns * pi/2."""
    if quarter_turns not in _QUARTER:
        raise ValueError("quarter_turns must be 0, 1, 2 or 3")
    c, s = _QUARTER[quarter_turns]
    # clockwise: r(x1, x2) = (c x1 + s x2, -s x1 + c x2)

    def jets(x, y):
        u = c * x + s * y
        v = -s * x + c * y
        f, f1, f2, f11, f12, f22 = fld.jets(u, v)
        # grad f^theta = r^T grad f, hess f^theta = r^T H r
        g1 = c * f1 - s * f2
        g2 = s * f1 + c * f2
        h11 = c * c * f11 - 2 * c * s * f12 + s * s * f22
        h12 = c * s * f11 + (c * c - s * s) * f12 - c * s * f22
        h22 = s * s * f11 + 2 * c * s * f12 + c * c * f22
        return f, g1, g2, h11, h12, h22

    def value(x, y):
        return fld.value(c * x + s * y, -s * x + c * y)

    # {x : r x in B} = r^{-1} B, r^{-1}(u, v) = (c u - s v, s u + c v)
    x0, x1, y0, y1 = fld.bbox
    corners = [(c * u - s * v, s * u + c * v) for u in (x0, x1) for v in (y0, y1)]
    xs = [p[0] for p in corners]
    ys = [p[1] for p in corners]
    desc = {"family": "rotated", "quarter_turns": quarter_turns, "base": fld.descriptor}
    return ScalarField2D(jets, (min(xs), max(xs), min(ys), max(ys)), desc, value_fn=value)


# ---------------------------------------------------------------------------
# test functions h


@dataclass(frozen=True)
class TestFunction:
    """Test function h with derivative; ``fourier`` marks h(u) = exp(i t u)."""

    __test__ = False  # not a pytest class

    h: Callable
    dh: Callable
    support: tuple[float, float]
    n2_bound: float
    sup_h: float
    sup_dh: float
    d2h: Callable | None = None
    fourier: bool = False
    descriptor: dict = field(default_factory=dict)

    @property
    def is_complex(self) -> bool:
        return self.fourier


def _bump_shape(tau):
    """phi(tau) = exp(-1/(1 - tau^2)) and its first two derivatives on |tau| < 1."""
    tau = np.asarray(tau, dtype=float)
    inside = np.abs(tau) < 1.0
    t = np.where(inside, tau, 0.0)
    d = 1.0 - t * t
    phi = np.where(inside, np.exp(-1.0 / d), 0.0)
    dphi = phi * (-2.0 * t / d**2)
    ddphi = phi * (4.0 * t * t / d**4 - 2.0 / d**2 - 8.0 * t * t / d**3)
    return phi, dphi, ddphi


def make_bump_testfn(a: float, b: float, scale: float = 1.0) -> TestFunction:
    """h(u) = scale * exp(-1/(1 - tau^2)), tau = (2u - a - b)/(b - a), zero off (a, b)."""
    if not a < b:
        raise ValueError("bump test function needs a < b")
    if a <= 0:
        raise ValueError("bump support must lie in (0, inf)")
    k = 2.0 / (b - a)

    def tau(u):
        return (2.0 * np.asarray(u, dtype=float) - a - b) / (b - a)

    def h(u):
        return scale * _bump_shape(tau(u))[0]

    def dh(u):
        return scale * k * _bump_shape(tau(u))[1]

    def d2h(u):
        return scale * k * k * _bump_shape(tau(u))[2]

    sups = _bump_sups()
    sup_h = abs(scale) * sups[0]
    sup_dh = abs(scale) * k * sups[1]
    sup_d2h = abs(scale) * k * k * sups[2]
    return TestFunction(
        h=h,
        dh=dh,
        d2h=d2h,
        support=(float(a), float(b)),
        n2_bound=max(sup_h, sup_dh, sup_d2h),
        sup_h=sup_h,
        sup_dh=sup_dh,
        descriptor={"family": "bump", "a": float(a), "b": float(b), "scale": float(scale)},
    )


_SUPS: tuple | None = None


def _bump_sups():
    """Sup norms of phi, phi', phi'' on (-1, 1), by dense scan then bounded refinement."""
    global _SUPS
    if _SUPS is None:
        tau = np.linspace(-1.0, 1.0, 40001)[1:-1]
        shapes = _bump_shape(tau)
        out = []
        for k, arr in enumerate(shapes):
            i = int(np.argmax(np.abs(arr)))
            lo, hi = tau[max(i - 1, 0)], tau[min(i + 1, len(tau) - 1)]
            res = optimize.minimize_scalar(
                lambda t: -abs(float(_bump_shape(t)[k])), bounds=(lo, hi), method="bounded",
                options={"xatol": 1e-13},
            )
            out.append(max(abs(float(arr[i])), -res.fun) * (1.0 + 1e-9))
        _SUPS = tuple(out)
    return _SUPS


def bump_integral(a: float, b: float, scale: float = 1.0) -> float:
    """Integral of the bump test function over its support."""
    val, _ = integrate.quad(lambda t: float(_bump_shape(t)[0]), -1.0, 1.0, epsabs=1e-14, epsrel=1e-12, limit=200)
    return scale * val * (b - a) / 2.0


def make_fourier_testfn(t: float) -> TestFunction:
    """h(u) = exp(i t u); flagged, with unbounded support."""

    def h(u):
        return np.exp(1j * t * np.asarray(u, dtype=float))

    def dh(u):
        return 1j * t * np.exp(1j * t * np.asarray(u, dtype=float))

    def d2h(u):
        return -t * t * np.exp(1j * t * np.asarray(u, dtype=float))

    return TestFunction(
        h=h,
        dh=dh,
        d2h=d2h,
        support=(-math.inf, math.inf),
        n2_bound=max(1.0, abs(t), t * t),
        sup_h=1.0,
        sup_dh=abs(t),
        fourier=True,
        descriptor={"family": "fourier", "t": float(t)},
    )


def linear_combination(terms) -> TestFunction:
    """sum_k alpha_k h_k for real, compactly supported h_k."""
    terms = [(float(a), tf) for a, tf in terms]
    if any(tf.fourier for _, tf in terms):
        raise ValueError("linear_combination only combines compactly supported test functions")
    lo = min(tf.support[0] for _, tf in terms)
    hi = max(tf.support[1] for _, tf in terms)

    def h(u):
        return sum(a * tf.h(u) for a, tf in terms)

    def dh(u):
        return sum(a * tf.dh(u) for a, tf in terms)

    n2 = sum(abs(a) * tf.n2_bound for a, tf in terms)
    return TestFunction(
        h=h,
        dh=dh,
        support=(lo, hi),
        n2_bound=n2,
        sup_h=sum(abs(a) * tf.sup_h for a, tf in terms),
        sup_dh=sum(abs(a) * tf.sup_dh for a, tf in terms),
        descriptor={"family": "combination", "n": len(terms)},
    )


# ---------------------------------------------------------------------------
# registry and flat records


def two_bump(separation: float = 2.0, weight: float = 1.0, width: float = 1.0) -> ScalarField2D:
    d = separation / 2.0
    return make_bump_mixture([(-d, 0.0), (d, 0.0)], [weight, weight], [width, width])


def three_bump() -> ScalarField2D:
    """Asymmetric Morse mixture with a hole-free but non-trivial level sweep."""
    return make_bump_mixture([(-1.0, 0.2), (0.9, -0.3), (0.1, 1.2)], [1.0, 0.8, 0.6], [0.9, 0.7, 0.5])


FIELD_REGISTRY = {
    "radial_exp": lambda: make_radial_field(exp_profile()),
    "radial_ring": lambda: make_radial_field(ring_profile()),
    "single_bump": lambda: make_bump_mixture([(0.0, 0.0)], [1.0], [1.0]),
    "two_bump": two_bump,
    "three_bump": three_bump,
}


def get_field(name: str) -> ScalarField2D:
    try:
        return FIELD_REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown field {name!r}; known: {sorted(FIELD_REGISTRY)}") from None


def field_to_record(fld: ScalarField2D) -> dict:
    desc = fld.descriptor
    if desc.get("family") not in ("radial", "bump_mixture", "affine"):
        raise ValueError(f"field family {desc.get('family')!r} has no flat record")
    return dict(desc)


def field_from_record(rec: dict) -> ScalarField2D:
    fam = rec.get("family")
    if fam in FIELD_REGISTRY:
        return get_field(fam)
    if fam == "radial":
        name = rec.get("profile", "exp")
        params = {k: float(v) for k, v in rec.items() if k not in ("family", "profile")}
        return make_radial_field(PROFILES[name](**params))
    if fam == "bump_mixture":
        n = int(rec["n"])
        centers = [(float(rec[f"c{k}_x"]), float(rec[f"c{k}_y"])) for k in range(n)]
        weights = [float(rec[f"w{k}"]) for k in range(n)]
        widths = [float(rec[f"s{k}"]) for k in range(n)]
        return make_bump_mixture(centers, weights, widths)
    if fam == "affine":
        return make_affine_field(float(rec["A"]), float(rec["B1"]), float(rec["B2"]))
    raise ValueError(f"unknown field family {fam!r}")


def testfn_to_record(tf: TestFunction) -> dict:
    return dict(tf.descriptor)


def testfn_from_record(rec: dict) -> TestFunction:
    fam = rec.get("family")
    if fam == "bump":
        return make_bump_testfn(float(rec["a"]), float(rec["b"]), float(rec.get("scale", 1.0)))
    if fam == "fourier":
        return make_fourier_testfn(float(rec["t"]))
    raise ValueError(f"unknown test-function family {fam!r}")


def parse_testfn(text: str) -> TestFunction:
    """Parse ``bump:a:b[:scale]`` or ``fourier:t``."""
    parts = text.split(":")
    if parts[0] == "bump" and len(parts) in (3, 4):
        return make_bump_testfn(*(float(p) for p in parts[1:]))
    if parts[0] == "fourier" and len(parts) == 2:
        return make_fourier_testfn(float(parts[1]))
    raise ValueError(f"cannot parse test function {text!r}")


def format_record(rec: dict) -> str:
    """One-line ``key=value`` rendering of a flat record."""
    return " ".join(f"{k}={float(v)!r}" if isinstance(v, float) else f"{k}={v}" for k, v in rec.items())


def parse_record(text: str) -> dict:
    out = {}
    for tok in text.split():
        k, _, v = tok.partition("=")
        try:
            out[k] = int(v)
        except ValueError:
            try:
                out[k] = float(v)
            except ValueError:
                out[k] = v
    return out
