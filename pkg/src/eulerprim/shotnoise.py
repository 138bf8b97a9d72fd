"""Poisson shot-noise fields f(x) = sum_y g_y(x - y) and their characteristic functions.

Kernels are quadratic-form profiles g(x) = m G(x^T A x) with G(q) = exp(-q)
or (1 + q)^(-beta); the amplitude m and a rotation of A are drawn per germ.
Jets of g are closed form, so sums over germs run in the compiled core.

The characteristic function of the origin jet,

    psi_1(t, s, v) = E exp(i[t f(0) + s . grad f(0) + v d11 f(0)])
                   = exp(lambda int (exp(i[t g + s . grad g + v d11 g]) - 1) dx dmu),

is evaluated on a polar node table; psi_2 pairs s_1 with d2 g and uses d22 g.
For radial kernels the angular integral is done with Bessel functions, which is
what makes the improper double integral of the stationary density tractable.
"""

from __future__ import annotations

import functools
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from . import _backend
from ._pykernels import GAUSS, POWER, _germ_jets
from .euler_integral import NotConvergedError, fsum_c, gamma_array
from .fields import ScalarField2D, make_fourier_testfn
from .seeds import derive_seed

ISOTROPY_FACTOR = (math.pi - 2.0) / (16.0 * math.pi)
TAIL = 1e-12


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class GrainKernel:
    """Base grain m G(x^T A x) at unit amplitude; A = diag(1/sx^2, 1/sy^2)."""

    name: str
    kind: int
    sx: float
    sy: float
    beta: float
    decay_gamma: float
    grad_alpha: float
    grad_const_unit: float  # C_g at unit amplitude
    decay_const_unit: float  # C'_g at unit amplitude
    truncation_radius_unit: float

    @property
    def radial(self) -> bool:
        return self.sx == self.sy

    @property
    def convex_level_threshold(self) -> float:
        # level sets of a decreasing profile of a positive-definite quadratic
        # form are ellipses: convex at every level in (0, g(0)]
        return 1.0

    @property
    def grad_const(self) -> float:
        return self.grad_const_unit

    @property
    def decay_const(self) -> float:
        return self.decay_const_unit

    @property
    def truncation_radius(self) -> float:
        return self.truncation_radius_unit

    def grad_const_for(self, m: float) -> float:
        """C with |grad g| <= C g^(alpha/2) for amplitude m (scales as m^(1 - alpha/2))."""
        return self.grad_const_unit * m ** (1.0 - self.grad_alpha / 2.0)

    def decay_const_for(self, m: float) -> float:
        return self.decay_const_unit * max(m, m * m)

    def truncation_radius_for(self, m: float) -> float:
        return _tail_radius(self, m)

    def row(self, m: float = 1.0, theta: float = 0.0, x: float = 0.0, y: float = 0.0, r2: float | None = None):
        """Germ-table row (x, y, m, a11, a12, a22, kind, beta, rtrunc^2)."""
        a11, a12, a22 = _rotated_form(self.sx, self.sy, theta)
        if r2 is None:
            r2 = self.truncation_radius_for(m) ** 2
        return np.array([x, y, m, a11, a12, a22, float(self.kind), self.beta, r2])

    def jets(self, x, y, m: float = 1.0, theta: float = 0.0):
        return _germ_jets(self.row(m, theta, r2=np.inf), np.asarray(x, float), np.asarray(y, float))


def _rotated_form(sx, sy, theta):
    """Entries of r^T diag(1/sx^2, 1/sy^2) r for r the clockwise rotation by theta."""
    c, s = math.cos(theta), math.sin(theta)
    # r = [[c, s], [-s, c]]
    d1, d2 = 1.0 / (sx * sx), 1.0 / (sy * sy)
    a11 = c * c * d1 + s * s * d2
    a12 = c * s * d1 - c * s * d2
    a22 = s * s * d1 + c * c * d2
    return a11, a12, a22


def _jet_envelope(kernel: GrainKernel, m: float, r: np.ndarray, angles: int = 32):
    th = np.linspace(0.0, 2.0 * np.pi, angles, endpoint=False)
    R, T = np.meshgrid(r, th, indexing="ij")
    g, g1, g2, g11, g12, g22 = kernel.jets(R * np.cos(T), R * np.sin(T), m)
    entries = np.max(np.abs(np.stack([g, g1, g2, g11, g12, g22])), axis=0)
    summed = np.abs(g) + g1 * g1 + g2 * g2 + np.abs(g11) + np.abs(g22)
    return np.max(np.maximum(entries, summed), axis=1)


@functools.lru_cache(maxsize=256)
def _tail_radius(kernel: GrainKernel, m: float) -> float:
    """Radius beyond which g and all its jet entries stay below TAIL."""
    hi = 4.0 * max(kernel.sx, kernel.sy)
    while _jet_envelope(kernel, m, np.array([hi]))[0] > TAIL:
        hi *= 1.5
    r = np.linspace(0.0, hi, 4001)
    env = _jet_envelope(kernel, m, r)
    above = np.flatnonzero(env > TAIL)
    return float(r[min(above[-1] + 1, r.size - 1)]) if above.size else 0.0


def _finish(name, kind, sx, sy, beta, gamma, alpha, cgrad):
    k = GrainKernel(name, kind, sx, sy, beta, gamma, alpha, cgrad, 0.0, 0.0)
    R = _tail_radius(k, 1.0)
    r = np.linspace(0.0, R, 8001)
    C = float(np.max(_jet_envelope(k, 1.0, r) * (1.0 + r) ** gamma)) * (1.0 + 1e-9)
    return GrainKernel(name, kind, sx, sy, beta, gamma, alpha, cgrad, C, R)


@functools.lru_cache(maxsize=None)
def gaussian_kernel(sigma: float = 1.0) -> GrainKernel:
    """g(x) = exp(-|x|^2 / sigma^2).

    |grad g| = (2r / sigma^2) g <= C g^(3/4) with C = 2 sqrt(2) e^(-1/2) / sigma;
    alpha = 3/2 keeps int g^(alpha - 1) finite.
    """
    cgrad = 2.0 * math.sqrt(2.0) * math.exp(-0.5) / sigma
    return _finish("gaussian", GAUSS, sigma, sigma, 0.0, 5.0, 1.5, cgrad)


@functools.lru_cache(maxsize=None)
def radial_power_kernel(beta: float = 3.0, sigma: float = 1.0) -> GrainKernel:
    """g(x) = (1 + |x|^2 / sigma^2)^(-beta), beta > 2.

    |grad g| = 2 beta (r / sigma^2) (1 + r^2/sigma^2)^(-1) g <= (beta / sigma) g.
    """
    if beta <= 2.0:
        raise ValueError("radial power kernel needs beta > 2")
    return _finish("radial_power", POWER, sigma, sigma, float(beta), 2.0 * beta, 2.0, beta / sigma)


@functools.lru_cache(maxsize=None)
def aniso_gaussian_kernel(sx: float = 1.0, sy: float = 0.5) -> GrainKernel:
    cgrad = 2.0 * math.sqrt(2.0) * math.exp(-0.5) / min(sx, sy)
    return _finish("aniso_gaussian", GAUSS, sx, sy, 0.0, 5.0, 1.5, cgrad)


KERNELS = {
    "gaussian": gaussian_kernel,
    "radial_power": radial_power_kernel,
    "aniso_gaussian": aniso_gaussian_kernel,
}


@dataclass(frozen=True)
class KernelModel:
    """Mixture of base kernels with amplitude M ~ U[amp_lo, amp_hi] and optional uniform rotation."""

    kernels: tuple
    weights: tuple = (1.0,)
    amp_lo: float = 0.5
    amp_hi: float = 1.5
    rotation: bool = True
    name: str = "model"

    def __post_init__(self):
        if len(self.kernels) != len(self.weights) or not self.kernels:
            raise ValueError("one weight per kernel")
        if abs(sum(self.weights) - 1.0) > 1e-12 or min(self.weights) < 0:
            raise ValueError("kernel weights must be non-negative and sum to 1")
        if not 0.0 <= self.amp_lo < self.amp_hi:
            raise ValueError("amplitude law needs 0 <= lo < hi")

    def amplitude_moment(self, k: float) -> float:
        """E[M^k] for the uniform amplitude law (finite for every k: M is bounded)."""
        lo, hi = self.amp_lo, self.amp_hi
        return (hi ** (k + 1) - lo ** (k + 1)) / ((k + 1) * (hi - lo))

    @property
    def radial(self) -> bool:
        return all(k.radial for k in self.kernels)

    @property
    def isotropic(self) -> bool:
        return self.radial or self.rotation

    @property
    def max_truncation_radius(self) -> float:
        return max(k.truncation_radius_for(self.amp_hi) for k in self.kernels)


def make_model(name: str = "gaussian", **kw) -> KernelModel:
    if name == "gaussian":
        return KernelModel((gaussian_kernel(),), name="gaussian", **kw)
    if name == "radial_power":
        return KernelModel((radial_power_kernel(),), name="radial_power", **kw)
    if name == "aniso_gaussian":
        return KernelModel((aniso_gaussian_kernel(),), name="aniso_gaussian", **kw)
    if name == "mixture":
        return KernelModel((gaussian_kernel(), gaussian_kernel(0.6)), (0.5, 0.5), name="mixture", **kw)
    raise KeyError(f"unknown kernel model {name!r}")


MODELS = ("gaussian", "radial_power", "aniso_gaussian", "mixture")


# ---------------------------------------------------------------------------
# germs and fields


@dataclass
class GermSample:
    seed: int
    window_radius: float
    intensity: float
    positions: np.ndarray  # (N, 2)
    kernel_ids: np.ndarray  # (N,)
    amplitudes: np.ndarray  # (N,)
    rotations: np.ndarray  # (N,)
    model: KernelModel = field(repr=False, default=None)

    def __len__(self):
        return len(self.amplitudes)

    def table(self) -> np.ndarray:
        """Germ table consumed by the jet kernels."""
        n = len(self)
        rows = np.empty((n, 9))
        rows[:, 0:2] = self.positions
        rows[:, 2] = self.amplitudes
        c, s = np.cos(self.rotations), np.sin(self.rotations)
        for kid, k in enumerate(self.model.kernels):
            sel = self.kernel_ids == kid
            d1, d2 = 1.0 / (k.sx * k.sx), 1.0 / (k.sy * k.sy)
            cc, ss = c[sel], s[sel]
            rows[sel, 3] = cc * cc * d1 + ss * ss * d2
            rows[sel, 4] = cc * ss * (d1 - d2)
            rows[sel, 5] = ss * ss * d1 + cc * cc * d2
            rows[sel, 6] = float(k.kind)
            rows[sel, 7] = k.beta
            rows[sel, 8] = k.truncation_radius_for(self.model.amp_hi) ** 2
        return rows

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"{self.seed} {self.window_radius!r} {self.intensity!r}\n")
        for (x, y), kid, m, th in zip(self.positions, self.kernel_ids, self.amplitudes, self.rotations):
            buf.write(f"{float(x)!r} {float(y)!r} {int(kid)} {float(m)!r} {float(th)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str, model: KernelModel) -> "GermSample":
        lines = text.strip().splitlines()
        seed, R, lam = lines[0].split()
        body = np.array([[float(v) for v in ln.split()] for ln in lines[1:]]).reshape(-1, 5)
        return cls(int(seed), float(R), float(lam), body[:, :2].copy(), body[:, 2].astype(int), body[:, 3].copy(), body[:, 4].copy(), model)


def sample_germs(window_radius: float, intensity: float, model: KernelModel, seed: int) -> GermSample:
    """Poisson germs of the given intensity, uniform in the disc B(0, window_radius)."""
    if window_radius <= 0 or intensity <= 0:
        raise ValueError("window_radius and intensity must be positive")
    rng = np.random.default_rng(seed)
    n = rng.poisson(intensity * math.pi * window_radius**2)
    rad = window_radius * np.sqrt(rng.random(n))
    ang = 2.0 * math.pi * rng.random(n)
    pos = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    if len(model.kernels) > 1:
        kid = rng.choice(len(model.kernels), size=n, p=np.asarray(model.weights))
    else:
        kid = np.zeros(n, dtype=int)
    amp = model.amp_lo + (model.amp_hi - model.amp_lo) * rng.random(n)
    rot = 2.0 * math.pi * rng.random(n) if model.rotation else np.zeros(n)
    return GermSample(int(seed), float(window_radius), float(intensity), pos, kid, amp, rot, model)


class ShotField(ScalarField2D):
    """Field of a germ sample; jets are truncated sums over nearby germs."""

    def __init__(self, sample: GermSample, backend=None):
        self.sample = sample
        self.kernels = backend or _backend.kernels
        self.germs = sample.table() if len(sample) else np.zeros((0, 9))
        R = sample.window_radius + (sample.model.max_truncation_radius if sample.model else 0.0)
        desc = {"family": "shot", "seed": sample.seed, "R": sample.window_radius, "intensity": sample.intensity, "n": len(sample)}
        super().__init__(self._probe, (-R, R, -R, R), desc)

    def _probe(self, x, y):
        shape = np.broadcast(x, y).shape
        X, Y = np.broadcast_arrays(x, y)
        out = self.kernels.probe_jets(self.germs, X.ravel(), Y.ravel())
        return tuple(o.reshape(shape) for o in out)

    def grid_jets(self, xs, ys):
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        if _regular(xs) and _regular(ys):
            hx = xs[1] - xs[0] if xs.size > 1 else 1.0
            hy = ys[1] - ys[0] if ys.size > 1 else 1.0
            return tuple(self.kernels.splat_jets(self.germs, xs[0], ys[0], hx, hy, xs.size, ys.size))
        return super().grid_jets(xs, ys)


def _regular(a: np.ndarray) -> bool:
    if a.size < 2:
        return True
    d = np.diff(a)
    return bool(np.all(np.abs(d - d[0]) <= 1e-9 * abs(d[0])))


def shot_field(sample: GermSample, backend=None) -> ShotField:
    return ShotField(sample, backend)


# ---------------------------------------------------------------------------
# characteristic function on a polar node table


@dataclass(frozen=True)
class CFQuad:
    r_panels: int = 48
    r_order: int = 8
    phi_nodes: int = 64
    amp_nodes: int = 8
    rot_nodes: int = 16
    tol: float = 1e-8

    def refined(self) -> "CFQuad":
        return CFQuad(2 * self.r_panels, self.r_order, 2 * self.phi_nodes, self.amp_nodes + 4, 2 * self.rot_nodes, self.tol)


def _radial_panels(R: float, scale: float, panels: int):
    """Panel edges on [0, R]: uniform over the core, geometric in the tail."""
    core = min(R, 4.0 * scale)
    n_core = panels if core >= R else max(1, (3 * panels) // 4)
    edges = list(np.linspace(0.0, core, n_core + 1))
    if core < R:
        edges += list(np.geomspace(core, R, panels - n_core + 1)[1:])
    return np.array(edges)


def _gl_on(edges, order):
    gx, gw = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    return (mid[:, None] + half[:, None] * gx).ravel(), (half[:, None] * gw).ravel()


def _amp_nodes(model: KernelModel, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    lo, hi = model.amp_lo, model.amp_hi
    return 0.5 * (hi + lo) + 0.5 * (hi - lo) * x, 0.5 * w  # weights sum to 1


@functools.lru_cache(maxsize=16)
def _build_table(model: KernelModel, quad: CFQuad):
    cols = [[] for _ in range(8)]
    ms, wm = _amp_nodes(model, quad.amp_nodes)
    phi = 2.0 * math.pi * np.arange(quad.phi_nodes) / quad.phi_nodes
    dphi = 2.0 * math.pi / quad.phi_nodes
    for k, wk in zip(model.kernels, model.weights):
        R = k.truncation_radius_for(model.amp_hi)
        r, wr = _gl_on(_radial_panels(R, max(k.sx, k.sy), quad.r_panels), quad.r_order)
        Rr, Pp = np.meshgrid(r, phi, indexing="ij")
        X, Y = (Rr * np.cos(Pp)).ravel(), (Rr * np.sin(Pp)).ravel()
        wxy = (wr[:, None] * r[:, None] * dphi * np.ones_like(phi)[None, :]).ravel()
        if model.rotation and not k.radial:
            thetas = 2.0 * math.pi * np.arange(quad.rot_nodes) / quad.rot_nodes
            wth = np.full(quad.rot_nodes, 1.0 / quad.rot_nodes)
        else:
            thetas, wth = np.zeros(1), np.ones(1)
        for m, wa in zip(ms, wm):
            for th, wt in zip(thetas, wth):
                g, g1, g2, g11, _, g22 = k.jets(X, Y, float(m), float(th))
                for c, arr in zip(cols, (g, g1, g2, g11, g22, wk * wa * wt * wxy, X, Y)):
                    c.append(arr)
    return tuple(np.concatenate(c) for c in cols)


def cf_table(model: KernelModel, quad: CFQuad):
    """Nodes (g, d1 g, d2 g, d11 g, d22 g) and weights for int ... dx dmu."""
    return _build_table(model, quad)[:6]


def cf_positions(model: KernelModel, quad: CFQuad):
    """Spatial offsets x of the cf_table nodes, in table order."""
    return _build_table(model, quad)[6:]


def _pairing(i: int, tab):
    g0, g1, g2, g11, g22, w = tab
    if i == 1:
        return g0, g1, g2, g11, w
    if i == 2:
        return g0, g2, g1, g22, w
    raise ValueError("i must be 1 or 2")


def _sums(i, t, s1, s2, v, model, quad, backend=None):
    g0, ga, gb, gc, w = _pairing(i, cf_table(model, quad))
    kern = backend or _backend.kernels
    return kern.cf_sums(g0, ga, gb, gc, w, t, s1, s2, v)


def _args(t, s, v):
    t = np.atleast_1d(np.asarray(t, float))
    s = np.asarray(s, float)
    s = np.atleast_2d(s) if s.ndim <= 1 else s
    v = np.atleast_1d(np.asarray(v, float))
    n = max(t.size, s.shape[0], v.size)
    return np.broadcast_to(t, n), np.broadcast_to(s[:, 0], n), np.broadcast_to(s[:, 1], n), np.broadcast_to(v, n)


def _checked(fn, quad: CFQuad, check: bool):
    val = fn(quad)
    if check:
        ref = fn(quad.refined())
        err = np.max(np.abs(ref - val) / np.maximum(1.0, np.abs(ref)))
        if err > quad.tol:
            raise NotConvergedError(f"characteristic-function quadrature not converged (rel. change {err:.2e})")
    return val


def _out(val, scalar):
    return complex(val[0]) if scalar else val


def psi(i: int, t, s=(0.0, 0.0), v=0.0, model: KernelModel | None = None, quad: CFQuad = CFQuad(), intensity: float = 1.0, check: bool = True):
    """psi_i(t, s, v); vector arguments broadcast."""
    model = model or make_model()
    scalar = np.ndim(t) == 0 and np.ndim(s) <= 1 and np.ndim(v) == 0
    T, S1, S2, V = _args(t, s, v)

    def fn(q):
        S = _sums(i, T, S1, S2, V, model, q)
        return np.exp(intensity * S[0])

    return _out(_checked(fn, quad, check), scalar)


def d4_psi(i: int, t, s=(0.0, 0.0), model: KernelModel | None = None, quad: CFQuad = CFQuad(), intensity: float = 1.0, check: bool = True):
    """d/dv psi_i(t, s, v) at v = 0: i psi_i(t, s) lambda int d_ii g e^{i(t g + s . grad g)} dx dmu."""
    model = model or make_model()
    scalar = np.ndim(t) == 0 and np.ndim(s) <= 1
    T, S1, S2, V = _args(t, s, 0.0)

    def fn(q):
        S = _sums(i, T, S1, S2, V, model, q)
        return 1j * np.exp(intensity * S[0]) * intensity * S[1]

    return _out(_checked(fn, quad, check), scalar)


def d22_psi(i: int, t, model: KernelModel | None = None, quad: CFQuad = CFQuad(), intensity: float = 1.0, check: bool = True):
    """Second derivative of psi_i(t, s) at s = 0 along the s-component paired with d_i g.

    Equals -psi(t)[(lambda int d_i g e^{itg})^2 + lambda int (d_i g)^2 e^{itg}].
    """
    model = model or make_model()
    scalar = np.ndim(t) == 0
    T, S1, S2, V = _args(t, (0.0, 0.0), 0.0)

    def fn(q):
        S = _sums(i, T, S1, S2, V, model, q)
        return -np.exp(intensity * S[0]) * ((intensity * S[2]) ** 2 + intensity * S[3])

    return _out(_checked(fn, quad, check), scalar)


def d4_psi_fd(i, t, s=(0.0, 0.0), model=None, step: float = 1e-4, **kw):
    """Central difference of psi_i in v at v = 0."""
    return (psi(i, t, s, step, model, **kw) - psi(i, t, s, -step, model, **kw)) / (2.0 * step)


def d22_psi_fd(i, t, model=None, step: float = 1e-3, axis: str = "paired", **kw):
    """Central second difference of psi_i(t, s) at s = 0.

    ``axis='paired'`` steps along s_1 (the component multiplying d_i g);
    ``axis='s2'`` steps along s_2 instead.  The two agree for isotropic models.
    """
    e = np.array([step, 0.0]) if axis == "paired" else np.array([0.0, step])
    p = psi(i, t, e, 0.0, model, **kw)
    m = psi(i, t, -e, 0.0, model, **kw)
    c = psi(i, t, (0.0, 0.0), 0.0, model, **kw)
    return (p - 2.0 * c + m) / step**2


# ---------------------------------------------------------------------------
# radial kernels: angular integrals in closed form


def _profile_derivs(k: GrainKernel, r):
    """G, G', G'' and G'/r of the unit-amplitude radial profile as functions of r."""
    s2 = k.sx * k.sx
    if k.kind == GAUSS:
        G = np.exp(-r * r / s2)
        Gr = -2.0 / s2 * G  # G'/r
        G2 = (4.0 * r * r / (s2 * s2) - 2.0 / s2) * G
    else:
        b = k.beta
        u = 1.0 + r * r / s2
        G = u ** (-b)
        Gr = -2.0 * b / s2 * u ** (-b - 1.0)
        G2 = Gr + 4.0 * b * (b + 1.0) * r * r / (s2 * s2) * u ** (-b - 2.0)
    return G, Gr * r, G2, Gr


@dataclass
class RadialCF:
    """psi, P and Q of a radial model as splines in log |s|.

    For s of length rho and angle alpha,
        psi(t, s)         = exp(Phi(rho)),
        d4 psi_1(t, s, 0) = i psi(t, s) [P(rho) - Q(rho) cos(2 alpha)].
    """

    t: float
    rho: np.ndarray
    phi: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    phi0: complex
    P0: complex
    grad2: complex  # lambda int (d_1 g)^2 e^{itg} dx dmu

    def __post_init__(self):
        lr = np.log(self.rho)
        self._sp = [CubicSpline(lr, a) for a in (self.phi.real, self.phi.imag, self.P.real, self.P.imag, self.Q.real, self.Q.imag)]

    def _ev(self, rho):
        lr = np.log(rho)
        v = [sp(lr) for sp in self._sp]
        return v[0] + 1j * v[1], v[2] + 1j * v[3], v[4] + 1j * v[5]

    def psi(self, rho):
        return np.exp(self._ev(rho)[0])

    def d4(self, a, b):
        """d4 psi_1(t, (a, b), 0)."""
        rho2 = a * a + b * b
        rho = np.sqrt(rho2)
        ph, P, Q = self._ev(rho)
        cos2 = (a * a - b * b) / rho2
        return 1j * np.exp(ph) * (P - Q * cos2)

    @property
    def psi0(self) -> complex:
        return complex(np.exp(self.phi0))

    @property
    def d4_at_zero(self) -> complex:
        return complex(1j * np.exp(self.phi0) * self.P0)

    @property
    def d22(self) -> complex:
        # radial kernels: int d_1 g e^{itg} vanishes by symmetry
        return complex(-np.exp(self.phi0) * self.grad2)


def _radial_integrals(model: KernelModel, t: float, rho: np.ndarray, intensity: float, r_width: float, amp_nodes: int):
    ms, wm = _amp_nodes(model, amp_nodes)
    phi = np.zeros(rho.size, complex)
    P = np.zeros(rho.size, complex)
    Q = np.zeros(rho.size, complex)
    phi0 = P0 = grad2 = 0.0 + 0.0j
    for k, wk in zip(model.kernels, model.weights):
        R = k.truncation_radius_for(model.amp_hi)
        core = min(R, 4.0 * k.sx)
        edges = np.linspace(0.0, core, max(8, int(math.ceil(core / (r_width * k.sx)))) + 1)
        if core < R:
            edges = np.concatenate([edges, np.geomspace(core, R, 65)[1:]])
        r, wr = _gl_on(edges, 8)
        G, G1, G2, Gr = _profile_derivs(k, r)
        for m, wa in zip(ms, wm):
            c = intensity * wk * wa
            e = np.exp(1j * m * t * G)
            em1 = -2.0 * np.sin(0.5 * m * t * G) ** 2 + 1j * np.sin(m * t * G)
            wrr = wr * r
            phi0 += c * 2.0 * math.pi * np.sum(wrr * em1)
            P0 += c * math.pi * m * np.sum(wrr * (G2 + Gr) * e)
            grad2 += c * math.pi * m * m * np.sum(wrr * G1 * G1 * e)
            for lo in range(0, rho.size, 64):
                sl = slice(lo, lo + 64)
                a = m * np.abs(G1)[None, :] * rho[sl, None]
                j0 = special.j0(a)
                j2 = special.jv(2, a)
                # e^{imtG} J0 - 1 = (e^{imtG} - 1) J0 + (J0 - 1)
                phi[sl] += c * 2.0 * math.pi * ((em1 * wrr)[None, :] * j0 + wrr[None, :] * (j0 - 1.0)).sum(axis=1)
                P[sl] += c * math.pi * m * ((wrr * (G2 + Gr) * e)[None, :] * j0).sum(axis=1)
                Q[sl] += c * math.pi * m * ((wrr * (G2 - Gr) * e)[None, :] * j2).sum(axis=1)
    return phi, P, Q, phi0, P0, grad2


@functools.lru_cache(maxsize=32)
def radial_cf(model: KernelModel, t: float, intensity: float = 1.0, rho_min: float = 1e-4, rho_max: float = 600.0, nodes: int = 1500, r_width: float = 0.01, amp_nodes: int = 6) -> RadialCF:
    if not model.radial:
        raise ValueError("closed-form angular integrals need radial kernels")
    rho = np.geomspace(rho_min, rho_max, nodes)
    phi, P, Q, phi0, P0, grad2 = _radial_integrals(model, t, rho, intensity, r_width, amp_nodes)
    return RadialCF(t, rho, phi, P, Q, complex(phi0), complex(P0), complex(grad2))


# ---------------------------------------------------------------------------
# stationary density


@dataclass(frozen=True)
class Improper:
    s_max: float = 50.0
    s_grid: int = 200
    eps0: float = 1e-3


@dataclass
class StationaryLimit:
    value: complex
    error: float
    terms: dict


def _double_integral(cf: RadialCF, eps0: float, s_max: float, n: int) -> complex:
    """int_0^inf int_0^inf [D(s1 - s2, s2) - D(s1 + s2, -s2)] / (s1 s2) ds1 ds2 on [eps0, s_max]^2.

    With s = e^u the measure ds1 ds2 / (s1 s2) becomes du1 du2; midpoint rule in u.
    """
    lo, hi = math.log(eps0), math.log(s_max)
    du = (hi - lo) / n
    u = lo + du * (np.arange(n) + 0.5)
    s = np.exp(u)
    S1, S2 = np.meshgrid(s, s, indexing="ij")
    diff = cf.d4(S1 - S2, S2) - cf.d4(S1 + S2, -S2)
    return complex(np.sum(diff) * du * du)


def stationary_limit_density(t: float, model: KernelModel | None = None, improper: Improper = Improper(), intensity: float = 1.0, conv_tol: float = 2e-3) -> StationaryLimit:
    """E gamma(0, f, h^(t)) for the stationary shot-noise field of an isotropic radial model.

    value = sum_i [ it (pi - 2)/(8 pi) d22 psi_i  -  d4 psi_i(t, 0, 0) / (4i)  -  (i / 2 pi^2) J_i ],
    J_i the improper double integral of d4 psi_i.  The grad-term coefficient
    carries the factor it from h'(u) = it e^{itu}.  ``terms['printed_form']``
    holds the variant sum_i [ (pi-2)/(16 pi) d22 psi_i - d4 psi_i/(4i) + J_i / (2 pi^2) ]
    for comparison.

    The error bar adds the changes under doubling the grid, halving eps0 and
    doubling s_max.
    """
    model = model or make_model()
    if not model.isotropic:
        raise ValueError("stationary density formula needs an isotropic model")
    if not model.radial:
        raise ValueError("stationary density is implemented for radial kernels only")
    cf = radial_cf(model, float(t), float(intensity), rho_min=improper.eps0 / 4.0, rho_max=5.0 * improper.s_max * math.sqrt(5.0))
    eps0, smax, n = improper.eps0, improper.s_max, improper.s_grid
    J = _double_integral(cf, eps0, smax, n)
    J_fine = _double_integral(cf, eps0, smax, 2 * n)
    grid_err = abs(J_fine - J)
    if grid_err / (2.0 * math.pi**2) > conv_tol:
        raise NotConvergedError(f"double integral not converged under grid doubling ({grid_err:.2e})")
    n_dec = n / math.log(smax / eps0)
    J_eps = _double_integral(cf, eps0 / 2.0, smax, int(round(n_dec * math.log(smax / (eps0 / 2.0)))))
    J_tail = _double_integral(cf, eps0, 2.0 * smax, int(round(n_dec * math.log(2.0 * smax / eps0))))
    err_J = grid_err + abs(J_eps - J) + abs(J_tail - J)
    d22 = cf.d22
    d40 = cf.d4_at_zero
    # the two quarter planes contribute equally for radial kernels
    grad_term = 2.0 * (1j * t * (math.pi - 2.0) / (8.0 * math.pi) * d22)
    d4_term = 2.0 * (-d40 / 4j)
    dbl_term = 2.0 * (-1j / (2.0 * math.pi**2) * J)
    value = grad_term + d4_term + dbl_term
    printed = 2.0 * ((math.pi - 2.0) / (16.0 * math.pi) * d22 - d40 / 4j + J / (2.0 * math.pi**2))
    err = 2.0 * err_J / (2.0 * math.pi**2)
    return StationaryLimit(
        complex(value),
        float(err),
        {
            "grad_term": complex(grad_term),
            "d4_term": complex(d4_term),
            "double_integral_term": complex(dbl_term),
            "J": complex(J),
            "d22_psi": complex(d22),
            "d4_psi_0": complex(d40),
            "psi": cf.psi0,
            "printed_form": complex(printed),
            "grid_error": float(2.0 * grid_err / (2.0 * math.pi**2)),
        },
    )


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class MCEstimate:
    estimate: complex
    stderr: float  # sqrt(var(Re) + var(Im)) / sqrt(reps)
    stderr_re: float
    stderr_im: float
    reps: int


def mc_summary(values) -> MCEstimate:
    """Mean and standard error with exactly rounded sums (replicate order does not matter)."""
    v = np.asarray(values, dtype=complex)
    n = v.size
    mr = math.fsum(v.real) / n
    mi = math.fsum(v.imag) / n
    vr = math.fsum((v.real - mr) ** 2) / max(n - 1, 1)
    vi = math.fsum((v.imag - mi) ** 2) / max(n - 1, 1)
    return MCEstimate(complex(mr, mi), math.sqrt((vr + vi) / n), math.sqrt(vr / n), math.sqrt(vi / n), n)


def default_window(model: KernelModel) -> float:
    return 5.0 * model.max_truncation_radius


def _origin_jet(model, window_radius, intensity, seed, index, backend):
    s = sample_germs(window_radius, intensity, model, derive_seed(seed, index))
    if not len(s):
        return np.zeros(6)
    pos = s.positions
    near = np.einsum("ij,ij->i", pos, pos) <= model.max_truncation_radius**2
    if not near.any():
        return np.zeros(6)
    sub = GermSample(s.seed, s.window_radius, s.intensity, pos[near], s.kernel_ids[near], s.amplitudes[near], s.rotations[near], model)
    return backend.probe_jets(sub.table(), np.zeros(1), np.zeros(1))[:, 0]


@functools.lru_cache(maxsize=8)
def origin_jets(model: KernelModel, window_radius: float, intensity: float, reps: int, seed: int, workers: int = 1, backend_name: str | None = None) -> np.ndarray:
    """(reps, 6) jets of f at the origin, one independent germ sample per replicate.

    Germs are drawn over the whole window; only those within the truncation
    radius of the origin contribute.
    """
    backend = _backend.get(backend_name) if backend_name else _backend.kernels

    def one(k):
        return _origin_jet(model, window_radius, intensity, seed, k, backend)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(one, range(reps)))
    else:
        rows = [one(k) for k in range(reps)]
    out = np.array(rows).reshape(reps, 6)
    out.setflags(write=False)
    return out


def gamma_origin_values(jets: np.ndarray, t: float) -> np.ndarray:
    """Per-replicate -sum_i 1{grad f in Q_i}[it (d_i f)^2 + d_ii f] e^{itf} at the origin."""
    f, f1, f2, f11, _, f22 = jets.T
    return -gamma_array((f, f1, f2, f11, None, f22), make_fourier_testfn(t))


def mc_gamma_at_origin(t: float, model: KernelModel | None = None, window_radius: float | None = None, intensity: float = 1.0, reps: int = 10000, seed: int = 42, workers: int = 1) -> MCEstimate:
    model = model or make_model()
    R = window_radius or default_window(model)
    if R < 5.0 * model.max_truncation_radius:
        raise ValueError("window radius must be at least 5 truncation radii")
    return mc_summary(gamma_origin_values(origin_jets(model, R, intensity, reps, seed, workers), t))


def empirical_cf(model: KernelModel | None = None, window_radius: float | None = None, intensity: float = 1.0, t: float = 1.0, reps: int = 10000, seed: int = 42, workers: int = 1) -> MCEstimate:
    model = model or make_model()
    R = window_radius or default_window(model)
    if t == 0:
        return MCEstimate(1.0 + 0.0j, 0.0, 0.0, 0.0, reps)
    f = origin_jets(model, R, intensity, reps, seed, workers)[:, 0]
    return mc_summary(np.exp(1j * t * f))


def isotropy_factor_check(model: KernelModel | None = None, t: float = 1.0, window_radius: float | None = None, intensity: float = 1.0, reps: int = 10000, seed: int = 42, workers: int = 1) -> dict:
    """Both sides of E[e^{itf} 1{grad f in Q_i} (d_i f)^2] = (pi-2)/(16 pi) E[e^{itf} |grad f|^2].

    All sides use the same replicates; ``se_diff_i`` is the standard error of
    the paired difference lhs_i - rhs.
    """
    model = model or make_model()
    R = window_radius or default_window(model)
    J = origin_jets(model, R, intensity, reps, seed, workers)
    f, f1, f2 = J[:, 0], J[:, 1], J[:, 2]
    e = np.exp(1j * t * f)
    q1 = (f2 < f1) & (f1 < 0)
    q2 = (f1 < f2) & (f2 < 0)
    l1 = np.where(q1, e * f1 * f1, 0.0)
    l2 = np.where(q2, e * f2 * f2, 0.0)
    r = ISOTROPY_FACTOR * e * (f1 * f1 + f2 * f2)
    out = {"t": t, "reps": reps, "seed": seed}
    for name, arr in (("lhs_1", l1), ("lhs_2", l2), ("rhs", r)):
        s = mc_summary(arr)
        out[name] = s.estimate
        out["se_" + name] = s.stderr
    out["se_diff_1"] = mc_summary(l1 - r).stderr
    out["se_diff_2"] = mc_summary(l2 - r).stderr
    return out


def mc_euler_primitive_fourier(t: float, model: KernelModel | None = None, n: float = 64.0, intensity: float = 1.0, reps: int = 100, spacing: float = 0.0625, seed: int = 42, workers: int = 1, backend_name: str | None = None) -> MCEstimate:
    """(1/|W_n|) I_{f_n}(h^(t)) averaged over replicates, W_n = B(0, sqrt n).

    Each replicate samples germs on W_n and integrates the density of the
    Fourier test function over W_n with the midpoint rule.
    """
    model = model or make_model()
    h = make_fourier_testfn(t)
    R = math.sqrt(n)
    cells = int(math.ceil(2.0 * R / spacing))
    d = 2.0 * R / cells
    xs = -R + d * (np.arange(cells) + 0.5)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    mask = X * X + Y * Y <= n
    backend = _backend.get(backend_name) if backend_name else _backend.kernels

    def one(k):
        s = sample_germs(R, intensity, model, derive_seed(seed, k))
        fld = ShotField(s, backend)
        jets = fld.grid_jets(xs, xs)
        dens = np.where(mask, gamma_array(jets, h), 0.0)
        return -complex(np.sum(dens)) * d * d / (math.pi * n)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            vals = list(ex.map(one, range(reps)))
    else:
        vals = [one(k) for k in range(reps)]
    return mc_summary(vals)


def angular_constant(nodes: int = 32) -> float:
    """int_{-3 pi/4}^{-pi/2} cos^2 theta d theta by Gauss-Legendre; equals (pi - 2)/8."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    a, b = -0.75 * math.pi, -0.5 * math.pi
    th = 0.5 * (a + b) + 0.5 * (b - a) * x
    return float(0.5 * (b - a) * math.fsum(w * np.cos(th) ** 2))


def kernel_moment(model: KernelModel, which: str, power: float, quad: CFQuad = CFQuad()) -> float:
    """lambda-free int |d g|^power dx dmu for which in {'g', 'd1', 'd2', 'd11', 'd22'}."""
    g0, g1, g2, g11, g22, w = cf_table(model, quad)
    col = {"g": g0, "d1": g1, "d2": g2, "d11": g11, "d22": g22}[which]
    return float(math.fsum(w * np.abs(col) ** power))


__all__ = [
    "GrainKernel", "KernelModel", "GermSample", "ShotField", "CFQuad", "Improper", "StationaryLimit", "MCEstimate",
    "gaussian_kernel", "radial_power_kernel", "aniso_gaussian_kernel", "make_model", "sample_germs", "shot_field",
    "psi", "d4_psi", "d22_psi", "d4_psi_fd", "d22_psi_fd", "radial_cf", "stationary_limit_density",
    "mc_gamma_at_origin", "empirical_cf", "isotropy_factor_check", "mc_euler_primitive_fourier", "angular_constant",
    "ISOTROPY_FACTOR", "fsum_c",
]
