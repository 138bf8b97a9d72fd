"""Higher moments of I_f(h) for shot-noise fields and the bound that controls them.

The bound reads

    E|I_f(h)|^q <= C_q (M^(1/p) (|h|_inf + |h'|_inf) int P(f(x) in supp h)^(1 - 1/p) dx)^q

with M dominating E|d_i f(x)|^(2pq) and E|d_ii f(x)|^(pq) uniformly in x.
The constant defaults to q 2^q; the (|h| + |h'|) factor sits outside it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .euler_integral import QuadratureSpec, euler_primitive_integral
from .fields import TestFunction
from .seeds import derive_seed
from .shotnoise import CFQuad, KernelModel, cf_positions, cf_table, sample_germs, shot_field


def default_constant(q: int) -> float:
    return float(q * 2**q)


def moment_bound(q: int, p: float, M: float, h: TestFunction, support_prob_integral: float, constant: float | None = None) -> float:
    if p <= 1.0:
        raise ValueError("moment bound needs p > 1")
    if q < 1:
        raise ValueError("q must be a positive integer")
    if M < 0 or support_prob_integral < 0:
        raise ValueError("M and the support-probability integral must be non-negative")
    c = default_constant(q) if constant is None else constant
    return c * (M ** (1.0 / p) * (h.sup_h + h.sup_dh) * support_prob_integral) ** q


def empirical_moment(values, q: float) -> float:
    """Mean of |value|^q, summed exactly so the result ignores sample order."""
    v = np.abs(np.asarray(list(values), dtype=complex))
    if v.size == 0:
        raise ValueError("empirical moment of an empty sample")
    return math.fsum(v**q) / v.size


def jackknife_se(values, q: float) -> float:
    """Leave-one-out standard error of the empirical q-th absolute moment."""
    a = np.abs(np.asarray(list(values), dtype=complex)) ** q
    n = a.size
    if n < 2:
        return math.inf
    total = math.fsum(a)
    loo = (total - a) / (n - 1)
    mean = math.fsum(loo) / n
    return math.sqrt((n - 1) / n * math.fsum((loo - mean) ** 2))


# ---------------------------------------------------------------------------
# M from kernel moments


def _moments_from_cumulants(kappa: np.ndarray, order: int) -> float:
    """E X^order from cumulants kappa[1..order]: m_n = sum_j C(n-1, j-1) kappa_j m_{n-j}."""
    m = [1.0]
    for n in range(1, order + 1):
        m.append(math.fsum(math.comb(n - 1, j - 1) * kappa[j] * m[n - j] for j in range(1, n + 1)))
    return m[order]


def _abs_moment(kappa_fn, r: float) -> float:
    """E|X|^r; exact for even integer r, otherwise bounded through the next even order (Lyapunov)."""
    k = int(math.ceil(r / 2.0)) * 2
    kappa = np.array([0.0] + [kappa_fn(j) for j in range(1, k + 1)])
    mk = _moments_from_cumulants(kappa, k)
    return mk if k == r else mk ** (r / k)


@dataclass
class KernelMoments:
    M: float
    grad_order: float
    hess_order: float
    grad_moment: float
    hess_moment: float
    probes: int


def kernel_moment_bound(model: KernelModel, intensity: float, window_radius: float, p: float, q: int, probes: int = 9, quad: CFQuad = CFQuad(r_panels=32, phi_nodes=48, amp_nodes=6)) -> KernelMoments:
    """M = sup_x max_i max(E|d_i f(x)|^(2pq), E|d_ii f(x)|^(pq)) for germs on B(0, window_radius).

    The cumulants of d f(x) are intensity * int_{x - y in B} (d g)^j over the
    kernel node table; the sup is taken over a probes x probes grid covering
    the dilated window, on which moments of the windowed field are exact.
    """
    g0, g1, g2, g11, g22, w = cf_table(model, quad)
    # node offsets z: the germ sits at x - z, so f(x) gets g(z)
    zx, zy = cf_positions(model, quad)
    reach = window_radius + model.max_truncation_radius
    pts = np.linspace(-reach, reach, probes)
    best_g = best_h = 0.0
    for x in pts:
        for y in pts:
            inside = (x - zx) ** 2 + (y - zy) ** 2 <= window_radius**2
            ww = w * inside
            for col, order, which in ((g1, 2 * p * q, "g"), (g2, 2 * p * q, "g"), (g11, p * q, "h"), (g22, p * q, "h")):
                val = _abs_moment(lambda j, c=col: intensity * float(np.dot(ww, c**j)), order)
                if which == "g":
                    best_g = max(best_g, val)
                else:
                    best_h = max(best_h, val)
    return KernelMoments(max(best_g, best_h), 2 * p * q, p * q, best_g, best_h, probes * probes)


# ---------------------------------------------------------------------------
# support probability


def _grid(window_radius: float, model: KernelModel, spacing: float):
    reach = window_radius + model.max_truncation_radius
    cells = int(math.ceil(2.0 * reach / spacing))
    d = 2.0 * reach / cells
    return -reach + d * (np.arange(cells) + 0.5), d


def support_prob_integral(model: KernelModel, h: TestFunction, p: float, window: float, reps: int = 200, seed: int = 42, intensity: float = 1.0, spacing: float = 0.125) -> float:
    """int P(f(x) in supp h)^(1 - 1/p) dx, the probability estimated per grid cell by Monte Carlo.

    ``window`` is the radius of the germ disc; the grid covers that disc dilated
    by the truncation radius, outside of which f vanishes.
    """
    if p <= 1.0:
        raise ValueError("support probability integral needs p > 1")
    a, b = h.support
    xs, d = _grid(window, model, spacing)
    hits = np.zeros((xs.size, xs.size))
    for k in range(reps):
        fld = shot_field(sample_germs(window, intensity, model, derive_seed(seed, k)))
        v = fld.grid_values(xs, xs)
        hits += (v >= a) & (v <= b)
    prob = hits / reps
    return math.fsum((prob ** (1.0 - 1.0 / p)).ravel()) * d * d


# ---------------------------------------------------------------------------
# reports


@dataclass
class MomentReport:
    q: int
    p: float
    empirical_qth: float
    jackknife_se: float
    bound: float
    constant_used: float
    M: float
    support_prob_integral: float
    holds: bool
    inputs: dict = field(default_factory=dict)

    COLUMNS = ("q", "p", "empirical_qth", "jackknife_se", "bound", "constant_used", "M", "support_prob_integral", "holds", "inputs")

    def to_csv_row(self) -> str:
        d = asdict(self)
        d["inputs"] = ";".join(f"{k}={v}" for k, v in sorted(self.inputs.items()))
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow([d[c] for c in self.COLUMNS])
        return buf.getvalue()

    @classmethod
    def csv_header(cls) -> str:
        return ",".join(cls.COLUMNS) + "\n"


def sample_primitives(model: KernelModel, h: TestFunction, window: float, reps: int, seed: int, intensity: float = 1.0, quad: QuadratureSpec = QuadratureSpec(spatial_resolution=256)) -> np.ndarray:
    """I_f(h) for independent shot fields with germs on B(0, window)."""
    vals = []
    for k in range(reps):
        fld = shot_field(sample_germs(window, intensity, model, derive_seed(seed, k)))
        vals.append(euler_primitive_integral(fld, h, quad, check=False))
    return np.array(vals, dtype=float)


def moment_check(model: KernelModel, h: TestFunction, q: int, p: float, window: float = 2.0, reps: int = 100, seed: int = 42, intensity: float = 1.0, constant: float | None = None, values=None, spi: float | None = None, M: KernelMoments | None = None) -> MomentReport:
    """Empirical E|I_f(h)|^q against the bound, with every input recorded."""
    if values is None:
        values = sample_primitives(model, h, window, reps, seed, intensity)
    if spi is None:
        spi = support_prob_integral(model, h, p, window, reps, derive_seed(seed, 1 << 32), intensity)
    if M is None:
        M = kernel_moment_bound(model, intensity, window, p, q)
    c = default_constant(q) if constant is None else constant
    emp = empirical_moment(values, q)
    bnd = moment_bound(q, p, M.M, h, spi, c)
    inputs = {"model": model.name, "window": window, "intensity": intensity, "reps": len(values), "seed": seed}
    return MomentReport(q, p, emp, jackknife_se(values, q), bnd, c, M.M, spi, bool(emp <= bnd), inputs)
