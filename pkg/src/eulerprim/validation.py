"""Self-validation suite: every acceptance criterion as a named, seeded check.

Each check returns a record {name, values, tolerance, passed, wall_time_ms, seed};
the suite passes iff every record passes.  Records hold plain JSON data so that
two runs with the same master seed serialize identically apart from timings.
"""

from __future__ import annotations

import math
import time
import traceback
from dataclasses import dataclass

import numpy as np

from . import __version__, shotnoise as sn, topology
from .euler_integral import (
    QuadratureSpec,
    coarea_check,
    continuity_gap_bound,
    double_gaussian_profile,
    euler_primitive_direct,
    euler_primitive_integral,
    euler_primitive_rotavg,
    gaussian_profile,
    kac_rice_1d,
    tent_profile,
)
from .fields import Jet2, bump_integral, get_field, make_affine_field, make_bump_testfn, rotate_field
from .moments import kernel_moment_bound, moment_check, sample_primitives, support_prob_integral
from .seeds import derive_seed, replicate_rng

TIMING_KEYS = ("wall_time_ms", "total_wall_time_ms")


def jsonable(x):
    """Plain JSON data: complex -> [re, im], numpy scalars and arrays -> Python."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


@dataclass
class Context:
    seed: int = 42
    workers: int = 1

    def sub(self, index: int) -> int:
        return derive_seed(self.seed, index)


BUMP = (0.2, 0.8)
EC_LEVELS = (0.1, 0.3, 0.5, 0.8, 0.95)


def check_radial(ctx):
    fld = get_field("radial_exp")
    h = make_bump_testfn(*BUMP)
    t0 = time.perf_counter()
    out = euler_primitive_integral(fld, h, QuadratureSpec(spatial_resolution=512), full_output=True, workers=ctx.workers)
    secs = time.perf_counter() - t0
    exact = bump_integral(*BUMP)
    gap = abs(out["value"] - exact)
    return {"I_f": out["value"], "int_h": exact, "gap": gap, "under_10s": secs < 10.0}, {"gap": 1e-3, "runtime_s": 10.0}, gap <= 1e-3 and secs < 10.0


def check_main_identity(ctx):
    fld = get_field("two_bump")
    h = make_bump_testfn(*BUMP)
    I1 = euler_primitive_integral(fld, h, QuadratureSpec(512, 128), check=False, workers=ctx.workers)
    I2 = euler_primitive_integral(fld, h, QuadratureSpec(1024, 256), check=False, workers=ctx.workers)
    D1 = euler_primitive_direct(fld, h, QuadratureSpec(1024, 128), "cubical")
    D2 = euler_primitive_direct(fld, h, QuadratureSpec(2048, 256), "cubical")
    gap1, gap2 = abs(I1 - D1), abs(I2 - D2)
    ratio = gap2 / gap1 if gap1 > 0 else math.inf
    identity_ok = gap1 <= 1e-2
    halving_ok = 0.375 <= ratio <= 0.625
    vals = {
        "I_f_512": I1, "direct_1024_128": D1, "gap": gap1,
        "I_f_1024": I2, "direct_2048_256": D2, "gap_doubled": gap2,
        "gap_ratio": ratio, "identity_ok": identity_ok, "halving_ok": halving_ok,
    }
    return vals, {"gap": 1e-2, "gap_ratio": [0.375, 0.625]}, identity_ok and halving_ok


def check_ec_methods(ctx):
    fld = get_field("two_bump")
    spec = topology.GridSpec.covering(fld.bbox, 1.0 / 256.0)
    values = topology.sample_values(fld, spec)
    curves = {m: topology.ec_curve(fld, EC_LEVELS, m, spec=spec, values=values) for m in ("cubical", "bicov", "morse")}
    ok = bool(np.array_equal(curves["cubical"], curves["bicov"]) and np.array_equal(curves["cubical"], curves["morse"]))
    return {"levels": list(EC_LEVELS), **curves}, "integer equality", ok


def check_rotation(ctx):
    fld = get_field("two_bump")
    h = make_bump_testfn(*BUMP)
    q = QuadratureSpec(512, 128)
    I = euler_primitive_integral(fld, h, q, workers=ctx.workers)
    Ir = euler_primitive_integral(rotate_field(fld, 1), h, q, workers=ctx.workers)
    Ia = euler_primitive_rotavg(fld, h, q, workers=ctx.workers)
    d1, d2 = abs(I - Ir), abs(I - Ia)
    return {"I_f": I, "I_rotated": Ir, "I_rotavg": Ia, "gap_rotated": d1, "gap_rotavg": d2}, 2e-4, d1 <= 2e-4 and d2 <= 2e-4


def check_coarea(ctx):
    h = make_bump_testfn(*BUMP)
    vals, ok = {}, True
    for name in ("radial_exp", "two_bump"):
        lhs, rhs = coarea_check(get_field(name), h, QuadratureSpec(512, 128))
        rel = abs(lhs - rhs) / abs(rhs)
        vals[name] = {"perimeter_side": lhs, "gradient_side": rhs, "relative_gap": rel}
        ok &= rel <= 1e-2
    return vals, 1e-2, ok


def check_kac_rice(ctx):
    h = make_bump_testfn(*BUMP)
    tent = kac_rice_1d(tent_profile(), h)
    tent_rel = abs(tent.rhs - 2.0 * tent.lhs) / tent.rhs
    vals = {"tent": {"lhs": tent.lhs, "rhs": tent.rhs, "relative_gap": tent_rel}}
    ok = tent_rel <= 1e-12
    for name, prof in (("gaussian", gaussian_profile()), ("double_gaussian", double_gaussian_profile())):
        kr = kac_rice_1d(prof, h)
        rel = abs(kr.rhs - 2.0 * kr.lhs) / kr.rhs
        vals[name] = {"lhs": kr.lhs, "rhs": kr.rhs, "relative_gap": rel}
        ok &= rel <= 1e-3
    return vals, {"tent": 1e-12, "smooth": 1e-3}, ok


def uniform_jet(rng, lo: float, hi: float, value=None) -> Jet2:
    e = rng.uniform(lo, hi, 6)
    v = float(e[0]) if value is None else value
    return Jet2(v, (float(e[1]), float(e[2])), (float(e[3]), float(e[4]), float(e[5])))


def continuity_sweep(seed: int, pairs: int = 1000, f_scale: float = 1.0, g_hessian_only: bool = False):
    """Jet pairs with entries uniform in [-2, 2] and f(x) uniform in supp h.

    ``f_scale`` shrinks the derivatives of f; ``g_hessian_only`` zeroes the
    value and gradient of g.
    """
    h = make_bump_testfn(*BUMP)
    violations, worst = [], 0.0
    for k in range(pairs):
        rng = replicate_rng(seed, k)
        jf = uniform_jet(rng, -2.0, 2.0, value=float(rng.uniform(*h.support)))
        jf = Jet2(jf.value, tuple(f_scale * c for c in jf.grad), tuple(f_scale * c for c in jf.hess))
        jg = uniform_jet(rng, -2.0, 2.0)
        if g_hessian_only:
            jg = Jet2(0.0, (0.0, 0.0), jg.hess)
        for i in (1, 2):
            actual, bound = continuity_gap_bound(jf, jg, h, i)
            worst = max(worst, actual / bound if bound > 0 else (math.inf if actual > 0 else 0.0))
            if actual > bound:
                violations.append({"pair": k, "i": i, "actual": actual, "bound": bound})
    return violations, worst


def check_continuity(ctx):
    seed = ctx.sub(7)
    violations, worst = continuity_sweep(seed)
    # reported, not graded: f nearly flat and g curved only, where the bound
    # has no term of order |d_ii g| h(f)
    small, small_worst = continuity_sweep(derive_seed(seed, 1), f_scale=1e-3, g_hessian_only=True)
    vals = {
        "pairs": 1000, "violations": len(violations), "worst_ratio": worst, "first_violations": violations[:5],
        "flat_f_regime": {"pairs": 1000, "violations": len(small), "worst_ratio": small_worst},
    }
    return vals, "zero violations", not violations, seed


def check_morse_stability(ctx):
    seed = ctx.sub(8)
    fld = get_field("two_bump")
    levels = (0.3, 0.9)
    # the tilt creates flat critical points in the tail, far below every level tested
    floor = 0.5 * min(levels)
    base = topology.find_critical_points(fld, min_value=floor)
    ref = [topology.morse_counts(base, u) for u in levels]
    mismatches = 0
    for k in range(100):
        rng = replicate_rng(seed, k)
        A, B1, B2 = rng.standard_normal(3)
        pert = make_affine_field(float(A), float(B1), float(B2), fld.bbox)
        pts = topology.find_critical_points(topology_add(fld, pert, 1e-4), min_value=floor)
        if [topology.morse_counts(pts, u) for u in levels] != ref:
            mismatches += 1
    return {"levels": list(levels), "triples": ref, "perturbations": 100, "mismatches": mismatches}, "identical triples", mismatches == 0, seed


def topology_add(fld, pert, eta):
    from .fields import add_fields

    return add_fields(fld, pert, eta, fld.bbox)


GAUSS_MODEL = sn.make_model("gaussian")
REPS = 10_000


def check_cf(ctx):
    seed = ctx.sub(9)
    vals, ok = {}, True
    for t in (0.5, 1.0, 2.0):
        p = sn.psi(1, t, model=GAUSS_MODEL)
        e = sn.empirical_cf(GAUSS_MODEL, t=t, reps=REPS, seed=seed, workers=ctx.workers)
        gap = abs(p - e.estimate)
        tol = 3.0 * e.stderr + 1e-3
        vals[f"t={t}"] = {"psi": p, "empirical": e.estimate, "stderr": e.stderr, "gap": gap, "tolerance": tol}
        ok &= gap <= tol
    return vals, "3 stderr + 1e-3", ok, seed


def check_isotropy(ctx):
    seed = ctx.sub(10)
    r = sn.isotropy_factor_check(GAUSS_MODEL, 1.0, reps=REPS, seed=seed, workers=ctx.workers)
    ok = True
    for i in (1, 2):
        gap = abs(r[f"lhs_{i}"] - r["rhs"])
        r[f"gap_{i}"] = gap
        ok &= gap <= 3.0 * r[f"se_diff_{i}"]
    ang = sn.angular_constant()
    r["angular_constant"] = ang
    r["angular_gap"] = abs(ang - (math.pi - 2.0) / 8.0)
    ok &= r["angular_gap"] <= 1e-12
    return r, {"expectations": "3 paired stderr", "angular": 1e-12}, ok, seed


def check_stationary(ctx):
    seed = ctx.sub(11)
    lim = sn.stationary_limit_density(1.0, GAUSS_MODEL)
    mc = sn.mc_gamma_at_origin(1.0, GAUSS_MODEL, reps=REPS, seed=seed, workers=ctx.workers)
    gap = abs(lim.value - mc.estimate)
    tol = 3.0 * mc.stderr + lim.error
    limit_ok = gap <= tol
    sweep = []
    for n, reps in ((16, 200), (64, 100), (256, 30)):
        e = sn.mc_euler_primitive_fourier(1.0, GAUSS_MODEL, n=n, reps=reps, seed=derive_seed(seed, n), workers=ctx.workers)
        sweep.append({"n": n, "reps": reps, "estimate": e.estimate, "stderr": e.stderr, "distance": abs(e.estimate - lim.value)})
    mono = all(b["distance"] <= a["distance"] + 3.0 * math.hypot(a["stderr"], b["stderr"]) for a, b in zip(sweep, sweep[1:]))
    vals = {
        "limit": lim.value, "limit_error": lim.error, "limit_terms": lim.terms,
        "mc": mc.estimate, "mc_stderr": mc.stderr, "gap": gap, "tolerance": tol,
        "limit_ok": limit_ok, "window_sweep": sweep, "monotone_ok": mono,
    }
    return vals, {"limit": "3 stderr + quadrature error", "sweep": "non-increasing within 3 stderr"}, limit_ok and mono, seed


def check_derivatives(ctx):
    vals, ok, worst = {}, True, 0.0
    models = {"gaussian": GAUSS_MODEL, "radial_power": sn.make_model("radial_power"), "aniso_gaussian": sn.make_model("aniso_gaussian")}
    for name, m in models.items():
        for i in (1, 2):
            for t, s in ((1.0, (0.3, -0.2)), (0.5, (0.0, 0.0)), (2.0, (1.0, 0.5))):
                a = sn.d4_psi(i, t, s, model=m)
                b = sn.d4_psi_fd(i, t, s, model=m, step=1e-4, check=False)
                rel = abs(a - b) / max(abs(a), 1e-300)
                worst = max(worst, rel)
                vals[f"{name}/d4/i={i}/t={t}/s={s}"] = rel
            for t in (0.5, 1.0, 2.0):
                a = sn.d22_psi(i, t, model=m)
                for axis in ("paired", "s2"):
                    b = sn.d22_psi_fd(i, t, model=m, step=1e-3, axis=axis, check=False)
                    rel = abs(a - b) / max(abs(a), 1e-300)
                    worst = max(worst, rel)
                    vals[f"{name}/d22/{axis}/i={i}/t={t}"] = rel
    ok = worst <= 1e-3
    return {"relative_errors": vals, "worst": worst}, 1e-3, ok


def check_moments(ctx):
    h = make_bump_testfn(*BUMP)
    window, reps = 2.0, 100
    Ms = {(q, p): kernel_moment_bound(GAUSS_MODEL, 1.0, window, p, q) for q, p in ((1, 2.0), (2, 2.0))}
    rows, ok = [], True
    for k in range(5):
        seed = ctx.sub(1300 + k)
        values = sample_primitives(GAUSS_MODEL, h, window, reps, seed)
        spi = support_prob_integral(GAUSS_MODEL, h, 2.0, window, reps, derive_seed(seed, 1 << 32))
        for (q, p), M in Ms.items():
            rep = moment_check(GAUSS_MODEL, h, q, p, window, reps, seed, values=values, spi=spi, M=M)
            rows.append({"seed": seed, "q": q, "p": p, "empirical": rep.empirical_qth, "jackknife_se": rep.jackknife_se,
                         "bound": rep.bound, "constant": rep.constant_used, "M": rep.M, "support_prob_integral": spi, "holds": rep.holds})
            ok &= rep.holds
    return {"window": window, "reps": reps, "rows": rows}, "empirical <= bound, constant q 2^q", ok


def check_reproducibility(ctx):
    """In-process replay: fresh caches, same seed, bit-identical estimates and germ samples."""
    seed = ctx.sub(14)
    runs = []
    for _ in range(2):
        sn.origin_jets.cache_clear()
        e = sn.mc_gamma_at_origin(1.0, GAUSS_MODEL, reps=500, seed=seed)
        s = sn.sample_germs(5.0, 1.0, GAUSS_MODEL, seed)
        runs.append((e.estimate.real.hex(), e.estimate.imag.hex(), s.to_text()))
    sn.origin_jets.cache_clear()
    same = runs[0] == runs[1]
    return {"estimate_hex": list(runs[0][:2]), "germ_lines": runs[0][2].count("\n"), "identical": same}, "bit-identical", same, seed


CRITERIA = [
    ("01_radial_exactness", check_radial),
    ("02_main_identity", check_main_identity),
    ("03_ec_method_agreement", check_ec_methods),
    ("04_rotation_identity", check_rotation),
    ("05_coarea", check_coarea),
    ("06_kac_rice", check_kac_rice),
    ("07_continuity_bound", check_continuity),
    ("08_morse_stability", check_morse_stability),
    ("09_characteristic_function", check_cf),
    ("10_isotropy_factor", check_isotropy),
    ("11_stationary_limit", check_stationary),
    ("12_derivative_formulas", check_derivatives),
    ("13_moment_bound", check_moments),
    ("14_reproducibility", check_reproducibility),
]


def run_check(name, fn, ctx: Context) -> dict:
    t0 = time.perf_counter()
    try:
        out = fn(ctx)
        vals, tol, passed = out[:3]
        seed = out[3] if len(out) > 3 else None
        rec = {"name": name, "values": vals, "tolerance": tol, "passed": bool(passed), "seed": seed}
    except Exception as exc:  # recorded, never raised: the suite reports every criterion
        rec = {"name": name, "values": {}, "tolerance": None, "passed": False, "seed": None,
               "error": f"{type(exc).__name__}: {exc}", "traceback": traceback.format_exc(limit=3).splitlines()[-3:]}
    rec["wall_time_ms"] = 1e3 * (time.perf_counter() - t0)
    return jsonable(rec)


def run_suite(seed: int = 42, workers: int = 1, only=None, progress=None) -> dict:
    ctx = Context(seed, workers)
    t0 = time.perf_counter()
    records = []
    for name, fn in CRITERIA:
        if only and not any(name.startswith(o) or o in name for o in only):
            continue
        rec = run_check(name, fn, ctx)
        records.append(rec)
        if progress:
            progress(rec)
    passed = sum(r["passed"] for r in records)
    return {
        "artifact": "eulerprim",
        "version": __version__,
        "master_seed": seed,
        "checks": records,
        "summary": {"total": len(records), "passed": passed, "failed": len(records) - passed, "suite_passed": passed == len(records)},
        "total_wall_time_ms": 1e3 * (time.perf_counter() - t0),
    }


def strip_timings(obj):
    if isinstance(obj, dict):
        return {k: strip_timings(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timings(v) for v in obj]
    return obj
