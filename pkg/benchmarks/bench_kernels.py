"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends get identical inputs; the script also reports the largest
absolute difference between their outputs.
"""

import argparse
import timeit

import numpy as np

from eulerprim import _backend
from eulerprim.shotnoise import CFQuad, cf_table, make_model, sample_germs


def cases():
    model = make_model("gaussian")
    germs = sample_germs(6.0, 1.0, model, 42).table()
    xs = np.linspace(-8.0, 8.0, 256)
    px, py = np.random.default_rng(0).uniform(-6, 6, (2, 20000))
    g0, g1, g2, g11, g22, w = cf_table(model, CFQuad())
    t = np.full(64, 1.0)
    s = np.linspace(-2.0, 2.0, 64)
    return {
        "splat_jets 256x256": lambda k: k.splat_jets(germs, xs[0], xs[0], xs[1] - xs[0], xs[1] - xs[0], xs.size, xs.size),
        "probe_jets 20000 pts": lambda k: k.probe_jets(germs, px, py),
        "cf_sums 64 args": lambda k: k.cf_sums(g0, g1, g2, g11, w, t, s, -s, np.zeros(64)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    try:
        fast = _backend.get("cython")
    except ImportError:
        raise SystemExit("compiled kernels not built; run: python setup.py build_ext --inplace")
    slow = _backend.get("python")
    print(f"{'kernel':<24}{'python ms':>12}{'cython ms':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in cases().items():
        tp = min(timeit.repeat(lambda: fn(slow), number=1, repeat=args.repeat)) * 1e3
        tc = min(timeit.repeat(lambda: fn(fast), number=1, repeat=args.repeat)) * 1e3
        diff = float(np.max(np.abs(np.asarray(fn(slow)) - np.asarray(fn(fast)))))
        print(f"{name:<24}{tp:>12.2f}{tc:>12.2f}{tp / tc:>9.1f}x{diff:>12.2e}")


if __name__ == "__main__":
    main()
