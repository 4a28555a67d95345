"""Time the compiled kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from superheat import _pure

try:
    from superheat import _core
except ImportError:
    _core = None


def chord_case(n, m, rng):
    pad = 32
    cum = np.concatenate([[0.0], np.cumsum(rng.random(n + 2 * pad))])
    centers = np.arange(pad, n + pad, dtype=np.intp)
    offsets = np.zeros(m, dtype=np.intp)
    widths = np.abs(np.arange(m, dtype=np.intp) - m // 2)
    return cum, centers, offsets, widths


def corr_case(n_rows, n_cols, nw, rng):
    return rng.standard_normal((n_rows, n_cols)), rng.random(nw)


def bench(fn, args, repeat):
    number = 3
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    opts = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    cases = [
        ("chord_sums n=1e5 m=3", "chord_sums", chord_case(100_000, 3, rng)),
        ("chord_sums n=1e5 m=31", "chord_sums", chord_case(100_000, 31, rng)),
        ("correlate_rows 64x4096 w=9", "correlate_rows", corr_case(64, 4096, 9, rng)),
        ("correlate_rows 256x1024 w=129", "correlate_rows", corr_case(256, 1024, 129, rng)),
    ]
    print(f"{'case':32s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for label, name, args in cases:
        t_py = bench(getattr(_pure, name), args, opts.repeat)
        if _core is None:
            print(f"{label:32s} {1e3 * t_py:12.3f} {'n/a':>12s} {'n/a':>8s}")
            continue
        t_cy = bench(getattr(_core, name), args, opts.repeat)
        same = np.array_equal(getattr(_pure, name)(*args), getattr(_core, name)(*args))
        print(f"{label:32s} {1e3 * t_py:12.3f} {1e3 * t_cy:12.3f} {t_py / t_cy:7.1f}x"
              + ("" if same else "  (results differ)"))


if __name__ == "__main__":
    main()
