"""Time the compiled kernels against the numpy fallback.

Run with ``python benchmarks/bench_kernels.py``; prints one line per kernel with
the median wall time of each backend and the speed-up.
"""
import argparse
import timeit

import numpy as np

from dysaug import _kernels


def cases(rng):
    xp = rng.standard_normal(40_000)
    x = rng.standard_normal(16_000)
    img = rng.standard_normal((16, 8, 40, 32)).astype(np.float32)
    w = rng.standard_normal((8, 8, 3, 3)).astype(np.float32)
    b = np.zeros(8, np.float32)
    g = rng.standard_normal((16, 8, 38, 30)).astype(np.float32)
    return {
        "wsola_best_offset": lambda k: k.wsola_best_offset(xp, 1000, 20_000, 512, 126),
        "sinc_resample (1 s, alpha 1.1)": lambda k: k.sinc_resample(x, 1.1, 14_545, 33, 1 / 1.1, 8.0),
        "conv2d_forward (16x8x40x32, 3x3)": lambda k: k.conv2d_forward(img, w, b, 1, 1),
        "conv2d_backward": lambda k: k.conv2d_backward(img, w, g, 1, 1),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args()
    backends = _kernels.available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only the numpy fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':36s}" + "".join(f"{name:>12s}" for name in backends) + "   speed-up")
    for label, fn in cases(rng).items():
        times = {}
        for name, mod in backends.items():
            number = 3
            runs = timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)
            times[name] = float(np.median(runs)) / number
        row = f"{label:36s}" + "".join(f"{times[n] * 1e3:10.2f}ms" for n in backends)
        if "cython" in times:
            row += f"   {times['python'] / times['cython']:6.1f}x"
        print(row)


if __name__ == "__main__":
    main()
