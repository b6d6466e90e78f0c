"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from subseg.kernels import available_backends


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    ref = rng.integers(0, 30, size=300).tolist()
    hyp = rng.integers(0, 30, size=320).tolist()
    lp = np.log(rng.dirichlet(np.ones(40), size=200))
    target = rng.integers(1, 40, size=60).tolist()

    backends = available_backends()
    results = {}
    for name, mod in backends.items():
        results[name] = {
            "edit_alignment 300x320": _time(lambda: mod.edit_alignment(ref, hyp), args.repeat),
            "ctc_forward T=200 L=60": _time(lambda: mod.ctc_forward(lp, target, 0), args.repeat),
        }
    cases = list(next(iter(results.values())))
    print(f"{'case':28s}" + "".join(f"{n:>12s}" for n in results) + ("     speedup" if len(results) > 1 else ""))
    for case in cases:
        row = [results[n][case] for n in results]
        line = f"{case:28s}" + "".join(f"{t * 1e3:10.2f}ms" for t in row)
        if "cython" in results and "python" in results:
            line += f"{results['python'][case] / results['cython'][case]:11.1f}x"
        print(line)
    if "cython" in backends:
        a = backends["cython"].edit_alignment(ref, hyp)
        b = backends["python"].edit_alignment(ref, hyp)
        c1 = backends["cython"].ctc_forward(lp, target, 0)
        c2 = backends["python"].ctc_forward(lp, target, 0)
        print(f"outputs agree: alignment {a == b}, ctc |diff| {abs(c1 - c2):.2e}")


if __name__ == "__main__":
    main()
