"""Compare the compiled residual kernel with the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeats 5] [--k 41 401 4001]

Uses the baseline chain and grid with a real defect block (j = 40) so the
coefficient rows have the same structure the inversion sees.
"""
import argparse
import timeit

import numpy as np

from chaindefect import _fallback
from chaindefect.inversion import ForwardModel
from chaindefect.measurement import SGrid, simulate
from chaindefect.model import ChainConfig, DefectHypothesis

try:
    from chaindefect import _kernels
except ImportError:
    _kernels = None


def setup():
    chain, grid = ChainConfig(), SGrid()
    meas = simulate(chain, DefectHypothesis(40, 1.3), grid, 1e-6, seed=0)
    base, rational = ForwardModel(chain, grid).coefficients(40)
    return rational, np.ascontiguousarray(base - meas.values), grid.weights()


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--k", type=int, nargs="+", default=[41, 401, 4001])
    args = ap.parse_args(argv)
    rational, offset, weights = setup()
    n_s = offset.size
    backends = [("python", _fallback.residual_batch)]
    if _kernels is not None:
        backends.insert(0, ("cython", _kernels.residual_batch))
    else:
        print("compiled extension not built; timing the fallback only")
    print(f"{'backend':<8} {'n_k':>6} {'best ms':>10} {'ns/elem':>8}")
    results = {}
    for n_k in args.k:
        ks = np.linspace(0.1, 5.0, n_k)
        for name, fn in backends:
            number = max(1, 200 // n_k)
            best = min(timeit.repeat(lambda: fn(ks, rational, offset, weights),
                                     number=number, repeat=args.repeats)) / number
            results[name, n_k] = fn(ks, rational, offset, weights)
            print(f"{name:<8} {n_k:>6} {best * 1e3:>10.3f} {best / (n_k * n_s) * 1e9:>8.2f}")
        if len(backends) == 2:
            a, b = results["cython", n_k], results["python", n_k]
            print(f"         max rel diff {np.max(np.abs(a - b) / np.abs(b)):.1e}")


if __name__ == "__main__":
    main()
