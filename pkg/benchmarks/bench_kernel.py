"""Compare the compiled and pure-Python matriciant integrators.

    python benchmarks/bench_kernel.py --repeat 3

Each case integrates U over one period at several lambda values with both
backends, checks that the monodromy matrices agree, and reports wall time.
"""
import argparse
import time

import numpy as np

from floquetspec import kernel
from floquetspec.periodic_ode import OperatorSpec, monodromy

CASES = {
    "free Hill": (["0", "0", "1"], [0.0, 9.0, 40.0]),
    "cos Hill": (["cos(2*pi*t)", "0", "1"], [-0.5, 5.0, 30.0]),
    "order 4": (["sin(2*pi*t)^2", "0.3*cos(2*pi*t)", "1 + 0.5*sin(2*pi*t)", "0", "1"], [2.0, 50.0]),
    "complex lambda": (["exp(cos(2*pi*t))", "0", "1"], [3.0 + 2.0j, 10.0 - 1.0j]),
}


def bench(coeffs, lams, backend, repeat, tol):
    spec = OperatorSpec.from_strings(coeffs)
    best, mats, steps = np.inf, [], 0
    for _ in range(repeat):
        start = time.perf_counter()
        out = [monodromy(spec, lam, tol, backend=backend) for lam in lams]
        best = min(best, time.perf_counter() - start)
        mats = [m.monodromy for m in out]
        steps = sum(m.steps for m in out)
    return best, mats, steps


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--tol", type=float, default=1e-10)
    args = parser.parse_args()
    if "cython" not in kernel.AVAILABLE_BACKENDS:
        print("compiled kernel not built; nothing to compare")
        return
    print(f"{'case':<16}{'steps':>8}{'cython [ms]':>14}{'python [ms]':>14}{'speedup':>10}{'max |dU|':>12}")
    for name, (coeffs, lams) in CASES.items():
        tc, mc, steps = bench(coeffs, lams, "cython", args.repeat, args.tol)
        tp, mp, _ = bench(coeffs, lams, "python", max(1, args.repeat // 2), args.tol)
        diff = max(float(np.max(np.abs(a - b))) for a, b in zip(mc, mp))
        print(f"{name:<16}{steps:>8}{1e3 * tc:>14.2f}{1e3 * tp:>14.1f}{tp / tc:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
