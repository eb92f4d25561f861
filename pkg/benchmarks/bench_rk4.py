"""Compare the compiled and NumPy RK4 kernels.

    python3 benchmarks/bench_rk4.py [--repeat N]

Times the demo closed loop (both controllers) and random stable systems of
growing size, and checks that the two backends agree.
"""

import argparse
import time

import numpy as np

from twolevel_consensus import _rk4_py
from twolevel_consensus.scenario import demo_scenario
from twolevel_consensus.simulator import _layout, build_controller, linearize

try:
    from twolevel_consensus._rk4 import rk4_linear as rk4_compiled
except ImportError:
    rk4_compiled = None


def demo_matrix(kind):
    s = demo_scenario(kind)
    spec = build_controller(s)
    return linearize(spec, _layout(s), s.schedule.graphs[0])[0]


def random_stable(d, rng):
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return Q @ np.diag(-rng.uniform(0.5, 3.0, d)) @ Q.T


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=40_000)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    cases = [(f"demo/{k}", demo_matrix(k)) for k in ("state", "output")]
    cases += [(f"random/d={d}", random_stable(d, rng)) for d in (8, 32, 128)]
    print(f"{'case':<16}{'dim':>5}{'python [s]':>13}{'cython [s]':>13}{'speedup':>9}{'max diff':>11}")
    for name, M in cases:
        s0 = rng.standard_normal(M.shape[0])
        tp, ref = best_of(lambda: _rk4_py.rk4_linear(M, s0, 1e-3, args.steps), args.repeat)
        if rk4_compiled is None:
            print(f"{name:<16}{M.shape[0]:>5}{tp:>13.4f}{'n/a':>13}")
            continue
        tc, out = best_of(lambda: rk4_compiled(M, s0, 1e-3, args.steps), args.repeat)
        diff = float(np.max(np.abs(out - ref)))
        print(f"{name:<16}{M.shape[0]:>5}{tp:>13.4f}{tc:>13.4f}{tp / tc:>9.1f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
