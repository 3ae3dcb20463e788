"""Timing comparison between the compiled and NumPy kernel backends.

Exercises the two shapes the benchmarks actually run hot: the Mackey-Glass
shallow sigmoid net (values + Jacobian) and the PDE deep tanh net (values,
two input derivatives and all Jacobians).  Invoked via
``natmo bench-kernels``.
"""

from __future__ import annotations

import time

import numpy as np

from . import available_backends, mlp_eval, param_count

CASES = [
    ("mackey shallow (m=500, d=61, order 0 + jac)", (4, 10, 1), "sigmoid", 0, 500),
    ("pde deep (m=1000, d=46, order 2 + jac)", (1, 5, 5, 1), "tanh", 2, 1000),
]


def _time_case(impl, x, theta, widths, act, order, repeat):
    mlp_eval(x, theta, widths, act, order, True, impl=impl)  # warm up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        mlp_eval(x, theta, widths, act, order, True, impl=impl)
        best = min(best, time.perf_counter() - t0)
    return best


def run_benchmark(repeat: int = 20):
    backends = available_backends()
    rng = np.random.default_rng(0)
    print(f"backends: {', '.join(backends)}  (best of {repeat})")
    for label, widths, act, order, m in CASES:
        x = rng.standard_normal((m, widths[0]))
        theta = rng.standard_normal(param_count(widths))
        times = {name: _time_case(impl, x, theta, widths, act, order, repeat)
                 for name, impl in backends.items()}
        line = f"{label}: " + "  ".join(f"{k}={v * 1e3:.2f}ms" for k, v in times.items())
        if "cython" in times and "python" in times:
            line += f"  speedup={times['python'] / times['cython']:.1f}x"
        print(line)

        outs = {name: mlp_eval(x, theta, widths, act, order, True, impl=impl)
                for name, impl in backends.items()}
        if len(outs) == 2:
            diff = max(float(np.max(np.abs(a - b)))
                       for a, b in zip(outs["python"], outs["cython"]) if a is not None)
            print(f"  max |python - cython| = {diff:.2e}")


if __name__ == "__main__":
    run_benchmark()
