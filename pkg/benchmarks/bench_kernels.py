"""Throughput comparison: compiled kernels vs the pure numpy fallback.

Runs each backend in a child process (the backend is chosen at import
time) and reports elements/second for array rounding and stack-program
evaluation.

    python3 benchmarks/bench_kernels.py [N]
"""

from __future__ import annotations

import json
import os
import subprocess
import sys

CHILD = r"""
import json
import sys
import time

import numpy as np

from probfp.kernels import BACKEND, eval_program, round_array

n = int(sys.argv[1])
rng = np.random.default_rng(12345)
x = rng.uniform(0.0, 1.0, n)

def timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best

round_s = timeit(lambda: round_array(x, 23, -126, 127))

# degree-3 polynomial in one variable: ((1 - x)^3) / 6
code = [("constx", 1.0), ("load", 0), ("sub", None),
        ("constx", 1.0), ("load", 0), ("sub", None),
        ("mul", None),
        ("constx", 1.0), ("load", 0), ("sub", None),
        ("mul", None),
        ("constx", 6.0), ("div", None)]
eval_s = timeit(lambda: eval_program(code, [x], 23, -126, 127, rounded=True))

print(json.dumps({"backend": BACKEND, "n": n,
                  "round_per_s": n / round_s,
                  "eval_per_s": n / eval_s}))
"""


def run_backend(pure: bool, n: int) -> dict:
    env = dict(os.environ)
    if pure:
        env["PROBFP_PURE"] = "1"
    else:
        env.pop("PROBFP_PURE", None)
    out = subprocess.run([sys.executable, "-c", CHILD, str(n)],
                         capture_output=True, text=True, env=env, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> None:
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 2_000_000
    rows = [run_backend(pure=False, n=n), run_backend(pure=True, n=n)]
    if rows[0]["backend"] == rows[1]["backend"]:
        print("note: compiled backend unavailable; both runs used the "
              "fallback")
    print(f"{'backend':<10} {'round elems/s':>15} {'eval elems/s':>15}")
    for row in rows:
        print(f"{row['backend']:<10} {row['round_per_s']:>15.3e} "
              f"{row['eval_per_s']:>15.3e}")
    if rows[1]["round_per_s"] > 0:
        print(f"round speedup: {rows[0]['round_per_s'] / rows[1]['round_per_s']:.1f}x, "
              f"eval speedup: {rows[0]['eval_per_s'] / rows[1]['eval_per_s']:.1f}x")


if __name__ == "__main__":
    main()
