"""Pure-numpy hot kernels: vectorized rounding and program evaluation.

A compiled twin of this module may be built at install time; the
`kernels` module picks whichever is available.  Keep the two behavior
identical: round to nearest with ties to even, no subnormals (everything
at or below half the smallest positive value collapses to zero), and
overflow beyond the largest finite value to signed infinity.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def round_array(x: np.ndarray, p: int, e_min: int, e_max: int) -> np.ndarray:
    """Round each double to the nearest value of the target format.

    Exact for p <= 52: the significand index k = (2m-1)*2^p is computed
    without error (Sterbenz) and np.rint applies ties-to-even, which on
    k agrees with ties-to-even on the value itself.
    """
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    sign = np.where(np.signbit(x), -1.0, 1.0)
    m, e = np.frexp(ax)
    E = e - 1  # ax = (2m)*2^E with 2m in [1,2)
    k = np.rint(np.ldexp(2.0 * m - 1.0, p))
    with np.errstate(over="ignore"):
        z = np.ldexp(1.0 + np.ldexp(k, -p), E)

    # below the smallest binade everything nearest-rounds to 2^e_min or 0
    zero_thr = np.ldexp(1.0, e_min - 1)
    z = np.where(E < e_min, np.ldexp(1.0, e_min), z)
    z = np.where(ax <= zero_thr, 0.0, z)

    max_finite = np.ldexp(2.0 - np.ldexp(1.0, -p), e_max)
    z = np.where(ax > max_finite, np.inf, z)
    z = np.where(z > max_finite, np.inf, z)
    return sign * z


def eval_program(program, inputs: list[np.ndarray], p: int, e_min: int, e_max: int,
                 rounded: bool = True) -> np.ndarray:
    """Run a straight-line stack program over sample arrays.

    Instructions: ("load", i) pushes inputs[i]; ("const", v) pushes a
    constant; ("add"|"sub"|"mul"|"div", None) pops two operands.  With
    `rounded`, every load, constant, and result is rounded to the target
    format; otherwise the program runs in plain double as the
    extended-precision reference (valid when 2p+2 < 52).
    """
    def rnd(a):
        return round_array(a, p, e_min, e_max) if rounded else a

    stack: list[np.ndarray] = []
    for op, arg in program:
        if op == "load":
            stack.append(rnd(inputs[arg]))
        elif op == "const":
            stack.append(rnd(np.asarray(arg, dtype=np.float64)))
        elif op == "constx":
            # constant known exactly representable: never rounded
            stack.append(np.asarray(arg, dtype=np.float64))
        elif op == "neg":
            # sign flips are exact in any binary format: no rounding
            stack.append(-stack.pop())
        else:
            b = stack.pop()
            a = stack.pop()
            if op == "add":
                r = a + b
            elif op == "sub":
                r = a - b
            elif op == "mul":
                r = a * b
            elif op == "div":
                r = a / b
            else:
                raise ValueError(f"unknown instruction {op!r}")
            stack.append(rnd(r))
    if len(stack) != 1:
        raise ValueError("program must leave exactly one value on the stack")
    return stack[0]
