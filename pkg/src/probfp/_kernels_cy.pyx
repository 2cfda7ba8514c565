# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels; behavior mirrors _kernels_py exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, frexp, ldexp, llrint, copysign, INFINITY, isnan
from libc.stdint cimport uint64_t

cnp.import_array()

BACKEND = "compiled"


cdef union _bits:
    double d
    uint64_t u


cdef inline double _round_slow(double ax, int p, int e_min,
                               double max_finite) noexcept nogil:
    cdef int e = 0
    cdef double m = frexp(ax, &e)
    cdef int E = e - 1
    cdef double z
    if E < e_min:
        z = ldexp(1.0, e_min)
    else:
        # llrint honors the ambient to-nearest-even mode, matching np.rint
        z = ldexp(1.0 + ldexp(<double>llrint(ldexp(2.0 * m - 1.0, p)), -p), E)
    if z > max_finite:
        z = INFINITY
    return z


cdef inline double _round_one(double x, int p, int e_min, int e_max,
                              double zero_thr, double max_finite) noexcept nogil:
    if isnan(x):
        return x
    cdef double ax = fabs(x)
    if ax <= zero_thr:
        return 0.0
    if ax > max_finite:
        return copysign(INFINITY, x)
    cdef _bits v
    v.d = ax
    cdef int biased = <int>(v.u >> 52)
    if biased == 0 or p >= 52:
        # double-denormal input or full-width target: take the exact path
        return copysign(_round_slow(ax, p, e_min, max_finite), x)
    # round the 52-bit significand to p bits, to nearest, ties to even;
    # a carry out of the significand propagates into the exponent field
    cdef int shift = 52 - p
    cdef uint64_t mask = ((<uint64_t>1) << shift) - 1
    cdef uint64_t rem = v.u & mask
    cdef uint64_t half = (<uint64_t>1) << (shift - 1)
    v.u &= ~mask
    if rem > half or (rem == half and (v.u >> shift) & 1):
        v.u += (<uint64_t>1) << shift
    if (<int>(v.u >> 52)) - 1023 < e_min:
        v.d = ldexp(1.0, e_min)
    elif v.d > max_finite:
        v.d = INFINITY
    return copysign(v.d, x)


def round_array(x, int p, int e_min, int e_max):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] arr = np.ascontiguousarray(
        np.asarray(x, dtype=np.float64).ravel())
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(arr)
    cdef double zero_thr = ldexp(1.0, e_min - 1)
    cdef double max_finite = ldexp(2.0 - ldexp(1.0, -p), e_max)
    cdef Py_ssize_t i, n = arr.shape[0]
    with nogil:
        for i in range(n):
            out[i] = _round_one(arr[i], p, e_min, e_max, zero_thr, max_finite)
    return out.reshape(np.shape(x))


# instruction opcodes shared with the interpreter below
DEF OP_LOAD = 0
DEF OP_CONST = 1
DEF OP_CONSTX = 2
DEF OP_ADD = 3
DEF OP_SUB = 4
DEF OP_MUL = 5
DEF OP_DIV = 6
DEF OP_NEG = 7

_OPCODES = {"load": OP_LOAD, "const": OP_CONST, "constx": OP_CONSTX,
            "add": OP_ADD, "sub": OP_SUB, "mul": OP_MUL, "div": OP_DIV,
            "neg": OP_NEG}


cdef inline void _fill_round(double* dst, const double* src, double value,
                             Py_ssize_t n, bint from_src, bint rounded,
                             int p, int e_min, int e_max, double zt,
                             double mf) noexcept nogil:
    cdef Py_ssize_t i
    if from_src:
        if rounded:
            for i in range(n):
                dst[i] = _round_one(src[i], p, e_min, e_max, zt, mf)
        else:
            for i in range(n):
                dst[i] = src[i]
    else:
        if rounded:
            value = _round_one(value, p, e_min, e_max, zt, mf)
        for i in range(n):
            dst[i] = value


cdef inline void _binop_round(double* dst, const double* b, int code,
                              Py_ssize_t n, bint rounded, int p, int e_min,
                              int e_max, double zt, double mf) noexcept nogil:
    # dst holds the left operand and receives the result
    cdef Py_ssize_t i
    cdef double r
    if code == OP_ADD:
        for i in range(n):
            r = dst[i] + b[i]
            dst[i] = _round_one(r, p, e_min, e_max, zt, mf) if rounded else r
    elif code == OP_SUB:
        for i in range(n):
            r = dst[i] - b[i]
            dst[i] = _round_one(r, p, e_min, e_max, zt, mf) if rounded else r
    elif code == OP_MUL:
        for i in range(n):
            r = dst[i] * b[i]
            dst[i] = _round_one(r, p, e_min, e_max, zt, mf) if rounded else r
    else:
        for i in range(n):
            r = dst[i] / b[i]
            dst[i] = _round_one(r, p, e_min, e_max, zt, mf) if rounded else r


def eval_program(program, inputs, int p, int e_min, int e_max, bint rounded=True):
    cdef Py_ssize_t n_ops = len(program)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] codes = np.empty(n_ops, dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] iargs = np.zeros(n_ops, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] fargs = np.zeros(n_ops, dtype=np.float64)
    cdef Py_ssize_t j, depth = 0, max_depth = 1
    for j, (op, arg) in enumerate(program):
        codes[j] = _OPCODES[op]
        if codes[j] == OP_LOAD:
            iargs[j] = arg
        elif codes[j] in (OP_CONST, OP_CONSTX):
            fargs[j] = arg
        if codes[j] in (OP_LOAD, OP_CONST, OP_CONSTX):
            depth += 1
            max_depth = max(max_depth, depth)
        elif codes[j] != OP_NEG:
            depth -= 1

    if len(inputs) > 0:
        data = np.ascontiguousarray(np.vstack([np.asarray(v, dtype=np.float64).ravel()
                                               for v in inputs]))
    else:
        data = np.zeros((1, 1))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ins = data
    cdef Py_ssize_t n = ins.shape[1] if len(inputs) > 0 else 1
    cdef cnp.ndarray[cnp.float64_t, ndim=2] stk = np.empty((max_depth, n))
    cdef double* base = &stk[0, 0]
    cdef double* ins_base = &ins[0, 0]
    cdef double zero_thr = ldexp(1.0, e_min - 1)
    cdef double max_finite = ldexp(2.0 - ldexp(1.0, -p), e_max)
    cdef Py_ssize_t i, sp = 0
    cdef int code
    cdef double* dst
    with nogil:
        for j in range(n_ops):
            code = codes[j]
            if code == OP_LOAD:
                _fill_round(base + sp * n, ins_base + iargs[j] * n, 0.0, n,
                            True, rounded, p, e_min, e_max, zero_thr,
                            max_finite)
                sp += 1
            elif code == OP_CONST:
                _fill_round(base + sp * n, NULL, fargs[j], n, False, rounded,
                            p, e_min, e_max, zero_thr, max_finite)
                sp += 1
            elif code == OP_CONSTX:
                _fill_round(base + sp * n, NULL, fargs[j], n, False, False,
                            p, e_min, e_max, zero_thr, max_finite)
                sp += 1
            elif code == OP_NEG:
                dst = base + (sp - 1) * n
                for i in range(n):
                    dst[i] = -dst[i]
            else:
                sp -= 1
                _binop_round(base + (sp - 1) * n, base + sp * n, code, n,
                             rounded, p, e_min, e_max, zero_thr, max_finite)
    out = stk[0].copy()
    return out
