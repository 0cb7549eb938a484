# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled evaluation kernels for postfix expression programs.

Semantics are defined jointly with the pure-numpy backend in
``_kernel_py.py``: one fault code per row, first fault wins, identical
check ordering.  Keep the two implementations in lockstep.
"""

from libc.math cimport NAN, cos, exp, fabs, floor, isfinite, pow, sin
from libc.stdlib cimport free, malloc

import numpy as np

BACKEND_NAME = "compiled"

cdef enum:
    OP_FEATURE = 0
    OP_CONST = 1
    OP_ADD = 2
    OP_SUB = 3
    OP_MUL = 4
    OP_DIV = 5
    OP_POW = 6
    OP_NEG = 7
    OP_ABS = 8
    OP_SIN = 9
    OP_COS = 10
    OP_EXP = 11

cdef enum:
    FAULT_DIV_ZERO = 1
    FAULT_DOMAIN = 2
    FAULT_OVERFLOW = 3
    FAULT_NONFINITE = 4
    FAULT_BAD_INPUT = 5

cdef double DIV_EPS = 1e-12
cdef double POW_LIMIT = 1e300


cdef inline int _eval_row(const int* ops, const int* iargs, const double* consts,
                          Py_ssize_t n_ops, const double* row, double* stack,
                          double* result) noexcept nogil:
    cdef Py_ssize_t k, sp = 0
    cdef int op
    cdef double a, b, v
    for k in range(n_ops):
        op = ops[k]
        if op == OP_FEATURE:
            v = row[iargs[k]]
            if not isfinite(v):
                return FAULT_BAD_INPUT
        elif op == OP_CONST:
            v = consts[iargs[k]]
        elif op <= OP_POW:
            b = stack[sp - 1]
            a = stack[sp - 2]
            sp -= 2
            if op == OP_ADD:
                v = a + b
            elif op == OP_SUB:
                v = a - b
            elif op == OP_MUL:
                v = a * b
            elif op == OP_DIV:
                if fabs(b) < DIV_EPS:
                    return FAULT_DIV_ZERO
                v = a / b
            else:
                if a < 0 and b != floor(b):
                    return FAULT_DOMAIN
                v = pow(a, b)
                if fabs(v) > POW_LIMIT:
                    return FAULT_OVERFLOW
            if not isfinite(v):
                return FAULT_OVERFLOW
        else:
            a = stack[sp - 1]
            sp -= 1
            if op == OP_NEG:
                v = -a
            elif op == OP_ABS:
                v = fabs(a)
            elif op == OP_SIN:
                v = sin(a)
            elif op == OP_COS:
                v = cos(a)
            else:
                v = exp(a)
                if not isfinite(v):
                    return FAULT_OVERFLOW
        stack[sp] = v
        sp += 1
    v = stack[0]
    if not isfinite(v):
        return FAULT_NONFINITE
    result[0] = v
    return 0


def eval_program(const int[::1] ops, const int[::1] args, const double[::1] consts,
                 const double[:, ::1] X):
    """Run a postfix program over rows of X -> (values, fault codes)."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t n_ops = ops.shape[0]
    values_arr = np.empty(n, dtype=np.float64)
    codes_arr = np.zeros(n, dtype=np.uint8)
    cdef double[::1] values = values_arr
    cdef unsigned char[::1] codes = codes_arr
    cdef double* stack = <double*> malloc(n_ops * sizeof(double))
    if stack == NULL:
        raise MemoryError()
    cdef const double* cptr = NULL
    if consts.shape[0] > 0:
        cptr = &consts[0]
    cdef Py_ssize_t i
    cdef int code
    cdef double v
    try:
        with nogil:
            for i in range(n):
                v = 0.0
                code = _eval_row(&ops[0], &args[0], cptr, n_ops, &X[i, 0],
                                 stack, &v)
                codes[i] = <unsigned char> code
                values[i] = v if code == 0 else NAN
    finally:
        free(stack)
    return values_arr, codes_arr


def deviation_stats(const int[::1] ops, const int[::1] args, const double[::1] consts,
                    const double[:, ::1] X):
    """Sum of |f(x) - 1| over fault-free rows plus the fault count."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t n_ops = ops.shape[0]
    cdef double* stack = <double*> malloc(n_ops * sizeof(double))
    if stack == NULL:
        raise MemoryError()
    cdef const double* cptr = NULL
    if consts.shape[0] > 0:
        cptr = &consts[0]
    cdef double total = 0.0
    cdef Py_ssize_t i, n_fault = 0
    cdef int code
    cdef double v
    try:
        with nogil:
            for i in range(n):
                v = 0.0
                code = _eval_row(&ops[0], &args[0], cptr, n_ops, &X[i, 0],
                                 stack, &v)
                if code != 0:
                    n_fault += 1
                else:
                    total += fabs(v - 1.0)
    finally:
        free(stack)
    return total, n_fault
