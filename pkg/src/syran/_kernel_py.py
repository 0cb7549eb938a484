"""Pure-numpy fallback kernels.

Mirrors the fault semantics of the compiled extension exactly: the same
checks run in the same order, and a row keeps the first fault code it earns.
Vectorized over rows, so it is the slower path only because the evolutionary
loop evaluates huge numbers of tiny matrices.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

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

FAULT_DIV_ZERO = 1
FAULT_DOMAIN = 2
FAULT_OVERFLOW = 3
FAULT_NONFINITE = 4
FAULT_BAD_INPUT = 5

DIV_EPS = 1e-12
POW_LIMIT = 1e300


def _flag(codes, mask, code):
    codes[(codes == 0) & mask] = code


def eval_program(ops, args, consts, X):
    """Run a postfix program over rows of X -> (values, fault codes)."""
    n = X.shape[0]
    codes = np.zeros(n, dtype=np.uint8)
    stack = []
    with np.errstate(all="ignore"):
        for op, arg in zip(ops, args):
            if op == OP_FEATURE:
                v = X[:, arg]
                _flag(codes, ~np.isfinite(v), FAULT_BAD_INPUT)
            elif op == OP_CONST:
                v = np.full(n, consts[arg])
            elif op <= OP_POW:
                b = stack.pop()
                a = stack.pop()
                if op == OP_ADD:
                    v = a + b
                elif op == OP_SUB:
                    v = a - b
                elif op == OP_MUL:
                    v = a * b
                elif op == OP_DIV:
                    _flag(codes, np.abs(b) < DIV_EPS, FAULT_DIV_ZERO)
                    v = np.divide(a, b)
                else:
                    _flag(codes, (a < 0) & (b != np.floor(b)), FAULT_DOMAIN)
                    v = np.power(a, b)
                    _flag(codes, np.abs(v) > POW_LIMIT, FAULT_OVERFLOW)
                _flag(codes, ~np.isfinite(v), FAULT_OVERFLOW)
            else:
                a = stack.pop()
                if op == OP_NEG:
                    v = -a
                elif op == OP_ABS:
                    v = np.abs(a)
                elif op == OP_SIN:
                    v = np.sin(a)
                elif op == OP_COS:
                    v = np.cos(a)
                else:
                    v = np.exp(a)
                    _flag(codes, ~np.isfinite(v), FAULT_OVERFLOW)
            stack.append(v)
    root = stack.pop()
    _flag(codes, ~np.isfinite(root), FAULT_NONFINITE)
    values = np.where(codes == 0, root, np.nan)
    return values, codes


def deviation_stats(ops, args, consts, X):
    """Sum of |f(x) - 1| over fault-free rows plus the fault count."""
    values, codes = eval_program(ops, args, consts, X)
    ok = codes == 0
    return float(np.sum(np.abs(values[ok] - 1.0))), int(np.count_nonzero(~ok))
