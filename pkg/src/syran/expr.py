"""Symbolic expression trees: construction, evaluation, printing, parsing.

An :class:`Expression` is an immutable rooted tree whose leaves are input
features or numeric constants and whose internal nodes are operators drawn
from a fixed grammar (add, sub, mul, div, pow, neg, abs, sin, cos, exp).
Evaluation is strict about numerics: there are no "protected" operators, and
any division near zero, domain violation, overflow, or non-finite value is
reported as an evaluation fault instead of being silently rewritten.

For batch evaluation an expression is compiled once into a flat postfix
program (see :class:`Program`) which is executed by the active kernel
backend (compiled extension or pure numpy, see :mod:`syran.kernels`).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels

# --------------------------------------------------------------------------
# Operator table
# --------------------------------------------------------------------------

BINARY_OPS = ("add", "sub", "mul", "div", "pow")
UNARY_OPS = ("neg", "abs", "sin", "cos", "exp")

OP_ARITY = {name: 2 for name in BINARY_OPS}
OP_ARITY.update({name: 1 for name in UNARY_OPS})

# Per-node complexity weights.  Transcendental and power nodes are charged
# hardest so that the complexity penalty steers search toward plain
# arithmetic forms.
COMPLEXITY_WEIGHTS = {
    "feature": 1.0,
    "const": 1.0,
    "add": 1.0,
    "sub": 1.0,
    "neg": 1.0,
    "mul": 2.0,
    "abs": 2.0,
    "div": 3.0,
    "sin": 4.0,
    "cos": 4.0,
    "exp": 4.0,
    "pow": 4.0,
}

# Opcodes shared with the kernel backends.  Binary opcodes must stay in
# 2..OP_POW and unary ones above, the kernels dispatch on those ranges.
OPCODE = {
    "feature": 0,
    "const": 1,
    "add": 2,
    "sub": 3,
    "mul": 4,
    "div": 5,
    "pow": 6,
    "neg": 7,
    "abs": 8,
    "sin": 9,
    "cos": 10,
    "exp": 11,
}

FAULT_NAMES = {
    1: "div_zero",
    2: "domain",
    3: "overflow",
    4: "nonfinite",
    5: "bad_input",
}


class ExpressionError(ValueError):
    """Raised when an expression violates a structural invariant."""


class ParseError(ExpressionError):
    """Raised on malformed expression text; carries the offending position."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


# --------------------------------------------------------------------------
# Tree nodes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Feature:
    """Leaf referencing input feature ``index`` (0-based)."""

    index: int


@dataclass(frozen=True)
class Constant:
    """Leaf holding a finite numeric constant."""

    value: float


@dataclass(frozen=True)
class Call:
    """Operator node applying ``op`` to ``args`` (arity-checked)."""

    op: str
    args: tuple


Node = Feature | Constant | Call


def _validate(node, dimension):
    if isinstance(node, Feature):
        if not 0 <= node.index < dimension:
            raise ExpressionError(
                f"feature index {node.index} out of range for dimension {dimension}"
            )
    elif isinstance(node, Constant):
        if not math.isfinite(node.value):
            raise ExpressionError(f"constant leaf {node.value!r} is not finite")
    elif isinstance(node, Call):
        arity = OP_ARITY.get(node.op)
        if arity is None:
            raise ExpressionError(f"unknown operator {node.op!r}")
        if len(node.args) != arity:
            raise ExpressionError(
                f"operator {node.op!r} expects {arity} children, got {len(node.args)}"
            )
        for child in node.args:
            _validate(child, dimension)
    else:
        raise ExpressionError(f"invalid node {node!r}")


@dataclass(frozen=True)
class Expression:
    """Immutable expression tree with a declared input dimension.

    Construction validates arity, feature-index range, and constant
    finiteness; instances are hashable and safe to share across workers.
    """

    root: Node
    dimension: int

    def __post_init__(self):
        if self.dimension < 1:
            raise ExpressionError("expression dimension must be >= 1")
        _validate(self.root, self.dimension)

    @cached_property
    def program(self):
        return compile_program(self.root)

    @cached_property
    def structure_key(self):
        """Bytes key identifying tree structure; equal iff sexpr texts equal."""
        ops, args, consts = self.program
        return ops.tobytes() + args.tobytes() + consts.tobytes()

    def __str__(self):
        return to_text(self, "infix")


@dataclass(frozen=True)
class EvalOutcome:
    """Either a finite value or a named evaluation fault."""

    value: float | None
    fault: str | None

    @property
    def ok(self):
        return self.fault is None


def _outcome(value, code):
    if code:
        return EvalOutcome(None, FAULT_NAMES[int(code)])
    return EvalOutcome(float(value), None)


# --------------------------------------------------------------------------
# Program compilation (postfix stack code shared by both kernel backends)
# --------------------------------------------------------------------------


def compile_program(root):
    """Flatten a tree into (ops, args, consts) postfix arrays."""
    ops, args, consts = [], [], []
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if isinstance(node, Call) and not expanded:
            stack.append((node, True))
            for child in reversed(node.args):
                stack.append((child, False))
            continue
        if isinstance(node, Feature):
            ops.append(OPCODE["feature"])
            args.append(node.index)
        elif isinstance(node, Constant):
            ops.append(OPCODE["const"])
            args.append(len(consts))
            consts.append(node.value)
        else:
            ops.append(OPCODE[node.op])
            args.append(0)
    return (
        np.asarray(ops, dtype=np.int32),
        np.asarray(args, dtype=np.int32),
        np.asarray(consts, dtype=np.float64),
    )


def evaluate_arrays(expr, rows):
    """Batch-evaluate on an (n, dimension) matrix.

    Returns ``(values, codes)`` where ``codes[i] != 0`` marks a faulted row
    (values there are NaN).  This is the array-level API the scoring and
    training paths use; :func:`evaluate_batch` wraps it per the outcome type.
    """
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ExpressionError("rows must be a 2-D matrix")
    if rows.shape[0] and rows.shape[1] != expr.dimension:
        raise ExpressionError(
            f"row width {rows.shape[1]} does not match expression dimension {expr.dimension}"
        )
    if rows.shape[0] == 0:
        return np.empty(0), np.empty(0, dtype=np.uint8)
    if rows.shape[1] == 0:  # keep the kernels' row pointers valid
        rows = np.zeros((rows.shape[0], 1))
    ops, args, consts = expr.program
    return kernels.eval_program(ops, args, consts, rows)


def evaluate(expr, point):
    """Evaluate at a single point, returning an :class:`EvalOutcome`."""
    point = np.asarray(point, dtype=np.float64)
    if point.shape != (expr.dimension,):
        raise ExpressionError(
            f"point has shape {point.shape}, expected ({expr.dimension},)"
        )
    values, codes = evaluate_arrays(expr, point.reshape(1, -1))
    return _outcome(values[0], codes[0])


def evaluate_batch(expr, rows):
    """Row-wise evaluation returning a list of :class:`EvalOutcome`."""
    values, codes = evaluate_arrays(expr, rows)
    return [_outcome(v, c) for v, c in zip(values, codes)]


def complexity(expr):
    """Sum of per-node complexity weights (strictly grows with the tree)."""
    total = 0.0
    stack = [expr.root]
    while stack:
        node = stack.pop()
        if isinstance(node, Feature):
            total += COMPLEXITY_WEIGHTS["feature"]
        elif isinstance(node, Constant):
            total += COMPLEXITY_WEIGHTS["const"]
        else:
            total += COMPLEXITY_WEIGHTS[node.op]
            stack.extend(node.args)
    return total


# --------------------------------------------------------------------------
# Tree utilities used by search operators and tests
# --------------------------------------------------------------------------


def node_count(node):
    if isinstance(node, Call):
        return 1 + sum(node_count(c) for c in node.args)
    return 1


def depth(node):
    """Longest root-to-leaf path length in edges (a lone leaf has depth 0)."""
    if isinstance(node, Call):
        return 1 + max(depth(c) for c in node.args)
    return 0


def iter_nodes(node):
    """Yield (preorder_index, node, depth_from_root) triples."""
    stack = [(node, 0)]
    index = 0
    while stack:
        current, d = stack.pop()
        yield index, current, d
        index += 1
        if isinstance(current, Call):
            for child in reversed(current.args):
                stack.append((child, d + 1))


def subtree_at(node, index):
    for i, sub, _ in iter_nodes(node):
        if i == index:
            return sub
    raise IndexError(index)


def replace_at(node, index, replacement):
    """Return a copy of ``node`` with the preorder-``index`` subtree swapped."""
    if not 0 <= index < node_count(node):
        raise IndexError(index)

    def rebuild(current, offset):
        if offset == index:
            return replacement
        children = []
        child_offset = offset + 1
        for child in current.args:
            size = node_count(child)
            if child_offset <= index < child_offset + size:
                children.append(rebuild(child, child_offset))
            else:
                children.append(child)
            child_offset += size
        return Call(current.op, tuple(children))

    return rebuild(node, 0)


# --------------------------------------------------------------------------
# Text round-tripping
# --------------------------------------------------------------------------

_FEATURE_TOKEN = re.compile(r"x(\d+)$")


def format_constant(value):
    """Shortest decimal text that parses back to the same float."""
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(float(value))


def _feature_name(index, feature_names):
    if feature_names is not None:
        return feature_names[index]
    return f"x{index}"


_PREC = {"add": 10, "sub": 10, "mul": 20, "div": 20, "neg": 25, "pow": 30}
_INFIX_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}


def _prec(node):
    if isinstance(node, Constant):
        return 25 if node.value < 0 else 100
    if isinstance(node, Call):
        return _PREC.get(node.op, 100)
    return 100


def _infix(node, names):
    if isinstance(node, Feature):
        return _feature_name(node.index, names)
    if isinstance(node, Constant):
        return format_constant(node.value)
    op = node.op
    if op == "abs":
        return f"|{_infix(node.args[0], names)}|"
    if op in ("sin", "cos", "exp"):
        return f"{op}({_infix(node.args[0], names)})"
    if op == "neg":
        inner = _infix(node.args[0], names)
        if _prec(node.args[0]) <= 25:
            inner = f"({inner})"
        return f"-{inner}"
    left, right = node.args
    lp, rp = _prec(left), _prec(right)
    mine = _PREC[op]
    ltext = _infix(left, names)
    rtext = _infix(right, names)
    # Parenthesize so the conventional reading matches the tree: '-' and '/'
    # bind their right operand tightly, '^' associates to the right.
    if op in ("add", "mul"):
        if lp < mine:
            ltext = f"({ltext})"
        if rp < mine:
            rtext = f"({rtext})"
    elif op in ("sub", "div"):
        if lp < mine:
            ltext = f"({ltext})"
        if rp <= mine:
            rtext = f"({rtext})"
    else:  # pow
        if lp <= mine:
            ltext = f"({ltext})"
        if rp < mine:
            rtext = f"({rtext})"
    return f"{ltext} {_INFIX_SYMBOL[op]} {rtext}"


def _sexpr(node):
    if isinstance(node, Feature):
        return f"x{node.index}"
    if isinstance(node, Constant):
        return format_constant(node.value)
    inner = " ".join(_sexpr(c) for c in node.args)
    return f"({node.op} {inner})"


def to_text(expr, fmt="infix", feature_names=None):
    """Render as human-readable infix or canonical round-trippable sexpr.

    The sexpr form always names features ``x<k>``; infix substitutes
    ``feature_names`` when given.
    """
    if fmt == "infix":
        return _infix(expr.root, feature_names)
    if fmt == "sexpr":
        return _sexpr(expr.root)
    raise ValueError(f"unknown format {fmt!r}")


def _tokenize(text):
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            tokens.append((ch, i))
            i += 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in "()":
                j += 1
            tokens.append((text[i:j], i))
            i = j
    return tokens


def parse(text, dimension=None, feature_names=None):
    """Parse canonical sexpr text into an :class:`Expression`.

    Features may be written ``x<k>`` or, when ``feature_names`` is given, by
    column name (names take precedence over the ``x<k>`` pattern).  Obeys the
    round-trip law ``parse(to_text(e, "sexpr"), e.dimension) == e``.
    """
    if feature_names is not None:
        feature_names = list(feature_names)
        if dimension is None:
            dimension = len(feature_names)
    if dimension is None:
        raise ValueError("parse requires a dimension or feature_names")

    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty expression", 0)
    pos = [0]

    def next_token():
        if pos[0] >= len(tokens):
            raise ParseError("unexpected end of input", len(text))
        tok = tokens[pos[0]]
        pos[0] += 1
        return tok

    def parse_node():
        tok, at = next_token()
        if tok == "(":
            op_tok, op_at = next_token()
            if op_tok in ("(", ")"):
                raise ParseError("expected operator name", op_at)
            if op_tok not in OP_ARITY:
                raise ParseError(f"unknown operator {op_tok!r}", op_at)
            args = []
            while True:
                if pos[0] >= len(tokens):
                    raise ParseError("missing ')'", len(text))
                if tokens[pos[0]][0] == ")":
                    pos[0] += 1
                    break
                args.append(parse_node())
            if len(args) != OP_ARITY[op_tok]:
                raise ParseError(
                    f"operator {op_tok!r} expects {OP_ARITY[op_tok]} children, "
                    f"got {len(args)}",
                    op_at,
                )
            return Call(op_tok, tuple(args))
        if tok == ")":
            raise ParseError("unexpected ')'", at)
        if feature_names is not None and tok in feature_names:
            return Feature(feature_names.index(tok))
        match = _FEATURE_TOKEN.match(tok)
        if match:
            return Feature(int(match.group(1)))
        try:
            return Constant(float(tok))
        except ValueError:
            raise ParseError(f"unrecognized token {tok!r}", at) from None

    root = parse_node()
    if pos[0] != len(tokens):
        raise ParseError("trailing input after expression", tokens[pos[0]][1])
    return Expression(root, dimension)


# --------------------------------------------------------------------------
# Numeric equivalence
# --------------------------------------------------------------------------


def numeric_equivalence(a, b, domain, samples, tol, rng):
    """Test whether two expressions agree numerically over a box domain.

    Samples ``samples`` points uniformly per-feature from ``domain`` (a list
    of (low, high) pairs).  True iff at least 80% of samples evaluate
    fault-free for both expressions and every mutually fault-free point
    satisfies ``|a - b| <= tol * max(1, |b|)``.
    """
    if a.dimension != b.dimension:
        raise ExpressionError("expressions have different input dimensions")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(rng)
    lows = np.array([lo for lo, _ in domain], dtype=np.float64)
    highs = np.array([hi for _, hi in domain], dtype=np.float64)
    if len(lows) != a.dimension:
        raise ExpressionError("domain length does not match expression dimension")
    points = rng.uniform(lows, highs, size=(samples, a.dimension))
    va, ca = evaluate_arrays(a, points)
    vb, cb = evaluate_arrays(b, points)
    ok = (ca == 0) & (cb == 0)
    if ok.sum() < 0.8 * samples:
        return False
    diff = np.abs(va[ok] - vb[ok])
    bound = tol * np.maximum(1.0, np.abs(vb[ok]))
    return bool(np.all(diff <= bound))


def remap_features(expr, mapping, new_dimension):
    """Re-index feature leaves (position i -> mapping[i]) in a wider space."""

    def rebuild(node):
        if isinstance(node, Feature):
            return Feature(int(mapping[node.index]))
        if isinstance(node, Call):
            return Call(node.op, tuple(rebuild(c) for c in node.args))
        return node

    return Expression(rebuild(expr.root), new_dimension)
