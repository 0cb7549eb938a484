"""Expression trees: construction, evaluation, faults, text, equivalence."""

import math

import numpy as np
import pytest

import syran.expr as ex
from syran.search import EvolutionConfig, random_expression

from helpers import kepler_expression
from oracles import (
    ADD_LEAF_COMPLEXITY,
    KEPLER_TREE_COMPLEXITY,
    WINE_SINGULARITY,
    WINE_UNIT_POINT,
)


def wine_expression():
    """1.0759 / (x0 - 11.1282) over one feature."""
    return ex.parse("(div 1.0759 (sub x0 11.1282))", dimension=1)


def breastw_expression():
    """x2 + |1 - x2| over nine features."""
    return ex.parse("(add x2 (abs (sub 1 x2)))", dimension=9)


# --------------------------------------------------------------------------
# Construction invariants
# --------------------------------------------------------------------------


def test_operator_arities():
    assert all(ex.OP_ARITY[op] == 2 for op in ("add", "sub", "mul", "div", "pow"))
    assert all(ex.OP_ARITY[op] == 1 for op in ("neg", "abs", "sin", "cos", "exp"))


def test_feature_index_must_be_in_dimension():
    with pytest.raises(ex.ExpressionError):
        ex.Expression(ex.Feature(2), 2)
    with pytest.raises(ex.ExpressionError):
        ex.Expression(ex.Call("sin", (ex.Feature(5),)), 2)


def test_constants_must_be_finite():
    for bad in (float("nan"), float("inf"), -float("inf")):
        with pytest.raises(ex.ExpressionError):
            ex.Expression(ex.Constant(bad), 1)


def test_arity_is_checked():
    with pytest.raises(ex.ExpressionError):
        ex.Expression(ex.Call("add", (ex.Feature(0),)), 1)
    with pytest.raises(ex.ExpressionError):
        ex.Expression(ex.Call("sin", (ex.Feature(0), ex.Feature(0))), 1)
    with pytest.raises(ex.ExpressionError):
        ex.Expression(ex.Call("nope", (ex.Feature(0),)), 1)


def test_dimension_must_be_positive():
    with pytest.raises(ex.ExpressionError):
        ex.Expression(ex.Constant(1.0), 0)


# --------------------------------------------------------------------------
# Complexity
# --------------------------------------------------------------------------


def test_complexity_of_single_feature_leaf():
    assert ex.complexity(ex.Expression(ex.Feature(0), 1)) == 1.0


def test_complexity_of_add_feature_constant():
    e = ex.Expression(ex.Call("add", (ex.Feature(0), ex.Constant(2.0))), 1)
    assert ex.complexity(e) == ADD_LEAF_COMPLEXITY


def test_complexity_of_kepler_tree():
    assert ex.complexity(kepler_expression()) == KEPLER_TREE_COMPLEXITY


def test_sin_wrapping_strictly_increases_complexity():
    e = kepler_expression()
    wrapped = ex.Expression(ex.Call("sin", (e.root,)), 2)
    assert ex.complexity(wrapped) > ex.complexity(e)


def test_complexity_strictly_exceeds_any_strict_subtree():
    rng = np.random.default_rng(42)
    config = EvolutionConfig()
    for _ in range(50):
        e = random_expression(3, 6, config.constant_range, rng)
        whole = ex.complexity(e)
        for index, node, _ in ex.iter_nodes(e.root):
            if index == 0:
                continue
            assert ex.complexity(ex.Expression(node, 3)) < whole


# --------------------------------------------------------------------------
# Evaluation and fault surfacing
# --------------------------------------------------------------------------


def test_kepler_form_at_natural_units_is_one():
    out = ex.evaluate(kepler_expression(), [1.0, 1.0])
    assert out.ok and out.value == 1.0


def test_wine_expression_hits_one_at_reported_point():
    out = ex.evaluate(wine_expression(), [WINE_UNIT_POINT])
    assert out.ok
    assert out.value == pytest.approx(1.0, abs=1e-9)


def test_wine_expression_faults_at_singularity():
    out = ex.evaluate(wine_expression(), [WINE_SINGULARITY])
    assert not out.ok
    assert out.fault == "div_zero"


def test_near_zero_division_threshold():
    e = ex.parse("(div 1 x0)", dimension=1)
    assert ex.evaluate(e, [1e-11]).ok
    assert ex.evaluate(e, [1e-13]).fault == "div_zero"


def test_pow_negative_base_non_integer_exponent_faults():
    e = ex.parse("(pow x0 0.5)", dimension=1)
    assert ex.evaluate(e, [4.0]).value == 2.0
    assert ex.evaluate(e, [-4.0]).fault == "domain"


def test_pow_negative_base_integer_exponent_is_fine():
    e = ex.parse("(pow x0 3)", dimension=1)
    assert ex.evaluate(e, [-2.0]).value == -8.0


def test_pow_overflow_faults():
    e = ex.parse("(pow x0 x1)", dimension=2)
    assert ex.evaluate(e, [10.0, 400.0]).fault == "overflow"


def test_exp_overflow_faults():
    e = ex.parse("(exp x0)", dimension=1)
    assert ex.evaluate(e, [1000.0]).fault == "overflow"
    assert ex.evaluate(e, [1.0]).value == pytest.approx(math.e, rel=1e-15)


def test_non_finite_input_faults():
    e = ex.parse("(add x0 1)", dimension=1)
    assert ex.evaluate(e, [float("nan")]).fault == "bad_input"
    assert ex.evaluate(e, [float("inf")]).fault == "bad_input"


def test_evaluate_batch_matches_evaluate_elementwise():
    e = kepler_expression()
    rows = [[1.0, 1.0], [4.0, 4.0 ** (2.0 / 3.0)]]
    outcomes = ex.evaluate_batch(e, rows)
    assert [o.value for o in outcomes] == pytest.approx([1.0, 1.0], rel=1e-12)
    for row, out in zip(rows, outcomes):
        assert ex.evaluate(e, row) == out


def test_evaluate_batch_empty_matrix():
    assert ex.evaluate_batch(kepler_expression(), np.empty((0, 2))) == []


def test_evaluate_batch_flags_bad_rows_only():
    e = ex.parse("(div 1 x0)", dimension=1)
    outcomes = ex.evaluate_batch(e, [[2.0], [0.0], [4.0]])
    assert [o.ok for o in outcomes] == [True, False, True]


def test_evaluation_never_returns_non_finite():
    rng = np.random.default_rng(7)
    config = EvolutionConfig()
    for _ in range(300):
        e = random_expression(2, 6, config.constant_range, rng)
        points = rng.uniform(-100, 100, size=(20, 2))
        values, codes = ex.evaluate_arrays(e, points)
        assert np.isfinite(values[codes == 0]).all()


def test_evaluate_is_pure():
    e = wine_expression()
    first = ex.evaluate(e, [13.37])
    second = ex.evaluate(e, [13.37])
    assert first == second


# --------------------------------------------------------------------------
# Text rendering and parsing
# --------------------------------------------------------------------------


def test_infix_of_breastw_expression():
    assert ex.to_text(breastw_expression()) == "x2 + |1 - x2|"


def test_sexpr_of_breastw_expression():
    assert ex.to_text(breastw_expression(), fmt="sexpr") == "(add x2 (abs (sub 1 x2)))"


def test_constant_rendering():
    assert ex.to_text(ex.Expression(ex.Constant(0.8449), 1)) == "0.8449"
    assert ex.to_text(ex.Expression(ex.Constant(2.0), 1)) == "2"
    assert ex.to_text(ex.Expression(ex.Constant(-3.5), 1)) == "-3.5"


def test_infix_feature_name_substitution():
    text = ex.to_text(kepler_expression(), feature_names=["T", "a"])
    assert text == "T * T / (a * a * a)"


def test_infix_minimal_parentheses():
    cases = [
        ("(sub x0 (sub x1 x2))", "x0 - (x1 - x2)"),
        ("(sub (sub x0 x1) x2)", "x0 - x1 - x2"),
        ("(mul (add x0 x1) x2)", "(x0 + x1) * x2"),
        ("(div x0 (mul x1 x2))", "x0 / (x1 * x2)"),
        ("(pow (pow x0 x1) x2)", "(x0 ^ x1) ^ x2"),
        ("(pow x0 (pow x1 x2))", "x0 ^ x1 ^ x2"),
        ("(neg (add x0 x1))", "-(x0 + x1)"),
        ("(add x0 (neg x1))", "x0 + -x1"),
    ]
    for sexpr, infix in cases:
        assert ex.to_text(ex.parse(sexpr, dimension=3)) == infix


def test_parse_kepler_sexpr_with_feature_names():
    e = ex.parse("(div (mul T T) (mul a (mul a a)))", feature_names=["T", "a"])
    assert e == kepler_expression()


def test_parse_reports_syntax_error_position():
    with pytest.raises(ex.ParseError) as info:
        ex.parse("(add x0", dimension=2)
    assert info.value.position == 7


def test_parse_rejects_out_of_range_feature():
    with pytest.raises(ex.ExpressionError):
        ex.parse("(sin x5)", dimension=2)


def test_parse_rejects_unknown_operator_and_trailing_text():
    with pytest.raises(ex.ParseError):
        ex.parse("(hypot x0 x1)", dimension=2)
    with pytest.raises(ex.ParseError):
        ex.parse("x0 x1", dimension=2)
    with pytest.raises(ex.ParseError):
        ex.parse("", dimension=2)


def test_parse_rejects_wrong_arity():
    with pytest.raises(ex.ParseError):
        ex.parse("(add x0 x1 x0)", dimension=2)
    with pytest.raises(ex.ParseError):
        ex.parse("(sin)", dimension=2)


def test_parse_requires_dimension_or_names():
    with pytest.raises(ValueError):
        ex.parse("(add x0 x1)")


def test_round_trip_random_trees():
    rng = np.random.default_rng(11)
    config = EvolutionConfig()
    for _ in range(1000):
        e = random_expression(4, 8, config.constant_range, rng)
        assert ex.parse(ex.to_text(e, fmt="sexpr"), dimension=4) == e


# --------------------------------------------------------------------------
# Tree utilities
# --------------------------------------------------------------------------


def test_node_count_depth_and_iter_nodes():
    e = kepler_expression()
    assert ex.node_count(e.root) == 9
    assert ex.depth(e.root) == 3
    indices = [i for i, _, _ in ex.iter_nodes(e.root)]
    assert indices == list(range(9))
    depths = {i: d for i, _, d in ex.iter_nodes(e.root)}
    assert depths[0] == 0 and max(depths.values()) == 3


def test_subtree_at_and_replace_at():
    e = kepler_expression()
    numerator = ex.subtree_at(e.root, 1)
    assert ex.to_text(ex.Expression(numerator, 2)) == "x0 * x0"
    swapped = ex.replace_at(e.root, 1, ex.Constant(5.0))
    assert ex.to_text(ex.Expression(swapped, 2)) == "5 / (x1 * x1 * x1)"
    # The original tree is untouched.
    assert ex.to_text(e) == "x0 * x0 / (x1 * x1 * x1)"
    with pytest.raises(IndexError):
        ex.replace_at(e.root, 9, ex.Constant(1.0))


def test_remap_features():
    e = ex.parse("(mul x0 x1)", dimension=2)
    wide = ex.remap_features(e, {0: 3, 1: 1}, 5)
    assert wide.dimension == 5
    assert ex.to_text(wide, fmt="sexpr") == "(mul x3 x1)"


# --------------------------------------------------------------------------
# Numeric equivalence
# --------------------------------------------------------------------------


def test_equivalence_of_expression_with_itself():
    e = kepler_expression()
    assert ex.numeric_equivalence(e, e, [(0.2, 600.0), (0.3, 70.0)],
                                  samples=128, tol=1e-9,
                                  rng=np.random.default_rng(0))


def test_distinct_features_are_not_equivalent():
    t = ex.Expression(ex.Feature(0), 2)
    a = ex.Expression(ex.Feature(1), 2)
    assert not ex.numeric_equivalence(t, a, [(1.0, 10.0), (1.0, 10.0)],
                                      samples=128, tol=1e-3,
                                      rng=np.random.default_rng(0))


def test_reported_variant_is_reciprocal_not_identity():
    # (a/T)/(T/a^2) simplifies to a^3/T^2: reciprocal of T^2/a^3.
    variant = ex.parse("(div (div a T) (div T (mul a a)))", feature_names=["T", "a"])
    kepler = ex.parse("(div (mul T T) (mul a (mul a a)))", feature_names=["T", "a"])
    reciprocal = ex.parse("(div (mul a (mul a a)) (mul T T))", feature_names=["T", "a"])
    domain = [(0.2, 600.0), (0.3, 70.0)]
    rng = np.random.default_rng(3)
    assert not ex.numeric_equivalence(variant, kepler, domain, 256, 1e-3, rng)
    assert ex.numeric_equivalence(variant, reciprocal, domain, 256, 1e-9,
                                  np.random.default_rng(4))


def test_equivalence_deterministic_given_seed():
    e = kepler_expression()
    other = ex.parse("(div (mul x0 x0) (pow x1 3))", dimension=2)
    domain = [(0.2, 600.0), (0.3, 70.0)]
    results = [
        ex.numeric_equivalence(e, other, domain, 64, 1e-6, np.random.default_rng(9))
        for _ in range(2)
    ]
    assert results[0] == results[1]


def test_equivalence_false_when_fault_rate_too_high():
    # 1/x0 faults on half the symmetric domain around zero is fine, but a
    # domain pinned inside the fault region fails the 80% validity gate.
    inv = ex.parse("(div 1 x0)", dimension=1)
    also_inv = ex.parse("(div 2 (mul 2 x0))", dimension=1)
    assert not ex.numeric_equivalence(inv, also_inv, [(0.0, 0.0)], 64, 1e-9,
                                      np.random.default_rng(0))
