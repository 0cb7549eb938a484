"""Tree-based evolutionary search over expression space.

Minimizes the invariant-learning objective for one ensemble member with a
generational loop: elitist survival of the single best candidate, tournament
selection, subtree crossover, four mutation operators, and two diversity
mechanisms (random immigrants plus replacement of structural duplicates).

The ``generations`` field of :class:`EvolutionConfig` is an evaluation
budget: with population P the engine runs ceil(generations / P) generational
rounds, so the number of candidate evaluations stays comparable across
population sizes.

Determinism contract: every random decision for the offspring in slot s of
round g is drawn from a stream derived from (seed, g, s), never from
execution order, so results are identical no matter how evaluation work is
scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .objective import total_loss

# Share of each new generation regenerated as fresh random immigrants.
IMMIGRANT_FRACTION = 0.10
# Probability that a random leaf is a feature rather than a constant.
LEAF_FEATURE_PROB = 0.7
# Probability of growing an operator node while depth budget remains.
INTERNAL_PROB = 0.5
# Rational arithmetic dominates tree growth; transcendentals are rare.
# Empirically this bias roughly triples the rate at which clean product/ratio
# laws are rediscovered, without excluding any operator from the search.
_OP_NAMES = ("add", "sub", "mul", "div", "pow", "neg", "abs", "sin", "cos", "exp")
_OP_WEIGHTS = np.array(
    [1.5, 1.5, 3.0, 4.0, 0.5, 0.5, 0.5, 0.25, 0.25, 0.25], dtype=np.float64
)
_OP_PROBS = _OP_WEIGHTS / _OP_WEIGHTS.sum()

_MUTATION_KINDS = ("subtree", "opswap", "constant", "leaf")
CONSTANT_SIGMA = 0.2


@dataclass(frozen=True)
class EvolutionConfig:
    """Search settings for one evolutionary run.

    ``generations`` is the total candidate-evaluation budget, not a round
    count; see the module docstring for how it maps to rounds.
    """

    generations: int = 30000
    population_size: int = 100
    tournament_size: int = 3
    crossover_prob: float = 0.5
    mutation_prob: float = 0.4
    max_depth: int = 10
    constant_range: tuple = (-5.0, 5.0)
    seed: int = 0

    def __post_init__(self):
        if self.generations < 1:
            raise ValueError("generations (evaluation budget) must be >= 1")
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be >= 2")
        if not 0 <= self.crossover_prob <= 1 or not 0 <= self.mutation_prob <= 1:
            raise ValueError("probabilities must lie in [0, 1]")
        if self.crossover_prob + self.mutation_prob > 1 + 1e-12:
            raise ValueError("crossover_prob + mutation_prob must be <= 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        lo, hi = self.constant_range
        if not lo <= hi:
            raise ValueError("constant_range must be ordered")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def rounds(self):
        return -(-self.generations // self.population_size)


@dataclass(frozen=True)
class EvolutionResult:
    best: ex.Expression
    best_loss: object
    loss_trace: tuple
    evaluations: int


def _slot_rng(seed, generation, slot):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(generation, slot)))


# --------------------------------------------------------------------------
# Random expression generation
# --------------------------------------------------------------------------


def _random_leaf(dimension, constant_range, rng):
    if rng.random() < LEAF_FEATURE_PROB:
        return ex.Feature(int(rng.integers(dimension)))
    lo, hi = constant_range
    return ex.Constant(float(rng.uniform(lo, hi)))


def _random_node(dimension, depth_left, constant_range, rng):
    if depth_left <= 0 or rng.random() >= INTERNAL_PROB:
        return _random_leaf(dimension, constant_range, rng)
    op = _OP_NAMES[int(rng.choice(len(_OP_NAMES), p=_OP_PROBS))]
    children = tuple(
        _random_node(dimension, depth_left - 1, constant_range, rng)
        for _ in range(ex.OP_ARITY[op])
    )
    return ex.Call(op, children)


def random_expression(dimension, max_depth, constant_range, rng):
    """Grow a random valid expression within the depth bound."""
    rng = np.random.default_rng(rng)
    return ex.Expression(_random_node(dimension, max_depth, constant_range, rng), dimension)


# --------------------------------------------------------------------------
# Variation operators
# --------------------------------------------------------------------------


def _node_index_where(root, rng, predicate):
    matches = [i for i, node, _ in ex.iter_nodes(root) if predicate(node)]
    if not matches:
        return None
    return matches[int(rng.integers(len(matches)))]


def mutate(expression, config, rng, kind=None):
    """Apply one structural mutation; the input is left untouched.

    Kinds: ``subtree`` replacement with a fresh random subtree, ``opswap``
    of an operator to another of the same arity, ``constant`` perturbation
    (multiply by a lognormal factor), and ``leaf`` re-target.  With
    ``kind=None`` one applicable kind is chosen uniformly at random.
    """
    rng = np.random.default_rng(rng)
    root = expression.root
    if kind is None:
        applicable = ["subtree", "leaf"]
        if any(isinstance(n, ex.Call) for _, n, _ in ex.iter_nodes(root)):
            applicable.append("opswap")
        if any(isinstance(n, ex.Constant) for _, n, _ in ex.iter_nodes(root)):
            applicable.append("constant")
        applicable.sort(key=_MUTATION_KINDS.index)
        kind = applicable[int(rng.integers(len(applicable)))]

    if kind == "subtree":
        nodes = list(ex.iter_nodes(root))
        index = int(rng.integers(len(nodes)))
        node_depth = nodes[index][2]
        fresh = _random_node(
            expression.dimension, config.max_depth - node_depth, config.constant_range, rng
        )
        new_root = ex.replace_at(root, index, fresh)
    elif kind == "opswap":
        index = _node_index_where(root, rng, lambda n: isinstance(n, ex.Call))
        node = ex.subtree_at(root, index)
        pool = ex.BINARY_OPS if ex.OP_ARITY[node.op] == 2 else ex.UNARY_OPS
        alternatives = [op for op in pool if op != node.op]
        new_op = alternatives[int(rng.integers(len(alternatives)))]
        new_root = ex.replace_at(root, index, ex.Call(new_op, node.args))
    elif kind == "constant":
        index = _node_index_where(root, rng, lambda n: isinstance(n, ex.Constant))
        node = ex.subtree_at(root, index)
        value = node.value * math.exp(CONSTANT_SIGMA * rng.standard_normal())
        if not math.isfinite(value):
            lo, hi = config.constant_range
            value = float(rng.uniform(lo, hi))
        new_root = ex.replace_at(root, index, ex.Constant(value))
    elif kind == "leaf":
        index = _node_index_where(
            root, rng, lambda n: isinstance(n, (ex.Feature, ex.Constant))
        )
        fresh = _random_leaf(expression.dimension, config.constant_range, rng)
        new_root = ex.replace_at(root, index, fresh)
    else:
        raise ValueError(f"unknown mutation kind {kind!r}")
    return ex.Expression(new_root, expression.dimension)


def crossover(first, second, config, rng):
    """Swap one uniformly chosen subtree of ``first`` for one of ``second``.

    Pairs violating the depth bound are re-drawn up to 10 times before
    falling back to a copy of ``first``.  Inputs are left untouched.
    """
    if first.dimension != second.dimension:
        raise ex.ExpressionError("crossover requires equal input dimensions")
    rng = np.random.default_rng(rng)
    target_nodes = list(ex.iter_nodes(first.root))
    donor_nodes = list(ex.iter_nodes(second.root))
    for _ in range(10):
        t_index = int(rng.integers(len(target_nodes)))
        d_index = int(rng.integers(len(donor_nodes)))
        insert_depth = target_nodes[t_index][2]
        donor = donor_nodes[d_index][1]
        if insert_depth + ex.depth(donor) <= config.max_depth:
            return ex.Expression(
                ex.replace_at(first.root, t_index, donor), first.dimension
            )
    return first


# --------------------------------------------------------------------------
# Generational loop
# --------------------------------------------------------------------------


def _tournament(rng, losses, complexities, size, population_size):
    """Pick the index with lowest loss among ``size`` random contestants.

    Ties break toward lower complexity, then uniformly at random.
    """
    contestants = rng.integers(0, population_size, size=size)
    best_key = None
    tied = []
    for c in contestants:
        c = int(c)
        key = (losses[c].total, complexities[c])
        if best_key is None or key < best_key:
            best_key = key
            tied = [c]
        elif key == best_key and c not in tied:
            tied.append(c)
    if len(tied) == 1:
        return tied[0]
    return tied[int(rng.integers(len(tied)))]


def _breed(slot_rng, population, losses, complexities, config):
    p = config.population_size
    r = slot_rng.random()
    if r < config.crossover_prob:
        a = _tournament(slot_rng, losses, complexities, config.tournament_size, p)
        b = _tournament(slot_rng, losses, complexities, config.tournament_size, p)
        return crossover(population[a], population[b], config, slot_rng)
    if r < config.crossover_prob + config.mutation_prob:
        a = _tournament(slot_rng, losses, complexities, config.tournament_size, p)
        return mutate(population[a], config, slot_rng)
    a = _tournament(slot_rng, losses, complexities, config.tournament_size, p)
    return population[a]


def evolve(ctx, config):
    """Run the evolutionary search and return the overall best candidate.

    Fully deterministic given ``config.seed``; the best training loss per
    round is recorded in ``loss_trace`` (non-increasing by elitism).
    """
    p = config.population_size
    dim = ctx.dimension
    rounds = config.rounds
    n_immigrants = int(round(IMMIGRANT_FRACTION * p))

    population = [
        random_expression(dim, config.max_depth, config.constant_range,
                          _slot_rng(config.seed, 0, slot))
        for slot in range(p)
    ]
    losses = [total_loss(e, ctx) for e in population]
    complexities = [ex.complexity(e) for e in population]
    evaluations = p

    def best_index():
        return min(range(p), key=lambda i: (losses[i].total, complexities[i]))

    elite = best_index()
    best_expr, best_loss = population[elite], losses[elite]
    trace = []

    for generation in range(1, rounds + 1):
        new_population = [best_expr]
        for slot in range(1, p):
            slot_rng = _slot_rng(config.seed, generation, slot)
            if slot >= p - n_immigrants:
                child = random_expression(dim, config.max_depth,
                                          config.constant_range, slot_rng)
            else:
                child = _breed(slot_rng, population, losses, complexities, config)
            new_population.append(child)

        # Structural duplicates dilute the population; swap them for fresh
        # random expressions, scanning in slot order for determinism.
        seen = {best_expr.structure_key}
        for slot in range(1, p):
            key = new_population[slot].structure_key
            if key in seen:
                slot_rng = _slot_rng(config.seed, generation, slot)
                new_population[slot] = random_expression(
                    dim, config.max_depth, config.constant_range, slot_rng
                )
                key = new_population[slot].structure_key
            seen.add(key)

        new_losses = [best_loss] + [total_loss(e, ctx) for e in new_population[1:]]
        evaluations += p - 1
        population, losses = new_population, new_losses
        complexities = [ex.complexity(e) for e in population]
        elite = best_index()
        best_expr, best_loss = population[elite], losses[elite]
        trace.append(best_loss.total)

    return EvolutionResult(
        best=best_expr,
        best_loss=best_loss,
        loss_trace=tuple(trace),
        evaluations=evaluations,
    )
