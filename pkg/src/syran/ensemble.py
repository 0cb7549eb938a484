"""Feature-bagged invariant ensemble: training, calibration, and scoring.

Each of the M members trains an expression on its own random feature subset
(K indices without replacement) against its own noise background, then
calibrates a per-member deviation scale d-bar as the mean absolute deviation
from 1 over the full training set.  The anomaly score of a point is the mean
over members of sigmoid(deviation / d-bar), which lands in [0.5, 1): 0.5
means every member holds exactly, values near 1 mean broad violation.

Member ``i`` is derived entirely from ``(master_seed, i)``, so members can be
fitted in any order or on any number of parallel workers with bit-identical
results.
"""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import expr as ex
from . import kernels
from .search import EvolutionConfig, evolve
from .objective import (
    LossBreakdown,
    TrainingContext,
    feature_ranges,
    sample_noise,
)

# Smallest allowed calibration scale; an exactly-invariant member would
# otherwise divide by zero at score time.
CALIBRATION_FLOOR = 1e-9
# Deviation assigned to rows a member cannot evaluate: a point outside a
# member's domain is maximal evidence of abnormality for that member.
FAULT_CEILING = 1e6
# Largest double below 1.0; member scores are clamped here so that scores
# stay inside [0.5, 1) even when the sigmoid saturates.
_ONE_BELOW = float(np.nextafter(1.0, 0.0))

# Cap on the number of noise rows drawn per member (rows beyond this add
# little statistical contrast but cost every fitness evaluation).
MAX_NOISE_ROWS = 2048


@dataclass(frozen=True)
class Hyperparameters:
    """Ensemble-level settings; evolution settings ride along inside."""

    ensemble_size: int = 50
    bag_size: int = 2
    delta: float = 1.0
    gamma: float = 0.1
    evolution: EvolutionConfig = EvolutionConfig()
    master_seed: int = 0

    def __post_init__(self):
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        if self.bag_size < 1:
            raise ValueError("bag_size must be >= 1")
        if not self.delta > 0:
            raise ValueError("delta must be > 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class InvariantModel:
    """One trained member: expression over its subset plus calibration."""

    expression: ex.Expression
    subset: tuple
    mean_deviation: float
    train_loss: LossBreakdown

    def __post_init__(self):
        if len(self.subset) != self.expression.dimension:
            raise ValueError("subset length must match expression dimension")
        if len(set(self.subset)) != len(self.subset):
            raise ValueError("subset indices must be distinct")
        if not self.mean_deviation >= CALIBRATION_FLOOR:
            raise ValueError("mean_deviation below calibration floor")


@dataclass(frozen=True)
class EnsembleModel:
    members: tuple
    feature_names: tuple
    hyperparameters: Hyperparameters
    dimension: int

    def __post_init__(self):
        for member in self.members:
            if any(not 0 <= j < self.dimension for j in member.subset):
                raise ValueError("member subset references out-of-range feature")


def sample_feature_subset(dimension, bag_size, rng):
    """Draw min(bag_size, dimension) distinct indices, sorted ascending."""
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    rng = np.random.default_rng(rng)
    k = min(bag_size, dimension)
    picks = rng.choice(dimension, size=k, replace=False)
    return tuple(sorted(int(j) for j in picks))


def _member_streams(master_seed, index):
    """Independent rng material for member ``index``: (subset, noise, evo)."""
    children = np.random.SeedSequence(master_seed, spawn_key=(index,)).spawn(3)
    subset_rng = np.random.default_rng(children[0])
    noise_rng = np.random.default_rng(children[1])
    evo_seed = int(children[2].generate_state(1, np.uint64)[0])
    return subset_rng, noise_rng, evo_seed


def _deviations(expression, rows):
    """Per-row |f(x) - 1| with faulted rows pinned at FAULT_CEILING."""
    values, codes = kernels.eval_program(*expression.program, rows)
    deviations = np.abs(values - 1.0)
    deviations[codes != 0] = FAULT_CEILING
    return deviations


def fit_member(rows, hp, index):
    """Train member ``index`` from scratch; depends only on (master_seed, index)."""
    subset_rng, noise_rng, evo_seed = _member_streams(hp.master_seed, index)
    subset = sample_feature_subset(rows.shape[1], hp.bag_size, subset_rng)
    projected = np.ascontiguousarray(rows[:, subset])
    noise = sample_noise(
        feature_ranges(projected), min(len(projected), MAX_NOISE_ROWS), noise_rng
    )
    ctx = TrainingContext(projected, noise, hp.delta, hp.gamma)
    result = evolve(ctx, dataclasses.replace(hp.evolution, seed=evo_seed))
    mean_deviation = max(float(_deviations(result.best, projected).mean()),
                         CALIBRATION_FLOOR)
    return InvariantModel(
        expression=result.best,
        subset=subset,
        mean_deviation=mean_deviation,
        train_loss=result.best_loss,
    )


def _fit_member_task(args):
    rows, hp, index = args
    return fit_member(rows, hp, index)


def fit(train, hp, workers=1):
    """Train the full ensemble on a dataset (labels, if any, are ignored).

    With ``workers > 1`` members are fitted in parallel processes; the result
    is identical for any worker count because each member's randomness comes
    only from ``(master_seed, member_index)``.
    """
    rows = np.asarray(getattr(train, "rows", train), dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 2 or rows.shape[1] < 1:
        raise ValueError("training data must be a matrix with at least 2 rows")
    if not np.all(np.isfinite(rows)):
        raise ValueError("training data contains non-finite values")
    names = getattr(train, "feature_names", None)
    if names is None:
        names = tuple(f"x{j}" for j in range(rows.shape[1]))
    if len(names) != rows.shape[1]:
        raise ValueError("feature name count does not match column count")

    indices = range(hp.ensemble_size)
    if workers > 1:
        tasks = [(rows, hp, i) for i in indices]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            members = tuple(pool.map(_fit_member_task, tasks))
    else:
        members = tuple(fit_member(rows, hp, i) for i in indices)

    return EnsembleModel(
        members=members,
        feature_names=tuple(names),
        hyperparameters=hp,
        dimension=rows.shape[1],
    )


# --------------------------------------------------------------------------
# Scoring
# --------------------------------------------------------------------------


def member_deviation(member, x):
    """|f_i(x_S) - 1| for one full-dimension point (FAULT_CEILING on fault)."""
    x = np.asarray(x, dtype=np.float64)
    projected = x[list(member.subset)].reshape(1, -1)
    return float(_deviations(member.expression, np.ascontiguousarray(projected))[0])


def member_score(member, x):
    """sigmoid(deviation / d-bar) for one point; always in [0.5, 1)."""
    z = member_deviation(member, x) / member.mean_deviation
    return min(float(expit(z)), _ONE_BELOW)


def member_scores(model, rows):
    """Matrix of per-member scores, shape (M, n_rows), entries in [0.5, 1)."""
    rows = np.ascontiguousarray(np.asarray(rows, dtype=np.float64))
    if rows.ndim != 2 or rows.shape[1] != model.dimension:
        raise ValueError(
            f"rows must have width {model.dimension}, got shape {rows.shape!r}"
        )
    out = np.empty((len(model.members), rows.shape[0]))
    for i, member in enumerate(model.members):
        projected = np.ascontiguousarray(rows[:, list(member.subset)])
        z = _deviations(member.expression, projected) / member.mean_deviation
        out[i] = np.minimum(expit(z), _ONE_BELOW)
    return out


def score(model, rows):
    """Mean member score per row; each output in [0.5, 1), higher = more anomalous."""
    return member_scores(model, rows).mean(axis=0)


# --------------------------------------------------------------------------
# Serialization (human-readable JSON; expressions as sexpr text)
# --------------------------------------------------------------------------


def _loss_to_dict(loss):
    return {
        "l1": loss.l1,
        "l_noise": loss.l_noise,
        "hinge": loss.hinge,
        "l_c": loss.l_c,
        "total": loss.total,
        "fault_fraction": loss.fault_fraction,
    }


def to_json(model):
    """Serialize a model to a deterministic, human-readable JSON string."""
    hp = model.hyperparameters
    document = {
        "format": "syran-model",
        "version": 1,
        "dimension": model.dimension,
        "feature_names": list(model.feature_names),
        "hyperparameters": {
            "ensemble_size": hp.ensemble_size,
            "bag_size": hp.bag_size,
            "delta": hp.delta,
            "gamma": hp.gamma,
            "master_seed": hp.master_seed,
            "evolution": dataclasses.asdict(hp.evolution),
        },
        "members": [
            {
                "expression": ex.to_text(m.expression, fmt="sexpr"),
                "subset": list(m.subset),
                "mean_deviation": m.mean_deviation,
                "train_loss": _loss_to_dict(m.train_loss),
            }
            for m in model.members
        ],
    }
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def from_json(text):
    """Rebuild a model from :func:`to_json` output (exact round-trip)."""
    document = json.loads(text)
    if document.get("format") != "syran-model":
        raise ValueError("not a recognized model document")
    hp_doc = dict(document["hyperparameters"])
    evo_doc = dict(hp_doc.pop("evolution"))
    evo_doc["constant_range"] = tuple(evo_doc["constant_range"])
    hp = Hyperparameters(evolution=EvolutionConfig(**evo_doc), **hp_doc)
    members = tuple(
        InvariantModel(
            expression=ex.parse(m["expression"], dimension=len(m["subset"])),
            subset=tuple(m["subset"]),
            mean_deviation=float(m["mean_deviation"]),
            train_loss=LossBreakdown(**m["train_loss"]),
        )
        for m in document["members"]
    )
    return EnsembleModel(
        members=members,
        feature_names=tuple(document["feature_names"]),
        hyperparameters=hp,
        dimension=int(document["dimension"]),
    )


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(to_json(model))


def load_model(path):
    with open(path, "r", encoding="utf-8") as handle:
        return from_json(handle.read())
