"""Measurement layer: AUC-ROC, orbital-law equivalence counting, reports.

AUC-ROC uses the rank (Mann-Whitney) formulation with midrank tie handling,
so ties between an anomaly and a normal count one half.  Equivalence
counting asks, member by member, whether the learned expression is
numerically indistinguishable on the data domain from some simple
rearrangement of T^2/a^3 — reciprocals, squares, and affine wrappers with
least-squares-fitted coefficients.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from . import expr as ex
from .data import kepler_dataset
from .ensemble import fit, member_scores

# Rearrangement powers admitted by the equivalence test: u, 1/u, u^2, 1/u^2
# for u = T^2/a^3, each composed with a fitted affine map alpha*u^p + beta.
EQUIVALENCE_POWERS = (1, -1, 2, -2)
# A member whose output is (numerically) constant over the domain carries no
# law at all; the affine fit would match it with alpha = 0, so reject first.
_CONSTANT_REL_STD = 1e-3


@dataclass(frozen=True)
class MemberReport:
    """One row of the per-member table: ranking quality and the equation."""

    auc: float
    equation: str
    complexity: float


@dataclass(frozen=True)
class EvalReport:
    auc_mean: float
    auc_per_member: tuple
    auc_max: float
    equations: tuple
    runtime_seconds: float

    def __post_init__(self):
        if self.auc_per_member and self.auc_max != max(self.auc_per_member):
            raise ValueError("auc_max must equal the best per-member AUC")


def auc_roc(scores, labels):
    """Probability a random anomaly outscores a random normal (ties count half)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    n_pos = int(np.count_nonzero(labels == 1))
    n_neg = int(np.count_nonzero(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present to compute AUC")
    ranks = rankdata(scores, method="average")
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


# --------------------------------------------------------------------------
# Equivalence counting for the orbital-law demo
# --------------------------------------------------------------------------


def _ratio_tree():
    """Expression tree for u = T^2/a^3 over features (x0=T, x1=a)."""
    t, a = ex.Feature(0), ex.Feature(1)
    return ex.Call("div", (ex.Call("mul", (t, t)),
                           ex.Call("mul", (ex.Call("mul", (a, a)), a))))


def _affine_power_target(power, alpha, beta):
    """Expression tree for alpha * u^power + beta."""
    u = _ratio_tree()
    powered = u if power == 1 else ex.Call("pow", (u, ex.Constant(float(power))))
    return ex.Expression(
        ex.Call("add", (ex.Call("mul", (ex.Constant(alpha), powered)),
                        ex.Constant(beta))),
        2,
    )


def _lift_member(member, dimension):
    mapping = {k: j for k, j in enumerate(member.subset)}
    return ex.remap_features(member.expression, mapping, dimension)


def kepler_equivalence_rate(model, tol=1e-3, samples=256, seed=0):
    """Fraction of members numerically equivalent to a T^2/a^3 rearrangement.

    For each member and each power p in {1, -1, 2, -2}, coefficients of
    alpha*(T^2/a^3)^p + beta are least-squares fitted on points drawn from
    the box spanned by the embedded 13-body table; the member counts if any
    fitted target passes :func:`expr.numeric_equivalence` at ``tol``.
    """
    table = kepler_dataset().rows
    domain = list(zip(table.min(axis=0), table.max(axis=0)))
    lows = np.array([lo for lo, _ in domain])
    highs = np.array([hi for _, hi in domain])

    fit_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    points = fit_rng.uniform(lows, highs, size=(samples, 2))
    u = points[:, 0] ** 2 / points[:, 1] ** 3

    hits = 0
    for index, member in enumerate(model.members):
        lifted = _lift_member(member, 2)
        values, codes = ex.evaluate_arrays(lifted, points)
        valid = codes == 0
        if valid.sum() < max(8, samples // 4):
            continue
        v = values[valid]
        if v.std() <= _CONSTANT_REL_STD * max(1.0, abs(float(v.mean()))):
            continue
        for p_index, power in enumerate(EQUIVALENCE_POWERS):
            basis = np.column_stack([u[valid] ** power, np.ones(valid.sum())])
            (alpha, beta), *_ = np.linalg.lstsq(basis, v, rcond=None)
            if not (np.isfinite(alpha) and np.isfinite(beta)):
                continue
            target = _affine_power_target(power, float(alpha), float(beta))
            check_rng = np.random.default_rng(
                np.random.SeedSequence(seed, spawn_key=(1, index, p_index))
            )
            if ex.numeric_equivalence(lifted, target, domain, samples, tol, check_rng):
                hits += 1
                break
    return hits / len(model.members)


# --------------------------------------------------------------------------
# End-to-end experiment
# --------------------------------------------------------------------------


def run_experiment(train, test, hp, workers=1):
    """Fit on train, score test, and report ensemble plus per-member AUCs."""
    if test.labels is None:
        raise ValueError("test dataset must be labeled")
    start = time.perf_counter()
    model = fit(train, hp, workers=workers)
    matrix = member_scores(model, test.rows)
    ensemble_scores = matrix.mean(axis=0)
    auc_mean = auc_roc(ensemble_scores, test.labels)
    auc_per_member = tuple(auc_roc(matrix[i], test.labels)
                           for i in range(len(model.members)))
    order = sorted(range(len(model.members)),
                   key=lambda i: auc_per_member[i], reverse=True)
    equations = tuple(
        MemberReport(
            auc=auc_per_member[i],
            equation=ex.to_text(
                model.members[i].expression,
                feature_names=[model.feature_names[j]
                               for j in model.members[i].subset],
            ),
            complexity=ex.complexity(model.members[i].expression),
        )
        for i in order
    )
    return EvalReport(
        auc_mean=auc_mean,
        auc_per_member=auc_per_member,
        auc_max=max(auc_per_member),
        equations=equations,
        runtime_seconds=time.perf_counter() - start,
    )


def report_text(report):
    """Human-readable rendering of an EvalReport."""
    lines = [
        f"ensemble AUC-ROC : {report.auc_mean:.4f}",
        f"best member AUC  : {report.auc_max:.4f}",
        f"runtime          : {report.runtime_seconds:.2f}s",
        "",
        f"{'AUC':>8}  {'complexity':>10}  equation",
    ]
    for entry in report.equations:
        lines.append(f"{entry.auc:8.4f}  {entry.complexity:10.1f}  {entry.equation}")
    return "\n".join(lines) + "\n"


def report_json(report):
    """Machine-readable rendering of an EvalReport."""
    document = {
        "auc_mean": report.auc_mean,
        "auc_per_member": list(report.auc_per_member),
        "auc_max": report.auc_max,
        "equations": [
            {"auc": e.auc, "equation": e.equation, "complexity": e.complexity}
            for e in report.equations
        ],
        "runtime_seconds": report.runtime_seconds,
    }
    return json.dumps(document, indent=2, sort_keys=True) + "\n"
