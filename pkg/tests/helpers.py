"""Plain helper constructors shared by several test modules."""

import numpy as np

import syran
import syran.expr as ex
from syran import TrainingContext


def kepler_context(delta=1.0, gamma=0.1, noise_seed=0):
    """Training context over the embedded 13-body table."""
    rows = syran.kepler_dataset().rows
    noise = syran.sample_noise(
        syran.feature_ranges(rows), len(rows), np.random.default_rng(noise_seed)
    )
    return TrainingContext(rows, noise, delta, gamma)


def kepler_expression():
    """(T*T)/(a*(a*a)) as a two-feature expression tree."""
    t, a = ex.Feature(0), ex.Feature(1)
    root = ex.Call("div", (ex.Call("mul", (t, t)),
                           ex.Call("mul", (a, ex.Call("mul", (a, a))))))
    return ex.Expression(root, 2)


def constant_expression(value, dimension=2):
    return ex.Expression(ex.Constant(float(value)), dimension)


def manifold_dataset(n_normal=420, anomaly_fraction=0.05, seed=5):
    """Labeled points with normals on x0^2 = x1^3 and anomalies off it."""
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.5, 3.0, size=n_normal)
    normals = np.column_stack([t**3, t**2])
    n_anom = max(1, round(anomaly_fraction * n_normal / (1 - anomaly_fraction)))
    u = rng.uniform(0.5, 3.0, size=n_anom)
    # Push anomalies multiplicatively off the manifold in x0, well past the
    # normal band but inside the same overall box.
    factor = rng.choice([0.35, 0.5, 2.0, 3.0], size=n_anom)
    anomalies = np.column_stack([u**3 * factor, u**2])
    rows = np.vstack([normals, anomalies])
    labels = np.concatenate([np.zeros(n_normal, int), np.ones(n_anom, int)])
    return syran.Dataset(rows=rows, feature_names=("x0", "x1"), labels=labels)
