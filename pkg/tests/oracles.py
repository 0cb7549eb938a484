"""Independent oracles the test suite checks the implementation against.

Everything here is derived without importing the package: closed-form
constants computed by hand/high-precision arithmetic, and a brute-force
O(n^2) AUC that trades speed for obvious correctness.
"""

import math

# Logistic sigmoid at a few analytic points.
SIGMOID_0 = 0.5
SIGMOID_1 = 0.7310585786300049  # 1 / (1 + e^-1)
SIGMOID_10 = 0.9999546021312976  # 1 / (1 + e^-10)
MEAN_OF_SIGMOID_0_AND_1 = 0.6155292893150024

# Loss of the constant expression 1 at delta=1, gamma=0.1: the data and
# noise terms vanish, the hinge saturates at delta, and the complexity term
# is gamma * ln(1 + ln(1 + 1)) for the single-node tree of weight 1.
CONSTANT_ONE_LC = math.log1p(math.log1p(1.0))  # 0.5265889...
CONSTANT_ONE_TOTAL = 1.0 + 0.1 * CONSTANT_ONE_LC  # 1.0526589034139044

# Complexity of (T*T)/(a*(a*a)) under the fixed weight table:
# div 3 + three mul 2 each + five leaves 1 each.
KEPLER_TREE_COMPLEXITY = 14.0
# Complexity of add(feature, constant): 1 + 1 + 1.
ADD_LEAF_COMPLEXITY = 3.0

# The reported wine-alcohol invariant 1.0759/(x - 11.1282) equals 1 here.
WINE_UNIT_POINT = 12.2041
WINE_SINGULARITY = 11.1282


def brute_force_auc(scores, labels):
    """Mean over all (anomaly, normal) pairs of 1/0.5/0 by score order."""
    positives = [s for s, y in zip(scores, labels) if y == 1]
    negatives = [s for s, y in zip(scores, labels) if y == 0]
    if not positives or not negatives:
        raise ValueError("both classes required")
    total = 0.0
    for p in positives:
        for n in negatives:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(positives) * len(negatives))
