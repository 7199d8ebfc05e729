"""Calibrated sample sizes and the seed scheme for the deterministic checks.

The sample-complexity statements leave their absolute constants
unspecified, so every measurement count used by the check suite was
calibrated empirically: 20 seeded trials per check, pass target >= 90%,
chosen with margin on both sides (away from the failure region and, for
recovery, strictly below the M = n**2 point where the constraint set
collapses to the truth).  The README records the resulting table.

Seeds are derived with SplitMix64 from a fixed base so that CI is
deterministic: trial t of a check with offset ``off`` uses
``splitmix64(base_seed ^ (off + t))``.
"""

from __future__ import annotations

import math

from .sampling import splitmix64

DEFAULT_BASE_SEED = 123456789
N_TRIALS = 20
SUCCESS_TOL = 1e-3

# Headline exact-recovery claim: M = ceil(C(n, r) * n * r**2 * ln(n)**2),
# natural log.  No single C fits all four desk cells: the Gram projection
# needs M <= n**2, which at (10, 2) forces C <= 0.47, while the (10, 1)
# phase transition sits near C = 1.2.  Per-cell values, all with >= 20/20
# observed success at the shipped seeds:
RECOVERY_C = {(10, 1): 1.21, (10, 2): 0.453, (20, 1): 0.752, (20, 2): 0.401}


def recovery_m(n, r):
    """Calibrated measurement count for the exact-recovery experiments."""
    c = RECOVERY_C.get((n, r))
    if c is None:
        raise KeyError(f"no calibrated recovery constant for (n={n}, r={r})")
    return math.ceil(c * n * r * r * math.log(n) ** 2)


def dim_tangent(n, r):
    """Degrees of freedom of a rank-r n x n symmetric-pattern tangent space."""
    return 2 * n * r - r * r


# Concentration event (operator deviation <= 1/4) at n=12, r=2.  The
# deviation decays like 1/sqrt(M); M=6000 gives median 0.195, max 0.231
# over the shipped seeds.  6000 = 250 * n * r at this cell.
CONC_N, CONC_R = 12, 2
CONC_M = 6000
CONC_DEVIATION_BOUND = 0.25
CONC_RATIO_RANGE = (1.6, 2.6)
CONC_AGREE_N, CONC_AGREE_R, CONC_AGREE_M = 8, 2, 500
CONC_AGREE_TOL = 1e-5

# Tangent-leakage bound |P_perp S G| <= |G| / (4 sqrt(r)) at n=12, r=2.
# M = 80 * n * r**2 = 3840 passes 20/20 with max ratio 0.82 of the bound
# (the factor 60 lands at exactly 18/20 -- no margin).
LEAK_N, LEAK_R = 12, 2
LEAK_M_FACTOR = 80
LEAK_M = LEAK_M_FACTOR * LEAK_N * LEAK_R * LEAK_R

# Golfing certificate at n=16, r=2: L = ceil(12 log2 n) = 48 batches of
# m = 40 * n * r = 1280 measurements; observed 20/20 with max off-tangent
# norm 0.28 against the 0.5 requirement.
GOLF_N, GOLF_R = 16, 2
GOLF_M_FACTOR = 40
GOLF_M = GOLF_M_FACTOR * GOLF_N * GOLF_R
GOLF_L = math.ceil(12 * math.log2(GOLF_N))

# Zeroth-order end-to-end pipeline at n=12, r=2: M = 3 * dim_tangent = 132
# finite-difference probes (528 function evaluations).  Observed
# operator-norm errors ~1e-9 (quadratic, delta=1) and ~1e-6 (logistic,
# delta=1e-4) against thresholds 1e-3 and 1e-2.
FD_N, FD_R = 12, 2
FD_M = 3 * dim_tangent(FD_N, FD_R)
FD_DELTA_QUADRATIC = 1.0
FD_DELTA_LOGISTIC = 1e-4
FD_TOL_QUADRATIC = 1e-3
FD_TOL_LOGISTIC = 1e-2

# Default phase-sweep grid: multiples of dim_tangent, clamped to n**2
# (beyond n**2 the equality constraints are a.s. redundant and the Gram
# matrix is singular by dimension count).
SWEEP_M_MULTIPLES = (0.5, 1.0, 2.0, 4.0)

# Spherical-moment grids.
MOMENT_NS = (2, 3, 8, 32)
MOMENT_PS_EVEN = (2, 4, 6)
MOMENT_PS_ODD = (1, 3, 5)
MOMENT_SAMPLES = 1_000_000
MOMENT_SIGMA = 5.0

# Factorial-bound grid (exhaustive, exact arithmetic).
FACTORIAL_R_RANGE = range(1, 13)
FACTORIAL_P_RANGE = range(2, 9)

# Per-check seed offsets, spaced to keep the SplitMix64 streams disjoint.
OFF_SWEEP = 0
OFF_CONC = 1 << 32
OFF_CONC_RATIO = 2 << 32
OFF_CONC_AGREE = 3 << 32
OFF_LEAK = 4 << 32
OFF_LEAK_DECAY = 5 << 32
OFF_GOLF = 6 << 32
OFF_FD_QUAD = 7 << 32
OFF_FD_LOGI = 8 << 32
OFF_MINIMIZER = 9 << 32
OFF_MOMENT = 10 << 32
OFF_UNBIASED = 11 << 32
OFF_BASELINE = 12 << 32


def check_seed(base_seed, offset, trial):
    """Deterministic per-trial seed for a named check."""
    return splitmix64(base_seed ^ (offset + trial))
