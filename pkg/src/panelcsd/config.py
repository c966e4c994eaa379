"""Package-wide numerical thresholds and defaults.

Every tolerance that shapes behaviour lives here so it is documented in one
place and tests can reference the same constants the code uses.
"""

from __future__ import annotations

import os

# Regime classification: fitted growth exponent alpha of the largest-eigenvalue
# norm against the cross-section size. alpha <= WEAK_ALPHA_MAX is weak,
# alpha >= STRONG_ALPHA_MIN is strong, anything between is moderate.
WEAK_ALPHA_MAX = 0.1
STRONG_ALPHA_MIN = 0.9

# Factor count selection: scan the top EIGEN_RATIO_M_MAX adjacent eigenvalue
# ratios (descending order); if the largest ratio is below EIGEN_RATIO_MIN the
# matrix is treated as factorless (m = 0), otherwise m is the gap position.
EIGEN_RATIO_MIN = 3.0
EIGEN_RATIO_M_MAX = 8

# Symmetric-matrix hygiene. Symmetry is checked relative to the largest entry;
# eigenvalues within EIG_CLIP_REL of zero (relative to the top eigenvalue) are
# clamped to exactly zero; eigenvalues below -PSD_RTOL * lambda_max mean the
# matrix is not positive semidefinite.
SYMMETRY_RTOL = 1e-10
EIG_CLIP_REL = 1e-10
PSD_RTOL = 1e-8

# Design conditioning: warn above COND_WARN, refuse above COND_FAIL. The
# condition number is for the demeaned regressor cross-product (squared
# singular-value ratio of the demeaned design).
COND_WARN = 1e8
COND_FAIL = 1e12

# Robust covariance PSD repair: eigenvalues below -PSD_REPAIR_REL * lambda_max
# are clipped to zero and the clipped mass is recorded on the result.
PSD_REPAIR_REL = 1e-10

# Fourth-moment diagnostics refuse cross-sections larger than this.
FOURTH_MOMENT_N_MAX = 40

# Default automatic lag truncation for the kernel covariance when the time
# dependence is of unknown order: floor(4 * (T/100)^(2/9)).
def auto_truncation(t: int, declared: str = "unknown") -> int:
    """Resolve the automatic lag truncation for ``t`` periods.

    ``declared`` is the caller's statement about error time dependence:
    "pure-cs" (no serial dependence) gives 0, "ma:<q>" gives q, anything
    else ("summable", "unknown") gives the plug-in rate above.
    """
    if declared == "pure-cs":
        return 0
    if declared.startswith("ma:"):
        q = int(declared.split(":", 1)[1])
        if q < 0:
            raise ValueError("ma order must be nonnegative")
        return q
    return int(4.0 * (t / 100.0) ** (2.0 / 9.0))


# Worker count for the simulation engine: --threads flag beats this env var,
# which beats os.cpu_count().
THREADS_ENV_VAR = "PANELCSD_THREADS"


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            w = int(env)
            if w >= 1:
                return w
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)
