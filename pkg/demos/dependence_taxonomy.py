"""Classify the builtin cross-sectional covariance families.

Builds each preset family over a grid of cross-section sizes, fits the
log-log growth exponent of every dependence norm, and prints the regime
label per norm. The interesting rows are the ones where the norms
disagree: a family can look strong through the largest eigenvalue while
the scaled Euclidean norm still calls it moderate, and vice versa.

Run: python3 demos/dependence_taxonomy.py
"""

import numpy as np

from panelcsd import EXAMPLE_PRESETS, all_norms, build_omega, classify

GRID = [25, 50, 100, 200, 400]
NORM_ORDER = ("max_eig", "max_row_sum", "euclid_scaled", "taxicab_scaled")


def main():
    print(f"{'family':<11} {'norms at n=100':>44}   "
          f"{'exponent / regime per norm':>56}")
    header = " ".join(f"{name:>13}" for name in NORM_ORDER)
    print(f"{'':<11} {header}")
    for name, family in EXAMPLE_PRESETS.items():
        vals = all_norms(build_omega(family, 100))
        profile = classify(lambda n, f=family: build_omega(f, n), GRID)
        cells = []
        for norm in NORM_ORDER:
            alpha, _ = profile.exponents_per_norm[norm]
            label = profile.regime_per_norm[norm].value
            cells.append(f"{vals[norm]:7.2f} {alpha:+5.2f}/{label[:4]:<4}")
        print(f"{name:<11} " + " ".join(cells))
    print()
    print("headline regime uses the largest-eigenvalue norm; slope <= 0.1")
    print("reads weak, >= 0.9 strong, in between moderate")

    # The bounded-spectrum family with one heavy row: eigenvalues stay
    # bounded while the max row sum grows, so the labels split.
    arrow = EXAMPLE_PRESETS["example12"]
    p = classify(lambda n: build_omega(arrow, n), GRID)
    print()
    print("example12 (single dominant unit):")
    for norm in ("max_eig", "max_row_sum"):
        alpha, _ = p.exponents_per_norm[norm]
        print(f"  {norm:<13} exponent {alpha:+.3f} -> "
              f"{p.regime_per_norm[norm].value}")
    top = np.array([all_norms(build_omega(arrow, n))["max_eig"]
                    for n in GRID])
    print(f"  largest eigenvalue over the grid: {np.round(top, 4)}")


if __name__ == "__main__":
    main()
