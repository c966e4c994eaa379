"""Estimate a panel regression and test restrictions under dependence.

Part one simulates a panel with equicorrelated errors, fits the within
and pooled estimators, and runs Wald tests of a true and a false
restriction with the dependence-robust covariance.

Part two shows when robustness actually matters. Whether cross-sectional
dependence hurts the slope depends on the regressors: generic iid
regressors average the common shocks away, while regressors aligned with
the factor loadings inherit them in full. The covariance that assumes
independent errors then understates the slope variance badly and its
test overrejects; the robust covariance keeps its level in both designs.

Run: python3 demos/estimate_and_test.py
"""

import numpy as np

from panelcsd import (CovMatrix, DgpSpec, Equicorr, EstimatorKind, Factor,
                      cov_cross_section, cov_plugin, fit, gen_panel,
                      parse_restrictions, wald)

BETA = (1.0, -0.5)


def main():
    spec = DgpSpec(cross_section=Equicorr(a=1.0, b=0.5), beta_true=BETA,
                   mu_law="uniform")
    panel, truth = gen_panel(spec, n=50, t=200, seed=20260819)
    print(f"panel: {panel.n_units} units x {panel.n_periods} periods, "
          f"true slopes {BETA}")
    print()

    k = len(BETA)
    true_r = parse_restrictions("b1=1, b2=-0.5", k)
    false_r = parse_restrictions("b1=0", k)
    for kind in (EstimatorKind.FIXED_EFFECT, EstimatorKind.POOLED):
        res = fit(panel, kind)
        robust = cov_cross_section(res)
        se = np.sqrt(np.diag(robust.matrix))
        print(f"{kind.value} estimator")
        for j, (b, s) in enumerate(zip(res.beta_hat, se), start=1):
            print(f"  b{j}  estimate {b:+.4f}   robust se {s:.4f}")
        for label, restr in (("true  b1=1, b2=-0.5", true_r),
                             ("false b1=0", false_r)):
            out = wald(res.beta_hat, robust, restr)
            print(f"  wald [{label}]  stat {out.statistic:8.2f}  "
                  f"dof {out.dof}  p {out.p_value:.4f}")
        print()

    # Rejection rates of the true restriction over repeated samples.
    # "independence" plugs sigma2 * I into the sandwich, which is the
    # classical covariance that ignores cross-sectional dependence.
    reps = 300
    print(f"size of the 5% test of the true restriction, {reps} panels, "
          f"one dominant factor in the errors:")
    print(f"  {'regressors':<16} {'independence':>13} {'robust':>8}")
    for x_law in ("iid_normal", "factor_aligned"):
        fspec = DgpSpec(cross_section=Factor(n_factors=1, strength=1.0),
                        beta_true=BETA, x_law=x_law)
        rej_indep = rej_robust = 0
        for r in range(reps):
            p, _ = gen_panel(fspec, 50, 200, np.random.SeedSequence([4, r]))
            res = fit(p, EstimatorKind.FIXED_EFFECT)
            sigma2 = float(np.mean(res.residuals ** 2))
            indep = cov_plugin(res, omega=CovMatrix(
                sigma2 * np.eye(p.n_units)))
            rej_indep += wald(res.beta_hat, indep, true_r).p_value < 0.05
            rej_robust += wald(res.beta_hat, cov_cross_section(res),
                               true_r).p_value < 0.05
        print(f"  {x_law:<16} {rej_indep / reps:>13.3f} "
              f"{rej_robust / reps:>8.3f}")


if __name__ == "__main__":
    main()
