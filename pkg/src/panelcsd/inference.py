"""Wald tests of linear restrictions and the chi-square reference.

The statistic for restrictions R beta = r is

    (R b - r)' [R V R']^(-1) (R b - r)

with b the estimated slopes and V their covariance estimate; its reference
distribution is chi-square with q = rank(R) degrees of freedom. p-values are
asymptotic only; no finite-sample degrees-of-freedom correction is applied.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy import special

from .covariance import RobustCov
from .errors import DomainError, SingularRestrictedCov, UsageError

__all__ = [
    "LinearRestriction",
    "TestResult",
    "parse_restrictions",
    "wald",
    "chi2_sf",
]


@dataclass(frozen=True)
class LinearRestriction:
    """q linear restrictions R beta = r with R full row rank.

    ``matrix`` is (q, k) and ``value`` is (q,). Rank deficiency (redundant
    or contradictory-but-dependent rows) is rejected at construction.
    """

    matrix: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        r = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        v = np.atleast_1d(np.asarray(self.value, dtype=float))
        if r.ndim != 2 or v.ndim != 1 or r.shape[0] != v.shape[0]:
            raise UsageError("restriction shapes must be (q, k) and (q,)")
        if r.shape[0] < 1 or r.shape[0] > r.shape[1]:
            raise UsageError(
                f"need 1 <= q <= k restrictions, got q={r.shape[0]}, k={r.shape[1]}")
        if not (np.isfinite(r).all() and np.isfinite(v).all()):
            raise UsageError("restrictions contain non-finite values")
        svals = np.linalg.svd(r, compute_uv=False)
        if svals[-1] <= 1e-12 * max(svals[0], 1.0):
            raise UsageError("restriction matrix is rank deficient")
        object.__setattr__(self, "matrix", r)
        object.__setattr__(self, "value", v)

    @property
    def q(self) -> int:
        return self.matrix.shape[0]


_TERM_RE = re.compile(
    r"(?P<sign>[+-]?)\s*(?:(?P<coef>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)\s*\*?\s*)?"
    r"(?:b(?P<idx>\d+))?")


def _parse_side(side: str, k: int, where: str) -> tuple[np.ndarray, float]:
    """Parse one side of an equation into (coefficient row, constant)."""
    row = np.zeros(k)
    const = 0.0
    pos = 0
    side = side.strip()
    if not side:
        raise UsageError(f"empty {where} side in restriction")
    saw_term = False
    while pos < len(side):
        m = _TERM_RE.match(side, pos)
        if m is None or m.end() == pos:
            raise UsageError(f"cannot parse restriction near {side[pos:]!r}")
        sign = -1.0 if m.group("sign") == "-" else 1.0
        coef = m.group("coef")
        idx = m.group("idx")
        if coef is None and idx is None:
            raise UsageError(f"cannot parse restriction near {side[pos:]!r}")
        if idx is not None:
            j = int(idx)
            if not (1 <= j <= k):
                raise UsageError(f"coefficient b{j} out of range 1..{k}")
            row[j - 1] += sign * (float(coef) if coef else 1.0)
        else:
            const += sign * float(coef)
        saw_term = True
        pos = m.end()
        while pos < len(side) and side[pos] == " ":
            pos += 1
    if not saw_term:
        raise UsageError(f"no terms on {where} side")
    return row, const


def parse_restrictions(text: str, k: int) -> LinearRestriction:
    """Parse restriction strings like "b1=0, b2=b3, 2*b1+3*b2=1".

    Coefficients are named b1..bk. Each comma-separated equation may have
    linear combinations on both sides; everything is moved to the canonical
    form R beta = r. Redundant equations raise (rank-deficient R).
    """
    if k < 1:
        raise UsageError("k must be >= 1")
    eqs = [e for e in (piece.strip() for piece in text.split(",")) if e]
    if not eqs:
        raise UsageError("no restrictions given")
    rows, vals = [], []
    for eq in eqs:
        if eq.count("=") != 1:
            raise UsageError(f"restriction {eq!r} needs exactly one '='")
        left, right = eq.split("=")
        lrow, lconst = _parse_side(left, k, "left")
        rrow, rconst = _parse_side(right, k, "right")
        rows.append(lrow - rrow)
        vals.append(rconst - lconst)
    return LinearRestriction(matrix=np.vstack(rows), value=np.array(vals))


def chi2_sf(x: float, dof: int) -> float:
    """Chi-square survival function P(X > x) for dof degrees of freedom.

    Computed as the regularized upper incomplete gamma at (dof/2, x/2).
    Raises DomainError for x < 0 or a non-positive integer dof.
    """
    if not float(x) >= 0.0 or not np.isfinite(x):
        raise DomainError(f"chi2_sf needs x >= 0 and finite, got {x!r}")
    dof_int = int(dof)
    if dof_int != dof or dof_int < 1:
        raise DomainError(f"dof must be a positive integer, got {dof!r}")
    return float(special.gammaincc(dof_int / 2.0, float(x) / 2.0))


def wald(beta_hat: np.ndarray, cov, restriction: LinearRestriction) -> TestResult:
    """Wald test of R beta = r.

    Parameters
    ----------
    beta_hat : ndarray (k,)
    cov : RobustCov or ndarray (k, k)
        Covariance of beta_hat.
    restriction : LinearRestriction

    Raises
    ------
    SingularRestrictedCov
        When R V R' is numerically singular.
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    if isinstance(cov, RobustCov):
        v = cov.matrix
        method = cov.metadata()
    else:
        v = np.asarray(cov, dtype=float)
        method = {"method": "external"}
    k = beta_hat.shape[0]
    if v.shape != (k, k):
        raise ValueError(f"covariance shape {v.shape} does not match k={k}")
    if restriction.matrix.shape[1] != k:
        raise UsageError(
            f"restriction has {restriction.matrix.shape[1]} columns, need {k}")

    r_mat, r_val = restriction.matrix, restriction.value
    gap = r_mat @ beta_hat - r_val
    s = r_mat @ v @ r_mat.T
    s = 0.5 * (s + s.T)
    evals = np.linalg.eigvalsh(s)
    if evals[-1] <= 0.0 or evals[0] <= 1e-12 * evals[-1]:
        raise SingularRestrictedCov(
            f"restricted covariance is numerically singular "
            f"(eig range [{evals[0]:.3e}, {evals[-1]:.3e}])")
    stat = float(gap @ np.linalg.solve(s, gap))
    stat = max(stat, 0.0)
    q = restriction.q
    return TestResult(statistic=stat, dof=q, p_value=chi2_sf(stat, q),
                      method=method)


@dataclass(frozen=True)
class TestResult:
    """Wald statistic, degrees of freedom, asymptotic p-value, and the
    covariance metadata that produced it."""

    statistic: float
    dof: int
    p_value: float
    method: dict
