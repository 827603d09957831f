"""Structural and quantitative checks of the Gram inverse.

The inverse of the banded B-spline Gram matrix has three verifiable traits:
its sign pattern is a checkerboard, each diagonal entry dominates the
reciprocal of the matching Gram diagonal, and its entries decay
geometrically away from the diagonal once weighted by the local knot gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFit

# Offsets whose weighted envelope sits below this times the diagonal value
# are machine noise and excluded from the decay fit.
NOISE_FLOOR = 1e-13


@dataclass(frozen=True)
class CheckResult:
    """Outcome of a sign-pattern check with the first offending entry."""

    passed: bool
    first_violation: tuple | None
    tol: float


@dataclass(frozen=True)
class DecayProfile:
    """Fitted geometric envelope |b_ij| gap_ij <= C gamma^|i-j|.

    ``residual`` is the max log-excess of the weighted entries over the
    envelope across the fitted offsets; the constant is inflated until it is
    nonpositive.  gamma_hat = 0 encodes an exactly diagonal inverse.
    """

    gamma_hat: float
    C_hat: float
    residual: float
    M: int
    k: int

    def to_dict(self):
        return {
            "gamma": self.gamma_hat,
            "C": self.C_hat,
            "residual": self.residual,
            "M": self.M,
            "k": self.k,
        }


def checkerboard_check(G):
    """Verify (-1)^(i+j) b_ij >= -tol for the dense inverse.

    tol is 1e-12 times the largest inverse magnitude, slack for entries that
    are exact zeros in exact arithmetic.  Returns the first violating (i, j)
    in row-major order, 1-based, when the pattern fails.
    """
    B = G.inverse
    tol = 1e-12 * float(np.abs(B).max())
    idx = np.arange(B.shape[0])
    checker = (-1.0) ** (idx[:, None] + idx[None, :])
    signed = checker * B
    bad = np.argwhere(signed < -tol)
    if len(bad) == 0:
        return CheckResult(passed=True, first_violation=None, tol=tol)
    i, j = bad[0]
    return CheckResult(passed=False, first_violation=(int(i) + 1, int(j) + 1), tol=tol)


def diag_ratios(A, B):
    """1 / (a_ii b_ii) for a dense SPD matrix and its inverse; each is <= 1."""
    return 1.0 / (np.diagonal(A) * np.diagonal(B))


def diag_inverse_bound(G):
    """Max over i of 1 / (a_ii b_ii); at most 1 when b_ii >= 1 / a_ii holds."""
    a_diag = G.band[G.partition.order - 1]
    b_diag = np.diagonal(G.inverse)
    return float(np.max(1.0 / (a_diag * b_diag)))


def decay_profile(G):
    """Fit the geometric decay of the gap-weighted Gram inverse.

    m_d is the max of |b_ij| (tau_{max(i,j)+k} - tau_{min(i,j)}) over offset
    d = |i - j|.  Offsets below the noise floor are dropped.  The rate
    gamma_hat is the least-squares slope of the raw |b_ij| maxima per offset:
    the gap weight grows with d (by roughly d knot spacings), so fitting the
    weighted envelope directly would overshoot the geometric rate.  C_hat is
    then inflated until C_hat gamma_hat^d dominates every fitted m_d.
    """
    B = G.inverse
    part = G.partition
    k, M = part.order, part.M
    knots = part.knots
    idx = np.arange(M)
    hi = np.maximum.outer(idx, idx)
    lo = np.minimum.outer(idx, idx)
    gap = knots[hi + k] - knots[lo]
    A = np.abs(B)
    W = A * gap
    m = np.array([np.diagonal(W, d).max() for d in range(M)])
    raw = np.array([np.diagonal(A, d).max() for d in range(M)])
    keep = np.flatnonzero(m > NOISE_FLOOR * m[0])
    if len(keep) == 1 and keep[0] == 0:
        # Diagonal to machine precision; decay faster than any geometric rate.
        return DecayProfile(gamma_hat=0.0, C_hat=float(m[0]), residual=0.0, M=M, k=k)
    if len(keep) < 3:
        raise DegenerateFit(f"only {len(keep)} usable offsets, need at least 3")
    ds = keep.astype(float)
    ys = np.log(m[keep])
    slope, intercept = np.polyfit(ds, np.log(raw[keep]), 1)
    log_c = float(np.max(ys - slope * ds))
    residual = float(np.max(ys - (log_c + slope * ds)))
    return DecayProfile(
        gamma_hat=float(math.exp(slope)),
        C_hat=float(math.exp(log_c)),
        residual=residual,
        M=M,
        k=k,
    )
