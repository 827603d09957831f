"""Characteristic intervals, knot-distance counters, and counting machinery.

Each inserted knot gets a characteristic interval: among the k + 1 B-spline
supports touching the insertion index, keep those of near-minimal length,
pick the one with the largest associated coefficient magnitude, and inside it
keep the longest single knot span.  The orthogonal function of that level
carries a fixed fraction of its norm there.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, IndexOutOfRange, NotAKnot

# Relative slack when grouping near-equal coefficient magnitudes.
TIE_REL_TOL = 1e-12


@dataclass(frozen=True)
class CharInterval:
    """Selected index j0, its support J0 = [tau_j0, tau_{j0+k}], and the span J."""

    j0: int
    J0: tuple
    J: tuple
    level: int


@dataclass(frozen=True)
class DistanceCounter:
    """Knot-counting distances from points or intervals to a characteristic interval."""

    partition: object
    char: object


def characteristic_interval(partition, i0, alpha):
    """Select the characteristic interval for the insertion at index i0.

    Steps: candidates j = i0-k..i0; keep those whose support length is at most
    twice the minimum (near-minimal); among them take the largest |alpha_j|
    (relative ties within TIE_REL_TOL grouped, smallest index wins); inside
    the winner's support return the longest knot span, leftmost on ties.
    """
    k = partition.order
    if not k + 1 <= i0 <= partition.M:
        raise IndexOutOfRange(f"i0={i0} outside [k+1, M]=[{k + 1}, {partition.M}]")
    alpha = np.asarray(alpha, dtype=float)
    if len(alpha) != k + 1:
        raise IndexOutOfRange(f"alpha must have k+1={k + 1} entries, got {len(alpha)}")
    knots = partition.knots
    js = np.arange(i0 - k, i0 + 1)  # 1-based candidate indices
    lengths = knots[js + k - 1] - knots[js - 1]
    lam0 = lengths <= 2.0 * lengths.min()
    mags = np.abs(alpha)
    amax = mags[lam0].max()
    lam1 = lam0 & (mags >= amax * (1.0 - TIE_REL_TOL))
    j0 = int(js[lam1][0])
    J0 = (float(knots[j0 - 1]), float(knots[j0 + k - 1]))
    widths = knots[j0 : j0 + k] - knots[j0 - 1 : j0 + k - 1]
    a = int(np.argmax(widths))
    J = (float(knots[j0 - 1 + a]), float(knots[j0 + a]))
    return CharInterval(j0=j0, J0=J0, J=J, level=partition.level)


def d_point(dc, x):
    """Knots between x and the characteristic interval, endpoint included.

    Counts knots with multiplicity strictly between x and the nearer endpoint
    of J, plus that endpoint once; 0 when x lies in J.
    """
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x={x} outside [0, 1]")
    c, d = dc.char.J
    knots = dc.partition.knots
    if c <= x <= d:
        return 0
    if x < c:
        between = np.searchsorted(knots, c, "left") - np.searchsorted(knots, x, "right")
    else:
        between = np.searchsorted(knots, x, "left") - np.searchsorted(knots, d, "right")
    return int(between) + 1


def d_interval(dc, V):
    """Knots between an interval and J, both facing endpoints counted when knots.

    0 when the closures of V and J intersect; otherwise knots with
    multiplicity strictly between them, plus one for each facing endpoint
    that is itself a knot value.
    """
    va, vb = float(V[0]), float(V[1])
    if not (0.0 <= va <= vb <= 1.0):
        raise DomainError(f"interval ({va}, {vb}) is not inside [0, 1]")
    c, d = dc.char.J
    knots = dc.partition.knots
    if vb >= c and va <= d:
        return 0
    if vb < c:
        gap_lo, gap_hi = vb, c
        v_end = vb
    else:
        gap_lo, gap_hi = d, va
        v_end = va
    between = np.searchsorted(knots, gap_hi, "left") - np.searchsorted(knots, gap_lo, "right")
    count = int(between) + 1  # the facing endpoint of J is always a knot
    if np.any(knots == v_end):
        count += 1
    return count


def monotone_subsequence(xs):
    """Length of the longest nondecreasing or nonincreasing subsequence."""
    xs = list(xs)
    return max(_longest_nondecreasing(xs), _longest_nondecreasing([-x for x in xs]))


def _longest_nondecreasing(xs):
    # Patience sorting on the tails array; bisect_right admits ties.
    tails = []
    for x in xs:
        pos = bisect_right(tails, x)
        if pos == len(tails):
            tails.append(x)
        else:
            tails[pos] = x
    return len(tails)


def char_multiplicity_census(system, x, y, beta):
    """How many levels n <= N put their J_n inside [x, y] at comparable length.

    Counts n with J_n a subset of [x, y] and |J_n| >= (1 - beta) (y - x).
    Both window endpoints must be values of the knot sequence.
    """
    x, y = float(x), float(y)
    if not 0.0 <= beta <= 0.5:
        raise DomainError(f"beta={beta} outside [0, 1/2]")
    if not x < y:
        raise DomainError(f"window needs x < y, got [{x}, {y}]")
    values = set(system.seq.points[: system.N + 1])
    if x not in values:
        raise NotAKnot(x)
    if y not in values:
        raise NotAKnot(y)
    floor = (1.0 - beta) * (y - x)
    count = 0
    for of in system.functions:
        c, d = of.char.J
        if c >= x and d <= y and (d - c) >= floor:
            count += 1
    return count


def census_max(system, beta):
    """Max census count over every knot-value window, with its argmax window.

    Enumerates, per level, only the windows that can count it: containment
    plus the length floor cap the window width at |J_n| / (1 - beta).  Each
    candidate pair is admitted with the exact predicate of
    char_multiplicity_census, so the two agree bit for bit.
    """
    if not 0.0 <= beta <= 0.5:
        raise DomainError(f"beta={beta} outside [0, 1/2]")
    values = sorted(set(system.seq.points[: system.N + 1]))
    counts = {}
    for of in system.functions:
        c, d = of.char.J
        width = d - c
        cap = width / (1.0 - beta)
        xlo = int(np.searchsorted(values, d - cap, "left"))
        while xlo > 0 and width >= (1.0 - beta) * (d - values[xlo - 1]):
            xlo -= 1
        xhi = bisect_right(values, c)  # one past the last x <= c
        ystart = int(np.searchsorted(values, d, "left"))
        for xi in range(xlo, xhi):
            xv = values[xi]
            for yi in range(ystart, len(values)):
                yv = values[yi]
                if width < (1.0 - beta) * (yv - xv):
                    break
                counts[(xv, yv)] = counts.get((xv, yv), 0) + 1
    if not counts:
        return 0, None
    best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return best[1], list(best[0])
