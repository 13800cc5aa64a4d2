"""Exact counting of monotone lattice paths between two diagonal boundaries.

Paths take unit steps right or up from (a, b) to (c, d) and must stay
weakly between the lines y = x + s and y = x + t (boundary contact
allowed).  Three interchangeable backends:

* :func:`count_paths_reflection` -- alternating sum of binomials over
  reflected endpoints, truncated to the finitely many nonzero terms;
* :func:`count_paths_trig` -- the equivalent finite trigonometric sum,
  evaluated in extended precision and rounded to an integer;
* :func:`count_paths_dp` -- direct dynamic programming, the independent
  oracle for the other two.

:func:`count_paths_relaxed` additionally exempts the two endpoints from the
band constraint (interior vertices only), which is how the circuit-fidelity
formulas reference counts whose start or destination sits one step outside
the band.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import mpmath

from rewindlab.errors import IntegralityError, PreconditionError


def _comb0(n: int, k: int) -> int:
    """Binomial coefficient that vanishes outside 0 <= k <= n."""
    return comb(n, k) if 0 <= k <= n else 0

TRIG_DPS = 40
TRIG_TOLERANCE = 1e-6


@dataclass(frozen=True)
class LatticePoint:
    x: int
    y: int


@dataclass(frozen=True)
class BandConstraint:
    """Diagonal band s <= y - x <= t."""

    s: int
    t: int

    def __post_init__(self):
        if self.t < self.s:
            raise PreconditionError(f"band requires t >= s, got s={self.s}, t={self.t}")

    def contains(self, x: int, y: int) -> bool:
        return self.s <= y - x <= self.t


def _as_point(p) -> LatticePoint:
    if isinstance(p, LatticePoint):
        return p
    return LatticePoint(*p)


def _check_endpoints(a: LatticePoint, b: LatticePoint, band: BandConstraint) -> None:
    if not band.contains(a.x, a.y):
        raise PreconditionError(f"start {a} outside band {band}")
    if not band.contains(b.x, b.y):
        raise PreconditionError(f"end {b} outside band {band}")


def count_paths_dp(start, end, band: BandConstraint) -> int:
    """Dynamic programming over the rectangle [a.x..b.x] x [a.y..b.y].

    Returns 0 for unreachable endpoints instead of raising; cells outside
    the band are zeroed, endpoints included.
    """
    a, b = _as_point(start), _as_point(end)
    if b.x < a.x or b.y < a.y:
        return 0
    width, height = b.x - a.x + 1, b.y - a.y + 1
    col = [0] * height
    if band.contains(a.x, a.y):
        col[0] = 1
    for j in range(1, height):
        col[j] = col[j - 1] if band.contains(a.x, a.y + j) else 0
    for i in range(1, width):
        x = a.x + i
        nxt = [0] * height
        for j in range(height):
            if not band.contains(x, a.y + j):
                continue
            nxt[j] = col[j] + (nxt[j - 1] if j else 0)
        col = nxt
    return col[height - 1]


def count_paths_reflection(start, end, band: BandConstraint) -> int:
    """Reflection-principle count: sum over k of binomial differences.

    The summand vanishes once |k(t-s+2)| exceeds the path length, which
    bounds the k range.
    """
    a, b = _as_point(start), _as_point(end)
    _check_endpoints(a, b, band)
    if b.x < a.x or b.y < a.y:
        return 0
    s, t = band.s, band.t
    length = b.x + b.y - a.x - a.y
    period = t - s + 2
    kmax = length // period + 1
    total = 0
    for k in range(-kmax, kmax + 1):
        total += _comb0(length, b.x - a.x - k * period) - _comb0(length, b.x - a.y - k * period + t + 1)
    return total


def count_paths_trig(start, end, band: BandConstraint, dps: int = TRIG_DPS) -> int:
    """Finite trigonometric sum equivalent to the reflection count.

    Evaluated with mpmath at ``dps`` digits; raises IntegralityError when
    the result is further than TRIG_TOLERANCE from an integer.  The
    degenerate one-diagonal band (t == s) admits only the empty path and is
    handled directly, as the k-sum is empty there.
    """
    a, b = _as_point(start), _as_point(end)
    _check_endpoints(a, b, band)
    if b.x < a.x or b.y < a.y:
        return 0
    if (a.x, a.y) == (b.x, b.y):
        # Empty path.  The folded k-sum pairs modes k and p-k and so drops
        # the zero-eigenvalue middle mode of even periods, which only
        # contributes at path length zero.
        return 1
    s, t = band.s, band.t
    if t == s:
        return 0  # any step leaves the single allowed diagonal
    period = t - s + 2
    length = b.x + b.y - a.x - a.y
    with mpmath.workdps(dps):
        total = mpmath.mpf(0)
        for k in range(1, (t - s + 1) // 2 + 1):
            angle = mpmath.pi * k / period
            term = (
                (2 * mpmath.cos(angle)) ** length
                * mpmath.sin(angle * (a.x - a.y + t + 1))
                * mpmath.sin(angle * (b.x - b.y + t + 1))
            )
            total += term
        total *= mpmath.mpf(4) / period
        nearest = int(mpmath.nint(total))
        if abs(total - nearest) > TRIG_TOLERANCE:
            raise IntegralityError(f"trig sum {total} is not within {TRIG_TOLERANCE} of an integer")
    return nearest


_BACKENDS = {
    "reflection": count_paths_reflection,
    "trig": count_paths_trig,
    "dp": count_paths_dp,
}


def count_paths(start, end, band: BandConstraint, method: str = "reflection") -> int:
    return _BACKENDS[method](start, end, band)


@lru_cache(maxsize=1 << 16)
def _relaxed_cached(ax, ay, bx, by, s, t, method) -> int:
    band = BandConstraint(s, t)
    a, b = LatticePoint(ax, ay), LatticePoint(bx, by)
    if (ax, ay) == (bx, by):
        return 1  # empty path has no interior vertices
    if bx < ax or by < ay:
        return 0
    if bx + by - ax - ay == 1:
        return 1  # single step, interior empty
    if not band.contains(bx, by):
        # Last step is forced: from above the band it must be the up step,
        # from below it must be the right step; anything else would put the
        # second-to-last vertex even further outside.
        if by - bx > t:
            return _relaxed_cached(ax, ay, bx, by - 1, s, t, method) if by - bx == t + 1 else 0
        return _relaxed_cached(ax, ay, bx - 1, by, s, t, method) if by - bx == s - 1 else 0
    if not band.contains(ax, ay):
        if ay - ax > t:
            return _relaxed_cached(ax + 1, ay, bx, by, s, t, method) if ay - ax == t + 1 else 0
        return _relaxed_cached(ax, ay + 1, bx, by, s, t, method) if ay - ax == s - 1 else 0
    if t == s and (ax, ay) != (bx, by):
        return 0
    return _BACKENDS[method](LatticePoint(ax, ay), LatticePoint(bx, by), band)


def count_paths_relaxed(start, end, band: BandConstraint, method: str = "reflection") -> int:
    """Paths whose interior vertices stay in the band; endpoints are exempt.

    Equals the strict count when both endpoints lie inside the band.
    Endpoints may sit at most one diagonal outside (their first/last step
    is then forced back into the band); further out the count is zero.
    """
    a, b = _as_point(start), _as_point(end)
    return _relaxed_cached(a.x, a.y, b.x, b.y, band.s, band.t, method)


def binomial_paths(start, end) -> int:
    """Unconstrained monotone path count C(dx+dy, dx)."""
    a, b = _as_point(start), _as_point(end)
    if b.x < a.x or b.y < a.y:
        return 0
    return _comb0(b.x + b.y - a.x - a.y, b.x - a.x)


def as_fraction(count: int) -> Fraction:
    return Fraction(count)
