"""Closed-form fidelity and correlation expressions.

Noiseless convolutional formulas are exact rationals in q.  The hybrid and
deep-local families evaluate a triple sum: an overall geometric weight per
wall entry point, band-constrained path counts, and a sum over the ordered
sets of points where the wall touches the upper boundary line.  Path
counts whose start or destination lies on that line use interior-only band
constraints (endpoints exempt), which makes the touch decomposition a
partition of the wall ensemble; each touch carries a factor (1+q^2)/q^2.

Conventions pinned by cross-checking against the exhaustive lattice sums
and the exact twirl:

* single(1) and single(2) recycle with identical fidelity (both qudits
  enter the first gate); pair(i, 1) likewise equals pair(i, 2).  The
  i-dependent expressions below are evaluated at max(i, 2).
* the noisy finite-n expression keeps the noiseless exponent convention
  (n - i at the recycled position), and the recycled-qudit boundary is
  dressed by the adjoint channel of the final rewinding gate.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import combinations

from rewindlab.circuits import RecycleTarget
from rewindlab.errors import (
    DivergentEigenvalueError,
    InvalidTargetError,
    TooLargeError,
    UnsupportedRegimeError,
)
from rewindlab.pathcount import BandConstraint, LatticePoint, count_paths_relaxed
from rewindlab.result import FidelityResult

HYBRID_M_CAP = 12
HYBRID_N_CAP = 24


def _lam(q: int) -> Fraction:
    return Fraction(q * q, q * q + 1)


# -- convolutional closed forms ---------------------------------------------


def conv_fidelity(q: int, n: int, target: RecycleTarget) -> FidelityResult:
    """Exact averaged fidelity of the single-sweep convolutional protocol."""
    if n < 3:
        raise InvalidTargetError("convolutional formulas need n >= 3")
    target.validate(n)
    lam = _lam(q)
    if target.kind == "single":
        i = max(target.indices[0], 2)
        value = 1 - Fraction(q - 1, q) * lam ** (n - i)
    elif target.kind == "prefix":
        k = target.indices[0]
        if k == 1:
            value = 1 - Fraction(q - 1, q) * lam ** (n - 2)
        else:
            inner = 1 + Fraction((q - 1) ** 2, q) * Fraction(q, q * q + 1) ** (k - 2)
            value = 1 - lam ** (n - k) * (1 - Fraction(1, q * (q * q - q + 1)) * inner)
    elif target.kind == "pair":
        i, j = target.indices
        if (i, j) == (2, 1):
            # qudits {1, 2} together are exactly the two-qudit prefix
            return FidelityResult(value=conv_fidelity(q, n, RecycleTarget.prefix(2)).value, method="closed")
        j = max(j, 2)
        value = 1 - Fraction(q - 1, q) * lam ** (n - i) * (1 + Fraction(1, q) * lam ** (i - j))
    else:
        raise InvalidTargetError(f"unsupported target {target}")
    return FidelityResult(value=value, method="closed")


def conv_correlation(q: int, n: int, i: int, j: int) -> FidelityResult:
    """Connected correlation F_ij - F_i F_j of two recycled qudits."""
    if not (n > i > j >= 1):
        raise InvalidTargetError("correlation needs n > i > j >= 1")
    lam = _lam(q)
    j = max(j, 2)
    value = Fraction(q - 1, q) ** 2 * lam ** (n - j) * (1 - lam ** (n - i))
    return FidelityResult(value=value, method="closed")


# -- hybrid circuits ---------------------------------------------------------


def _gamma(q: int) -> Fraction:
    return Fraction(q * q + 1, q * q)


@lru_cache(maxsize=1 << 14)
def _seg_count(ax: int, ay: int, bx: int, by: int, s: int, t: int) -> Fraction:
    return Fraction(
        count_paths_relaxed(LatticePoint(ax, ay), LatticePoint(bx, by), BandConstraint(s, t))
    )


def _touch_sum(
    q: int,
    start: tuple[int, int],
    dest: tuple[int, int],
    off: int,
    band: tuple[int, int],
    max_l: int,
) -> Fraction:
    """Touch-decomposed wall count from ``start`` to ``dest``.

    The wall may touch the line y = x + off at x-positions
    i_1 < ... < i_l; between touches it stays strictly inside ``band``
    (interior vertices only; start and destination are exempt).  Each
    touch contributes a factor (1+q^2)/q^2 on top of the segment counts,
    and the step off a touch is forced rightward, so segments between
    touches run from (i_j + 1, i_j + off) to the next touch.
    """
    s, t = band
    gamma = _gamma(q)
    sx, sy = start
    dx, dy = dest
    total = _seg_count(sx, sy, dx, dy, s, t)  # no touches
    if max_l < 1:
        return total
    candidates = [x for x in range(sx, dx)]
    for l in range(1, min(max_l, len(candidates)) + 1):
        for touches in combinations(candidates, l):
            w = _seg_count(sx, sy, touches[0], touches[0] + off, s, t)
            if w == 0:
                continue
            for a, b in zip(touches, touches[1:]):
                w *= _seg_count(a + 1, a + off, b, b + off, s, t)
                if w == 0:
                    break
            if w == 0:
                continue
            w *= _seg_count(touches[-1] + 1, touches[-1] + off, dx, dy, s, t)
            total += gamma**l * w
    return total


def hybrid_general(q: int, n: int, m: int) -> Fraction:
    """Triple-sum wall ensemble for the m-sweep circuit, recycling qudit 1.

    Each domain wall is classified by where it enters the lattice: on the
    first-gate axis at height k+1 (k = 0..n-3) or on the sweep axis at
    sweep e (e = 1..m-1).  Within a class the wall shapes are monotone
    paths to the exit corner (m, m+n-2) whose interior stays in the band
    0 <= y-x <= n-3 except for touches of the line y = x+n-2, each worth
    (1+q^2)/q^2.  Valid for n >= 4; n = 3 collapses the band and is
    covered by its own closed form in :func:`hybrid_fidelity`.
    """
    if n < 4:
        raise UnsupportedRegimeError("general hybrid sum needs n >= 4")
    if m > HYBRID_M_CAP or n > HYBRID_N_CAP:
        raise TooLargeError(f"hybrid sum capped at m <= {HYBRID_M_CAP}, n <= {HYBRID_N_CAP}")
    lam = _lam(q)
    w = Fraction(q, q * q + 1)
    off = n - 2
    band = (0, n - 3)

    dest = (m, m + off)
    total = Fraction(1, q) * lam ** (n - 2)  # all-ONE configuration
    # walls entering on the sweep axis at sweep e
    for e in range(1, m):
        weight = w ** (n + 2 * m - 2 - 2 * e) * Fraction(q) ** (n - 3)
        total += weight * _touch_sum(q, (e, e - 1), dest, off, band, max_l=m - e)
    # walls entering on the first-gate axis at height k + 1
    for k in range(0, n - 2):
        weight = Fraction(1, q ** (2 * m)) * lam ** (n + 2 * m - 4 - k)
        total += weight * _touch_sum(q, (1, k + 1), dest, off, band, max_l=m - 1)
    return total


def hybrid_special(q: int, n: int, m: int) -> Fraction:
    """Compact closed forms for m = 1, 2, 3 (any n >= m + 3).

    The m = 3 bracket carries (n+2)/q^2 as its second term; the general
    machinery and the exact twirl both confirm that coefficient (a leading
    1/q^2 without the n-dependence does not reproduce either).
    """
    lam = _lam(q)
    head = Fraction(q - 1, q)
    if m == 1:
        return 1 - head * lam ** (n - 2)
    if m == 2:
        return 1 - head * lam**n * (1 + Fraction(n, q**2) + Fraction(2, q**4))
    if m == 3:
        bracket = (
            1
            + Fraction(n + 2, q**2)
            + Fraction((1 + n) * (2 + n), 2 * q**4)
            + Fraction(2 * (2 + n), q**6)
            + Fraction(3, q**8)
        )
        return 1 - head * lam ** (n + 2) * bracket
    raise UnsupportedRegimeError(f"no printed special form for m={m}")


def hybrid_n3(q: int, m: int) -> Fraction:
    """Three-qudit tower: F = 1/q + (q-1)/q (1/(1+q^2))^m."""
    return Fraction(1, q) + Fraction(q - 1, q) * Fraction(1, 1 + q * q) ** m


def hybrid_fidelity(q: int, n: int, m: int) -> FidelityResult:
    """Recycling the first qudit of the m-sweep hybrid circuit."""
    if n < 3 or m < 1:
        raise InvalidTargetError("hybrid needs n >= 3, m >= 1")
    value = hybrid_n3(q, m) if n == 3 else hybrid_general(q, n, m)
    return FidelityResult(value=value, method="closed")


# -- local circuits ----------------------------------------------------------


def local_shallow(q: int, n: int, m: int) -> Fraction:
    """Brickwork wall ensemble for depth m <= n-2; telescopes to exactly 1.

    Every wall is pinned to the active corner: it enters on the first layer
    at distance 2k+3 below the last qudit (k = 0..(m-4)/2, weight
    (q/(1+q^2))^(m-2) q^(m-4-2k)) or ascends straight (weight lambda^(m-2)),
    and exits through the fixed point (1, n-4) after m-2 free layers.
    """
    lam = _lam(q)
    w = Fraction(q, q * q + 1)
    dest = (1, n - 4)
    total = lam ** (m - 2)
    for k in range(0, (m - 4) // 2 + 1):
        weight = w ** (m - 2) * Fraction(q) ** (m - 4 - 2 * k)
        total += weight * _touch_sum(q, (-k, n - m - 1 + k), dest, n - 4, (-1, n - 5), max_l=m)
    return total


def local_deep(q: int, n: int, m: int) -> Fraction:
    """Deep-brickwork fidelity (m >= n), recycling the first qudit.

    The wall ensemble of the depth-m brickwork coincides exactly with that
    of the (m-n)/2 + 1 sweep tower on the same n qudits: outside the
    active light cone the extra brickwork layers rewind perfectly, and the
    surviving walls match sweep for sweep.  Evaluated through the same
    triple path/touch sum as :func:`hybrid_general`.
    """
    return hybrid_general(q, n, (m - n) // 2 + 1)


def local_fidelity(q: int, n: int, m: int) -> FidelityResult:
    """Recycling the first qudit of the n-qudit, depth-m brickwork."""
    if n % 2 or m % 2 or n < 4 or m < 2:
        raise InvalidTargetError("local circuits need even n >= 4 and even m >= 2")
    if m <= n - 2:
        value = local_shallow(q, n, m)
    elif m >= n:
        value = local_deep(q, n, m)
    else:
        raise UnsupportedRegimeError(f"no closed form between m = n-2 and m = n (got n={n}, m={m})")
    return FidelityResult(value=value, method="closed")


# -- noisy convolutional forms ------------------------------------------------


def noisy_lambda2(q: int, alpha: float, beta: float) -> float:
    return alpha * q * q * (beta * q * q - 1) / (q**4 - 1)


def noisy_sup_fidelity(q: int, alpha: float, beta: float) -> float:
    """n -> infinity limit of the first-qudit fidelity, undressed boundary."""
    num = (1 - alpha * beta) * q**3 + alpha * q * q - 1
    den = (1 - alpha * beta) * q**4 + alpha * q * q - 1
    return num / den


def noisy_conv_fidelity(
    q: int,
    n: int,
    alpha: float,
    beta: float,
    target: RecycleTarget | None = None,
    recycled_boundary: tuple[float, float] = (1.0, 1.0),
) -> FidelityResult:
    """Noisy convolutional fidelity for recycling qudit i, in closed form.

        F_i = sup - (q-1)/q (alpha q^2 - 1)/D * lam2^(n - max(i, 2))

    with D = (1-alpha beta)q^4 + alpha q^2 - 1 and lam2 the subleading
    transfer eigenvalue.  The exponent keeps the noiseless n-i convention
    (recycling qudit 1 and 2 coincide); the twirl oracle rules out the
    variant with one extra power of lam2.  With a dressed recycled
    boundary the value is evaluated through the chain product instead;
    either way it agrees with :func:`rewindlab.statmech.transfer_fidelity`
    to 1e-12.
    """
    if target is None:
        target = RecycleTarget.single(1)
    if target.kind != "single":
        raise InvalidTargetError("closed noisy form covers single-qudit targets")
    if not 0 < alpha <= 1 or beta <= 0:
        raise InvalidTargetError("need 0 < alpha <= 1 and beta > 0")
    lam2 = noisy_lambda2(q, alpha, beta)
    if abs(lam2) >= 1:
        raise DivergentEigenvalueError(f"subleading eigenvalue {lam2} has modulus >= 1")

    if tuple(recycled_boundary) == (1.0, 1.0) or tuple(recycled_boundary) == (1, 1):
        i = max(target.indices[0], 2)
        den = (1 - alpha * beta) * q**4 + alpha * q * q - 1
        value = noisy_sup_fidelity(q, alpha, beta) - (q - 1) / q * (alpha * q * q - 1) / den * lam2 ** (n - i)
    else:
        from rewindlab.statmech import transfer_fidelity

        value = float(transfer_fidelity(q, n, target, alpha, beta, recycled_boundary).value)
    return FidelityResult(value=value, method="closed")


def noisy_conv_correlation_limit(q: int, alpha: float, gap: int) -> FidelityResult:
    """n -> infinity connected correlation at beta = 1, distance i - j = gap.

        (1-alpha) q^2 (alpha q^2 - 1) / ((q+1)^2 ((1-alpha) q^2 + 1)^2)
            * (alpha q^2 / (q^2 + 1))^gap

    The (q+1)^2 factor is fixed by the transfer-matrix limit itself (a
    (q^2+1) there misses the true prefactor by (q+1)^2/(q^2+1) at every
    alpha); the geometric decay rate alpha q^2/(q^2+1) is unaffected.
    """
    if gap < 1:
        raise InvalidTargetError("gap must be >= 1")
    pref = (1 - alpha) * q * q * (alpha * q * q - 1) / ((q + 1) ** 2 * ((1 - alpha) * q * q + 1) ** 2)
    value = pref * (alpha * q * q / (q * q + 1)) ** gap
    return FidelityResult(value=value, method="closed")
