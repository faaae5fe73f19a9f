"""Partition combinatorics and symmetric-group character data.

Partitions are tuples of weakly decreasing positive parts.  Both conjugacy
classes and irreducible characters of the symmetric group on n letters are
indexed by the partitions of n in ascending lexicographic order, so the
identity class (1^n) and the sign character come first and the n-cycle class
and the trivial character come last.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import cache

import numpy as np

from .errors import InputError, InvariantError

# Full character tables stay cheap up to 12; single values are allowed
# further out where the beta-set recursion is still tractable.
MAX_TABLE_N = 12
MAX_VALUE_N = 30

# Calibrated defaults for the character-ratio decay bound: the largest b
# (rounded down) such that base(q, shape)^(b * support) dominates
# |chi(pi)| / chi(1) for every partition shape and every non-identity class
# over n in {5, 6, 7}.  Frozen from calibrate_ratio_bound(0.7); a test
# re-derives the value.
RATIO_BOUND_Q = 0.7
RATIO_BOUND_B = 0.238698


def _check_partition(lam: tuple[int, ...]) -> None:
    if any(p <= 0 for p in lam):
        raise InputError(f"partition parts must be positive: {lam}")
    if any(lam[i] < lam[i + 1] for i in range(len(lam) - 1)):
        raise InputError(f"partition parts must be weakly decreasing: {lam}")


@cache
def partitions(n: int) -> tuple[tuple[int, ...], ...]:
    """All partitions of n, ascending lexicographic on the part tuples."""
    if n < 0:
        raise InputError(f"partitions of a negative integer: {n}")
    return tuple(_gen_partitions(n, n))


def _gen_partitions(n, max_part):
    if n == 0:
        yield ()
        return
    for first in range(1, min(n, max_part) + 1):
        for rest in _gen_partitions(n - first, first):
            yield (first,) + rest


def partition_count(n: int) -> int:
    """p(n) by Euler's pentagonal-number recurrence."""
    if n < 0:
        return 0
    # Warm the cache iteratively so deep inputs do not hit the recursion limit.
    for m in range(n + 1):
        _pentagonal_step(m)
    return _pentagonal_step(n)


@cache
def _pentagonal_step(n: int) -> int:
    if n == 0:
        return 1
    total = 0
    k = 1
    while True:
        g1 = k * (3 * k - 1) // 2
        g2 = k * (3 * k + 1) // 2
        if g1 > n and g2 > n:
            break
        sign = 1 if k % 2 == 1 else -1
        if g1 <= n:
            total += sign * _pentagonal_step(n - g1)
        if g2 <= n:
            total += sign * _pentagonal_step(n - g2)
        k += 1
    return total


def cycle_count(lam: tuple[int, ...]) -> dict[int, int]:
    counts: dict[int, int] = {}
    for part in lam:
        counts[part] = counts.get(part, 0) + 1
    return counts


def centralizer_order(lam: tuple[int, ...]) -> int:
    """z_lam = prod j^(a_j) a_j! for a class of cycle type lam."""
    _check_partition(lam)
    z = 1
    for j, a in cycle_count(lam).items():
        z *= j**a * math.factorial(a)
    return z


def class_size(lam: tuple[int, ...]) -> int:
    n = sum(lam)
    return math.factorial(n) // centralizer_order(lam)


def conjugate_partition(lam: tuple[int, ...]) -> tuple[int, ...]:
    _check_partition(lam)
    if not lam:
        return ()
    return tuple(sum(1 for p in lam if p > i) for i in range(lam[0]))


def hook_dimension(lam: tuple[int, ...]) -> int:
    """Dimension of the irreducible indexed by lam via the hook length formula."""
    _check_partition(lam)
    n = sum(lam)
    conj = conjugate_partition(lam)
    hooks = 1
    for i, row in enumerate(lam):
        for j in range(row):
            hooks *= row - j + conj[j] - i - 1
    # The formula is an exact integer; floor division asserts divisibility.
    dim, rem = divmod(math.factorial(n), hooks)
    if rem:
        raise InvariantError(f"hook product does not divide n! for {lam}")
    return dim


def _beta_set(lam: tuple[int, ...]) -> tuple[int, ...]:
    # First-column hook lengths; strictly decreasing.
    ell = len(lam)
    return tuple(lam[i] + (ell - 1 - i) for i in range(ell))


def _partition_from_beta(beta: list[int]) -> tuple[int, ...]:
    beta = sorted(beta, reverse=True)
    ell = len(beta)
    lam = [beta[i] - (ell - 1 - i) for i in range(ell)]
    return tuple(p for p in lam if p > 0)


@cache
def mn_character(lam: tuple[int, ...], mu: tuple[int, ...]) -> int:
    """Character value chi_lam(mu) by the Murnaghan-Nakayama rule.

    Both arguments are partitions of the same n; the recursion peels border
    strips of size mu[0] off lam, working on the beta-set of lam.
    """
    _check_partition(lam)
    _check_partition(mu)
    n = sum(lam)
    if sum(mu) != n:
        raise InputError(f"class {mu} and shape {lam} have different sizes")
    if n > MAX_VALUE_N:
        raise InputError(f"character values supported for n <= {MAX_VALUE_N}")
    return _mn(lam, mu)


@cache
def _mn(lam: tuple[int, ...], mu: tuple[int, ...]) -> int:
    if not mu:
        return 1
    k = mu[0]
    rest = mu[1:]
    beta = _beta_set(lam)
    present = set(beta)
    total = 0
    for b in beta:
        if b < k or (b - k) in present:
            continue
        height = sum(1 for c in beta if b - k < c < b)
        new_beta = [c for c in beta if c != b] + [b - k]
        sign = -1 if height % 2 == 1 else 1
        total += sign * _mn(_partition_from_beta(new_beta), rest)
    return total


def character_table(n: int) -> np.ndarray:
    """Integer character table of the symmetric group on n letters.

    Rows are characters and columns are classes, both indexed by partitions(n).
    """
    if not 1 <= n <= MAX_TABLE_N:
        raise InputError(f"full symmetric tables supported for 1 <= n <= {MAX_TABLE_N}")
    parts = partitions(n)
    table = np.array(
        [[_mn(lam, mu) for mu in parts] for lam in parts], dtype=np.int64
    )
    _check_integer_orthogonality(n, parts, table)
    return table


def _check_integer_orthogonality(n, parts, table):
    # Row orthogonality in exact integers: sum_mu |C_mu| chi(mu) chi'(mu)
    # equals n! exactly when chi = chi'.
    sizes = [class_size(mu) for mu in parts]
    fact = math.factorial(n)
    for i in range(len(parts)):
        for j in range(i, len(parts)):
            s = sum(sizes[m] * int(table[i, m]) * int(table[j, m]) for m in range(len(parts)))
            expected = fact if i == j else 0
            if s != expected:
                raise InvariantError(
                    f"symmetric character table fails orthogonality at rows {i},{j}"
                )


@cache
def involution_count(n: int) -> int:
    """Number of elements squaring to the identity (includes the identity)."""
    if n < 0:
        raise InputError("negative n")
    if n <= 1:
        return 1
    for m in range(2, n):
        _ = involution_count(m)
    return involution_count(n - 1) + (n - 1) * involution_count(n - 2)


def involution_asymptotic(n: int) -> float:
    """Leading asymptotic (n/e)^(n/2) e^(sqrt n) / (e^(1/4) sqrt 2)."""
    return math.exp(
        (n / 2) * math.log(n / math.e) + math.sqrt(n) - 0.25 - 0.5 * math.log(2)
    )


def hardy_ramanujan(n: int) -> float:
    """Leading asymptotic e^(pi sqrt(2n/3)) / (4 n sqrt 3) for p(n)."""
    if n <= 0:
        raise InputError("positive n required")
    return math.exp(math.pi * math.sqrt(2 * n / 3)) / (4 * n * math.sqrt(3))


def power_cycle_type(mu: tuple[int, ...], k: int) -> tuple[int, ...]:
    """Cycle type of sigma^k for sigma of cycle type mu.

    Each part ell splits into gcd(ell, k) cycles of length ell / gcd(ell, k);
    k = 0 collapses everything to fixed points.
    """
    _check_partition(mu)
    if k < 0:
        raise InputError("nonnegative power required")
    if k == 0:
        return tuple([1] * sum(mu))
    out: list[int] = []
    for ell in mu:
        g = math.gcd(ell, k)
        out.extend([ell // g] * g)
    return tuple(sorted(out, reverse=True))


def support_size(mu: tuple[int, ...]) -> int:
    """Number of non-fixed points of a permutation of cycle type mu."""
    return sum(p for p in mu if p > 1)


def ratio_bound_base(lam: tuple[int, ...], q: float) -> float:
    n = sum(lam)
    rows = len(lam)
    cols = lam[0] if lam else 0
    return max(q, rows / n, cols / n)


def ratio_bound(lam: tuple[int, ...], supp: int, q: float = RATIO_BOUND_Q,
                b: float = RATIO_BOUND_B) -> float:
    """Decay bound max(q, rows/n, cols/n)^(b * supp) on |chi_lam| / chi_lam(1).

    Valid for n > 4 and non-identity classes with the calibrated (q, b)
    defaults; requesting an uncalibrated pair is allowed but callers should
    check it via calibrate_ratio_bound.
    """
    _check_partition(lam)
    if sum(lam) <= 4:
        raise InputError("ratio bound requires n > 4")
    if not 0 < q < 1 or b <= 0:
        raise InputError("need 0 < q < 1 and b > 0")
    if supp <= 0:
        raise InputError("non-identity class required (positive support)")
    return ratio_bound_base(lam, q) ** (b * supp)


def calibrate_ratio_bound(q: float, ns: tuple[int, ...] = (5, 6, 7)) -> float:
    """Largest admissible b for the given q over exhaustive checks at the given n.

    For every shape lam and non-identity class mu the bound must dominate
    |chi_lam(mu)| / chi_lam(1); returns the minimum over binding instances.
    """
    if not 0 < q < 1:
        raise InputError("need 0 < q < 1")
    best = math.inf
    for n in ns:
        parts = partitions(n)
        dims = {lam: hook_dimension(lam) for lam in parts}
        for lam in parts:
            base = ratio_bound_base(lam, q)
            for mu in parts:
                supp = support_size(mu)
                if supp == 0:
                    continue
                ratio = abs(_mn(lam, mu)) / dims[lam]
                if ratio == 0.0:
                    continue
                if base >= 1.0:
                    continue  # bound is 1 and dominates any ratio
                # base^(b*supp) >= ratio iff b <= log(ratio)/(supp log(base)).
                limit = math.log(ratio) / (supp * math.log(base))
                best = min(best, limit)
    return best


def row_col_dimension_bound(lam: tuple[int, ...]) -> tuple[Fraction, float]:
    """Bounds on hook_dimension for shapes with extreme row or column counts.

    Returns (exact_bound, shape_bound) where exact_bound = n * n!/(rows! cols!)
    always dominates the dimension (kept as a Fraction since it need not be an
    integer), and shape_bound is the asymptotic form
    n * n!^(1 - (rows+cols)/n) e^(2n/e) with implied constant set to 1
    (shape only, not a certified inequality).
    """
    _check_partition(lam)
    if not lam:
        raise InputError("empty partition")
    n = sum(lam)
    rows = len(lam)
    cols = lam[0]
    exact = Fraction(n * math.factorial(n), math.factorial(rows) * math.factorial(cols))
    shape = n * math.exp(
        (1 - (rows + cols) / n) * math.log(math.factorial(n)) + 2 * n / math.e
    )
    return exact, shape
