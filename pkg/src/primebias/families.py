"""Ramification data and Artin conductors for explicit extension families.

An extension spec bundles the Galois group of L over the rationals, an
optional subgroup embedding for a relative extension L/K, ramified-prime
data (inertia filtrations or precomputed conductor exponents), and exact or
bounded discriminant information.  On top of that sit the conductor
calculus, conductor bounds, least-prime bound evaluators, and the error
bound for the prime-counting discrepancy.

All bound evaluators report shapes with implied absolute constants set to 1
and are flagged as such; nothing here is a certified inequality unless the
arithmetic is exact (conductor exponents, discriminant valuations).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as _iter_product

import numpy as np

from . import groups as gr
from .errors import DataMissingError, InputError, InvariantError

INTEGRALITY_TOL = 1e-8
MULTIQUADRATIC_MAX_PRIMES = 11
CLASS_GROUP_MAX_DISC = 10**7
UNIT_GROUP_MAX_ORDER = 2000

SHAPE_ONLY = "shape-only: implied absolute constant reported as 1"


# ---------------------------------------------------------------------------
# elementary number theory helpers


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def factorize(n: int) -> dict[int, int]:
    """Prime factorization of |n| by trial division."""
    n = abs(n)
    if n == 0:
        raise InputError("cannot factor 0")
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def is_squarefree(n: int) -> bool:
    return all(e == 1 for e in factorize(n).values())


def is_fundamental_discriminant(d: int) -> bool:
    if d == 1 or d == 0:
        return False
    if d % 4 == 1:
        return is_squarefree(d)
    if d % 4 == 0:
        q = d // 4
        return q % 4 in (2, 3) and is_squarefree(q)
    return False


def kronecker_symbol(a: int, n: int) -> int:
    """Kronecker symbol (a|n), defined for all integers."""
    if n == 0:
        return 1 if a in (1, -1) else 0
    result = 1
    if n < 0:
        n = -n
        if a < 0:
            result = -result
    while n % 2 == 0:
        n //= 2
        if a % 2 == 0:
            return 0
        if a % 8 in (3, 5):
            result = -result
    a %= n
    while a != 0:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def squarefree_integers(limit: int) -> list[int]:
    return [n for n in range(2, limit + 1) if is_squarefree(n)]


# ---------------------------------------------------------------------------
# ramified primes and extension specs


@dataclass(frozen=True)
class RamifiedPrime:
    """Ramification data at one rational prime.

    Either an inertia filtration (a weakly decreasing chain of subgroups of
    the full Galois group, given as element-index sets, starting at G_0) or
    a precomputed conductor-exponent table indexed by character.
    """

    prime: int
    filtration: tuple[frozenset[int], ...] | None = None
    exponents: tuple[Fraction, ...] | None = None
    approximate: bool = False

    def __post_init__(self):
        if not is_prime(self.prime):
            raise InputError(f"{self.prime} is not prime")
        if self.filtration is not None:
            if not self.filtration:
                raise InputError("filtration must contain at least G_0")
            for upper, lower in zip(self.filtration, self.filtration[1:]):
                if not lower <= upper:
                    raise InputError("filtration must be weakly decreasing")


def _check_filtration_subgroups(group: gr.FiniteGroup, ram: RamifiedPrime) -> None:
    backend = group.backend()
    for level in ram.filtration:
        members = sorted(level)
        if backend.identity not in level:
            raise InputError(f"filtration level at {ram.prime} misses the identity")
        for x in members:
            for y in members:
                if backend.mul(x, y) not in level:
                    raise InputError(
                        f"filtration level at {ram.prime} is not closed under the product"
                    )


@dataclass(frozen=True)
class ExtensionSpec:
    """A Galois extension L/K with L Galois over the rationals.

    group_plus models Gal(L/Q); embedding, when present, identifies
    G = Gal(L/K) inside it.  log_disc is log|disc(L/Q)| (exact unless
    disc_is_bound, then an upper bound).  disc_valuations stores exact
    p-adic valuations of the discriminant when known.
    """

    label: str
    params: tuple
    group_plus: gr.FiniteGroup
    ramified: tuple[RamifiedPrime, ...]
    log_disc: float
    degree_k: int = 1
    log_disc_k: float = 0.0
    embedding: gr.SubgroupEmbedding | None = None
    disc_valuations: dict[int, int] | None = None
    disc_is_bound: bool = False
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.log_disc < 0:
            raise InputError("log of the discriminant absolute value must be >= 0")
        if self.degree_k < 1:
            raise InputError("base-field degree must be >= 1")
        if self.embedding is not None and self.embedding.sup is not self.group_plus:
            raise InputError("embedding must target the stored full group")
        if self.embedding is None and self.degree_k != 1:
            raise InputError("relative specs need the subgroup embedding")
        for ram in self.ramified:
            if ram.filtration is not None:
                _check_filtration_subgroups(self.group_plus, ram)
            if ram.exponents is not None and len(ram.exponents) != self.group_plus.n_classes:
                raise InputError("exponent table must cover every irreducible character")
        self._check_conductor_discriminant()

    # -- invariant: conductor-discriminant at every stored prime with data

    def _check_conductor_discriminant(self) -> None:
        if self.disc_valuations is None or self.disc_is_bound:
            return
        degrees = self.group_plus.degrees
        for ram in self.ramified:
            if ram.filtration is None and ram.exponents is None:
                continue
            if ram.prime not in self.disc_valuations:
                raise InvariantError(
                    f"no stored discriminant valuation at {ram.prime}"
                )
            total = Fraction(0)
            for i in range(self.group_plus.n_classes):
                total += int(degrees[i]) * conductor_exponent(self, ram.prime, i)
            if total != self.disc_valuations[ram.prime]:
                raise InvariantError(
                    f"conductor-discriminant mismatch at {ram.prime}: "
                    f"{total} != {self.disc_valuations[ram.prime]}"
                )

    # -- views

    @property
    def degree_l(self) -> int:
        return self.group_plus.order

    @property
    def log_root_disc(self) -> float:
        return self.log_disc / self.degree_l

    def group(self) -> gr.FiniteGroup:
        """Gal(L/K): the embedded subgroup if relative, else the full group."""
        return self.embedding.sub if self.embedding is not None else self.group_plus

    def ramified_prime(self, p: int) -> RamifiedPrime:
        for ram in self.ramified:
            if ram.prime == p:
                return ram
        raise InputError(f"prime {p} is not stored as ramified in {self.label}")

    def ramified_primes(self) -> tuple[int, ...]:
        return tuple(ram.prime for ram in self.ramified)

    def induced_fourier(self, t: gr.ClassFunction) -> np.ndarray:
        """Fourier coefficients of t induced to the full group."""
        if self.embedding is not None:
            return self.embedding.induced_fourier(t)
        if t.group is not self.group_plus:
            raise InputError("class function lives on the wrong group")
        return gr.fourier_transform(t)

    def induce(self, t: gr.ClassFunction) -> gr.ClassFunction:
        if self.embedding is not None:
            return self.embedding.induce(t)
        if t.group is not self.group_plus:
            raise InputError("class function lives on the wrong group")
        return t


# ---------------------------------------------------------------------------
# conductor calculus


def conductor_exponent(spec: ExtensionSpec, prime: int, char_index: int) -> Fraction:
    """n(chi, p) from the stored filtration or exponent table.

    Filtration route: n = sum_i (1/|G_0|) sum_{a in G_i} (chi(1) - chi(a)),
    asserted integral.  Table route: returned as stored (may be a
    non-integral rational only for tables flagged approximate).
    """
    ram = spec.ramified_prime(prime)
    nc = spec.group_plus.n_classes
    if not 0 <= char_index < nc:
        raise InputError("character index out of range")
    if ram.exponents is not None:
        return ram.exponents[char_index]
    if ram.filtration is None:
        raise DataMissingError(
            f"{spec.label}: no filtration or exponent data at prime {prime}"
        )
    group = spec.group_plus
    class_of = group.backend().class_of
    row = group.char_table[char_index]
    degree = row[0]
    g0 = len(ram.filtration[0])
    total = 0.0 + 0.0j
    for level in ram.filtration:
        for a in level:
            total += degree - row[class_of[a]]
    value = total / g0
    if abs(value.imag) > INTEGRALITY_TOL or abs(value.real - round(value.real)) > INTEGRALITY_TOL:
        raise InvariantError(
            f"non-integral conductor exponent {value} at {prime} (inconsistent filtration)"
        )
    return Fraction(round(value.real))


def conductor_exponent_table(spec: ExtensionSpec) -> dict[int, list[Fraction]]:
    """Per-prime lists of n(chi, p), one entry per irreducible character."""
    out: dict[int, list[Fraction]] = {}
    for ram in spec.ramified:
        if ram.filtration is None and ram.exponents is None:
            continue
        out[ram.prime] = [
            conductor_exponent(spec, ram.prime, i)
            for i in range(spec.group_plus.n_classes)
        ]
    return out


def global_log_conductor(spec: ExtensionSpec, char_index: int) -> float:
    """log A(chi) = chi(1) log d_K + sum_p n(chi,p) log p."""
    group = spec.group_plus
    degree = int(group.degrees[char_index])
    total = degree * spec.log_disc_k
    for ram in spec.ramified:
        n = conductor_exponent(spec, ram.prime, char_index)
        total += float(n) * math.log(ram.prime)
    return total


def regular_character_exponent(spec: ExtensionSpec, prime: int) -> int:
    """n(chi_reg, p) computed from the filtration index formula.

    Equals (|G|/|G_0|) sum_i (|G_i| - 1); cross-checked against summing
    chi(1) n(chi,p) over the irreducible characters.
    """
    ram = spec.ramified_prime(prime)
    if ram.filtration is None:
        raise DataMissingError(f"no filtration stored at {prime}")
    g = spec.group_plus.order
    g0 = len(ram.filtration[0])
    direct = g // g0 * sum(len(level) - 1 for level in ram.filtration)
    by_chars = sum(
        int(spec.group_plus.degrees[i]) * conductor_exponent(spec, prime, i)
        for i in range(spec.group_plus.n_classes)
    )
    if direct != by_chars:
        raise InvariantError(
            f"regular-character exponent mismatch at {prime}: {direct} != {by_chars}"
        )
    return direct


@dataclass(frozen=True)
class ConductorBounds:
    lower: float
    upper: float
    lower_is_conditional: bool
    m_chi: float
    notes: tuple[str, ...] = ()


def conductor_bounds(spec: ExtensionSpec, char_index: int) -> ConductorBounds:
    """Two-sided bounds on log A(chi) from degree and sup-norm data.

    Coarse: max(1, [K:Q]/2) chi(1) <= log A <= 2 chi(1) [K:Q] log rd_L.
    Refined with M = max over nonidentity classes of |chi|/chi(1):
    (1 -/+ M) chi(1) [K:Q] log rd_L.  The coarse lower bound over the
    rationals is conditional on holomorphic continuation.
    """
    group = spec.group_plus
    if char_index == group.trivial_char_index:
        return ConductorBounds(0.0, 0.0, False, 1.0, ("trivial character: A = 1",))
    degree = int(group.degrees[char_index])
    row = np.abs(group.char_table[char_index])
    m_chi = float(row[1:].max() / degree) if group.n_classes > 1 else 0.0
    base = degree * spec.degree_k * spec.log_root_disc
    coarse_lower = max(1.0, spec.degree_k / 2) * degree
    notes: tuple[str, ...] = ()
    if spec.disc_is_bound:
        # log rd is only an upper bound, so bounds built from it are one-sided
        lower = coarse_lower
        upper = min(2.0, 1.0 + m_chi) * base
        notes = ("upper bound uses a discriminant upper bound",)
        conditional = spec.degree_k == 1
    else:
        lower = max(coarse_lower, (1.0 - m_chi) * base)
        upper = min(2.0, 1.0 + m_chi) * base
        conditional = spec.degree_k == 1 and coarse_lower >= (1.0 - m_chi) * base
    if conditional:
        notes = notes + ("lower bound conditional (AC)",)
    return ConductorBounds(lower, upper, conditional, m_chi, notes)


# ---------------------------------------------------------------------------
# family constructors


def radical_extension(a: int, p: int, relative: bool = False) -> ExtensionSpec:
    """Splitting field of x^p - a over the rationals, group the affine maps
    of the p-element field.

    Requires a, p distinct odd primes with a^(p-1) not 1 modulo p^2 (the
    non-Wieferich condition, which forces total ramification at p).  With
    relative=True the spec models the degree-p extension of the p-th
    cyclotomic field cut out by the translation subgroup.
    """
    for v in (a, p):
        if not is_prime(v) or v == 2:
            raise InputError(f"{v} must be an odd prime")
    if a == p:
        raise InputError("the radicand prime and the exponent prime must differ")
    if pow(a, p - 1, p * p) == 1:
        raise InputError(f"Wieferich condition fails: {a}^{p-1} = 1 mod {p}^2")
    embedding = None
    degree_k = 1
    log_disc_k = 0.0
    if relative:
        embedding = gr.embed_translations_in_affine(p)
        group = embedding.sup
        degree_k = p - 1
        log_disc_k = (p - 2) * math.log(p)  # cyclotomic field of the p-th roots
    else:
        group = gr.build_group("affine", p)
    backend = group.backend()
    unipotent = frozenset(backend.encode(1, d) for d in range(p))
    everything = frozenset(range(group.order))
    ram = (
        RamifiedPrime(p, filtration=(everything, unipotent)),
        RamifiedPrime(a, filtration=(unipotent,)),
    )
    log_disc = (p * p - 2) * math.log(p) + (p - 1) ** 2 * math.log(a)
    valuations = {p: p * p - 2, a: (p - 1) ** 2}
    return ExtensionSpec(
        label="radical", params=(a, p, relative), group_plus=group,
        ramified=ram, log_disc=log_disc, degree_k=degree_k, log_disc_k=log_disc_k,
        embedding=embedding, disc_valuations=valuations,
    )


def multiquadratic_extension(*primes: int) -> ExtensionSpec:
    """Field generated by the square roots of m distinct odd primes.

    Group: elementary abelian of rank m.  Odd conductor exponents are exact:
    n(chi, p_j) = (1 - chi(e_j))/2 where e_j generates inertia at p_j.  The
    2-adic valuation of the discriminant comes from the case split on the
    product of the primes modulo 4; the per-character split of that total is
    stored evenly over the nontrivial characters and flagged approximate.
    """
    if len(primes) == 1 and not isinstance(primes[0], int):
        primes = tuple(primes[0])
    primes = tuple(int(v) for v in primes)
    if not primes:
        raise InputError("at least one prime required")
    if len(primes) > MULTIQUADRATIC_MAX_PRIMES:
        raise InputError(
            f"at most {MULTIQUADRATIC_MAX_PRIMES} primes supported (character table size)"
        )
    if len(set(primes)) != len(primes):
        raise InputError("primes must be distinct")
    for v in primes:
        if not is_prime(v) or v == 2:
            raise InputError(f"{v} must be an odd prime")
    m = len(primes)
    group = gr.build_group("abelian", (2,) * m)
    backend = group.backend()
    order = group.order
    half = order // 2

    ram = []
    for j in range(m):
        e_j = backend.encode(tuple(1 if i == j else 0 for i in range(m)))
        col = group.char_table[:, e_j].real
        exps = tuple(Fraction(int(round((1 - v) / 2))) for v in col)
        ram.append(RamifiedPrime(primes[j], exponents=exps))
    valuations = {q: half for q in primes}

    product_mod4 = math.prod(primes) % 4
    v2 = order if product_mod4 == 3 else 0
    notes: tuple[str, ...] = ()
    if v2:
        share = Fraction(v2, order - 1)
        exps2 = tuple(
            Fraction(0) if i == group.trivial_char_index else share
            for i in range(group.n_classes)
        )
        ram.append(RamifiedPrime(2, exponents=exps2, approximate=True))
        valuations[2] = v2
        notes = ("2-adic conductor exponents split evenly over nontrivial characters",)
    log_disc = v2 * math.log(2) + half * sum(math.log(q) for q in primes)
    return ExtensionSpec(
        label="multiquadratic", params=primes, group_plus=group,
        ramified=tuple(ram), log_disc=log_disc, disc_valuations=valuations,
        notes=notes,
    )


def quadratic_extension(d: int) -> ExtensionSpec:
    """The quadratic field of fundamental discriminant d."""
    if not is_fundamental_discriminant(d):
        raise InputError(f"{d} is not a fundamental discriminant")
    group = gr.build_group("cyclic", 2)
    valuations = factorize(d)
    ram = tuple(
        RamifiedPrime(q, exponents=(Fraction(0), Fraction(e)))
        for q, e in sorted(valuations.items())
    )
    return ExtensionSpec(
        label="quadratic", params=(d,), group_plus=group,
        ramified=ram, log_disc=math.log(abs(d)), disc_valuations=dict(valuations),
    )


class _UnitGroupBackend:
    """Multiplicative group of residues coprime to q."""

    def __init__(self, q: int):
        self.q = q
        self.units = [u for u in range(1, q) if math.gcd(u, q) == 1]
        self.n = len(self.units)
        self._index = {u: i for i, u in enumerate(self.units)}
        self.identity = self._index[1]
        self.class_of = np.arange(self.n, dtype=np.int64)

    def index_of(self, residue: int) -> int:
        try:
            return self._index[residue % self.q]
        except KeyError:
            raise InputError(f"{residue} is not invertible modulo {self.q}") from None

    def mul(self, i: int, j: int) -> int:
        return self._index[self.units[i] * self.units[j] % self.q]

    def inv(self, i: int) -> int:
        return self._index[pow(self.units[i], -1, self.q)]


def _unit_group_generators(q: int) -> list[tuple[int, int]]:
    """(generator, order) pairs presenting the units modulo q as a product
    of cyclic groups, via the prime-power factorization of q."""
    gens: list[tuple[int, int]] = []
    for prime, e in sorted(factorize(q).items()):
        pe = prime**e
        rest = q // pe

        def crt_lift(u_mod_pe):
            if rest == 1:
                return u_mod_pe % q
            # x = u mod pe, x = 1 mod rest
            inv = pow(rest, -1, pe)
            return (1 + rest * ((u_mod_pe - 1) * inv % pe)) % q

        if prime == 2:
            if e == 2:
                gens.append((crt_lift(3), 2))  # -1 modulo 4
            elif e >= 3:
                gens.append((crt_lift(pe - 1), 2))
                gens.append((crt_lift(5), pe // 4))
        else:
            g = _primitive_root_prime_power(prime, e)
            gens.append((crt_lift(g), pe - pe // prime))
    return gens


def _primitive_root_prime_power(p: int, e: int) -> int:
    g = gr.smallest_primitive_root(p)
    if e == 1:
        return g
    # a primitive root mod p stays primitive mod p^e unless g^(p-1) = 1 mod p^2
    if pow(g, p - 1, p * p) == 1:
        g += p
    return g


def cyclotomic_extension(q: int) -> ExtensionSpec:
    """The field of q-th roots of unity; group the units modulo q.

    Character conductors are computed exactly as the smallest modulus
    through which each character factors; discriminant valuations follow by
    conductor-discriminant.
    """
    if q < 3:
        raise InputError("modulus must be at least 3")
    if q % 4 == 2:
        raise InputError(f"modulus {q} and {q // 2} give the same field; use {q // 2}")
    backend = _UnitGroupBackend(q)
    n = backend.n
    if n > UNIT_GROUP_MAX_ORDER:
        raise InputError(f"unit group of order {n} exceeds cap {UNIT_GROUP_MAX_ORDER}")
    gens = _unit_group_generators(q)
    orders = tuple(order for _gen, order in gens)
    if math.prod(orders) != n:
        raise InvariantError("unit group decomposition has the wrong order")

    # coordinates of each unit in the cyclic decomposition, by brute dlog
    coords = np.zeros((n, len(gens)), dtype=np.int64)
    reached = {1: (0,) * len(gens)}
    for tup in _iter_product(*(range(d) for d in orders)):
        val = 1
        for (g, _d), a in zip(gens, tup):
            val = val * pow(g, a, q) % q
        if val in reached and tup != reached[val]:
            raise InvariantError("unit group decomposition is not direct")
        reached[val] = tup
    if len(reached) != n:
        raise InvariantError("unit group decomposition does not cover all units")
    for i, u in enumerate(backend.units):
        coords[i] = reached[u]

    angles = coords / np.array(orders, dtype=np.float64)
    # character j has value exp(2 pi i <j, coords> / orders)
    char_rows = []
    for tup in _iter_product(*(range(d) for d in orders)):
        phase = angles @ np.array(tup, dtype=np.float64)
        char_rows.append(np.exp(2j * np.pi * phase))
    char_table = np.array(char_rows, dtype=np.complex128)

    members = [np.array([i], dtype=np.int64) for i in range(n)]
    names = [str(u) for u in backend.units]

    def power_map(c: int, k: int) -> int:
        return backend.index_of(pow(backend.units[c], k, q))

    group = gr.FiniteGroup(
        "unit-group", (q,), np.ones(n, dtype=np.int64), names, char_table,
        backend=backend, class_members=members, power_map_fn=power_map,
    )

    divisors = sorted(f for f in range(1, q + 1) if q % f == 0)
    conductors = []
    for i in range(n):
        row = group.char_table[i]
        for f in divisors:
            kernel_ok = all(
                abs(row[backend.index_of(u)] - 1.0) < 1e-9
                for u in backend.units
                if (u - 1) % f == 0
            )
            if kernel_ok:
                conductors.append(f)
                break
    valuations: dict[int, int] = {}
    exps: dict[int, list[Fraction]] = {p: [] for p in factorize(q)}
    for i in range(n):
        fac = factorize(conductors[i])
        for p in exps:
            exps[p].append(Fraction(fac.get(p, 0)))
    for p, lst in exps.items():
        valuations[p] = int(sum(lst))
    ram = tuple(
        RamifiedPrime(p, exponents=tuple(lst)) for p, lst in sorted(exps.items())
    )
    log_disc = sum(v * math.log(p) for p, v in valuations.items())
    spec = ExtensionSpec(
        label="cyclotomic", params=(q,), group_plus=group,
        ramified=ram, log_disc=log_disc, disc_valuations=valuations,
    )
    return spec


# ---------------------------------------------------------------------------
# imaginary quadratic class groups via reduced forms


def _form_identity(d: int) -> tuple[int, int, int]:
    if d % 4 == 0:
        return (1, 0, -d // 4)
    return (1, 1, (1 - d) // 4)


def _reduce_form(a: int, b: int, c: int) -> tuple[int, int, int]:
    d = b * b - 4 * a * c
    while not (-a < b <= a <= c):
        if b <= -a or b > a:
            twoa = 2 * a
            b = b % twoa
            if b > a:
                b -= twoa
            c = (b * b - d) // (4 * a)
        if c < a:
            a, b, c = c, -b, a
    if a == c and b < 0:
        b = -b
    return (a, b, c)


def reduced_forms(d: int) -> list[tuple[int, int, int]]:
    """Primitive reduced positive-definite forms of discriminant d < 0."""
    if d >= 0:
        raise InputError("negative discriminant required")
    forms = []
    a_max = math.isqrt(-d // 3)
    for a in range(1, a_max + 1):
        for b in range(-a + 1, a + 1):
            if (b - d) % 2:
                continue
            num = b * b - d
            if num % (4 * a):
                continue
            c = num // (4 * a)
            if c < a:
                continue
            if a == c and b < 0:
                continue
            if math.gcd(math.gcd(a, abs(b)), c) != 1:
                continue
            forms.append((a, b, c))
    return sorted(forms)


def compose_forms(f1: tuple[int, int, int], f2: tuple[int, int, int],
                  d: int) -> tuple[int, int, int]:
    """Gauss composition of primitive forms of the same discriminant."""
    a1, b1, _c1 = f1
    a2, b2, _c2 = f2
    s = (b1 + b2) // 2
    g = math.gcd(math.gcd(a1, a2), s)
    big_a = a1 * a2 // (g * g)
    m1, m2 = 2 * a1 // g, 2 * a2 // g
    gg = math.gcd(m1, m2)
    if (b2 - b1) % gg:
        raise InvariantError("incompatible congruences in form composition")
    n2 = m2 // gg
    if n2 == 1:
        b0 = b1
    else:
        t = (b2 - b1) // gg * pow(m1 // gg, -1, n2) % n2
        b0 = b1 + m1 * t
    step = m1 // gg * m2  # lcm(m1, m2)
    four_a = 4 * big_a
    b = None
    for k in range(2 * four_a // step + 2):
        cand = b0 + k * step
        if (cand * cand - d) % four_a == 0:
            b = cand
            break
    if b is None:
        raise InvariantError("form composition found no admissible middle coefficient")
    b %= 2 * big_a
    c = (b * b - d) // four_a
    return _reduce_form(big_a, b, c)


def _form_power(f, k: int, d: int, identity) -> tuple[int, int, int]:
    result = identity
    base = f
    while k > 0:
        if k & 1:
            result = compose_forms(result, base, d)
        base = compose_forms(base, base, d)
        k >>= 1
    return result


def class_group_imaginary(d: int) -> list[int]:
    """Invariant factors of the form class group for d < 0 fundamental."""
    if not is_fundamental_discriminant(d) or d > 0:
        raise InputError(f"{d} is not a negative fundamental discriminant")
    if -d > CLASS_GROUP_MAX_DISC:
        raise InputError(f"|d| exceeds {CLASS_GROUP_MAX_DISC}")
    forms = reduced_forms(d)
    h = len(forms)
    if h == 1:
        return []
    identity = _form_identity(d)
    prime_power_factors: dict[int, list[int]] = {}
    for p in factorize(h):
        torsion = [1]  # p^0 torsion count
        j = 1
        while True:
            count = sum(
                1 for f in forms if _form_power(f, p**j, d, identity) == identity
            )
            torsion.append(count)
            if count == torsion[-2]:
                break
            j += 1
        exponents = []
        for jj in range(1, len(torsion)):
            if torsion[jj] % torsion[jj - 1]:
                raise InvariantError("torsion counts must divide in the chain")
            ratio = torsion[jj] // torsion[jj - 1]
            s = 0
            while ratio % p == 0:
                ratio //= p
                s += 1
            if ratio != 1:
                raise InvariantError("torsion count ratios must be powers of p")
            exponents.append(s)
        # exponents[j-1] = number of cyclic p-factors of order >= p^j
        factors = []
        for jj in range(len(exponents)):
            exactly = exponents[jj] - (exponents[jj + 1] if jj + 1 < len(exponents) else 0)
            factors.extend([p ** (jj + 1)] * exactly)
        prime_power_factors[p] = sorted(factors, reverse=True)
    total = math.prod(v for lst in prime_power_factors.values() for v in lst)
    if total != h:
        raise InvariantError(f"class group structure product {total} != h = {h}")
    invariants = []
    while any(prime_power_factors.values()):
        value = 1
        for p in prime_power_factors:
            if prime_power_factors[p]:
                value *= prime_power_factors[p].pop(0)
        invariants.append(value)
    return sorted(invariants)


def hilbert_class_field(d: int, class_group_structure: list[int] | None = None
                        ) -> ExtensionSpec:
    """Hilbert class field of the quadratic field of discriminant d, as a
    Galois extension of the rationals with generalized dihedral group.

    The relative abelian extension over the quadratic field is exposed via
    the rotation-subgroup embedding.  Conductor exponents over the
    rationals are not tracked; the discriminant is exact: |d|^h.
    """
    if not is_fundamental_discriminant(d):
        raise InputError(f"{d} is not a fundamental discriminant")
    if class_group_structure is None:
        if d > 0:
            raise InputError("supply the class group structure for real fields")
        class_group_structure = class_group_imaginary(d)
    orders = tuple(int(v) for v in class_group_structure) or (1,)
    h = math.prod(orders)
    embedding = gr.embed_rotations_in_generalized_dihedral(orders)
    group = embedding.sup
    valuations = {p: h * e for p, e in factorize(d).items()}
    ram = tuple(RamifiedPrime(p) for p in sorted(valuations))
    return ExtensionSpec(
        label="hilbert", params=(d,), group_plus=group,
        ramified=ram, log_disc=h * math.log(abs(d)),
        degree_k=2, log_disc_k=math.log(abs(d)), embedding=embedding,
        disc_valuations=valuations,
        notes=("unramified over the quadratic field; conductors over Q untracked",),
    )


def dihedral_kluners(ell: int, d: int, p: int, q: int) -> ExtensionSpec:
    """Dihedral extension of prime degree ell with a discriminant BOUND.

    Requires d squarefree (not 1), p and q primes that are 1 modulo ell and
    split in the quadratic field of d.  Only the bound
    log|disc| <= ell log|delta_d| + 2(ell-1) log(pq) is stored; downstream
    variance statements are upper estimates only.
    """
    if not is_prime(ell) or ell < 7:
        raise InputError("the dihedral degree must be a prime at least 7")
    if d == 1 or d == 0 or not is_squarefree(d):
        raise InputError(f"{d} must be a squarefree integer other than 1")
    delta = d if d % 4 == 1 else 4 * d
    for v in (p, q):
        if not is_prime(v):
            raise InputError(f"{v} must be prime")
        if v % ell != 1:
            raise InputError(f"{v} must be 1 modulo {ell}")
        if kronecker_symbol(delta, v) != 1:
            raise InputError(f"{v} does not split in the quadratic field of {d}")
    if p == q:
        raise InputError("the two auxiliary primes must be distinct")
    embedding = gr.embed_cyclic_in_dihedral(ell)
    group = embedding.sup
    log_bound = ell * math.log(abs(delta)) + 2 * (ell - 1) * math.log(p * q)
    return ExtensionSpec(
        label="dihedral-kluners", params=(ell, d, p, q), group_plus=group,
        ramified=(), log_disc=log_bound, degree_k=2,
        log_disc_k=math.log(abs(delta)), embedding=embedding,
        disc_is_bound=True,
        notes=("discriminant is an upper bound; variance statements are upper estimates",),
    )


# ---------------------------------------------------------------------------
# least-prime and error bounds


@dataclass(frozen=True)
class LeastPrimeBounds:
    first: float | None
    lambda_based: float
    gplus_improved: float | None
    notes: tuple[str, ...]


def _squarefree_ells(limit: float) -> list[int]:
    return [ell for ell in range(2, int(limit) + 1) if is_squarefree(ell)]


def murty_least_prime_bound(spec: ExtensionSpec,
                            class_index: int | None = None,
                            t: gr.ClassFunction | None = None) -> LeastPrimeBounds:
    """The three least-prime bound shapes for a Frobenius class or a
    nonnegative class function, constants reported as 1."""
    group = spec.group()
    if (class_index is None) == (t is None):
        raise InputError("pass exactly one of class_index or t")
    log_dl = spec.log_disc
    if class_index is not None:
        if not 0 <= class_index < group.n_classes:
            raise InputError("class index out of range")
        t = gr.indicator(group, class_index)
    coeffs = gr.fourier_transform(t)
    t_hat_one = coeffs[group.trivial_char_index]
    if abs(t_hat_one.imag) > INTEGRALITY_TOL or t_hat_one.real <= 0:
        raise InputError("the trivial-character coefficient of t must be positive")
    t_hat_one = t_hat_one.real

    factor = spec.log_root_disc * spec.degree_k
    lam = gr.littlewood_norm(t)
    total = (lam / t_hat_one * factor) ** 2
    ell_cap = math.ceil(math.log(log_dl)) if log_dl > 1 else 0
    for ell in _squarefree_ells(ell_cap):
        lam_ell = gr.littlewood_norm(gr.power_compose(t, ell))
        total += (lam_ell / t_hat_one * factor) ** (2 * ell / (2 * ell - 1))

    first = None
    gplus = None
    if class_index is not None:
        size = int(group.class_sizes[class_index])
        first = log_dl**2 / size
        if spec.embedding is not None:
            sup_class = spec.embedding.induce_class(class_index)
            size_plus = int(spec.group_plus.class_sizes[sup_class])
        else:
            size_plus = size
        gplus = log_dl**2 / size_plus + log_dl ** (4 / 3) * group.order ** (2 / 3) / size ** (4 / 3)
    notes = (SHAPE_ONLY,) + (("discriminant input is an upper bound",) if spec.disc_is_bound else ())
    return LeastPrimeBounds(first, total, gplus, notes)


def chebotarev_error_bound(spec: ExtensionSpec, t: gr.ClassFunction, x: float) -> float:
    """Shape of the error bound for the Frobenius-counting discrepancy at x,
    constants set to 1."""
    if x < 2:
        raise InputError("x must be at least 2")
    group = spec.group()
    if t.group is not group:
        raise InputError("class function lives on the wrong group")
    t_plus = spec.induce(t)
    log_rd_x = spec.log_root_disc + math.log(x)
    log_x = math.log(x)
    total = gr.littlewood_norm(t_plus) * math.sqrt(x) * log_rd_x * log_x
    for ell in _squarefree_ells(2 * log_x):
        r_ell = gr.root_count(group, ell)
        inner = abs(gr.inner_product(t, r_ell))
        lam_ell = gr.littlewood_norm(gr.power_compose(t, ell))
        total += x ** (1 / ell) * inner
        total += x ** (1 / (2 * ell)) * spec.degree_k * lam_ell * log_rd_x * log_x
    return total


# ---------------------------------------------------------------------------
# serialization


_FAMILY_BUILDERS = {
    "radical": lambda params: radical_extension(int(params[0]), int(params[1]),
                                               relative=bool(int(params[2]))),
    "multiquadratic": lambda params: multiquadratic_extension(*map(int, params)),
    "quadratic": lambda params: quadratic_extension(int(params[0])),
    "cyclotomic": lambda params: cyclotomic_extension(int(params[0])),
    "hilbert": lambda params: hilbert_class_field(int(params[0])),
    "dihedral-kluners": lambda params: dihedral_kluners(*map(int, params)),
}


def build_family(label: str, params) -> ExtensionSpec:
    if label not in _FAMILY_BUILDERS:
        raise InputError(
            f"unknown family {label!r}; available: {', '.join(sorted(_FAMILY_BUILDERS))}"
        )
    return _FAMILY_BUILDERS[label](tuple(params))


def save_extension(spec: ExtensionSpec, path) -> None:
    lines = [f"family {spec.label}"]
    if spec.params:
        lines.append("params " + " ".join(str(int(v)) for v in spec.params))
    lines.append(f"logdisc {spec.log_disc!r}")
    for ram in spec.ramified:
        lines.append(f"prime {ram.prime}")
        if ram.filtration is not None:
            for i, level in enumerate(ram.filtration):
                lines.append(f"filtration {i} " + " ".join(map(str, sorted(level))))
        elif ram.exponents is not None:
            for i, n in enumerate(ram.exponents):
                lines.append(f"exponent {i} {n}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_extension(path) -> ExtensionSpec:
    """Rebuild a spec from its family tag and check the stored data matches."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header: dict[str, str] = {}
    for ln in lines:
        key, _, rest = ln.partition(" ")
        if key in {"family", "params", "logdisc"} and key not in header:
            header[key] = rest
    if "family" not in header:
        raise InputError(f"{path}: missing family tag")
    params = header.get("params", "").split()
    spec = build_family(header["family"], params)
    stored = float(header.get("logdisc", "nan"))
    if not math.isclose(stored, spec.log_disc, rel_tol=1e-12, abs_tol=1e-12):
        raise InputError(
            f"{path}: stored logdisc {stored} does not match rebuilt {spec.log_disc}"
        )
    _check_stored_blocks(spec, lines, path)
    return spec


def _check_stored_blocks(spec: ExtensionSpec, lines, path) -> None:
    current = None
    for ln in lines:
        key, _, rest = ln.partition(" ")
        if key == "prime":
            current = spec.ramified_prime(int(rest))
        elif key == "exponent":
            idx, value = rest.split()
            if conductor_exponent(spec, current.prime, int(idx)) != Fraction(value):
                raise InputError(f"{path}: exponent mismatch at prime {current.prime}")
        elif key == "filtration":
            parts = rest.split()
            level = frozenset(map(int, parts[1:]))
            if current.filtration is None or current.filtration[int(parts[0])] != level:
                raise InputError(f"{path}: filtration mismatch at prime {current.prime}")


def export_conductor_csv(spec: ExtensionSpec, path) -> None:
    """Per-character conductor table: degree, exponents by prime, log A."""
    table = conductor_exponent_table(spec)
    primes = sorted(table)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["character", "degree", *[f"n_at_{p}" for p in primes], "log_conductor"])
        for i in range(spec.group_plus.n_classes):
            row = [i, int(spec.group_plus.degrees[i])]
            row += [str(table[p][i]) for p in primes]
            row.append(f"{global_log_conductor(spec, i):.12g}")
            writer.writerow(row)
