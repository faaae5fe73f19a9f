"""Finite group models, character tables, class-function calculus, induction.

A group is represented at the level of conjugacy classes: class sizes plus the
full complex character table (rows are irreducible characters, columns are
classes, the identity class is column 0).  Structured kinds (abelian products,
generalized dihedral, affine over a prime field, symmetric) get analytic
tables; explicit multiplication-table groups get a numeric class-algebra
table.  Kinds with an element backend additionally support subgroup
embeddings and induced class functions.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass, field
from itertools import permutations as _itertools_permutations

import numpy as np

from . import partitions as pt
from .errors import InputError, InvariantError

ORTHOGONALITY_TOL = 1e-10
INTEGRALITY_TOL = 1e-8
EXPLICIT_ORDER_CAP = 2000
EXPLICIT_CLASS_CAP = 200
SYMMETRIC_BACKEND_CAP = 6


# ---------------------------------------------------------------------------
# element backends


class TableBackend:
    """Element operations from an explicit multiplication table."""

    def __init__(self, table: np.ndarray):
        table = np.asarray(table, dtype=np.int64)
        n = table.shape[0]
        if table.shape != (n, n):
            raise InputError("multiplication table must be square")
        if n > EXPLICIT_ORDER_CAP:
            raise InputError(f"explicit groups limited to order {EXPLICIT_ORDER_CAP}")
        if table.min() < 0 or table.max() >= n:
            raise InputError("multiplication table entries out of range")
        self.n = n
        self.table = table
        self.identity = self._find_identity()
        self._inv = self._find_inverses()
        self._check_associativity_sample()

    def _find_identity(self) -> int:
        for e in range(self.n):
            if np.array_equal(self.table[e], np.arange(self.n)) and np.array_equal(
                self.table[:, e], np.arange(self.n)
            ):
                return e
        raise InputError("multiplication table has no identity element")

    def _find_inverses(self) -> np.ndarray:
        inv = np.full(self.n, -1, dtype=np.int64)
        rows, cols = np.nonzero(self.table == self.identity)
        inv[rows] = cols
        if (inv < 0).any():
            raise InputError("multiplication table has an element without inverse")
        # Two-sided inverse check.
        if any(self.table[inv[i], i] != self.identity for i in range(self.n)):
            raise InputError("left and right inverses disagree")
        return inv

    def _check_associativity_sample(self, samples: int = 2000) -> None:
        # Full associativity is O(n^3); a seeded sample catches bad tables.
        rng = np.random.default_rng(0)
        m = min(samples, self.n**3)
        trip = rng.integers(0, self.n, size=(m, 3))
        t = self.table
        left = t[t[trip[:, 0], trip[:, 1]], trip[:, 2]]
        right = t[trip[:, 0], t[trip[:, 1], trip[:, 2]]]
        if not np.array_equal(left, right):
            raise InputError("multiplication table is not associative")

    def mul(self, i: int, j: int) -> int:
        return int(self.table[i, j])

    def inv(self, i: int) -> int:
        return int(self._inv[i])


class AbelianBackend:
    """Direct product of cyclic groups; element index is mixed-radix."""

    def __init__(self, orders: tuple[int, ...]):
        if not orders or any(d < 1 for d in orders):
            raise InputError(f"cyclic orders must be positive: {orders}")
        self.orders = tuple(int(d) for d in orders)
        self.n = math.prod(self.orders)
        self.identity = 0
        radix = []
        acc = 1
        for d in reversed(self.orders):
            radix.append(acc)
            acc *= d
        self._radix = tuple(reversed(radix))  # leading factor is most significant

    def decode(self, i: int) -> tuple[int, ...]:
        out = []
        for d, r in zip(self.orders, self._radix):
            out.append((i // r) % d)
        return tuple(out)

    def encode(self, tup) -> int:
        return sum((a % d) * r for a, d, r in zip(tup, self.orders, self._radix))

    def mul(self, i: int, j: int) -> int:
        return self.encode(a + b for a, b in zip(self.decode(i), self.decode(j)))

    def inv(self, i: int) -> int:
        return self.encode(-a for a in self.decode(i))


class GeneralizedDihedralBackend:
    """Abelian group A extended by the inverting involution; n = 2|A|.

    Element i < |A| is the rotation a_i; element |A| + i is the reflection
    coset representative tau * a_i with tau^2 = 1 and tau a tau = a^-1.
    """

    def __init__(self, orders: tuple[int, ...]):
        self.abelian = AbelianBackend(orders)
        self.n_rot = self.abelian.n
        self.n = 2 * self.n_rot
        self.identity = 0

    def mul(self, i: int, j: int) -> int:
        a, s = i % self.n_rot, i // self.n_rot
        b, t = j % self.n_rot, j // self.n_rot
        ab = self.abelian
        c = ab.mul(a, b) if s == 0 else ab.mul(a, ab.inv(b))
        return c + self.n_rot * ((s + t) % 2)

    def inv(self, i: int) -> int:
        a, s = i % self.n_rot, i // self.n_rot
        return self.abelian.inv(a) if s == 0 else i


class AffineBackend:
    """Maps x -> cx + d over the field with p elements; index = (c-1)*p + d."""

    def __init__(self, p: int):
        self.p = p
        self.n = p * (p - 1)
        self.identity = 0

    def decode(self, i: int) -> tuple[int, int]:
        return i // self.p + 1, i % self.p

    def encode(self, c: int, d: int) -> int:
        return (c - 1) * self.p + d

    def mul(self, i: int, j: int) -> int:
        c1, d1 = self.decode(i)
        c2, d2 = self.decode(j)
        return self.encode((c1 * c2) % self.p, (c1 * d2 + d1) % self.p)

    def inv(self, i: int) -> int:
        c, d = self.decode(i)
        cinv = pow(c, -1, self.p)
        return self.encode(cinv, (-cinv * d) % self.p)


class SymmetricBackend:
    """Permutations of range(n) in itertools order; index 0 is the identity."""

    def __init__(self, n: int):
        self.perms = tuple(_itertools_permutations(range(n)))
        self.n = len(self.perms)
        self.identity = 0
        self._index = {p: i for i, p in enumerate(self.perms)}
        self._n_letters = n

    def mul(self, i: int, j: int) -> int:
        p, q = self.perms[i], self.perms[j]
        return self._index[tuple(p[q[x]] for x in range(self._n_letters))]

    def inv(self, i: int) -> int:
        p = self.perms[i]
        out = [0] * self._n_letters
        for x, y in enumerate(p):
            out[y] = x
        return self._index[tuple(out)]

    def cycle_type(self, i: int) -> tuple[int, ...]:
        p = self.perms[i]
        seen = [False] * self._n_letters
        parts = []
        for x in range(self._n_letters):
            if seen[x]:
                continue
            length = 0
            y = x
            while not seen[y]:
                seen[y] = True
                y = p[y]
                length += 1
            parts.append(length)
        return tuple(sorted(parts, reverse=True))


def _element_power(backend, i: int, k: int) -> int:
    result = backend.identity
    base = i
    k = int(k)
    while k > 0:
        if k & 1:
            result = backend.mul(result, base)
        base = backend.mul(base, base)
        k >>= 1
    return result


# ---------------------------------------------------------------------------
# the group model


class FiniteGroup:
    """Conjugacy-class level model of a finite group.

    Attributes:
        kind, params: construction recipe.
        order: |G|.
        class_sizes: int array, identity class first.
        class_names: human-readable class labels.
        char_table: complex array, one row per irreducible character.
        degrees: integer character degrees (identity column).
        trivial_char_index: row index of the trivial character.
    """

    def __init__(self, kind, params, class_sizes, class_names, char_table,
                 backend=None, backend_factory=None, class_members=None,
                 power_map_fn=None):
        self.kind = kind
        self.params = params
        self.class_sizes = np.asarray(class_sizes, dtype=np.int64)
        self.class_names = tuple(class_names)
        self.char_table = np.asarray(char_table, dtype=np.complex128)
        self.order = int(self.class_sizes.sum())
        self.n_classes = len(self.class_sizes)
        self._backend = backend
        self._backend_factory = backend_factory
        self._backend_lock = threading.Lock()
        self.class_members = class_members  # element index lists, backend kinds only
        self._power_map_fn = power_map_fn
        self._power_maps: dict[int, np.ndarray] = {}
        self._validate()

    # -- validation

    def _validate(self) -> None:
        nc = self.n_classes
        if self.char_table.shape != (nc, nc):
            raise InvariantError(
                f"character table shape {self.char_table.shape} for {nc} classes"
            )
        if self.class_sizes[0] != 1:
            raise InvariantError("identity class must come first with size 1")
        degrees = self.char_table[:, 0]
        if np.abs(degrees.imag).max() > INTEGRALITY_TOL:
            raise InvariantError("character degrees must be real")
        rounded = np.round(degrees.real).astype(np.int64)
        if np.abs(degrees.real - rounded).max() > INTEGRALITY_TOL or (rounded <= 0).any():
            raise InvariantError("character degrees must be positive integers")
        self.degrees = rounded
        if int((rounded**2).sum()) != self.order:
            raise InvariantError("sum of squared degrees must equal the group order")
        self._check_orthogonality()
        trivial = np.nonzero(
            np.abs(self.char_table - 1.0).max(axis=1) < ORTHOGONALITY_TOL
        )[0]
        if len(trivial) != 1:
            raise InvariantError("expected exactly one trivial character")
        self.trivial_char_index = int(trivial[0])

    def _check_orthogonality(self) -> None:
        weights = self.class_sizes / self.order
        gram_rows = (self.char_table * weights) @ self.char_table.conj().T
        err_rows = np.abs(gram_rows - np.eye(self.n_classes)).max()
        # Column orthogonality: sum_chi chi(C) conj(chi(C')) = |G|/|C| delta.
        gram_cols = self.char_table.conj().T @ self.char_table
        expected = np.diag(self.order / self.class_sizes)
        err_cols = np.abs(gram_cols - expected).max()
        if max(err_rows, err_cols) > ORTHOGONALITY_TOL:
            raise InvariantError(
                f"character table fails orthogonality ({max(err_rows, err_cols):.2e})"
            )

    # -- element access

    def has_elements(self) -> bool:
        return self._backend is not None or self._backend_factory is not None

    def backend(self):
        """Element backend; built lazily for kinds that support it."""
        if self._backend is None:
            if self._backend_factory is None:
                raise InputError(f"group kind {self.kind}{self.params} has no element backend")
            with self._backend_lock:
                if self._backend is None:
                    self._backend, self.class_members = self._backend_factory()
        return self._backend

    def class_of_element(self, i: int) -> int:
        return int(self.backend().class_of[i])

    def class_representatives(self) -> np.ndarray:
        self.backend()
        return np.array([members[0] for members in self.class_members], dtype=np.int64)

    # -- class-level maps

    def power_class_map(self, k: int) -> np.ndarray:
        """Class index of g^k as a function of the class of g."""
        if k < 0:
            raise InputError("nonnegative power required")
        if k not in self._power_maps:
            if self._power_map_fn is not None:
                pm = np.array(
                    [self._power_map_fn(c, k) for c in range(self.n_classes)],
                    dtype=np.int64,
                )
            else:
                backend = self.backend()
                reps = self.class_representatives()
                pm = np.array(
                    [backend.class_of[_element_power(backend, int(r), k)] for r in reps],
                    dtype=np.int64,
                )
            self._power_maps[k] = pm
        return self._power_maps[k]

    def real_character_mask(self) -> np.ndarray:
        return np.abs(self.char_table.imag).max(axis=1) < ORTHOGONALITY_TOL

    def index_of_class(self, name: str) -> int:
        try:
            return self.class_names.index(name)
        except ValueError:
            raise InputError(
                f"unknown class {name!r}; available: {', '.join(self.class_names)}"
            ) from None

    def __repr__(self) -> str:
        return f"FiniteGroup({self.kind}{self.params}, order={self.order})"


# ---------------------------------------------------------------------------
# structured builders


def _orbit_classes(backend: TableBackend) -> tuple[np.ndarray, list[np.ndarray]]:
    """Conjugacy classes by orbit computation, identity class first."""
    n = backend.n
    class_of = np.full(n, -1, dtype=np.int64)
    members: list[np.ndarray] = []
    inv_all = backend._inv
    order = [backend.identity] + [i for i in range(n) if i != backend.identity]
    for x in order:
        if class_of[x] >= 0:
            continue
        conj = backend.table[backend.table[:, x], inv_all]  # g x g^-1 for all g
        orb = np.unique(conj)
        class_of[orb] = len(members)
        members.append(orb)
    backend.class_of = class_of
    return class_of, members


def _abelian_char_matrix(orders: tuple[int, ...]) -> np.ndarray:
    table = np.ones((1, 1), dtype=np.complex128)
    for d in orders:
        j, a = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
        w = np.exp(2j * np.pi * j * a / d)
        table = np.kron(table, w)
    return table


def _build_abelian(orders: tuple[int, ...]) -> FiniteGroup:
    backend = AbelianBackend(orders)
    n = backend.n
    if n > EXPLICIT_ORDER_CAP:
        raise InputError(f"abelian product of order {n} exceeds cap {EXPLICIT_ORDER_CAP}")
    backend.class_of = np.arange(n, dtype=np.int64)
    members = [np.array([i], dtype=np.int64) for i in range(n)]
    names = [".".join(map(str, backend.decode(i))) for i in range(n)]
    table = _abelian_char_matrix(backend.orders)
    return FiniteGroup(
        "abelian", backend.orders, np.ones(n, dtype=np.int64), names, table,
        backend=backend, class_members=members,
    )


def _build_generalized_dihedral(orders: tuple[int, ...], kind="generalized-dihedral",
                                params=None) -> FiniteGroup:
    backend = GeneralizedDihedralBackend(orders)
    ab = backend.abelian
    n_rot = backend.n_rot
    if backend.n > 2 * EXPLICIT_ORDER_CAP:
        raise InputError("generalized dihedral group too large")

    two_torsion = [a for a in range(n_rot) if ab.mul(a, a) == 0]
    doubles = sorted({ab.mul(a, a) for a in range(n_rot)})
    # Rotation classes {a, -a}; reflection classes are cosets of 2A.
    rot_classes: list[list[int]] = []
    seen = set()
    for a in range(n_rot):
        if a in seen:
            continue
        cls = sorted({a, ab.inv(a)})
        seen.update(cls)
        rot_classes.append(cls)
    refl_classes: list[list[int]] = []
    seen = set()
    for b in range(n_rot):
        if b in seen:
            continue
        coset = sorted(ab.mul(b, d) for d in doubles)
        seen.update(coset)
        refl_classes.append([n_rot + x for x in coset])

    members = [np.array(c, dtype=np.int64) for c in rot_classes + refl_classes]
    sizes = np.array([len(c) for c in members], dtype=np.int64)
    names = [f"r{c[0]}" for c in rot_classes] + [f"s{c[0] - n_rot}" for c in refl_classes]
    class_of = np.full(backend.n, -1, dtype=np.int64)
    for idx, memb in enumerate(members):
        class_of[memb] = idx
    backend.class_of = class_of

    lam = _abelian_char_matrix(ab.orders)  # characters of A
    real_chars = [j for j in two_torsion]  # dual 2-torsion has the same index set
    pair_reps = []
    seen = set()
    for j in range(n_rot):
        if j in seen or j in two_torsion:
            continue
        seen.update({j, ab.inv(j)})
        pair_reps.append(j)

    rows = []
    rot_reps = [c[0] for c in rot_classes]
    refl_reps = [c[0] - n_rot for c in refl_classes]
    for j in real_chars:
        on_rot = lam[j, rot_reps]
        on_refl = lam[j, refl_reps]
        rows.append(np.concatenate([on_rot, on_refl]))
        rows.append(np.concatenate([on_rot, -on_refl]))
    for j in pair_reps:
        on_rot = lam[j, rot_reps] + lam[ab.inv(j), rot_reps]
        rows.append(np.concatenate([on_rot, np.zeros(len(refl_reps))]))
    table = np.array(rows, dtype=np.complex128)
    return FiniteGroup(
        kind, params if params is not None else tuple(orders),
        sizes, names, table, backend=backend, class_members=members,
    )


def _build_dihedral(n: int) -> FiniteGroup:
    if n < 3:
        raise InputError("dihedral groups need n >= 3")
    return _build_generalized_dihedral((n,), kind="dihedral", params=(n,))


def smallest_primitive_root(p: int) -> int:
    """Smallest primitive root modulo an odd prime p."""
    factors = _prime_factors(p - 1)
    for g in range(2, p):
        if all(pow(g, (p - 1) // q, p) != 1 for q in factors):
            return g
    raise InvariantError(f"no primitive root found modulo {p}")


def _prime_factors(n: int) -> list[int]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def _build_affine(p: int) -> FiniteGroup:
    """Affine maps x -> cx + d over F_p, for odd prime p.

    Classes: identity, the translation class, and one class per scaling
    c != 1.  Characters: p - 1 linear characters lifted from the scaling
    quotient, plus one character of degree p - 1 supported on translations.
    """
    if not _is_prime(p) or p == 2:
        raise InputError("affine kind needs an odd prime")
    backend = AffineBackend(p)
    if backend.n > EXPLICIT_ORDER_CAP:
        raise InputError(f"affine group of order {backend.n} exceeds cap")
    # id, translations, then scalings ordered by c.
    members = [np.array([backend.encode(1, 0)], dtype=np.int64)]
    members.append(np.array([backend.encode(1, d) for d in range(1, p)], dtype=np.int64))
    for c in range(2, p):
        members.append(np.array([backend.encode(c, d) for d in range(p)], dtype=np.int64))
    class_of = np.full(backend.n, -1, dtype=np.int64)
    for idx, memb in enumerate(members):
        class_of[memb] = idx
    backend.class_of = class_of
    sizes = np.array([len(m) for m in members], dtype=np.int64)
    names = ["id", "unipotent"] + [f"t{c}" for c in range(2, p)]

    g = smallest_primitive_root(p)
    dlog = np.zeros(p, dtype=np.int64)
    acc = 1
    for a in range(p - 1):
        dlog[acc] = a
        acc = (acc * g) % p
    # Scaling value of each class: 1, 1, then c = 2..p-1.
    scale = np.array([1, 1] + list(range(2, p)), dtype=np.int64)
    omega = np.exp(2j * np.pi / (p - 1))
    rows = [omega ** (j * dlog[scale]) for j in range(p - 1)]
    rows.append(np.concatenate([[p - 1, -1], np.zeros(p - 2)]))
    table = np.array(rows, dtype=np.complex128)
    return FiniteGroup(
        "affine", (p,), sizes, names, table, backend=backend, class_members=members,
    )


def _build_symmetric(n: int) -> FiniteGroup:
    if not 1 <= n <= pt.MAX_TABLE_N:
        raise InputError(f"symmetric kind supported for 1 <= n <= {pt.MAX_TABLE_N}")
    parts = pt.partitions(n)
    index = {mu: i for i, mu in enumerate(parts)}
    sizes = np.array([pt.class_size(mu) for mu in parts], dtype=np.int64)
    table = pt.character_table(n).astype(np.complex128)
    names = [",".join(map(str, mu)) for mu in parts]

    def power_map(c: int, k: int) -> int:
        return index[pt.power_cycle_type(parts[c], k)]

    factory = None
    if n <= SYMMETRIC_BACKEND_CAP:
        def factory():
            backend = SymmetricBackend(n)
            class_of = np.array(
                [index[backend.cycle_type(i)] for i in range(backend.n)], dtype=np.int64
            )
            backend.class_of = class_of
            members = [
                np.nonzero(class_of == c)[0].astype(np.int64) for c in range(len(parts))
            ]
            return backend, members

    return FiniteGroup(
        "symmetric", (n,), sizes, names, table,
        backend_factory=factory, power_map_fn=power_map,
    )


# ---------------------------------------------------------------------------
# explicit tables: numeric character table from the class algebra


def _class_algebra_char_table(backend, members, sizes) -> np.ndarray:
    """Character table of an explicit group via class-algebra eigenvectors.

    The structure-constant matrices commute; the common eigenvectors are the
    scaled character rows omega_i = |C_i| chi(C_i) / chi(1).
    """
    nc = len(members)
    if nc > EXPLICIT_CLASS_CAP:
        raise InputError(
            f"explicit groups limited to {EXPLICIT_CLASS_CAP} classes; use a structured kind"
        )
    order = int(sizes.sum())
    class_of = backend.class_of
    const = np.zeros((nc, nc, nc), dtype=np.float64)
    for i in range(nc):
        for j in range(i, nc):
            prod = backend.table[np.ix_(members[i], members[j])].ravel()
            counts = np.bincount(class_of[prod], minlength=nc).astype(np.float64)
            counts /= sizes  # products land |C_k| c_ijk times in class k
            const[i, j] = counts
            const[j, i] = counts

    for attempt in range(8):
        rng = np.random.default_rng(attempt)
        weights = rng.standard_normal(nc)
        m = np.tensordot(weights, const, axes=([0], [0]))
        _, vecs = np.linalg.eig(m)
        try:
            return _recover_characters(vecs, sizes, order)
        except InvariantError:
            continue
    raise InvariantError("class-algebra eigenvector method failed to converge")


def _recover_characters(vecs, sizes, order) -> np.ndarray:
    nc = len(sizes)
    rows = []
    for col in range(nc):
        v = vecs[:, col]
        if abs(v[0]) < 1e-12:
            raise InvariantError("degenerate eigenvector")
        omega = v / v[0]
        degree_sq = order / np.sum(np.abs(omega) ** 2 / sizes)
        degree = math.sqrt(degree_sq.real)
        if abs(degree - round(degree)) > 1e-6 or round(degree) < 1:
            raise InvariantError("non-integer character degree")
        rows.append(np.round(degree) * omega / sizes)
    table = np.array(rows, dtype=np.complex128)
    # Symmetric orthogonalization polishes the eigenvector noise.
    weights = sizes / order
    gram = (table * weights) @ table.conj().T
    evals, evecs = np.linalg.eigh(gram)
    if evals.min() < 0.5:
        raise InvariantError("character rows nearly dependent")
    half_inv = (evecs * (evals**-0.5)) @ evecs.conj().T
    table = half_inv @ table
    order_key = sorted(
        range(nc),
        key=lambda r: (
            round(table[r, 0].real),
            tuple((round(x.real, 6), round(x.imag, 6)) for x in table[r]),
        ),
    )
    return table[order_key]


def _build_explicit(table) -> FiniteGroup:
    backend = TableBackend(table)
    class_of, members = _orbit_classes(backend)
    sizes = np.array([len(m) for m in members], dtype=np.int64)
    names = [f"c{m[0]}" for m in members]
    char_table = _class_algebra_char_table(backend, members, sizes)
    return FiniteGroup(
        "explicit", (backend.n,), sizes, names, char_table,
        backend=backend, class_members=members,
    )


# ---------------------------------------------------------------------------
# public construction API


def build_group(kind: str, params) -> FiniteGroup:
    """Construct a group model.

    Kinds: "explicit" (multiplication table), "abelian" (tuple of cyclic
    orders), "cyclic" (order), "dihedral" (rotation order n >= 3),
    "generalized-dihedral" (cyclic orders of the rotation subgroup),
    "affine" (odd prime p), "symmetric" (number of letters).
    """
    if kind == "explicit":
        return _build_explicit(params)
    if kind == "abelian":
        return _build_abelian(tuple(int(d) for d in params))
    if kind == "cyclic":
        return _build_abelian((int(params),))
    if kind == "dihedral":
        return _build_dihedral(int(params))
    if kind == "generalized-dihedral":
        return _build_generalized_dihedral(tuple(int(d) for d in params))
    if kind == "affine":
        return _build_affine(int(params))
    if kind == "symmetric":
        return _build_symmetric(int(params))
    raise InputError(f"unknown group kind {kind!r}")


def load_group(path) -> FiniteGroup:
    """Read a group description: `kind <name> <params...>`, then an optional
    multiplication table (one row of element indices per line)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines or not lines[0].startswith("kind "):
        raise InputError(f"{path}: expected a `kind` header line")
    head = lines[0].split()
    kind = head[1]
    args = head[2:]
    if kind == "explicit":
        n = int(args[0]) if args else len(lines) - 1
        rows = [list(map(int, ln.split())) for ln in lines[1:]]
        if len(rows) != n:
            raise InputError(f"{path}: expected {n} table rows, found {len(rows)}")
        return build_group("explicit", rows)
    if kind in {"cyclic", "dihedral", "affine", "symmetric"}:
        if len(args) != 1:
            raise InputError(f"{path}: kind {kind} takes one parameter")
        return build_group(kind, int(args[0]))
    if kind in {"abelian", "generalized-dihedral"}:
        return build_group(kind, tuple(int(a) for a in args))
    raise InputError(f"{path}: unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# class functions


@dataclass(frozen=True, eq=False)
class ClassFunction:
    """Complex-valued function on the conjugacy classes of a group."""

    group: FiniteGroup
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != (self.group.n_classes,):
            raise InputError(
                f"expected {self.group.n_classes} class values, got {vals.shape}"
            )
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def is_real(self, tol: float = INTEGRALITY_TOL) -> bool:
        return bool(np.abs(self.values.imag).max() <= tol)

    def __add__(self, other: "ClassFunction") -> "ClassFunction":
        self._check_same_group(other)
        return ClassFunction(self.group, self.values + other.values)

    def __sub__(self, other: "ClassFunction") -> "ClassFunction":
        self._check_same_group(other)
        return ClassFunction(self.group, self.values - other.values)

    def __mul__(self, scalar) -> "ClassFunction":
        return ClassFunction(self.group, self.values * scalar)

    __rmul__ = __mul__

    def _check_same_group(self, other: "ClassFunction") -> None:
        if other.group is not self.group:
            raise InputError("class functions live on different groups")


def indicator(group: FiniteGroup, class_index: int) -> ClassFunction:
    values = np.zeros(group.n_classes)
    values[class_index] = 1.0
    return ClassFunction(group, values)


def fourier_transform(t: ClassFunction) -> np.ndarray:
    """t_hat(chi) = (1/|G|) sum_g chi(g) conj(t(g)), one entry per character."""
    g = t.group
    weights = g.class_sizes / g.order
    return (g.char_table * weights) @ np.conj(t.values)


def inverse_fourier(group: FiniteGroup, coefficients) -> ClassFunction:
    """Rebuild t = sum_chi conj(t_hat(chi)) chi from Fourier coefficients."""
    coefficients = np.asarray(coefficients, dtype=np.complex128)
    if coefficients.shape != (group.n_classes,):
        raise InputError("one coefficient per irreducible character required")
    values = np.conj(coefficients) @ group.char_table
    return ClassFunction(group, values)


def inner_product(t1: ClassFunction, t2: ClassFunction) -> complex:
    """<t1, t2> = (1/|G|) sum_g t1(g) conj(t2(g))."""
    t1._check_same_group(t2)
    g = t1.group
    return complex(np.sum(g.class_sizes * t1.values * np.conj(t2.values)) / g.order)


def norm_one(t: ClassFunction) -> float:
    g = t.group
    return float(np.sum(g.class_sizes * np.abs(t.values)) / g.order)


def norm_two(t: ClassFunction) -> float:
    return math.sqrt(max(inner_product(t, t).real, 0.0))


def sup_norm(t: ClassFunction) -> float:
    return float(np.abs(t.values).max())


def littlewood_norm(t: ClassFunction) -> float:
    """lambda(t) = sum_chi chi(1) |t_hat(chi)|."""
    return float(np.sum(t.group.degrees * np.abs(fourier_transform(t))))


def power_compose(t: ClassFunction, k: int) -> ClassFunction:
    """The class function g -> t(g^k)."""
    pm = t.group.power_class_map(k)
    return ClassFunction(t.group, t.values[pm])


def epsilon_power(group: FiniteGroup, k: int) -> np.ndarray:
    """epsilon_k(chi) = (1/|G|) sum_g chi(g^k), one entry per character."""
    pm = group.power_class_map(k)
    weights = group.class_sizes / group.order
    return group.char_table[:, pm] @ weights


def frobenius_schur(group: FiniteGroup) -> np.ndarray:
    """Integer epsilon_2 per character; each must land in {-1, 0, 1}."""
    eps = epsilon_power(group, 2)
    if np.abs(eps.imag).max() > INTEGRALITY_TOL:
        raise InvariantError("epsilon_2 must be real")
    rounded = np.round(eps.real).astype(np.int64)
    if np.abs(eps.real - rounded).max() > INTEGRALITY_TOL:
        raise InvariantError("epsilon_2 must be integral")
    if not np.isin(rounded, (-1, 0, 1)).all():
        raise InvariantError("epsilon_2 out of {-1, 0, 1}")
    real_mask = group.real_character_mask()
    if not np.array_equal(rounded != 0, real_mask):
        raise InvariantError("epsilon_2 support must match the real characters")
    return rounded


def fs_classify(group: FiniteGroup) -> tuple[str, ...]:
    """Symmetry type per character: orthogonal / symplectic / unitary."""
    names = {1: "orthogonal", -1: "symplectic", 0: "unitary"}
    return tuple(names[int(e)] for e in frobenius_schur(group))


def root_count(group: FiniteGroup, k: int = 2) -> ClassFunction:
    """r_k(h) = #{g : g^k = h} = sum_chi conj(epsilon_k(chi)) chi(h)."""
    eps = epsilon_power(group, k)
    r = inverse_fourier(group, eps)
    vals = r.values
    if np.abs(vals.imag).max() > INTEGRALITY_TOL:
        raise InvariantError("root counts must be real")
    rounded = np.round(vals.real)
    if np.abs(vals.real - rounded).max() > INTEGRALITY_TOL or (rounded < 0).any():
        raise InvariantError("root counts must be nonnegative integers")
    if int(np.sum(group.class_sizes * rounded)) != group.order:
        raise InvariantError("root counts must sum to |G| with class weights")
    return ClassFunction(group, rounded)


def race_function(group: FiniteGroup, class_one: int, class_two: int | None = None
                  ) -> ClassFunction:
    """t = |G|/|C1| 1_{C1} - |G|/|C2| 1_{C2}; class_two=None drops the second term."""
    nc = group.n_classes
    if not 0 <= class_one < nc:
        raise InputError(f"class index {class_one} out of range")
    values = np.zeros(nc)
    values[class_one] += group.order / group.class_sizes[class_one]
    if class_two is not None:
        if not 0 <= class_two < nc:
            raise InputError(f"class index {class_two} out of range")
        if class_two == class_one:
            raise InputError("race requires two distinct classes")
        values[class_two] -= group.order / group.class_sizes[class_two]
    return ClassFunction(group, values)


def one_minus_root_count(group: FiniteGroup) -> ClassFunction:
    """The race function 1 - r_2 (identically zero for odd group order)."""
    r = root_count(group, 2)
    return ClassFunction(group, 1.0 - r.values)


# ---------------------------------------------------------------------------
# subgroup embeddings and induction


class SubgroupEmbedding:
    """Injective homomorphism between element-backed groups with coset data.

    Supplies induced class functions, the induced Fourier transform via
    Frobenius reciprocity, and class induction.
    """

    def __init__(self, sub: FiniteGroup, sup: FiniteGroup, injection):
        self.sub = sub
        self.sup = sup
        sub_b = sub.backend()
        sup_b = sup.backend()
        inj = np.asarray(injection, dtype=np.int64)
        if inj.shape != (sub.order,):
            raise InputError("injection must list an image for every subgroup element")
        if len(set(inj.tolist())) != sub.order:
            raise InputError("injection is not injective")
        if inj[sub_b.identity] != sup_b.identity:
            raise InputError("injection must send identity to identity")
        for i in range(sub.order):
            for j in range(sub.order):
                if inj[sub_b.mul(i, j)] != sup_b.mul(int(inj[i]), int(inj[j])):
                    raise InputError("injection is not a homomorphism")
        self.injection = inj
        if sup.order % sub.order:
            raise InvariantError("subgroup order must divide the group order")
        self.index = sup.order // sub.order

        preimage = np.full(sup.order, -1, dtype=np.int64)
        preimage[inj] = np.arange(sub.order)
        self.preimage = preimage

        covered = np.zeros(sup.order, dtype=bool)
        reps = []
        for x in range(sup.order):
            if covered[x]:
                continue
            reps.append(x)
            for h in range(sub.order):
                covered[sup_b.mul(x, int(inj[h]))] = True
        if len(reps) != self.index:
            raise InvariantError("left coset enumeration failed")
        self.coset_reps = np.array(reps, dtype=np.int64)

        # Class image: all elements of a subgroup class must land in a single
        # class upstairs, and conjugation data must agree with it.
        sub.backend()
        image = np.full(sub.n_classes, -1, dtype=np.int64)
        for c, memb in enumerate(sub.class_members):
            targets = {int(sup_b.class_of[inj[m]]) for m in memb}
            if len(targets) != 1:
                raise InvariantError(
                    f"subgroup class {c} does not map into a single class"
                )
            image[c] = targets.pop()
        self.class_image = image

    def induce_class(self, class_index: int) -> int:
        """Index of the class upstairs generated by a subgroup class."""
        if not 0 <= class_index < self.sub.n_classes:
            raise InputError("class index out of range")
        return int(self.class_image[class_index])

    def restrict_character(self, char_index: int) -> ClassFunction:
        row = self.sup.char_table[char_index, self.class_image]
        return ClassFunction(self.sub, row)

    def induce(self, t: ClassFunction) -> ClassFunction:
        """Induced class function by the coset-sum formula.

        t_plus(g) = sum over cosets aG with a^-1 g a in G of t(a^-1 g a).
        """
        if t.group is not self.sub:
            raise InputError("class function lives on the wrong group")
        sup_b = self.sup.backend()
        reps = self.sup.class_representatives()
        values = np.zeros(self.sup.n_classes, dtype=np.complex128)
        for d, g in enumerate(reps):
            total = 0.0 + 0.0j
            for a in self.coset_reps:
                x = sup_b.mul(sup_b.mul(sup_b.inv(int(a)), int(g)), int(a))
                h = self.preimage[x]
                if h >= 0:
                    total += t.values[self.sub.backend().class_of[h]]
            values[d] = total
        return ClassFunction(self.sup, values)

    def induced_fourier(self, t: ClassFunction) -> np.ndarray:
        """Fourier coefficients of the induced function via reciprocity.

        t_plus_hat(chi) = <chi restricted to the subgroup, t>.
        """
        if t.group is not self.sub:
            raise InputError("class function lives on the wrong group")
        weights = self.sub.class_sizes / self.sub.order
        restricted = self.sup.char_table[:, self.class_image]
        return (restricted * weights) @ np.conj(t.values)


def embed_cyclic_in_dihedral(n: int) -> SubgroupEmbedding:
    """Rotation subgroup of the dihedral group of order 2n."""
    sub = build_group("cyclic", n)
    sup = build_group("dihedral", n)
    return SubgroupEmbedding(sub, sup, np.arange(n))


def embed_translations_in_affine(p: int) -> SubgroupEmbedding:
    """Translation (unipotent) subgroup x -> x + d inside the affine group."""
    sub = build_group("cyclic", p)
    sup = build_group("affine", p)
    injection = [sup.backend().encode(1, d) for d in range(p)]
    return SubgroupEmbedding(sub, sup, injection)


def embed_rotations_in_generalized_dihedral(orders: tuple[int, ...]) -> SubgroupEmbedding:
    sub = build_group("abelian", tuple(orders))
    sup = build_group("generalized-dihedral", tuple(orders))
    return SubgroupEmbedding(sub, sup, np.arange(sub.order))


# ---------------------------------------------------------------------------
# export


def export_character_csv(group: FiniteGroup, path) -> None:
    """One row per irreducible: degree, symmetry type, then values by class."""
    fs = fs_classify(group)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["degree", "frobenius_schur", *group.class_names])
        for i in range(group.n_classes):
            row = [int(group.degrees[i]), fs[i]]
            for v in group.char_table[i]:
                re, im = float(v.real), float(v.imag)
                sign = "+" if im >= 0 else "-"
                row.append(f"{re!r}{sign}{abs(im)!r}j")
            writer.writerow(row)
