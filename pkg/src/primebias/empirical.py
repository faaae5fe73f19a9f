"""Desk-scale empirical race measurements.

Sieves primes, attaches Frobenius classes for the supported families
(cyclotomic, quadratic, multiquadratic, radical), accumulates race
counting functions and their normalized fluctuation E, estimates
logarithmic sign densities, checks the truncated explicit formula
against sieve truth, and searches for least primes per class.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import groups as gr
from . import zerodata as zd
from .errors import DataMissingError, InputError, InvariantError
from .families import ExtensionSpec, factorize

# Segmented sieve: one block holds 2^22 odd candidates (a span of 2^23).
SIEVE_ODD_BLOCK = 1 << 22
X_MAX_LIMIT = 10**9
DEFAULT_CHECKPOINTS = 1000
CHECKPOINT_MIN_X = 10**3
LI_RTOL = 1e-12


# ---------------------------------------------------------------------------
# segmented prime sieve


def _dense_primes(limit: int) -> np.ndarray:
    if limit < 2:
        return np.empty(0, dtype=np.int64)
    sieve = np.ones(limit + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(math.isqrt(limit)) + 1):
        if sieve[p]:
            sieve[p * p::p] = False
    return np.flatnonzero(sieve).astype(np.int64)


def _sieve_block(base_odd: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Primes in [lo, hi) with lo odd, as int64; odd candidates only."""
    count = (hi - lo + 1) // 2
    mask = np.ones(count, dtype=bool)
    for p in base_odd:
        p = int(p)
        start = max(p * p, ((lo + p - 1) // p) * p)
        if start % 2 == 0:
            start += p
        if start >= hi:
            continue
        mask[(start - lo) // 2::p] = False
    return lo + 2 * np.flatnonzero(mask).astype(np.int64)


def iter_prime_blocks(x_max: int, workers: int = 1):
    """Yield ascending numpy arrays of primes covering [2, x_max].

    Blocks are sieved independently (optionally in a thread pool) and
    yielded in order, so any worker count gives the same stream.
    """
    if x_max < 2:
        return
    if x_max > X_MAX_LIMIT:
        raise InputError(f"x_max {x_max} exceeds the supported {X_MAX_LIMIT}")
    base = _dense_primes(int(math.isqrt(x_max)))
    base_odd = base[base > 2]
    span = 2 * SIEVE_ODD_BLOCK
    ranges = []
    lo = 3
    while lo <= x_max:
        hi = min(lo + span, x_max + 1)
        ranges.append((lo, hi))
        lo = hi + (1 - hi % 2)  # next odd start
    if not ranges:
        yield np.array([2], dtype=np.int64)
        return
    first = True
    if workers <= 1:
        blocks = (_sieve_block(base_odd, a, b) for a, b in ranges)
        for block in blocks:
            if first:
                yield np.concatenate([np.array([2], dtype=np.int64), block])
                first = False
            else:
                yield block
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for block in pool.map(lambda ab: _sieve_block(base_odd, *ab), ranges):
                if first:
                    yield np.concatenate([np.array([2], dtype=np.int64), block])
                    first = False
                else:
                    yield block


def prime_count(x_max: int) -> int:
    return sum(int(b.size) for b in iter_prime_blocks(int(x_max)))


# ---------------------------------------------------------------------------
# per-family Frobenius classification


def _legendre_table(q: int) -> np.ndarray:
    """table[r] = Legendre symbol (r|q) for odd prime q, as -1/0/+1."""
    table = -np.ones(q, dtype=np.int8)
    table[0] = 0
    table[(np.arange(1, (q + 1) // 2) ** 2) % q] = 1
    return table


def _classify_cyclotomic(spec, primes):
    q = int(spec.params[0])
    group = spec.group()
    lookup = -np.ones(q, dtype=np.int64)
    for idx, name in enumerate(group.class_names):
        lookup[int(name) % q] = idx
    res = (primes % q).astype(np.int64)
    cls = lookup[res]
    ram = cls < 0
    return cls, ram


def _classify_multiquadratic(spec, primes):
    ps = tuple(int(p) for p in spec.params)
    group = spec.group()
    name_to_idx = {name: i for i, name in enumerate(group.class_names)}
    bits = []
    ram = np.zeros(primes.size, dtype=bool)
    # 2 ramifies as soon as one quadratic subfield has even discriminant
    if any(q % 4 == 3 for q in ps):
        ram |= primes == 2
    for q in ps:
        table = _legendre_table(q)
        sym = table[primes % q]
        ram |= sym == 0
        bits.append((sym < 0).astype(np.int64))
    # component j is 1 exactly when p is a nonresidue mod p_j
    weights = np.array([name_to_idx[".".join(
        "1" if k == j else "0" for k in range(len(ps)))]
        for j in range(len(ps))], dtype=np.int64)
    # abelian (Z/2)^m indices add componentwise; generator j sits at weights[j]
    cls = np.zeros(primes.size, dtype=np.int64)
    for j, b in enumerate(bits):
        cls += b * weights[j]
    return cls, ram


def _classify_quadratic(spec, primes):
    d = int(spec.params[0])
    group = spec.group()
    split = group.class_names.index("0")
    inert = group.class_names.index("1")
    ram = np.zeros(primes.size, dtype=bool)
    # Kronecker (d|p) for fundamental d: odd-prime Legendre factors flipped
    # by reciprocity, the sign from p mod 4, any odd power of 2 from p mod 8.
    sym = np.ones(primes.size, dtype=np.int64)
    if d < 0:
        sym *= np.where(primes % 4 == 1, 1, -1)
    for q, e in factorize(abs(d)).items():
        if q == 2:
            ram |= primes == 2
            if e % 2:
                sym *= np.where((primes % 8 == 1) | (primes % 8 == 7), 1, -1)
            continue
        pq = _legendre_table(q)[primes % q].astype(np.int64)
        if q % 4 == 3:
            pq *= np.where(primes % 4 == 1, 1, -1)
        sym *= pq
        ram |= (primes % q) == 0
    cls = np.where(sym > 0, split, inert).astype(np.int64)
    return cls, ram


def _classify_radical(spec, primes):
    a, p = int(spec.params[0]), int(spec.params[1])
    group = spec.group()
    id_idx = group.class_names.index("id")
    u_idx = group.class_names.index("unipotent")
    lookup = np.full(p, id_idx, dtype=np.int64)
    for c in range(2, p):
        lookup[c] = group.class_names.index(f"t{c}")
    res = (primes % p).astype(np.int64)
    ram = (res == 0) | (primes == a)
    cls = np.zeros(primes.size, dtype=np.int64)
    general = ~ram & (res != 1)
    cls[general] = lookup[res[general]]
    # ell = 1 mod p splits by whether a is a p-th power residue mod ell
    split_idx = np.flatnonzero(~ram & (res == 1))
    for i in split_idx.tolist():
        ell = int(primes[i])
        cls[i] = id_idx if pow(a, (ell - 1) // p, ell) == 1 else u_idx
    return cls, ram


_CLASSIFIERS = {
    "cyclotomic": _classify_cyclotomic,
    "multiquadratic": _classify_multiquadratic,
    "quadratic": _classify_quadratic,
    "radical": _classify_radical,
}


@dataclass(frozen=True)
class Classification:
    """Per-prime Frobenius classes for one family, primes ascending."""

    spec: ExtensionSpec
    x_max: int
    primes: np.ndarray
    classes: np.ndarray
    ramified: tuple[int, ...]

    def __post_init__(self):
        for name in ("primes", "classes"):
            arr = np.asarray(getattr(self, name))
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.primes.size != self.classes.size:
            raise InputError("primes and classes must align")

    @property
    def group(self) -> gr.FiniteGroup:
        return self.spec.group()

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.classes, minlength=self.group.n_classes)


def sieve_classify(spec: ExtensionSpec, x_max: int,
                   workers: int = 1) -> Classification:
    """Sieve primes up to x_max and attach a Frobenius class to each.

    Ramified primes are excluded from the per-class stream and reported
    separately; classification rules follow the family's splitting law.
    """
    family = spec.label
    if family not in _CLASSIFIERS:
        raise InputError(
            f"unsupported family {family!r}; sieve classification covers "
            + ", ".join(sorted(_CLASSIFIERS)))
    if spec.embedding is not None:
        raise InputError(
            "relative specs are not supported; classify the absolute "
            "extension and restrict the race function")
    x_max = int(x_max)
    if x_max > X_MAX_LIMIT:
        raise InputError(f"x_max {x_max} exceeds the supported {X_MAX_LIMIT}")
    classify = _CLASSIFIERS[family]
    kept_p, kept_c, ramified = [], [], []
    for block in iter_prime_blocks(x_max, workers=workers):
        cls, ram = classify(spec, block)
        if ram.any():
            ramified.extend(int(v) for v in block[ram])
            block, cls = block[~ram], cls[~ram]
        kept_p.append(block)
        kept_c.append(cls)
    primes = np.concatenate(kept_p) if kept_p else np.empty(0, dtype=np.int64)
    classes = np.concatenate(kept_c) if kept_c else np.empty(0, dtype=np.int64)
    return Classification(spec=spec, x_max=x_max, primes=primes,
                          classes=classes, ramified=tuple(sorted(ramified)))


# ---------------------------------------------------------------------------
# race series and E


def logarithmic_integral(x) -> np.ndarray:
    """Li(x) = int_2^x dt/log t by adaptive quadrature, elementwise."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    order = np.argsort(arr)
    out = np.empty_like(arr)
    total = 0.0
    prev = 2.0
    for i in order:
        xi = float(arr[i])
        if xi <= 2.0:
            out[i] = 0.0
            continue
        piece, _ = quad(lambda s: 1.0 / math.log(s), prev, xi,
                        epsrel=LI_RTOL, epsabs=0.0, limit=200)
        total += piece
        prev = xi
        out[i] = total
    return out if np.ndim(x) else float(out[0])


def default_checkpoints(x_max: int, count: int = DEFAULT_CHECKPOINTS
                        ) -> np.ndarray:
    """count log-uniform checkpoints from 10^3 up to x_max."""
    if x_max <= CHECKPOINT_MIN_X:
        raise InputError(f"x_max must exceed {CHECKPOINT_MIN_X}")
    return np.geomspace(CHECKPOINT_MIN_X, x_max, count)


@dataclass(frozen=True)
class RaceSeries:
    """Race counts and normalized fluctuation E along checkpoints.

    counts[k, j] = number of unramified primes <= checkpoints[j] in class
    k; E(y) = y e^{-beta y} (sum_k t(k) counts[k] - that(1) Li(e^y)) at
    y = log checkpoint.
    """

    family_label: str
    class_names: tuple[str, ...]
    t_values: np.ndarray
    checkpoints: np.ndarray
    counts: np.ndarray
    pi_values: np.ndarray
    E_values: np.ndarray
    beta: float
    ramified: tuple[int, ...]

    def __post_init__(self):
        for name in ("t_values", "checkpoints", "counts", "pi_values",
                     "E_values"):
            arr = np.asarray(getattr(self, name))
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.counts.shape != (len(self.class_names), self.checkpoints.size):
            raise InputError("counts must be classes x checkpoints")
        if (np.diff(self.counts, axis=1) < 0).any():
            raise InvariantError("class counts must be nondecreasing in x")
        ram = np.asarray(self.ramified, dtype=float)
        ram_below = np.searchsorted(np.sort(ram), self.checkpoints,
                                    side="right") if ram.size else 0
        expected = self.pi_values - ram_below
        if not np.array_equal(self.counts.sum(axis=0), expected):
            raise InvariantError(
                "class counts must sum to pi(x) minus ramified primes")

    @property
    def y_values(self) -> np.ndarray:
        return np.log(self.checkpoints)


def race_series(classification: Classification, t: gr.ClassFunction,
                checkpoints=None, beta: float = 0.5) -> RaceSeries:
    """Accumulate per-class counts and E(y) along the checkpoints."""
    group = classification.group
    if t.group is not group and t.group.class_names != group.class_names:
        raise InputError("race function lives on the wrong group")
    if checkpoints is None:
        checkpoints = default_checkpoints(classification.x_max)
    cps = np.asarray(checkpoints, dtype=float)
    if cps.size < 2 or (np.diff(cps) <= 0).any():
        raise InputError("checkpoints must be sorted and at least 2")
    if cps[-1] > classification.x_max * (1 + 1e-12):
        raise InputError("checkpoints exceed the classified range")

    n_classes = group.n_classes
    # bucket j collects primes with checkpoint[j-1] < p <= checkpoint[j]
    pos = np.searchsorted(cps, classification.primes.astype(float),
                          side="left")
    inside = pos < cps.size
    flat = pos[inside] * n_classes + classification.classes[inside]
    hist = np.bincount(flat, minlength=cps.size * n_classes)
    counts = hist.reshape(cps.size, n_classes).T.cumsum(axis=1)

    pi_all = np.searchsorted(classification.primes.astype(float), cps,
                             side="right")
    ram = np.array(classification.ramified, dtype=float)
    pi_values = pi_all + (np.searchsorted(np.sort(ram), cps, side="right")
                          if ram.size else 0)

    tv = t.values
    if np.abs(tv.imag).max() > 1e-9 * max(1.0, np.abs(tv).max()):
        raise InputError("race functions must be real-valued for E")
    tv = tv.real
    that1 = float(np.dot(group.class_sizes, tv)) / group.order
    pi_t = tv @ counts
    y = np.log(cps)
    e_vals = y * np.exp(-beta * y) * (pi_t - that1 * logarithmic_integral(cps))
    return RaceSeries(
        family_label=classification.spec.label,
        class_names=group.class_names, t_values=tv,
        checkpoints=cps, counts=counts, pi_values=pi_values,
        E_values=e_vals, beta=beta, ramified=classification.ramified)


# ---------------------------------------------------------------------------
# empirical logarithmic density


@dataclass(frozen=True)
class EmpiricalDensity:
    """Finite-range sign density of E with a last-decade stability band."""

    value: float
    band_lower: float
    band_upper: float
    y_start: float
    y_max: float
    running: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.running, dtype=float).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "running", arr)


def empirical_density(series: RaceSeries,
                      min_checkpoints: int = 100) -> EmpiricalDensity:
    """measure{y0 < y <= Y : E(y) > 0} / (Y - y0), by trapezoid sign runs.

    Piecewise-linear interpolation locates sign changes between
    checkpoints; the returned band is the min/max of the running value
    over the last decade of x.
    """
    y = series.y_values
    e = series.E_values
    if y.size < min_checkpoints:
        raise InputError(
            f"need at least {min_checkpoints} checkpoints, got {y.size}")

    dy = np.diff(y)
    e1, e2 = e[:-1], e[1:]
    both_pos = (e1 > 0) & (e2 > 0)
    cross = (e1 > 0) != (e2 > 0)
    frac = np.zeros_like(dy)
    with np.errstate(divide="ignore", invalid="ignore"):
        cut = np.where(cross, e1 / (e1 - e2), 0.0)
    frac[both_pos] = 1.0
    up = cross & (e1 <= 0)
    down = cross & (e1 > 0)
    frac[down] = cut[down]
    frac[up] = 1.0 - cut[up]
    positive_measure = np.concatenate([[0.0], np.cumsum(frac * dy)])
    with np.errstate(invalid="ignore"):
        running = positive_measure / (y - y[0])
    running[0] = running[1]

    last = y >= y[-1] - math.log(10.0)
    return EmpiricalDensity(
        value=float(running[-1]),
        band_lower=float(running[last].min()),
        band_upper=float(running[last].max()),
        y_start=float(y[0]), y_max=float(y[-1]), running=running)


# ---------------------------------------------------------------------------
# explicit formula check


@dataclass(frozen=True)
class ExplicitFormulaReport:
    """Sieve psi versus truncated zero sum over a log-spaced grid."""

    x_grid: np.ndarray
    psi_sieve: np.ndarray
    psi_formula: np.ndarray
    residuals: np.ndarray
    shape: np.ndarray
    max_ratio: float
    height: float
    notes: tuple[str, ...]

    def __post_init__(self):
        for name in ("x_grid", "psi_sieve", "psi_formula", "residuals",
                     "shape"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def explicit_formula_check(classification: Classification, char_index: int,
                           zeroset: zd.ZeroSet, x_max: float | None = None,
                           n_grid: int = 25) -> ExplicitFormulaReport:
    """Compare sieve psi(x, chi) with x [chi trivial] - sum_rho x^rho/rho.

    psi counts prime powers p^k <= x with weight chi(Frob_p^k) log p; the
    zero side pairs conjugate ordinates into real terms and adds the
    central contribution.  Residuals are reported against the truncation
    shape log x + (x/X) log^2(xX) with a measured constant.
    """
    if zeroset.height < 10:
        raise InputError("zeros available to height at least 10 are required")
    group = classification.group
    if not 0 <= char_index < group.n_classes:
        raise InputError(f"character index {char_index} out of range")
    x_top = float(x_max if x_max is not None else classification.x_max)
    if x_top > classification.x_max:
        raise InputError("x exceeds the classified range")
    x_grid = np.geomspace(max(10.0, x_top ** 0.25), x_top, n_grid)

    chi_by_class = group.char_table[char_index]
    is_trivial = char_index == group.trivial_char_index
    primes_f = classification.primes.astype(float)
    logs = np.log(primes_f)
    psi = np.zeros(x_grid.size)
    k = 1
    while 2.0 ** k <= x_top:
        # only primes up to x^(1/k) can contribute at this power
        n_active = int(np.searchsorted(primes_f, x_top ** (1.0 / k) + 0.5))
        pk = primes_f[:n_active] ** k
        in_range = pk <= x_top
        power_map = group.power_class_map(k)
        mapped = power_map[classification.classes[:n_active][in_range]]
        vals = chi_by_class[mapped].real * logs[:n_active][in_range]
        pos = np.searchsorted(x_grid, pk[in_range], side="left")
        keep = pos < x_grid.size
        np.add.at(psi, pos[keep], vals[keep])
        k += 1
    # each prime power lands in the first bin covering it; cumulate for psi(x)
    psi = np.cumsum(psi)

    gam = zeroset.ordinates
    mult = zeroset.multiplicities.astype(float)
    sq = np.sqrt(x_grid)
    theta = np.outer(np.log(x_grid), gam)
    denom = 0.25 + gam ** 2
    zero_sum = 2.0 * sq * ((0.5 * np.cos(theta) + gam * np.sin(theta))
                           * (mult / denom)).sum(axis=1)
    central = 2.0 * zeroset.central_multiplicity * sq
    formula = (x_grid if is_trivial else 0.0) - zero_sum - central

    residuals = np.abs(psi - formula)
    big_x = zeroset.height
    shape = np.log(x_grid) + (x_grid / big_x) * np.log(x_grid * big_x) ** 2
    ratio = float((residuals / shape).max())
    return ExplicitFormulaReport(
        x_grid=x_grid, psi_sieve=psi, psi_formula=formula,
        residuals=residuals, shape=shape, max_ratio=ratio,
        height=big_x, notes=("constant measured, not certified",))


# ---------------------------------------------------------------------------
# least primes and equidistribution


def least_primes(classification: Classification) -> dict[str, int]:
    """Smallest unramified prime per Frobenius class, from the sieve."""
    group = classification.group
    out: dict[str, int] = {}
    for idx, name in enumerate(group.class_names):
        hits = classification.primes[classification.classes == idx]
        if hits.size:
            out[name] = int(hits[0])
    return out


def least_prime_search(spec: ExtensionSpec, class_name: str,
                       x_cap: int = X_MAX_LIMIT) -> int:
    """Search blockwise for the smallest prime with the given class."""
    family = spec.label
    if family not in _CLASSIFIERS:
        raise InputError(f"unsupported family {family!r}")
    if spec.embedding is not None:
        raise InputError("relative specs are not supported")
    group = spec.group()
    try:
        target = group.class_names.index(class_name)
    except ValueError:
        raise InputError(
            f"unknown class {class_name!r}; valid: {group.class_names}")
    classify = _CLASSIFIERS[family]
    for block in iter_prime_blocks(int(x_cap)):
        cls, ram = classify(spec, block)
        hits = block[~ram & (cls == target)]
        if hits.size:
            return int(hits[0])
    raise DataMissingError(
        f"no prime with class {class_name!r} found below {x_cap}; "
        "raise the cap to continue the search")


@dataclass(frozen=True)
class EquidistributionRow:
    class_name: str
    frequency: float
    expected: float
    tolerance: float
    within: bool


def equidistribution_report(classification: Classification
                            ) -> tuple[EquidistributionRow, ...]:
    """Class frequencies against |C|/|G| with 3/sqrt(pi(x)/(|G|/|C|)) bands."""
    group = classification.group
    counts = classification.class_counts()
    total = int(counts.sum())
    if total == 0:
        raise InputError("no unramified primes classified")
    rows = []
    for idx, name in enumerate(group.class_names):
        expected = group.class_sizes[idx] / group.order
        freq = counts[idx] / total
        tol = 3.0 / math.sqrt(total * expected)
        rows.append(EquidistributionRow(
            class_name=name, frequency=float(freq), expected=float(expected),
            tolerance=float(tol), within=bool(abs(freq - expected) <= tol)))
    return tuple(rows)
