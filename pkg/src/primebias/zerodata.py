"""Ingestion, validation, synthesis, and summary sums of L-function zeros.

Zero data is an input: nothing here computes zeros of an L-function.  A
bundled dataset (produced offline by an independent root finder, see the
provenance file next to the data) ships with the package; anything else
arrives through the text format documented in load_zeros.

All ordinates are imaginary parts of zeros on the line Re(s) = assumed_beta
(default 1/2); only positive ordinates are stored, the reflection to
negative ordinates being implicit.  A nonzero order of vanishing at the
central point is stored separately.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataMissingError, InputError, InvariantError

MERGE_TOL = 1e-9
DEFAULT_COUNT_SLACK = 3.0
TWO_PI_E = 2.0 * math.pi * math.e

SHAPE_ONLY = "shape-only: implied absolute constant reported as 1"


@dataclass(frozen=True)
class ZeroSet:
    """Positive zero ordinates of one L-function, truncated at a height.

    Invariants: ordinates strictly increasing, positive, at most height;
    multiplicities >= 1.  log_conductor and degree are optional metadata
    used by the counting diagnostics and tail estimates.
    """

    label: str
    ordinates: np.ndarray
    multiplicities: np.ndarray
    height: float
    central_multiplicity: int = 0
    assumed_beta: float = 0.5
    log_conductor: float | None = None
    degree: int | None = None
    synthetic: bool = False

    def __post_init__(self):
        ordinates = np.asarray(self.ordinates, dtype=np.float64)
        mults = np.asarray(self.multiplicities, dtype=np.int64)
        object.__setattr__(self, "ordinates", ordinates)
        object.__setattr__(self, "multiplicities", mults)
        if ordinates.ndim != 1 or mults.shape != ordinates.shape:
            raise InputError("ordinates and multiplicities must be parallel 1-d arrays")
        if ordinates.size:
            if ordinates.min() <= 0:
                raise InputError("zero ordinates must be strictly positive")
            if (np.diff(ordinates) <= 0).any():
                raise InputError("zero ordinates must be strictly increasing")
            if ordinates.max() > self.height * (1 + 1e-12):
                raise InputError("ordinate exceeds the declared height")
        if (mults < 1).any():
            raise InputError("multiplicities must be positive integers")
        if self.central_multiplicity < 0:
            raise InputError("central multiplicity must be nonnegative")
        if not 0.5 <= self.assumed_beta <= 1.0:
            raise InputError("assumed zero line must lie in [1/2, 1]")
        if self.height <= 0:
            raise InputError("height must be positive")

    @property
    def n_zeros(self) -> int:
        """Number of positive-ordinate zeros counted with multiplicity."""
        return int(self.multiplicities.sum())

    def count_up_to(self, t: float) -> int:
        idx = np.searchsorted(self.ordinates, t, side="right")
        return int(self.multiplicities[:idx].sum())

    def truncated(self, t: float) -> "ZeroSet":
        if t <= 0 or t > self.height * (1 + 1e-12):
            raise InputError("truncation must lie in (0, height]")
        idx = np.searchsorted(self.ordinates, t, side="right")
        return replace(self, ordinates=self.ordinates[:idx],
                       multiplicities=self.multiplicities[:idx], height=t)


def require_li(zeroset: ZeroSet, symmetry: str | None = None) -> None:
    """Reject data inconsistent with simple linearly-independent modeling.

    Multiplicities must all be 1, and the central multiplicity must vanish
    unless the attached character is symplectic.
    """
    if zeroset.multiplicities.size and zeroset.multiplicities.max() > 1:
        raise InputError(
            f"{zeroset.label}: multiplicity > 1 not allowed under the LI flag"
        )
    if zeroset.central_multiplicity and symmetry != "symplectic":
        raise InputError(
            f"{zeroset.label}: central zeros require a symplectic character under LI"
        )


# ---------------------------------------------------------------------------
# counting diagnostics


def zero_count_mainterm(log_conductor: float, degree: int, t: float) -> float:
    """Smooth count of zeros with |ordinate| <= t:
    (t/pi) log(A (t / 2 pi e)^degree)."""
    if t <= 0:
        return 0.0
    return t / math.pi * (log_conductor + degree * math.log(t / TWO_PI_E))


def count_allowance(log_conductor: float, degree: int, t: float,
                    slack: float = DEFAULT_COUNT_SLACK) -> float:
    return slack * (log_conductor + degree * math.log(t + 4.0))

def validate_zero_count(zeroset: ZeroSet, slack: float = DEFAULT_COUNT_SLACK,
                        strict: bool = True) -> tuple[bool, float, float]:
    """Check |2 #zeros + central - mainterm(height)| against the allowance.

    Returns (ok, discrepancy, allowance); raises when strict and failing.
    """
    if zeroset.log_conductor is None or zeroset.degree is None:
        raise DataMissingError(
            f"{zeroset.label}: conductor/degree metadata required for count validation"
        )
    t = zeroset.height
    predicted = zero_count_mainterm(zeroset.log_conductor, zeroset.degree, t)
    actual = 2 * zeroset.n_zeros + zeroset.central_multiplicity
    discrepancy = abs(actual - predicted)
    allowance = count_allowance(zeroset.log_conductor, zeroset.degree, t, slack)
    ok = discrepancy <= allowance
    if strict and not ok:
        raise InvariantError(
            f"{zeroset.label}: zero count off by {discrepancy:.3f} "
            f"(allowance {allowance:.3f}) at height {t}"
        )
    return ok, discrepancy, allowance


# ---------------------------------------------------------------------------
# synthesis


def synthesize_zeros(log_conductor: float, degree: int, height: float,
                     seed: int, mode: str = "unfolded-uniform") -> ZeroSet:
    """Deterministic synthetic ordinates following the smooth counting law.

    The k-th ordinate solves mainterm(g) = 2k - 1 and receives uniform
    jitter of half the local spacing.  Used for stress tests and scaling
    studies only; the result is flagged synthetic.
    """
    if mode != "unfolded-uniform":
        raise InputError(f"unknown synthesis mode {mode!r}")
    if height < 1:
        raise InputError("height must be at least 1")

    def mainterm(t: float) -> float:
        return zero_count_mainterm(log_conductor, degree, t)

    def density(t: float) -> float:
        return (log_conductor + degree * (math.log(t / TWO_PI_E) + 1)) / math.pi

    total = mainterm(height)
    count = max(0, int((total + 1) // 2))
    rng = np.random.default_rng(seed)
    points = []
    lo_prev = 1e-9
    for k in range(1, count + 1):
        target = 2 * k - 1
        lo, hi = lo_prev, height
        if mainterm(hi) < target:
            break
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if mainterm(mid) < target:
                lo = mid
            else:
                hi = mid
        gamma = 0.5 * (lo + hi)
        lo_prev = gamma
        spacing = 2.0 / max(density(gamma), 1e-12)
        gamma += (rng.random() - 0.5) * spacing
        if 0 < gamma <= height:
            points.append(gamma)
    points.sort()
    # jitter may produce near-collisions; merge them like the loader would
    ordinates, mults = _merge_sorted(points, [1] * len(points))
    return ZeroSet(
        label=f"synthetic-{seed}", ordinates=np.array(ordinates),
        multiplicities=np.array(mults, dtype=np.int64), height=height,
        log_conductor=log_conductor, degree=degree, synthetic=True,
    )


def _merge_sorted(gammas, mults) -> tuple[list[float], list[int]]:
    out_g: list[float] = []
    out_m: list[int] = []
    for g, m in zip(gammas, mults):
        if out_g and g - out_g[-1] <= MERGE_TOL:
            out_m[-1] += m
        else:
            out_g.append(g)
            out_m.append(m)
    return out_g, out_m


# ---------------------------------------------------------------------------
# summary sums


@dataclass(frozen=True)
class BSums:
    """The weighted zero sums entering means, variances, and error terms.

    b: sum of 1/(1/4 + gamma^2) over all zeros including the center;
    b0: same excluding the center; b2: squared denominators; tail_estimate:
    completeness proxy for the truncation (constant 1, shape only).
    """

    b: float
    b0: float
    b2: float
    tail_estimate: float | None
    empty: bool
    notes: tuple[str, ...] = ()


def b_sums(zeroset: ZeroSet) -> BSums:
    gammas = zeroset.ordinates
    mults = zeroset.multiplicities
    denom = 0.25 + gammas**2
    b0 = float(np.sum(mults * 2.0 / denom))
    b2 = float(np.sum(mults * 2.0 / denom**2))
    center = zeroset.central_multiplicity
    b = b0 + center * 4.0
    b2 += center * 16.0
    tail = None
    notes: tuple[str, ...] = ()
    if zeroset.log_conductor is not None and zeroset.degree is not None:
        t = zeroset.height
        tail = (zeroset.log_conductor + zeroset.degree * math.log(t + 4.0)) / t
        notes = (SHAPE_ONLY,)
    empty = zeroset.ordinates.size == 0 and center == 0
    return BSums(b, b0, b2, tail, empty, notes)


def divergent_sum(zeroset: ZeroSet) -> tuple[float, float | None]:
    """Sum of 1/sqrt(1/4 + gamma^2) over all zeros, with its smooth-law
    prediction (1/pi) log(A (sqrt(T)/2 pi e)^degree) log T when metadata
    is available."""
    gammas = zeroset.ordinates
    mults = zeroset.multiplicities
    total = float(np.sum(mults * 2.0 / np.sqrt(0.25 + gammas**2)))
    total += zeroset.central_multiplicity * 2.0
    predicted = None
    if zeroset.log_conductor is not None and zeroset.degree is not None and zeroset.height > 1:
        t = zeroset.height
        predicted = (zeroset.log_conductor
                     + zeroset.degree * math.log(math.sqrt(t) / TWO_PI_E)) / math.pi * math.log(t)
    return total, predicted


# ---------------------------------------------------------------------------
# text format


_HEADER_FIELDS = {
    "label": str,
    "logA": float,
    "degree": int,
    "height": float,
    "central_multiplicity": int,
    "beta": float,
    "synthetic": int,
}


def save_zeros(zeroset: ZeroSet, path) -> None:
    lines = [f"# label: {zeroset.label}"]
    if zeroset.log_conductor is not None:
        lines.append(f"# logA: {zeroset.log_conductor!r}")
    if zeroset.degree is not None:
        lines.append(f"# degree: {zeroset.degree}")
    lines.append(f"# height: {zeroset.height!r}")
    lines.append(f"# central_multiplicity: {zeroset.central_multiplicity}")
    if zeroset.assumed_beta != 0.5:
        lines.append(f"# beta: {zeroset.assumed_beta!r}")
    if zeroset.synthetic:
        lines.append("# synthetic: 1")
    for g, m in zip(zeroset.ordinates, zeroset.multiplicities):
        lines.append(f"{g:.9f} {m}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_zeros(path, validate_count: bool = False,
               slack: float = DEFAULT_COUNT_SLACK) -> ZeroSet:
    """Parse the `# key: value` header plus `<gamma> <multiplicity>` body.

    Duplicate ordinates within 1e-9 merge into a higher multiplicity; any
    other non-monotone line is an error.  Line numbers are reported.
    """
    header: dict[str, object] = {}
    gammas: list[float] = []
    mults: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition(":")
                key = key.strip()
                if sep and key in _HEADER_FIELDS:
                    try:
                        header[key] = _HEADER_FIELDS[key](value.strip())
                    except ValueError:
                        raise InputError(
                            f"{path}:{lineno}: bad header value for {key}"
                        ) from None
                continue
            parts = line.split()
            if len(parts) not in (1, 2):
                raise InputError(f"{path}:{lineno}: expected `gamma [multiplicity]`")
            try:
                g = float(parts[0])
                m = int(parts[1]) if len(parts) == 2 else 1
            except ValueError:
                raise InputError(f"{path}:{lineno}: parse failure") from None
            if g <= 0:
                raise InputError(f"{path}:{lineno}: nonpositive ordinate {g}")
            if m < 1:
                raise InputError(f"{path}:{lineno}: multiplicity {m} < 1")
            if gammas and g < gammas[-1] - MERGE_TOL:
                raise InputError(f"{path}:{lineno}: ordinates must be nondecreasing")
            gammas.append(g)
            mults.append(m)
    merged_g, merged_m = _merge_sorted(gammas, mults)
    height = header.get("height")
    if height is None:
        if not merged_g:
            raise InputError(f"{path}: empty zero file without a height header")
        height = merged_g[-1]
    zeroset = ZeroSet(
        label=str(header.get("label", os.path.basename(str(path)))),
        ordinates=np.array(merged_g, dtype=np.float64),
        multiplicities=np.array(merged_m, dtype=np.int64),
        height=float(height),
        central_multiplicity=int(header.get("central_multiplicity", 0)),
        assumed_beta=float(header.get("beta", 0.5)),
        log_conductor=header.get("logA"),
        degree=header.get("degree"),
        synthetic=bool(header.get("synthetic", 0)),
    )
    if validate_count:
        validate_zero_count(zeroset, slack=slack, strict=True)
    return zeroset


# ---------------------------------------------------------------------------
# cache and bundled data


def cache_path(cache_dir, label: str, height: float) -> str:
    safe = label.replace(os.sep, "_")
    return os.path.join(str(cache_dir), safe, f"{height:g}.zeros")


def write_cache(zeroset: ZeroSet, cache_dir) -> str:
    """Atomic write (temp file then rename) into the cache layout."""
    path = cache_path(cache_dir, zeroset.label, zeroset.height)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), suffix=".tmp")
    os.close(fd)
    try:
        save_zeros(zeroset, tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path


def read_cache(cache_dir, label: str, height: float) -> ZeroSet:
    path = cache_path(cache_dir, label, height)
    if not os.path.exists(path):
        raise DataMissingError(f"no cached zeros at {path}")
    return load_zeros(path)


BUNDLED_LABELS = ("zeta", "dirichlet-3", "dirichlet-4", "dirichlet-5")


def load_bundled(name: str) -> ZeroSet:
    """One of the shipped datasets: zeta, dirichlet-3, dirichlet-4,
    dirichlet-5 (the real primitive character of that conductor)."""
    if name not in BUNDLED_LABELS:
        raise InputError(f"unknown bundled set {name!r}; have {BUNDLED_LABELS}")
    from importlib.resources import files

    resource = files("primebias.data").joinpath(f"{name}.zeros")
    if not resource.is_file():
        raise DataMissingError(f"bundled zero data {name}.zeros is missing")
    import contextlib
    from importlib.resources import as_file

    with contextlib.ExitStack() as stack:
        path = stack.enter_context(as_file(resource))
        return load_zeros(path)
