"""Limiting random variable of a prime race and its sign density.

Assembles, from race coefficients and L-function zero data, the random
variable whose distribution governs the logarithmic density of the set
where one Frobenius count leads another.  Computes its mean, variance,
bias factor, characteristic function, the density by three independent
routes (Fourier inversion, Monte Carlo, Gaussian approximation), and the
probabilistic bounds attached to highly and moderately biased races.

Every bound whose absolute constant is not certified carries an explicit
flag; nothing here is unconditional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import groups as gr
from . import zerodata as zd
from .errors import DataMissingError, InputError, InvariantError
from .families import ExtensionSpec, global_log_conductor

# Coefficients below SUPPORT_TOL (relative to the largest) are treated as
# exact zeros; ordinates closer than MERGE_TOL are the same zero.
SUPPORT_TOL = 1e-12
MERGE_TOL = 1e-9
VARIANCE_CHECK_TOL = 1e-10

# Characteristic-function plumbing.
BESSEL_SWITCHOVER = 12.0
CUTOFF_EPS = 1e-12
PANEL_RATIO = 1.35
PANEL_MAX_POINTS = 1 << 17
OSCILLATION_SAMPLES = 8.0

# Monte Carlo sharding: fixed shard size, per-shard derived seed, row
# chunks capped so a chunk never exceeds MC_CHUNK_ELEMENTS array entries.
MC_SHARD = 1 << 16
MC_CHUNK_ELEMENTS = 1 << 22
MC_MIN_SAMPLES = 10**4

# Certified numeric fact: sup over 0 < u <= 12/5 of
# (-u^2/4 - log J0(u)) / u^4 = 0.13754..., attained at the endpoint.
# Rounded up; used for the certified lower branch of the log-CF sandwich.
BESSEL_QUARTIC_CONSTANT = 0.1376

SHAPE_ONLY = "shape-only: implied absolute constant reported as 1"
NOT_CERTIFIED = "constants not certified; defaults set to 1"


# ---------------------------------------------------------------------------
# Bessel J0: power series up to the switchover, Hankel asymptotic beyond


def _j0_series_coefficients(count: int = 44) -> np.ndarray:
    c = np.empty(count)
    c[0] = 1.0
    for k in range(1, count):
        c[k] = -c[k - 1] / (4.0 * k * k)
    return c


def _j0_hankel_sums(terms: int = 12) -> tuple[np.ndarray, np.ndarray]:
    b = np.empty(2 * terms)
    b[0] = 1.0
    for k in range(1, 2 * terms):
        b[k] = b[k - 1] * (2 * k - 1) ** 2 / (8.0 * k)
    p = b[0::2].copy()
    q = b[1::2].copy()
    p[1::2] *= -1.0
    q[1::2] *= -1.0
    return p, q


_J0_SERIES = _j0_series_coefficients()
_J0_P, _J0_Q = _j0_hankel_sums()


def bessel_j0(u):
    """J0(u), elementwise.

    Power series in u^2 for |u| <= 12, Hankel asymptotic expansion beyond;
    both branches agree with the integral definition to better than 1e-12
    at the switchover.
    """
    arr = np.asarray(u, dtype=float)
    scalar = arr.ndim == 0
    x = np.abs(np.atleast_1d(arr).ravel())
    out = np.empty_like(x)
    small = x <= BESSEL_SWITCHOVER
    if small.any():
        xs = x[small] ** 2
        acc = np.full_like(xs, _J0_SERIES[-1])
        for c in _J0_SERIES[-2::-1]:
            acc = acc * xs + c
        out[small] = acc
    large = ~small
    if large.any():
        z = x[large]
        inv2 = 1.0 / (z * z)
        p = np.full_like(z, _J0_P[-1])
        for c in _J0_P[-2::-1]:
            p = p * inv2 + c
        q = np.full_like(z, _J0_Q[-1])
        for c in _J0_Q[-2::-1]:
            q = q * inv2 + c
        omega = z - 0.25 * math.pi
        out[large] = (math.sqrt(2.0 / math.pi) / np.sqrt(z)
                      * (np.cos(omega) * p + np.sin(omega) * q / z))
    if scalar:
        return float(out[0])
    return out.reshape(arr.shape)


def bessel_j0_quadrature(u, points: int = 20001) -> float:
    """Reference J0 by trapezoid quadrature of (1/pi) int_0^pi cos(u sin s) ds."""
    s = np.linspace(0.0, math.pi, points)
    return float(np.trapezoid(np.cos(u * np.sin(s)), s) / math.pi)


# ---------------------------------------------------------------------------
# model assembly


@dataclass(frozen=True)
class Assumptions:
    """Hypothesis flags attached to a model.

    ac/grh: analytic continuation and the half-line hypothesis for the
    relevant L-functions; li: simple zeros, no rational relations, so every
    ordinate appears once with multiplicity 1; bm: bounded multiplicities
    with ceiling m0.  ord_term_sign flips the sign of the central-zero
    contribution to the mean, as a sensitivity switch for the documented
    sign-convention ambiguity.
    """

    ac: bool = True
    grh: bool = True
    li: bool = True
    bm: bool = False
    m0: int | None = None
    ord_term_sign: int = 1

    def __post_init__(self):
        if self.ord_term_sign not in (1, -1):
            raise InputError("ord_term_sign must be +1 or -1")
        if self.bm and (self.m0 is None or self.m0 < 1):
            raise InputError("bounded-multiplicity flag requires m0 >= 1")

    def describe(self) -> str:
        parts = [name.upper() for name, on in
                 (("ac", self.ac), ("grh", self.grh), ("li", self.li),
                  ("bm", self.bm)) if on]
        if self.bm:
            parts[-1] += f"(m0={self.m0})"
        if self.ord_term_sign < 0:
            parts.append("ord-sign-flipped")
        return "+".join(parts) if parts else "none"


@dataclass(frozen=True)
class BiasModel:
    """Immutable limiting-variable model.

    The variable is mean + sum_i amplitude_i * cos(2 pi U_i) with U_i
    independent uniforms; one term per distinct positive ordinate, with
    amplitude 2|o|/sqrt(1/4+gamma^2) for merged order o.  Support arrays
    (coefficients, degrees, log_conductors, central_orders) run parallel
    over the characters carrying nonzero race coefficients.
    """

    label: str
    mean: float
    ordinates: np.ndarray
    orders: np.ndarray
    amplitudes: np.ndarray
    variance: float
    assumptions: Assumptions
    support_indices: np.ndarray
    coefficients: np.ndarray
    degrees: np.ndarray
    log_conductors: np.ndarray | None
    central_orders: np.ndarray
    norm_one_plus: float
    norm_two_plus: float
    n_classes_plus: int
    truncation_height: float
    variance_tail: float | None
    cancelled_terms: int = 0
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("ordinates", "orders", "amplitudes", "support_indices",
                     "coefficients", "degrees", "central_orders"):
            arr = np.asarray(getattr(self, name))
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.log_conductors is not None:
            lc = np.asarray(self.log_conductors, dtype=float).copy()
            lc.setflags(write=False)
            object.__setattr__(self, "log_conductors", lc)
        n = self.ordinates.size
        if self.orders.size != n or self.amplitudes.size != n:
            raise InputError("term arrays must have equal length")
        if n and ((self.ordinates <= 0).any()
                  or (np.diff(self.ordinates) <= 0).any()):
            raise InputError("ordinates must be strictly increasing and positive")
        if n and self.amplitudes.min() < 0:
            raise InputError("amplitudes must be nonnegative")
        if self.variance < 0:
            raise InvariantError("variance must be nonnegative")
        direct = 0.5 * float(np.sum(self.amplitudes ** 2))
        if abs(direct - self.variance) > VARIANCE_CHECK_TOL * max(1.0, direct):
            raise InvariantError(
                f"variance {self.variance} disagrees with term sum {direct}")

    @property
    def n_terms(self) -> int:
        return int(self.amplitudes.size)

    @property
    def support_size(self) -> int:
        return int(self.support_indices.size)

    @property
    def is_dirac(self) -> bool:
        return self.amplitudes.size == 0

    @property
    def B(self) -> float:
        return bias_factor(self)

    @property
    def W4(self) -> float:
        return moments(self).w4

    @property
    def F(self) -> float:
        return moments(self).f


def _assemble_terms(entries, li: bool, merge_tol: float):
    """Merge per-character zero lists into distinct positive-ordinate terms.

    entries: (coefficient, ZeroSet, display-name) triples.  Returns sorted
    ordinates, complex merged orders, amplitudes, and the count of merged
    groups whose order cancelled to zero.
    """
    gammas, orders, sources = [], [], []
    scale = max([abs(c) for c, _, _ in entries], default=0.0)
    for coeff, zeroset, name in entries:
        if zeroset.n_zeros == 0:
            continue
        gammas.append(zeroset.ordinates)
        orders.append(np.conj(coeff) * zeroset.multiplicities)
        sources.extend([name] * zeroset.n_zeros)
    if not gammas:
        empty = np.empty(0)
        return empty, empty.astype(complex), empty.copy(), 0
    gam = np.concatenate(gammas)
    ords = np.concatenate(orders)
    srcs = np.array(sources)
    idx = np.argsort(gam, kind="stable")
    gam, ords, srcs = gam[idx], ords[idx], srcs[idx]

    merged_g, merged_o, cancelled = [], [], 0
    start = 0
    for stop in range(1, gam.size + 1):
        if stop < gam.size and gam[stop] - gam[stop - 1] < merge_tol:
            continue
        group = slice(start, stop)
        start = stop
        if stop - group.start > 1 and li:
            pair = sorted(set(srcs[group]))
            raise InputError(
                "duplicated ordinate near gamma="
                f"{gam[group][0]:.9f} across {', '.join(pair)}: "
                "inconsistent with the LI flag")
        order = complex(np.sum(ords[group]))
        if abs(order) <= 1e-13 * max(1.0, scale):
            cancelled += 1
            continue
        merged_g.append(float(np.mean(gam[group])))
        merged_o.append(order)
    out_g = np.array(merged_g)
    out_o = np.array(merged_o, dtype=complex)
    amps = 2.0 * np.abs(out_o) / np.sqrt(0.25 + out_g ** 2)
    return out_g, out_o, amps, cancelled


def _real_part(value: complex, what: str) -> float:
    if abs(value.imag) > 1e-9 * max(1.0, abs(value)):
        raise InputError(f"{what} must be real, got {value}")
    return float(value.real)


def _finish_model(label, mean, entries, assume, merge_tol, *,
                  support_indices, coefficients, degrees, log_conductors,
                  central_orders, norm_one_plus, norm_two_plus,
                  n_classes_plus, notes):
    gam, ords, amps, cancelled = _assemble_terms(entries, assume.li, merge_tol)
    variance = 0.5 * float(np.sum(amps ** 2))

    if assume.li and entries:
        closed = sum(abs(c) ** 2 * zd.b_sums(zs).b0 for c, zs, _ in entries)
        if abs(variance - closed) > VARIANCE_CHECK_TOL * max(1.0, closed):
            raise InvariantError(
                f"variance {variance} disagrees with the closed form {closed}"
                " under the LI flag")

    notes = list(notes)
    heights = [zs.height for _, zs, _ in entries]
    tails, missing_tail = [], []
    for c, zs, name in entries:
        b = zd.b_sums(zs)
        if b.tail_estimate is None:
            missing_tail.append(name)
        else:
            tails.append(abs(c) ** 2 * b.tail_estimate)
    if missing_tail:
        variance_tail = None
        notes.append("variance tail unavailable for: " + ", ".join(missing_tail))
    else:
        variance_tail = float(sum(tails)) if tails else 0.0
        if entries:
            notes.append(f"variance tail uncertainty ({SHAPE_ONLY})")
    if cancelled:
        notes.append(f"{cancelled} merged zero group(s) cancelled to order 0")

    return BiasModel(
        label=label, mean=mean,
        ordinates=gam, orders=ords, amplitudes=amps, variance=variance,
        assumptions=assume,
        support_indices=support_indices, coefficients=coefficients,
        degrees=degrees, log_conductors=log_conductors,
        central_orders=central_orders,
        norm_one_plus=norm_one_plus, norm_two_plus=norm_two_plus,
        n_classes_plus=n_classes_plus,
        truncation_height=min(heights) if heights else math.inf,
        variance_tail=variance_tail, cancelled_terms=cancelled,
        notes=tuple(notes))


def build_model(spec: ExtensionSpec, t: gr.ClassFunction,
                zeros: dict[int, zd.ZeroSet],
                assume: Assumptions = Assumptions(),
                merge_tol: float = MERGE_TOL,
                label: str | None = None) -> BiasModel:
    """Build the limiting-variable model of the race t over the extension.

    t lives on the base-change group spec.group(); zeros maps character
    indices of the ambient group to their zero data.  Every character in
    the support of the induced coefficients needs zero data.
    """
    group = spec.group()
    if t.group is not group:
        if t.group.kind != group.kind or t.group.params != group.params:
            raise InputError(
                f"race function lives on {t.group.kind}{t.group.params}, "
                f"expected {group.kind}{group.params}")
    gplus = spec.group_plus
    coeffs_full = spec.induced_fourier(t)
    tol = SUPPORT_TOL * max(1.0, float(np.abs(coeffs_full).max()))
    support = np.flatnonzero(np.abs(coeffs_full) > tol)

    missing = sorted(set(support.tolist()) - set(zeros))
    if missing:
        raise DataMissingError(
            "zero data missing for character index(es) "
            + ", ".join(str(i) for i in missing))

    symmetry = gr.fs_classify(gplus)
    entries = []
    for i in support:
        zs = zeros[int(i)]
        if assume.li:
            zd.require_li(zs, symmetry=symmetry[int(i)])
        if assume.bm and zs.multiplicities.size and \
                int(zs.multiplicities.max()) > assume.m0:
            raise InputError(
                f"{zs.label}: multiplicity exceeds the declared ceiling "
                f"m0={assume.m0}")
        entries.append((complex(coeffs_full[i]), zs, f"character {i}"))

    inner = _real_part(complex(gr.inner_product(t, gr.root_count(group, 2))),
                       "<t, r_2>")
    central = np.array([zs.central_multiplicity for _, zs, _ in entries],
                       dtype=np.int64)
    ord_sum = _real_part(
        complex(sum(np.conj(c) * m for (c, _, _), m in zip(entries, central))),
        "central-order sum")
    mean = -inner + assume.ord_term_sign * 2.0 * ord_sum

    # A race whose coefficients all die under induction degenerates to a
    # Dirac mass; under the LI flag its mean is forced to vanish too.
    if support.size == 0 and assume.li and abs(mean) > 1e-9:
        raise InvariantError(
            "race coefficients vanish after induction, so the model is a "
            f"Dirac mass, yet the mean is {mean}; a zero mean is forced here")

    coeffs = coeffs_full[support]
    degrees = gplus.degrees[support]
    log_cond, missing_cond = [], []
    for (c, zs, name), i in zip(entries, support):
        try:
            log_cond.append(global_log_conductor(spec, int(i)))
        except DataMissingError:
            if zs.log_conductor is not None:
                log_cond.append(float(zs.log_conductor))
            else:
                missing_cond.append(name)
    notes = []
    if missing_cond:
        log_conductors = None
        notes.append("log conductor unavailable for: " + ", ".join(missing_cond))
    else:
        log_conductors = np.array(log_cond)

    tplus = spec.induce(t)
    return _finish_model(
        label if label is not None else spec.label,
        mean, entries, assume, merge_tol,
        support_indices=support, coefficients=coeffs, degrees=degrees,
        log_conductors=log_conductors, central_orders=central,
        norm_one_plus=gr.littlewood_norm(tplus),
        norm_two_plus=gr.norm_two(tplus),
        n_classes_plus=gplus.n_classes, notes=notes)


def model_from_zero_data(coefficients, zerosets, *,
                         degrees=None, mean: float | None = None,
                         assume: Assumptions = Assumptions(),
                         merge_tol: float = MERGE_TOL,
                         label: str = "direct") -> BiasModel:
    """Assemble a model from bare (coefficient, ZeroSet) columns.

    For synthetic studies and classical races without an extension catalog
    entry.  The mean defaults to the central-zero contribution alone; pass
    an explicit mean to add a square-root-count term.  Conductors are read
    off the zero-set metadata when every column has one.
    """
    coeffs = np.asarray(coefficients, dtype=complex)
    zerosets = list(zerosets)
    if coeffs.ndim != 1 or coeffs.size != len(zerosets):
        raise InputError("need one zero set per coefficient")
    if degrees is None:
        degs = np.ones(coeffs.size, dtype=np.int64)
    else:
        degs = np.asarray(degrees, dtype=np.int64)
        if degs.shape != coeffs.shape or (degs < 1).any():
            raise InputError("degrees must be positive, one per coefficient")

    keep = np.abs(coeffs) > SUPPORT_TOL * max(1.0, float(np.abs(coeffs).max()))
    entries = [(complex(coeffs[i]), zerosets[i], zerosets[i].label)
               for i in np.flatnonzero(keep)]
    for _, zs, _ in entries:
        if assume.li:
            zd.require_li(zs, symmetry="symplectic" if
                          zs.central_multiplicity else None)
    central = np.array([zs.central_multiplicity for _, zs, _ in entries],
                       dtype=np.int64)
    ord_sum = _real_part(
        complex(sum(np.conj(c) * m for (c, _, _), m in zip(entries, central))),
        "central-order sum")
    if mean is None:
        mean = assume.ord_term_sign * 2.0 * ord_sum

    log_cond = [zs.log_conductor for _, zs, _ in entries]
    log_conductors = (np.array([float(v) for v in log_cond])
                      if all(v is not None for v in log_cond) else None)
    notes = [] if log_conductors is not None else \
        ["log conductor unavailable for some columns"]
    sup = np.flatnonzero(keep)
    return _finish_model(
        label, float(mean), entries, assume, merge_tol,
        support_indices=sup, coefficients=coeffs[keep], degrees=degs[keep],
        log_conductors=log_conductors, central_orders=central,
        norm_one_plus=float(np.sum(degs[keep] * np.abs(coeffs[keep]))),
        norm_two_plus=float(np.sqrt(np.sum(np.abs(coeffs[keep]) ** 2))),
        n_classes_plus=int(coeffs.size), notes=notes)


# ---------------------------------------------------------------------------
# first and second moments, bias factor


def variance(model: BiasModel) -> float:
    """Variance of the limiting variable: 2 sum |o|^2/(1/4+gamma^2)."""
    return model.variance


def bias_factor(model: BiasModel) -> float:
    """mean/sqrt(variance); +-inf for a displaced Dirac mass, nan for 0/0."""
    if model.variance > 0:
        return model.mean / math.sqrt(model.variance)
    if model.mean > 0:
        return math.inf
    if model.mean < 0:
        return -math.inf
    return math.nan


@dataclass(frozen=True)
class Moments:
    """Fourth-moment ratio W4 and spread factor F with their shape bounds."""

    w4: float
    f: float
    w4_bound: float
    w4_bound_ratio: float
    f_floor: float
    f_floor_met: bool
    notes: tuple[str, ...]


def moments(model: BiasModel) -> Moments:
    """W4 = sum |c|^4 logA / (sum |c|^2 logA)^2 and F = sqrt(var)/max|c|."""
    if model.support_size == 0:
        raise InputError("empty coefficient support: moments are 0/0")
    if model.log_conductors is None:
        raise DataMissingError(
            "log conductors unavailable for the support; W4 is undefined")
    c2 = np.abs(model.coefficients) ** 2
    la = model.log_conductors
    s2 = float(np.sum(c2 * la))
    if s2 <= 0:
        raise InputError(
            f"sum |c|^2 logA = {s2} is not positive; W4 is undefined")
    w4 = float(np.sum(c2 ** 2 * la)) / s2 ** 2
    f = math.sqrt(model.variance) / float(np.sqrt(c2.max()))
    w4_bound = model.norm_one_plus ** (2.0 / 3.0) * s2 ** (-1.0 / 3.0)
    f_floor = model.variance ** (1.0 / 6.0) / model.norm_one_plus ** (1.0 / 3.0)
    return Moments(
        w4=w4, f=f, w4_bound=w4_bound,
        w4_bound_ratio=w4 / w4_bound if w4_bound > 0 else math.inf,
        f_floor=f_floor, f_floor_met=bool(f + 1e-12 >= f_floor),
        notes=(SHAPE_ONLY,))


# ---------------------------------------------------------------------------
# characteristic function and Fourier inversion


def char_function(model: BiasModel, xi):
    """phi(xi) = exp(i mean xi) prod_i J0(amplitude_i xi), elementwise."""
    arr = np.asarray(xi, dtype=float)
    scalar = arr.ndim == 0
    x = np.atleast_1d(arr).ravel()
    out = np.empty(x.size, dtype=complex)
    amps = model.amplitudes
    step = max(1, MC_CHUNK_ELEMENTS // max(1, amps.size))
    for lo in range(0, x.size, step):
        seg = x[lo:lo + step]
        phase = np.exp(1j * model.mean * seg)
        if amps.size:
            prod = bessel_j0(np.outer(amps, seg)).prod(axis=0)
        else:
            prod = np.ones_like(seg)
        out[lo:lo + seg.size] = phase * prod
    if scalar:
        return complex(out[0])
    return out.reshape(arr.shape)


def _log_envelope(amps: np.ndarray, xi: float) -> float:
    # prod min(1, sqrt(2/(pi a xi))), in logs; decreasing in xi.
    u = amps * xi
    active = u > 2.0 / math.pi
    if not active.any():
        return 0.0
    return float(0.5 * np.log(2.0 / (math.pi * u[active])).sum())


def _envelope_cutoff(amps: np.ndarray, eps: float) -> float:
    target = math.log(eps)
    lo = (2.0 / math.pi) / float(amps.max())
    hi = lo * 2.0
    while _log_envelope(amps, hi) > target:
        hi *= 2.0
        if hi > 1e300:
            raise InvariantError("characteristic-function envelope never decays")
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        if _log_envelope(amps, mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


def _tail_bound(amps: np.ndarray, xi: float) -> float:
    # int_xi^inf of envelope/s ds, using the envelope's power decay at xi.
    active = int(np.count_nonzero(amps * xi > 2.0 / math.pi))
    if active == 0:
        return math.inf
    return math.exp(_log_envelope(amps, xi)) * 2.0 / active


@dataclass(frozen=True)
class InversionDensity:
    """Fourier-inversion density with an explicit quadrature error bar."""

    delta: float
    error: float
    cutoff: float
    panels: int
    evaluations: int
    notes: tuple[str, ...] = ()


def density_inversion(model: BiasModel, precision: float = 1e-6
                      ) -> InversionDensity:
    """delta = 1/2 + (1/pi) int_0^inf Im phi(xi) / xi dxi.

    Log-spaced panels with Richardson-refined trapezoid sums; the upper
    limit is cut where the Bessel-product envelope falls below 1e-12, and
    any panel too oscillatory to resolve is replaced by its envelope tail
    bound, which is charged to the error bar.
    """
    if model.variance <= 0:
        raise InputError(
            "variance is zero: the distribution is a Dirac mass; inversion "
            "does not apply (the sign of the mean decides the density)")
    if model.n_terms < 2:
        raise InputError(
            "fewer than 2 oscillatory terms: the inversion integral need "
            "not converge (atoms possible); Monte Carlo is mandated")
    if precision <= 0:
        raise InputError("precision must be positive")

    amps = model.amplitudes
    freq = abs(model.mean) + float(amps.sum())
    cutoff = _envelope_cutoff(amps, CUTOFF_EPS)

    def integrand(x):
        phi = char_function(model, x)
        return np.imag(phi) / x

    xi0 = min(1e-7 / max(freq, 1.0), cutoff * 1e-9)
    head = model.mean * xi0
    head_err = (freq * xi0) ** 3

    n_panels = max(1, math.ceil(math.log(cutoff / xi0) / math.log(PANEL_RATIO)))
    edges = np.geomspace(xi0, cutoff, n_panels + 1)
    total, err, evals, used = 0.0, head_err, 0, 0
    notes = []
    tail_charged = False
    for a, b in zip(edges[:-1], edges[1:]):
        width = b - a
        needed = OSCILLATION_SAMPLES * width * freq / (2.0 * math.pi)
        if needed > PANEL_MAX_POINTS:
            bound = _tail_bound(amps, a)
            err += bound
            notes.append(
                f"tail beyond xi={a:.6g} unresolved; envelope bound "
                f"{bound:.3e} charged to the error")
            tail_charged = True
            break
        n = 17
        while n - 1 < needed:
            n = 2 * (n - 1) + 1
        budget = max(precision * width / (cutoff - xi0), 1e-16)
        while True:
            grid = np.linspace(a, b, 2 * (n - 1) + 1)
            vals = integrand(grid)
            fine = np.trapezoid(vals, grid)
            coarse = np.trapezoid(vals[::2], grid[::2])
            panel = (4.0 * fine - coarse) / 3.0
            panel_err = abs(fine - coarse) / 3.0
            evals += grid.size
            if panel_err <= budget or 2 * (n - 1) + 1 > PANEL_MAX_POINTS:
                break
            n = 2 * (n - 1) + 1
        total += panel
        err += panel_err
        used += 1
    if not tail_charged:
        err += _tail_bound(amps, cutoff)

    delta = 0.5 + (head + total) / math.pi
    error = err / math.pi
    if delta < 0.0 or delta > 1.0:
        notes.append(f"raw value {delta:.6g} clipped to [0, 1]")
        delta = min(1.0, max(0.0, delta))
    if error > precision:
        notes.append(f"requested precision {precision:g} not met")
    return InversionDensity(delta=delta, error=error, cutoff=cutoff,
                            panels=used, evaluations=evals,
                            notes=tuple(notes))


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class MonteCarloDensity:
    """Sampled sign density with its binomial standard error."""

    delta: float
    standard_error: float
    samples: int
    positives: int
    sample_mean: float
    sample_variance: float
    shards: int
    notes: tuple[str, ...] = ()


def density_monte_carlo(model: BiasModel, samples: int, seed: int
                        ) -> MonteCarloDensity:
    """Sample X = mean + sum a_i cos(2 pi U_i) and count positive draws.

    Samples are split into fixed shards of 2^16 with per-shard generators
    seeded (seed, shard), so results match for any parallel shard
    assignment; within a shard rows are chunked without changing the
    uniform stream (row-major fill).
    """
    if samples < MC_MIN_SAMPLES:
        raise InputError(f"need at least {MC_MIN_SAMPLES} samples, got {samples}")
    amps = model.amplitudes
    n = amps.size
    positives = 0
    s1 = 0.0
    s2 = 0.0
    shard_count = (samples + MC_SHARD - 1) // MC_SHARD
    if n == 0:
        positives = samples if model.mean > 0 else 0
        s1 = samples * model.mean
        s2 = samples * model.mean ** 2
    else:
        two_pi = 2.0 * math.pi
        rows_cap = max(1, MC_CHUNK_ELEMENTS // n)
        for shard in range(shard_count):
            count = min(MC_SHARD, samples - shard * MC_SHARD)
            rng = np.random.default_rng([seed, shard])
            done = 0
            while done < count:
                rows = min(rows_cap, count - done)
                u = rng.random((rows, n))
                x = model.mean + np.cos(two_pi * u) @ amps
                positives += int((x > 0).sum())
                s1 += float(x.sum())
                s2 += float((x * x).sum())
                done += rows
    delta = positives / samples
    se = math.sqrt(max(delta * (1.0 - delta), 0.0) / samples)
    mean = s1 / samples
    var = max((s2 - samples * mean * mean) / max(samples - 1, 1), 0.0)
    return MonteCarloDensity(delta=delta, standard_error=se, samples=samples,
                             positives=positives, sample_mean=mean,
                             sample_variance=var, shards=shard_count)


# ---------------------------------------------------------------------------
# Gaussian estimate and the bias bounds


def _gaussian_cdf(x: float) -> float:
    if math.isinf(x):
        return 1.0 if x > 0 else 0.0
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


@dataclass(frozen=True)
class GaussianDensity:
    """Gaussian density estimate with the moderate-bias error shape."""

    delta: float
    linear: float
    error_shape: float
    parts: tuple[float, ...]
    notes: tuple[str, ...]


def density_gaussian(model: BiasModel) -> GaussianDensity:
    """Phi(B), the linear form 1/2 + B/sqrt(2 pi), and the error shape.

    The error shape is |B|^3 + (norm1^2/variance)^2 + W4 with all implied
    constants reported as 1; the W4 part is dropped, with a note, when
    conductor data is missing.
    """
    b = bias_factor(model)
    notes = [SHAPE_ONLY]
    if math.isnan(b):
        return GaussianDensity(math.nan, math.nan, math.inf, (),
                               tuple(notes + ["bias factor undefined (0/0)"]))
    delta = _gaussian_cdf(b)
    linear = 0.5 + b / math.sqrt(2.0 * math.pi) if math.isfinite(b) else delta
    parts = [abs(b) ** 3 if math.isfinite(b) else math.inf]
    if model.variance > 0:
        parts.append((model.norm_one_plus ** 2 / model.variance) ** 2)
    else:
        parts.append(math.inf)
    try:
        parts.append(moments(model).w4)
    except (DataMissingError, InputError):
        notes.append("W4 part omitted: conductor data unavailable")
    return GaussianDensity(delta=delta, linear=linear,
                           error_shape=float(sum(parts)),
                           parts=tuple(parts), notes=tuple(notes))


def density_chebyshev_bound(model: BiasModel) -> float:
    """Lower bound 1 - 2/B^2 for highly biased races.

    Requires mean >= 4 and a positive, large enough bias factor.  "Large
    enough" is unquantified at the source; this artifact gates at the
    vacuity threshold B > sqrt(2), below which the bound says nothing.
    """
    b = bias_factor(model)
    if not b > math.sqrt(2.0):
        raise InputError(
            "hypothesis unmet: bias factor must be positive and large "
            f"enough (> sqrt(2), else the bound is vacuous); got {b}")
    if not model.mean >= 4:
        raise InputError(
            f"hypothesis unmet: mean must be at least 4, got {model.mean}")
    if math.isinf(b):
        return 1.0
    return 1.0 - 2.0 / (b * b)


@dataclass(frozen=True)
class LargeDeviationBounds:
    """Two-sided tail bounds P[|X - mean| >= V], when their gates hold."""

    upper: float | None
    lower: float | None
    tail_sum: float
    bulk_square_sum: float
    upper_condition: bool
    lower_condition: bool
    notes: tuple[str, ...]


def large_deviation_bounds(model: BiasModel, V: float, alpha: float = 4.0,
                           a1: float = 1.0, a2: float = 1.0
                           ) -> LargeDeviationBounds:
    """Tail bounds from the amplitude split at alpha.

    Upper bound exp(-V^2/(16 sum_{a<alpha} a^2)) when the large-amplitude
    mass sum_{a>=alpha} a is at most V/2; lower bound a1 exp(-a2 V^2 / sum)
    when it is at least 2V.  (a1, a2) default to (1, 1), not certified.
    """
    if V < 0:
        raise InputError("V must be nonnegative")
    if alpha <= 0:
        raise InputError("alpha must be positive")
    amps = model.amplitudes
    tail = float(amps[amps >= alpha].sum())
    bulk = float(np.sum(amps[amps < alpha] ** 2))
    upper = lower = None
    if tail <= V / 2.0:
        if bulk > 0:
            upper = math.exp(-V * V / (16.0 * bulk))
        else:
            upper = 1.0 if V == 0 else 0.0
    if tail >= 2.0 * V:
        if bulk > 0:
            lower = a1 * math.exp(-a2 * V * V / bulk)
        else:
            lower = a1 if V == 0 else 0.0
    return LargeDeviationBounds(
        upper=upper, lower=lower, tail_sum=tail, bulk_square_sum=bulk,
        upper_condition=tail <= V / 2.0, lower_condition=tail >= 2.0 * V,
        notes=(NOT_CERTIFIED,))


# ---------------------------------------------------------------------------
# structural diagnostics


def _identity_class(group: gr.FiniteGroup) -> int:
    cols = np.flatnonzero(group.class_sizes == 1)
    for j in cols:
        if np.allclose(group.char_table[:, j], group.degrees):
            return int(j)
    raise InvariantError("no identity class found in the character table")


@dataclass(frozen=True)
class DiagnosticReport:
    """Structural inequalities around the race, with measured slack."""

    weighted_second_moment: float
    sandwich_lower: float
    sandwich_upper: float
    sandwich_upper_display: float
    sandwich_holds: bool
    mean_bound: float
    mean_defect: float
    eta: float
    eta_threshold: float
    eta_qualifying: int
    eta_max_ratio: float
    notes: tuple[str, ...]

    def lines(self) -> tuple[str, ...]:
        s = self
        out = [
            f"sum chi(1)|c|^2 = {s.weighted_second_moment:.6g} in "
            f"[{s.sandwich_lower:.6g}, {s.sandwich_upper:.6g}]"
            f" ({'ok' if s.sandwich_holds else 'VIOLATED'})",
            f"|mean| bound {s.mean_bound:.6g}, defect {s.mean_defect:.6g}",
            f"eta = {s.eta:.6g} (threshold {s.eta_threshold:.6g}, "
            f"{s.eta_qualifying} qualifying, max ratio {s.eta_max_ratio:.6g})",
        ]
        out.extend(s.notes)
        return tuple(out)


def diagnostic_bounds(model: BiasModel, spec: ExtensionSpec,
                      t: gr.ClassFunction) -> DiagnosticReport:
    """Evaluate the variance-structure sandwich, mean bound, and eta.

    The sandwich brackets sum chi(1)|c|^2 by norm2^3/(norm1 sqrt(#supp))
    below and sqrt(|G+|) norm2^2 above; the squared upper form is the
    scale-correct one, the unsquared display value is reported alongside.
    """
    gplus = spec.group_plus
    group = spec.group()
    coeffs = spec.induced_fourier(t)
    tol = SUPPORT_TOL * max(1.0, float(np.abs(coeffs).max()))
    supp = np.flatnonzero(np.abs(coeffs) > tol)
    notes = []
    if supp.size == 0:
        notes.append("empty support: sandwich skipped")
        s_val = lower = upper = upper_disp = 0.0
        holds = True
    else:
        c = np.abs(coeffs[supp])
        degs = gplus.degrees[supp]
        s_val = float(np.sum(degs * c ** 2))
        n1 = float(np.sum(degs * c))
        n2 = float(np.sqrt(np.sum(c ** 2)))
        lower = n2 ** 3 / (n1 * math.sqrt(supp.size))
        upper = math.sqrt(gplus.order) * n2 ** 2
        upper_disp = math.sqrt(gplus.order) * n2
        holds = bool(lower <= s_val * (1 + 1e-12) and
                     s_val <= upper * (1 + 1e-12))

    n_real = max(int((gr.frobenius_schur(group) != 0).sum()),
                 int((gr.frobenius_schur(gplus) != 0).sum()))
    mean_bound = ((gr.norm_two(t) + model.norm_two_plus)
                  * math.sqrt(n_real))
    mean_defect = mean_bound - abs(model.mean)

    if supp.size:
        n1 = float(np.sum(gplus.degrees[supp] * np.abs(coeffs[supp])))
        n2 = float(np.sqrt(np.sum(np.abs(coeffs[supp]) ** 2)))
        threshold = n2 / (n1 * math.sqrt(2.0 * gplus.n_classes))
    else:
        threshold = 0.0
    id_class = _identity_class(gplus)
    other = np.arange(gplus.n_classes) != id_class
    qualifying = [int(i) for i in supp if gplus.degrees[i] >= threshold]
    if qualifying:
        ratios = [float(np.abs(gplus.char_table[i, other]).max()
                        / gplus.degrees[i]) for i in qualifying]
        max_ratio = max(ratios)
        eta = 1.0 - max_ratio
    else:
        max_ratio = math.nan
        eta = 0.0
        notes.append("no qualifying characters: eta set to 0")
    notes.append(SHAPE_ONLY)
    return DiagnosticReport(
        weighted_second_moment=s_val, sandwich_lower=lower,
        sandwich_upper=upper, sandwich_upper_display=upper_disp,
        sandwich_holds=holds, mean_bound=mean_bound, mean_defect=mean_defect,
        eta=eta, eta_threshold=threshold, eta_qualifying=len(qualifying),
        eta_max_ratio=max_ratio, notes=tuple(notes))


# ---------------------------------------------------------------------------
# normalized log-characteristic-function sandwich


@dataclass(frozen=True)
class SandwichReport:
    """Check of the normalized log-CF bounds on |xi| <= fraction * F."""

    xi: np.ndarray
    log_cf: np.ndarray
    upper_ok: bool
    certified_lower_ok: bool
    max_upper_violation: float
    w4_ratio: float
    f: float
    notes: tuple[str, ...]

    def __post_init__(self):
        for name in ("xi", "log_cf"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def log_cf_sandwich(model: BiasModel, n_points: int = 64,
                    fraction: float = 0.6) -> SandwichReport:
    """Sample log of the variance-normalized CF against its two bounds.

    On |xi| <= 0.6 F every Bessel argument stays below 12/5, where
    log J0(u) lies in [-u^2/4 - 0.1376 u^4, -u^2/4]; summing gives
    -xi^2/2 - 0.1376 sum u_i^4 <= log CF <= -xi^2/2.  The fourth-moment
    form of the lower bound is reported as the measured ratio against
    W4 xi^4 when conductors are available.
    """
    if model.variance <= 0 or model.n_terms == 0:
        raise InputError("sandwich needs a nondegenerate model")
    if not 0 < fraction <= 0.6:
        raise InputError("fraction must lie in (0, 0.6]")
    sigma = math.sqrt(model.variance)
    cmax = float(np.abs(model.coefficients).max())
    f = sigma / cmax
    xi = np.linspace(0.0, fraction * f, n_points + 1)[1:]
    u = np.outer(model.amplitudes, xi / sigma)
    j = bessel_j0(u)
    if (j <= 0).any():
        raise InvariantError("Bessel argument crossed its first zero on the "
                             "sandwich range; this contradicts |u| <= 12/5")
    log_cf = np.log(j).sum(axis=0)
    upper = -0.5 * xi ** 2
    quartic = (u ** 4).sum(axis=0)
    lower = upper - BESSEL_QUARTIC_CONSTANT * quartic
    upper_viol = float((log_cf - upper).max())
    lower_ok = bool((log_cf >= lower - 1e-9).all())
    notes = ["certified lower branch uses the per-term quartic constant "
             f"{BESSEL_QUARTIC_CONSTANT}"]
    w4_ratio = math.nan
    try:
        w4 = moments(model).w4
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = (upper - log_cf) / (w4 * xi ** 4)
        w4_ratio = float(np.nanmax(ratios))
        notes.append("w4_ratio = max (upper - log CF)/(W4 xi^4), measured")
    except (DataMissingError, InputError):
        notes.append("W4 unavailable: quartic ratio not measured")
    return SandwichReport(
        xi=xi, log_cf=log_cf, upper_ok=bool(upper_viol <= 1e-9),
        certified_lower_ok=lower_ok, max_upper_violation=upper_viol,
        w4_ratio=w4_ratio, f=f, notes=tuple(notes))


# ---------------------------------------------------------------------------
# per-run CSV report row


REPORT_COLUMNS = (
    "model", "mean", "variance", "B", "W4", "F",
    "delta_inversion", "inversion_error", "delta_mc", "mc_se",
    "delta_gaussian", "chebyshev_lower", "truncation_height", "flags",
)


def report_row(model: BiasModel,
               inversion: InversionDensity | None = None,
               mc: MonteCarloDensity | None = None,
               gaussian: GaussianDensity | None = None) -> dict[str, str]:
    """One CSV row per model run; blank cells for routes not computed."""

    def fmt(x, digits=10):
        if x is None:
            return ""
        if isinstance(x, float) and math.isnan(x):
            return "nan"
        return f"{x:.{digits}g}"

    try:
        mom = moments(model)
        w4, fval = mom.w4, mom.f
    except (DataMissingError, InputError):
        w4 = fval = None
    try:
        cheb = density_chebyshev_bound(model)
    except InputError:
        cheb = None
    return {
        "model": model.label,
        "mean": fmt(model.mean),
        "variance": fmt(model.variance),
        "B": fmt(bias_factor(model)),
        "W4": fmt(w4),
        "F": fmt(fval),
        "delta_inversion": fmt(inversion.delta if inversion else None),
        "inversion_error": fmt(inversion.error if inversion else None, 3),
        "delta_mc": fmt(mc.delta if mc else None),
        "mc_se": fmt(mc.standard_error if mc else None, 3),
        "delta_gaussian": fmt(gaussian.delta if gaussian else None),
        "chebyshev_lower": fmt(cheb),
        "truncation_height": fmt(model.truncation_height, 6),
        "flags": model.assumptions.describe(),
    }
