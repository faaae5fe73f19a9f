import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings, strategies as st

from primebias import biasmodel as bm
from primebias import families as fam
from primebias import groups as gr
from primebias import zerodata as zd
from primebias.errors import DataMissingError, InputError, InvariantError


def toy_zeros(gammas, label="toy", central=0, logA=1.0):
    gammas = sorted(gammas)
    return zd.ZeroSet(label=label, ordinates=gammas,
                      multiplicities=[1] * len(gammas),
                      height=gammas[-1] if gammas else 1.0,
                      central_multiplicity=central,
                      log_conductor=logA, degree=1)


def mod4_model(**kwargs):
    spec = fam.cyclotomic_extension(4)
    g = spec.group_plus
    t = gr.race_function(g, g.index_of_class("3"), g.index_of_class("1"))
    nontrivial = 1 - g.trivial_char_index
    return bm.build_model(
        spec, t, {nontrivial: zd.load_bundled("dirichlet-4")}, **kwargs)


# -- Bessel evaluation


def test_bessel_j0_matches_scipy():
    u = np.linspace(-120.0, 120.0, 4001)
    ours = bm.bessel_j0(u)
    ref = scipy.special.j0(u)
    assert np.abs(ours - ref).max() < 1e-12


def test_bessel_j0_scalar_and_quadrature():
    assert bm.bessel_j0(0.0) == 1.0
    for u in (0.5, 3.0, 11.9, 12.1, 40.0):
        assert math.isclose(bm.bessel_j0(u), bm.bessel_j0_quadrature(u),
                            abs_tol=1e-9)


# -- assumptions


def test_assumptions_validation():
    with pytest.raises(InputError):
        bm.Assumptions(ord_term_sign=0)
    with pytest.raises(InputError):
        bm.Assumptions(bm=True)  # m0 missing
    a = bm.Assumptions(bm=True, m0=2, ord_term_sign=-1)
    assert "BM(m0=2)" in a.describe()
    assert "ord-sign-flipped" in a.describe()
    assert bm.Assumptions(ac=False, grh=False, li=False).describe() == "none"


# -- direct model assembly


def test_variance_matches_b_sums():
    zs = toy_zeros([5.0, 9.0, 14.0])
    model = bm.model_from_zero_data([1.5], [zs])
    expected = 1.5**2 * zd.b_sums(zs).b0
    assert math.isclose(model.variance, expected, rel_tol=1e-12)
    assert model.n_terms == 3
    assert model.mean == 0.0


def test_central_zero_enters_mean_not_variance():
    zs = toy_zeros([5.0, 9.0], central=1)
    base = bm.model_from_zero_data([2.0], [toy_zeros([5.0, 9.0])])
    model = bm.model_from_zero_data([2.0], [zs], assume=bm.Assumptions(li=False))
    assert math.isclose(model.variance, base.variance, rel_tol=1e-12)
    assert math.isclose(model.mean, 4.0, rel_tol=1e-12)
    flipped = bm.model_from_zero_data(
        [2.0], [zs], assume=bm.Assumptions(li=False, ord_term_sign=-1))
    assert math.isclose(flipped.mean, -4.0, rel_tol=1e-12)


def test_explicit_mean_overrides_central_term():
    zs = toy_zeros([5.0, 9.0])
    model = bm.model_from_zero_data([1.0], [zs], mean=-3.0)
    assert model.mean == -3.0


def test_shared_zeros_merge_coherently():
    zs = toy_zeros([6.0, 11.0])
    free = bm.Assumptions(li=False)
    merged = bm.model_from_zero_data([1.0, 2.0], [zs, zs], assume=free)
    # Nudge the second column past the merge window to model distinct zeros.
    nudged = toy_zeros([6.0 + 1e-6, 11.0 + 1e-6], label="nudged")
    separate = bm.model_from_zero_data([1.0, 2.0], [zs, nudged], assume=free)
    b0 = zd.b_sums(zs).b0
    # Shared ordinates add their orders before squaring: (1+2)^2, not 1+4.
    assert math.isclose(merged.variance, 9.0 * b0, rel_tol=1e-12)
    assert math.isclose(separate.variance, 5.0 * b0, rel_tol=1e-6)
    assert merged.n_terms == 2 and separate.n_terms == 4


def test_full_cancellation_gives_dirac():
    zs = toy_zeros([6.0, 11.0])
    free = bm.Assumptions(li=False)
    model = bm.model_from_zero_data([1.0, -1.0], [zs, zs], assume=free)
    assert model.is_dirac
    assert model.variance == 0.0
    assert model.cancelled_terms == 2
    assert math.isnan(bm.bias_factor(model))
    shifted = bm.model_from_zero_data([1.0, -1.0], [zs, zs], mean=0.25,
                                      assume=free)
    assert bm.bias_factor(shifted) == math.inf


def test_model_input_validation():
    zs = toy_zeros([5.0])
    with pytest.raises(InputError):
        bm.model_from_zero_data([1.0, 2.0], [zs])
    with pytest.raises(InputError):
        bm.model_from_zero_data([1.0], [zs], degrees=[0])
    with pytest.raises(InputError):
        bm.model_from_zero_data([[1.0]], [zs])


def test_li_gate_rejects_multiplicities():
    zs = zd.ZeroSet(label="m2", ordinates=[4.0], multiplicities=[2],
                    height=5.0, log_conductor=1.0, degree=1)
    with pytest.raises(InputError):
        bm.model_from_zero_data([1.0], [zs])
    model = bm.model_from_zero_data([1.0], [zs],
                                    assume=bm.Assumptions(li=False))
    assert model.n_terms == 1
    # order 2 at one ordinate: amplitude 2*2/sqrt(1/4+16)
    expected = 2.0 * 2.0 / math.sqrt(0.25 + 16.0)
    assert math.isclose(model.amplitudes[0], expected, rel_tol=1e-12)


# -- catalog-driven assembly


def test_build_model_mod4():
    model = mod4_model()
    assert model.mean == 2.0
    assert model.support_size == 1
    assert model.n_terms == 1000
    assert model.truncation_height == zd.load_bundled("dirichlet-4").height
    expected_var = 4.0 * zd.b_sums(zd.load_bundled("dirichlet-4")).b0
    assert math.isclose(model.variance, expected_var, rel_tol=1e-12)


def test_build_model_missing_zero_data():
    spec = fam.cyclotomic_extension(4)
    g = spec.group_plus
    t = gr.race_function(g, g.index_of_class("3"), g.index_of_class("1"))
    with pytest.raises(DataMissingError):
        bm.build_model(spec, t, {})


def test_single_class_race_needs_zeta():
    # t with nonzero trivial coefficient pulls the zeta column into support.
    spec = fam.cyclotomic_extension(4)
    g = spec.group_plus
    t = gr.race_function(g, g.index_of_class("3"))
    nontrivial = 1 - g.trivial_char_index
    with pytest.raises(DataMissingError):
        bm.build_model(spec, t, {nontrivial: zd.load_bundled("dirichlet-4")})
    model = bm.build_model(spec, t, {
        nontrivial: zd.load_bundled("dirichlet-4"),
        g.trivial_char_index: zd.load_bundled("zeta")})
    assert model.support_size == 2


def test_build_model_wrong_group():
    spec = fam.cyclotomic_extension(4)
    t = gr.indicator(gr.build_group("cyclic", 3), 0)
    with pytest.raises(InputError):
        bm.build_model(spec, t, {})


def test_vanishing_induction_forces_dirac():
    # Criterion: a race erased by induction is a Dirac mass at zero.
    spec = fam.radical_extension(3, 5, relative=True)
    sub = spec.group()
    coeffs = np.zeros(sub.n_classes, dtype=complex)
    coeffs[1] = 1.0
    coeffs[4] = -1.0  # chi and its inverse fuse upstairs
    t = gr.inverse_fourier(sub, coeffs)
    induced = spec.induced_fourier(t)
    assert np.abs(induced).max() < 1e-12
    model = bm.build_model(spec, t, {})
    assert model.is_dirac and model.variance == 0.0
    assert abs(model.mean) < 1e-12


# -- moments and bias factor


def test_moments_formulas():
    z1 = toy_zeros([5.0, 9.0], label="a", logA=2.0)
    z2 = toy_zeros([4.0, 7.0], label="b", logA=3.0)
    model = bm.model_from_zero_data([1.0, 2.0], [z1, z2])
    mom = bm.moments(model)
    s2 = 1.0 * 2.0 + 4.0 * 3.0
    w4_direct = (1.0 * 2.0 + 16.0 * 3.0) / s2**2
    assert math.isclose(mom.w4, w4_direct, rel_tol=1e-12)
    assert math.isclose(mom.f, math.sqrt(model.variance) / 2.0, rel_tol=1e-12)
    assert mom.f_floor > 0


def test_moments_require_conductors():
    zs = zd.ZeroSet(label="bare", ordinates=[5.0], multiplicities=[1],
                    height=6.0)
    model = bm.model_from_zero_data([1.0], [zs])
    with pytest.raises(DataMissingError):
        bm.moments(model)


def test_bias_factor_signs():
    zs = toy_zeros([10.0])
    up = bm.model_from_zero_data([1.0], [zs], mean=1.0)
    down = bm.model_from_zero_data([1.0], [zs], mean=-1.0)
    assert bm.bias_factor(up) > 0 > bm.bias_factor(down)
    assert math.isclose(bm.bias_factor(up), 1.0 / math.sqrt(up.variance),
                        rel_tol=1e-12)


# -- characteristic function


def test_char_function_values():
    zs = toy_zeros([8.0])
    model = bm.model_from_zero_data([1.0], [zs], mean=0.7)
    amp = model.amplitudes[0]
    for xi in (0.0, 0.3, 2.0):
        expected = np.exp(1j * 0.7 * xi) * scipy.special.j0(amp * xi)
        assert abs(bm.char_function(model, xi) - expected) < 1e-12
    grid = np.linspace(0.0, 5.0, 7).reshape(7, 1)
    out = bm.char_function(model, grid)
    assert out.shape == grid.shape
    assert abs(bm.char_function(model, 0.0) - 1.0) < 1e-15


def test_char_function_modulus_bounded():
    model = mod4_model()
    xi = np.linspace(0.0, 30.0, 500)
    assert (np.abs(bm.char_function(model, xi)) <= 1.0 + 1e-12).all()


# -- inversion route


def test_inversion_gates():
    zs = toy_zeros([6.0, 11.0])
    dirac = bm.model_from_zero_data([1.0, -1.0], [zs, zs],
                                    assume=bm.Assumptions(li=False))
    with pytest.raises(InputError):
        bm.density_inversion(dirac)
    single = bm.model_from_zero_data([1.0], [toy_zeros([6.0])])
    with pytest.raises(InputError):
        bm.density_inversion(single)
    good = bm.model_from_zero_data([1.0], [zs])
    with pytest.raises(InputError):
        bm.density_inversion(good, precision=0.0)


def test_inversion_symmetric_model_is_half():
    model = bm.model_from_zero_data([1.0], [toy_zeros([5.0, 9.0, 14.0])])
    result = bm.density_inversion(model)
    assert abs(result.delta - 0.5) <= max(result.error, 1e-9)


def test_inversion_reflection_symmetry():
    zs = toy_zeros([5.0, 9.0, 14.0])
    up = bm.density_inversion(bm.model_from_zero_data([1.0], [zs], mean=0.2))
    down = bm.density_inversion(bm.model_from_zero_data([1.0], [zs], mean=-0.2))
    assert abs(up.delta + down.delta - 1.0) <= 2e-6


def test_inversion_sure_winner():
    # Mean beyond the amplitude sum: the variable is surely positive.
    zs = toy_zeros([30.0, 47.0])
    model = bm.model_from_zero_data([0.1], [zs], mean=2.0)
    result = bm.density_inversion(model)
    assert abs(result.delta - 1.0) <= max(result.error, 1e-7)


def test_inversion_matches_monte_carlo_smoke():
    model = mod4_model()
    inv = bm.density_inversion(model)
    mc = bm.density_monte_carlo(model, 200_000, seed=3)
    assert abs(inv.delta - mc.delta) <= 4 * mc.standard_error + inv.error


# -- Monte Carlo route


def test_monte_carlo_deterministic():
    model = mod4_model()
    a = bm.density_monte_carlo(model, 50_000, seed=1)
    b = bm.density_monte_carlo(model, 50_000, seed=1)
    c = bm.density_monte_carlo(model, 50_000, seed=2)
    assert a == b
    assert a.delta != c.delta
    assert a.samples == 50_000
    assert a.shards == (50_000 + bm.MC_SHARD - 1) // bm.MC_SHARD
    assert math.isclose(
        a.standard_error,
        math.sqrt(a.delta * (1 - a.delta) / a.samples), rel_tol=1e-12)


def test_monte_carlo_sample_moments_track_model():
    model = mod4_model()
    mc = bm.density_monte_carlo(model, 400_000, seed=5)
    assert abs(mc.sample_mean - model.mean) < 0.01
    assert abs(mc.sample_variance - model.variance) < 0.01


def test_monte_carlo_minimum_samples():
    model = mod4_model()
    with pytest.raises(InputError):
        bm.density_monte_carlo(model, 100, seed=0)


def test_monte_carlo_dirac():
    zs = toy_zeros([6.0])
    model = bm.model_from_zero_data([1.0, -1.0], [zs, zs], mean=0.5,
                                    assume=bm.Assumptions(li=False))
    mc = bm.density_monte_carlo(model, 10_000, seed=0)
    assert mc.delta == 1.0 and mc.sample_variance == 0.0


# -- Gaussian route and bias bounds


def test_gaussian_symmetric():
    model = bm.model_from_zero_data([1.0], [toy_zeros([5.0, 9.0])])
    est = bm.density_gaussian(model)
    assert est.delta == 0.5
    assert math.isclose(est.linear, 0.5, rel_tol=1e-12)


def test_gaussian_matches_cdf():
    model = mod4_model()
    est = bm.density_gaussian(model)
    b = bm.bias_factor(model)
    assert math.isclose(est.delta, 0.5 * (1 + math.erf(b / math.sqrt(2))),
                        rel_tol=1e-12)
    assert est.error_shape >= abs(b) ** 3


def test_gaussian_degenerate_cases():
    zs = toy_zeros([6.0])
    free = bm.Assumptions(li=False)
    dirac_up = bm.model_from_zero_data([1.0, -1.0], [zs, zs], mean=1.0,
                                       assume=free)
    assert bm.density_gaussian(dirac_up).delta == 1.0
    dirac_zero = bm.model_from_zero_data([1.0, -1.0], [zs, zs], assume=free)
    assert math.isnan(bm.density_gaussian(dirac_zero).delta)


def test_chebyshev_bound_gates_and_value():
    model = mod4_model()  # B = 2.55, mean = 2 < 4: hypothesis unmet
    with pytest.raises(InputError):
        bm.density_chebyshev_bound(model)
    zs = toy_zeros([40.0, 61.0])
    strong = bm.model_from_zero_data([0.3], [zs], mean=4.5)
    value = bm.density_chebyshev_bound(strong)
    b = bm.bias_factor(strong)
    assert math.isclose(value, 1.0 - 2.0 / b**2, rel_tol=1e-12)
    weak = bm.model_from_zero_data([3.0], [toy_zeros([0.9])], mean=4.0)
    if bm.bias_factor(weak) <= math.sqrt(2):
        with pytest.raises(InputError):
            bm.density_chebyshev_bound(weak)


def test_large_deviation_bounds():
    zs = toy_zeros(list(np.linspace(5.0, 120.0, 40)))
    model = bm.model_from_zero_data([1.0], [zs])
    amps = model.amplitudes
    v = 1.0
    out = bm.large_deviation_bounds(model, v, alpha=4.0)
    assert out.tail_sum == 0.0
    bulk = float(np.sum(amps**2))
    assert math.isclose(out.bulk_square_sum, bulk, rel_tol=1e-12)
    assert math.isclose(out.upper, math.exp(-v * v / (16 * bulk)), rel_tol=1e-12)
    assert out.lower is None  # tail 0 < 2V
    at_zero = bm.large_deviation_bounds(model, 0.0)
    assert at_zero.lower == 1.0
    with pytest.raises(InputError):
        bm.large_deviation_bounds(model, -1.0)
    with pytest.raises(InputError):
        bm.large_deviation_bounds(model, 1.0, alpha=0.0)


def test_large_deviation_split():
    # One huge amplitude lands in the tail side of the alpha split.
    zs = toy_zeros([0.3])
    model = bm.model_from_zero_data([3.0], [zs], assume=bm.Assumptions(li=False))
    amp = model.amplitudes[0]
    assert amp > 4.0
    out = bm.large_deviation_bounds(model, amp / 8.0)
    assert out.lower is not None and out.upper is None


# -- structural diagnostics


def test_diagnostic_bounds_mod4():
    spec = fam.cyclotomic_extension(4)
    g = spec.group_plus
    t = gr.race_function(g, g.index_of_class("3"), g.index_of_class("1"))
    model = mod4_model()
    rep = bm.diagnostic_bounds(model, spec, t)
    assert rep.sandwich_holds
    assert rep.sandwich_lower <= rep.weighted_second_moment
    assert rep.weighted_second_moment <= rep.sandwich_upper
    assert rep.mean_defect >= 0.0
    assert 0.0 <= rep.eta <= 1.0
    assert len(rep.lines()) >= 3


def test_log_cf_sandwich_mod4():
    model = mod4_model()
    rep = bm.log_cf_sandwich(model)
    assert rep.upper_ok and rep.certified_lower_ok
    assert rep.max_upper_violation <= 1e-9
    assert rep.f > 0
    with pytest.raises(InputError):
        bm.log_cf_sandwich(model, fraction=0.9)
    zs = toy_zeros([6.0])
    dirac = bm.model_from_zero_data([1.0, -1.0], [zs, zs],
                                    assume=bm.Assumptions(li=False))
    with pytest.raises(InputError):
        bm.log_cf_sandwich(dirac)


# -- report row


def test_report_row_columns():
    model = mod4_model()
    inv = bm.density_inversion(model)
    row = bm.report_row(model, inversion=inv)
    assert tuple(row) == bm.REPORT_COLUMNS
    assert row["delta_mc"] == ""
    assert row["model"] == "cyclotomic"
    assert float(row["delta_inversion"]) == pytest.approx(inv.delta)
    assert "LI" in row["flags"]


@given(st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_variance_term_sum_invariant(seed):
    rng = np.random.default_rng(seed)
    gammas = np.sort(rng.uniform(1.0, 300.0, size=25))
    gammas += np.arange(25) * 1e-6  # enforce strict increase
    zs = zd.ZeroSet(label="rand", ordinates=gammas,
                    multiplicities=np.ones(25, dtype=int),
                    height=float(gammas[-1]))
    c = complex(rng.standard_normal(), rng.standard_normal())
    model = bm.model_from_zero_data([c], [zs])
    direct = 0.5 * float(np.sum(model.amplitudes**2))
    assert math.isclose(model.variance, direct, rel_tol=1e-12)
    assert math.isclose(model.variance, abs(c) ** 2 * zd.b_sums(zs).b0,
                        rel_tol=1e-12)
