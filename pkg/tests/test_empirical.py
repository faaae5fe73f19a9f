import math

import mpmath
import numpy as np
import pytest
import sympy
from sympy.ntheory.residue_ntheory import is_nthpow_residue

from primebias import empirical as emp
from primebias import families as fam
from primebias import groups as gr
from primebias import zerodata as zd
from primebias.errors import DataMissingError, InputError, InvariantError


@pytest.fixture(scope="module")
def mod4_classified():
    return emp.sieve_classify(fam.cyclotomic_extension(4), 10**5)


@pytest.fixture(scope="module")
def radical_classified():
    return emp.sieve_classify(fam.radical_extension(3, 5), 10**4)


def mod4_race(classification) -> gr.ClassFunction:
    group = classification.group
    values = np.zeros(group.n_classes)
    values[group.class_names.index("3")] = 1.0
    values[group.class_names.index("1")] = -1.0
    return gr.ClassFunction(group, values)


# -- prime sieve


def test_prime_count_oracles():
    assert emp.prime_count(10**4) == 1229
    assert emp.prime_count(100) == 25
    assert emp.prime_count(2) == 1
    assert emp.prime_count(1) == 0


def test_prime_blocks_match_sympy():
    blocks = list(emp.iter_prime_blocks(10**4))
    primes = np.concatenate(blocks)
    assert primes.tolist() == list(sympy.primerange(2, 10**4 + 1))


def test_prime_blocks_edges():
    assert [b.tolist() for b in emp.iter_prime_blocks(2)] == [[2]]
    assert np.concatenate(list(emp.iter_prime_blocks(3))).tolist() == [2, 3]
    assert list(emp.iter_prime_blocks(1)) == []


def test_prime_blocks_range_cap():
    with pytest.raises(InputError):
        list(emp.iter_prime_blocks(emp.X_MAX_LIMIT + 1))


def test_prime_blocks_worker_determinism_across_blocks():
    # 9e6 spans two sieve blocks, so the thread pool actually interleaves
    x_max = 9_000_000
    serial = list(emp.iter_prime_blocks(x_max, workers=1))
    pooled = list(emp.iter_prime_blocks(x_max, workers=3))
    assert len(serial) > 1
    assert len(serial) == len(pooled)
    for a, b in zip(serial, pooled):
        assert np.array_equal(a, b)
    total = sum(int(b.size) for b in serial)
    assert total == 602489  # pi(9e6)
    merged = np.concatenate(serial)
    assert (np.diff(merged) > 0).all()


# -- per-family classification


def test_cyclotomic_classes_follow_residues():
    spec = fam.cyclotomic_extension(7)
    cl = emp.sieve_classify(spec, 10**4)
    assert cl.ramified == (7,)
    names = cl.group.class_names
    for p, c in zip(cl.primes.tolist(), cl.classes.tolist()):
        assert names[c] == str(p % 7)


@pytest.mark.parametrize("d,ram", [(5, (5,)), (12, (2, 3)), (-23, (23,))])
def test_quadratic_classes_follow_kronecker(d, ram):
    spec = fam.quadratic_extension(d)
    cl = emp.sieve_classify(spec, 10**4)
    assert cl.ramified == ram
    names = cl.group.class_names
    for p, c in zip(cl.primes.tolist(), cl.classes.tolist()):
        if p == 2:
            continue  # handled below by the d mod 8 rule
        want = "0" if sympy.jacobi_symbol(d, p) == 1 else "1"
        assert names[c] == want


def test_quadratic_class_of_two():
    # (d|2) = +1 iff d = 1 mod 8; 5 is inert at 2, -23 splits
    cl = emp.sieve_classify(fam.quadratic_extension(5), 100)
    names = cl.group.class_names
    assert names[cl.classes[cl.primes == 2][0]] == "1"
    cl = emp.sieve_classify(fam.quadratic_extension(-23), 100)
    names = cl.group.class_names
    assert names[cl.classes[cl.primes == 2][0]] == "0"


def test_multiquadratic_classes_follow_legendre_bits():
    spec = fam.multiquadratic_extension(3, 5)
    cl = emp.sieve_classify(spec, 10**4)
    assert cl.ramified == (2, 3, 5)
    names = cl.group.class_names
    for p, c in zip(cl.primes.tolist(), cl.classes.tolist()):
        bits = ["1" if sympy.jacobi_symbol(p, q) == -1 else "0"
                for q in (3, 5)]
        assert names[c] == ".".join(bits)


def test_radical_classes_follow_power_residues(radical_classified):
    cl = radical_classified
    assert cl.ramified == (3, 5)
    names = cl.group.class_names
    for p, c in zip(cl.primes.tolist(), cl.classes.tolist()):
        if p % 5 == 1:
            want = "id" if is_nthpow_residue(3, 5, p) else "unipotent"
        else:
            want = f"t{p % 5}"
        assert names[c] == want


def test_sieve_classify_rejects_unsupported_input():
    with pytest.raises(InputError):
        emp.sieve_classify(fam.hilbert_class_field(-23), 10**4)
    with pytest.raises(InputError):
        emp.sieve_classify(fam.radical_extension(3, 5, relative=True), 10**4)
    with pytest.raises(InputError):
        emp.sieve_classify(fam.cyclotomic_extension(4), emp.X_MAX_LIMIT + 1)


def test_sieve_classify_worker_determinism(mod4_classified):
    pooled = emp.sieve_classify(fam.cyclotomic_extension(4), 10**5, workers=4)
    assert np.array_equal(pooled.primes, mod4_classified.primes)
    assert np.array_equal(pooled.classes, mod4_classified.classes)
    assert pooled.ramified == mod4_classified.ramified


def test_classification_consistency(mod4_classified):
    cl = mod4_classified
    assert cl.class_counts().sum() == cl.primes.size
    assert cl.primes.size + len(cl.ramified) == 9592  # pi(1e5)
    with pytest.raises(ValueError):
        cl.primes[0] = 99  # frozen storage
    with pytest.raises(InputError):
        emp.Classification(spec=cl.spec, x_max=100,
                           primes=np.array([3, 5]), classes=np.array([0]),
                           ramified=(2,))


# -- logarithmic integral and checkpoints


def test_logarithmic_integral_matches_mpmath():
    for x in (10.0, 1e4, 1e6):
        ref = float(mpmath.li(x) - mpmath.li(2))
        assert emp.logarithmic_integral(x) == pytest.approx(ref, rel=1e-9)
    assert emp.logarithmic_integral(2.0) == 0.0
    assert emp.logarithmic_integral(1.5) == 0.0


def test_logarithmic_integral_vectorized_unsorted():
    xs = np.array([1e4, 10.0, 1e6, 2.0])
    out = emp.logarithmic_integral(xs)
    assert out.shape == xs.shape
    for xi, oi in zip(xs, out):
        ref = float(mpmath.li(xi) - mpmath.li(2)) if xi > 2 else 0.0
        assert oi == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_default_checkpoints():
    cps = emp.default_checkpoints(10**6)
    assert cps.size == emp.DEFAULT_CHECKPOINTS
    assert cps[0] == pytest.approx(10**3)
    assert cps[-1] == pytest.approx(10**6)
    with pytest.raises(InputError):
        emp.default_checkpoints(10**3)


# -- race series


def test_race_series_counts_and_E_hand_check():
    cl = emp.sieve_classify(fam.cyclotomic_extension(4), 10**4)
    t = mod4_race(cl)
    cps = np.array([2000.0, 5000.0, 10**4])
    rs = emp.race_series(cl, t, checkpoints=cps)

    primes = list(sympy.primerange(3, 10**4 + 1))
    for j, x in enumerate(cps):
        c1 = sum(1 for p in primes if p <= x and p % 4 == 1)
        c3 = sum(1 for p in primes if p <= x and p % 4 == 3)
        names = cl.group.class_names
        assert rs.counts[names.index("1"), j] == c1
        assert rs.counts[names.index("3"), j] == c3
        assert rs.pi_values[j] == c1 + c3 + 1  # the ramified prime 2
        y = math.log(x)
        # that(1) = 0 for a race, so Li drops out of E
        assert rs.E_values[j] == pytest.approx(
            y * math.exp(-0.5 * y) * (c3 - c1), rel=1e-12)
    assert rs.family_label == "cyclotomic"
    assert np.allclose(rs.y_values, np.log(cps))


def test_race_series_nonzero_mean_uses_li():
    cl = emp.sieve_classify(fam.cyclotomic_extension(4), 10**4)
    group = cl.group
    values = np.zeros(group.n_classes)
    idx = group.class_names.index("1")
    values[idx] = 1.0  # indicator, mean 1/2
    t = gr.ClassFunction(group, values)
    cps = np.array([5000.0, 10**4])
    rs = emp.race_series(cl, t, checkpoints=cps)
    for j, x in enumerate(cps):
        count = int(rs.counts[idx, j])
        li = float(mpmath.li(x) - mpmath.li(2))
        y = math.log(x)
        want = y * math.exp(-0.5 * y) * (count - 0.5 * li)
        assert rs.E_values[j] == pytest.approx(want, rel=1e-9)


def test_race_series_beta_rescaling(mod4_classified):
    t = mod4_race(mod4_classified)
    base = emp.race_series(mod4_classified, t, beta=0.5)
    slower = emp.race_series(mod4_classified, t, beta=0.25)
    ratio = slower.E_values / base.E_values
    assert np.allclose(ratio, np.exp(0.25 * base.y_values), rtol=1e-12)


def test_race_series_input_checks(mod4_classified):
    t = mod4_race(mod4_classified)
    with pytest.raises(InputError):
        emp.race_series(mod4_classified, t, checkpoints=[5000.0])
    with pytest.raises(InputError):
        emp.race_series(mod4_classified, t, checkpoints=[5000.0, 4000.0])
    with pytest.raises(InputError):
        emp.race_series(mod4_classified, t, checkpoints=[5000.0, 2 * 10**5])
    other = gr.build_group("cyclic", 3)
    with pytest.raises(InputError):
        emp.race_series(mod4_classified,
                        gr.ClassFunction(other, np.ones(3)))
    group = mod4_classified.group
    with pytest.raises(InputError):
        emp.race_series(mod4_classified,
                        gr.ClassFunction(group, np.array([1j, -1j])))


def toy_series(e_values, n: int = 120) -> emp.RaceSeries:
    cps = np.geomspace(1e3, 1e5, n)
    counts = (np.arange(n, dtype=np.int64) + 5)[None, :]
    return emp.RaceSeries(
        family_label="toy", class_names=("a",), t_values=np.array([1.0]),
        checkpoints=cps, counts=counts, pi_values=counts.sum(axis=0),
        E_values=np.asarray(e_values, dtype=float), beta=0.5, ramified=())


def test_race_series_invariants():
    n = 120
    with pytest.raises(InvariantError):
        series = toy_series(np.ones(n))
        emp.RaceSeries(
            family_label="toy", class_names=("a",),
            t_values=series.t_values, checkpoints=series.checkpoints,
            counts=np.arange(n, 0, -1, dtype=np.int64)[None, :],
            pi_values=series.pi_values, E_values=series.E_values,
            beta=0.5, ramified=())
    with pytest.raises(InvariantError):
        series = toy_series(np.ones(n))
        emp.RaceSeries(
            family_label="toy", class_names=("a",),
            t_values=series.t_values, checkpoints=series.checkpoints,
            counts=series.counts, pi_values=series.pi_values + 1,
            E_values=series.E_values, beta=0.5, ramified=())
    with pytest.raises(InputError):
        series = toy_series(np.ones(n))
        emp.RaceSeries(
            family_label="toy", class_names=("a", "b"),
            t_values=series.t_values, checkpoints=series.checkpoints,
            counts=series.counts, pi_values=series.pi_values,
            E_values=series.E_values, beta=0.5, ramified=())


# -- empirical density


def test_density_constant_sign():
    n = 120
    always = emp.empirical_density(toy_series(np.ones(n)))
    assert always.value == 1.0
    assert always.band_lower == 1.0 and always.band_upper == 1.0
    never = emp.empirical_density(toy_series(-np.ones(n)))
    assert never.value == 0.0
    assert never.band_lower == 0.0 and never.band_upper == 0.0


def test_density_alternating_sign_interpolates_to_half():
    n = 120
    e = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    density = emp.empirical_density(toy_series(e))
    # each segment crosses at its midpoint, so every prefix is exactly half
    assert density.value == pytest.approx(0.5, abs=1e-12)
    assert density.band_lower == pytest.approx(0.5, abs=1e-12)
    assert density.band_upper == pytest.approx(0.5, abs=1e-12)


def test_density_requires_enough_checkpoints():
    with pytest.raises(InputError):
        emp.empirical_density(toy_series(np.ones(50), n=50))


def test_density_mod4_race_to_1e5(mod4_classified):
    # the only lead reversal below 1e5 sits between two checkpoints
    series = emp.race_series(mod4_classified, mod4_race(mod4_classified))
    density = emp.empirical_density(series)
    assert density.value == 1.0
    assert density.y_max == pytest.approx(math.log(10**5))
    assert density.running.size == series.checkpoints.size


# -- explicit formula check


def test_explicit_formula_psi_matches_brute_force():
    cl = emp.sieve_classify(fam.cyclotomic_extension(4), 5000)
    group = cl.group
    char_index = 1 - group.trivial_char_index
    report = emp.explicit_formula_check(
        cl, char_index, zd.load_bundled("dirichlet-4"), n_grid=8)
    chi = {int(name): group.char_table[char_index, j].real
           for j, name in enumerate(group.class_names)}
    direct = 0.0
    for p in sympy.primerange(3, 5001):
        pk = p
        while pk <= 5000:
            direct += chi[pk % 4] * math.log(p)
            pk *= p
    assert report.psi_sieve[-1] == pytest.approx(direct, rel=1e-12)
    assert np.allclose(report.residuals,
                       np.abs(report.psi_sieve - report.psi_formula))


def test_explicit_formula_measured_ratios(mod4_classified):
    report = emp.explicit_formula_check(
        mod4_classified, 1 - mod4_classified.group.trivial_char_index,
        zd.load_bundled("dirichlet-4"))
    assert report.max_ratio == pytest.approx(0.1592227089638439, rel=1e-6)
    assert report.height == pytest.approx(zd.load_bundled("dirichlet-4").height)
    assert any("measured" in note for note in report.notes)

    trivial = emp.explicit_formula_check(
        mod4_classified, mod4_classified.group.trivial_char_index,
        zd.load_bundled("zeta"))
    assert trivial.max_ratio == pytest.approx(1.106257317577442, rel=1e-6)
    assert trivial.max_ratio < 3.0


def test_explicit_formula_input_checks(mod4_classified):
    d4 = zd.load_bundled("dirichlet-4")
    shallow = zd.ZeroSet(label="toy", ordinates=[6.0], multiplicities=[1],
                         height=8.0)
    with pytest.raises(InputError):
        emp.explicit_formula_check(mod4_classified, 0, shallow)
    with pytest.raises(InputError):
        emp.explicit_formula_check(mod4_classified, 5, d4)
    with pytest.raises(InputError):
        emp.explicit_formula_check(mod4_classified, 0, d4, x_max=10**6)


# -- least primes


def test_least_primes_radical(radical_classified):
    assert emp.least_primes(radical_classified) == {
        "id": 41, "unipotent": 11, "t2": 2, "t3": 13, "t4": 19}


def test_least_primes_multiquadratic():
    cl = emp.sieve_classify(fam.multiquadratic_extension(3, 5), 10**4)
    assert emp.least_primes(cl) == {
        "0.0": 19, "0.1": 7, "1.0": 11, "1.1": 17}


def test_least_primes_cyclotomic_seven():
    cl = emp.sieve_classify(fam.cyclotomic_extension(7), 10**4)
    assert emp.least_primes(cl) == {
        "1": 29, "2": 2, "3": 3, "4": 11, "5": 5, "6": 13}


def test_least_prime_search():
    rad = fam.radical_extension(3, 5)
    assert emp.least_prime_search(rad, "id") == 41
    assert emp.least_prime_search(rad, "t2") == 2
    mq = fam.multiquadratic_extension(3, 5)
    assert emp.least_prime_search(mq, "0.1") == 7


def test_least_prime_search_input_checks():
    rad = fam.radical_extension(3, 5)
    with pytest.raises(InputError):
        emp.least_prime_search(rad, "nonsense")
    with pytest.raises(InputError):
        emp.least_prime_search(fam.radical_extension(3, 5, relative=True),
                               "id")
    with pytest.raises(InputError):
        emp.least_prime_search(fam.hilbert_class_field(-23), "id")
    with pytest.raises(DataMissingError):
        emp.least_prime_search(rad, "id", x_cap=30)


# -- equidistribution report


def test_equidistribution_mod4(mod4_classified):
    rows = emp.equidistribution_report(mod4_classified)
    assert [row.class_name for row in rows] == ["1", "3"]
    total = 0.0
    for row in rows:
        assert row.expected == 0.5
        assert row.within
        count = mod4_classified.primes.size
        assert row.tolerance == pytest.approx(3.0 / math.sqrt(count * 0.5))
        total += row.frequency
    assert total == pytest.approx(1.0)


def test_equidistribution_cyclotomic_seven():
    cl = emp.sieve_classify(fam.cyclotomic_extension(7), 10**4)
    rows = emp.equidistribution_report(cl)
    assert len(rows) == 6
    assert all(row.within for row in rows)
    assert all(row.expected == pytest.approx(1 / 6) for row in rows)


def test_equidistribution_needs_primes():
    cl = emp.sieve_classify(fam.cyclotomic_extension(4), 2)
    with pytest.raises(InputError):
        emp.equidistribution_report(cl)
