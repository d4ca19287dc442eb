import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bethe_dimer.betvec import (
    apply_D_power,
    assemble_state,
    bethe_vector,
    check_a1dag_commutes,
    check_binomial_identity,
    check_D_power_vacuum,
    coefficients_from_state,
    compute_C_closed,
    compute_C_closed_table,
    compute_C_recursion,
    compute_F,
    dop_word_expansion,
    f_values,
    normalize,
    permutation_expansion,
    product_form_oracle,
)
from bethe_dimer.fock import restrict_to_sector
from bethe_dimer.integrable import ABAParams

SQ2 = math.sqrt(2)


def subset_sum_F(f):
    """``F_n`` as the sum of ``F_0 / (f_j1 ... f_jn)`` over strictly decreasing index tuples."""
    N = len(f)
    F0 = np.prod(f)
    out = []
    for n in range(N + 1):
        out.append(sum(F0 / np.prod([f[j] for j in idx]) for idx in itertools.combinations(range(N), n)))
    return np.array(out, dtype=complex)


def test_f_values():
    np.testing.assert_array_equal(f_values([1, -1], 0), [1, -1])
    np.testing.assert_array_equal(f_values([2], 0.5), [1.5])
    np.testing.assert_array_equal(f_values([0.3], 0.3), [0])


def test_compute_F_examples():
    np.testing.assert_array_equal(compute_F([2, 3]), [6, 5, 1])
    np.testing.assert_array_equal(compute_F([1.5 - 2j]), [1.5 - 2j, 1])
    np.testing.assert_array_equal(compute_F([]), [1])
    # a vanishing f_j is fine for the convolution
    np.testing.assert_array_equal(compute_F([0, 2]), [0, 2, 1])


nonzero = st.complex_numbers(min_magnitude=0.1, max_magnitude=3, allow_nan=False, allow_infinity=False)


@given(st.lists(nonzero, min_size=1, max_size=7))
def test_compute_F_matches_subset_sums(f):
    F = compute_F(f)
    ref = subset_sum_F(f)
    scale = np.prod([1 + abs(x) for x in f])
    assert np.max(np.abs(F - ref)) <= 1e-12 * scale
    assert F[-1] == 1
    assert abs(F[0] - np.prod(f)) <= 1e-12 * scale


def test_compute_F_extended_precision_agrees():
    f = np.array([0.3 + 1j, -2.1, 0.7 - 0.2j, 1.9])
    hi = compute_F(f, dps=40)
    assert hi.dtype == object
    np.testing.assert_allclose(np.array([complex(x) for x in hi]), compute_F(f), rtol=1e-14)


@pytest.mark.parametrize("eta", [1.0, 0.3])
def test_a1dag_commutes(eta):
    assert check_a1dag_commutes(eta, 6) < 1e-13
    assert check_a1dag_commutes(eta, 2) == 0


def test_C_recursion_examples():
    C = compute_C_recursion(2, 1.0)
    assert C[1, 0] == 1 and C[1, 1] == 0
    assert C[2, 0] == pytest.approx(SQ2, abs=1e-15)
    assert C[2, 1] == 1 and C[2, 2] == 0
    assert compute_C_recursion(2, 2.0)[2, 0] == pytest.approx(SQ2 / 4, abs=1e-15)
    with pytest.raises(ValueError):
        compute_C_recursion(-1, 1.0)


def test_C_closed_examples():
    assert compute_C_closed(0, 0, 1.3) == 1
    assert compute_C_closed(2, 1, 1.0) == pytest.approx(1.0, abs=1e-15)
    for j in range(1, 8):
        assert compute_C_closed(j, j, 0.7) == 0


def test_C_table_triple_agreement():
    for eta in (0.3, 1.0, 2.5):
        rec = compute_C_recursion(12, eta)
        closed = compute_C_closed_table(12, eta)
        for n in range(13):
            oracle = coefficients_from_state(apply_D_power(n, eta), n)
            for j in range(n + 1):
                ref = oracle[j]
                for value in (rec[n, j], closed[n, j]):
                    if ref == 0:
                        assert value == 0
                    else:
                        assert abs(value - ref) <= 1e-10 * abs(ref)


def test_C_table_structure():
    C = compute_C_recursion(9, -1.7)
    assert C[0, 0] == 1
    assert all(C[n, n] == 0 for n in range(1, 10))
    hi = compute_C_recursion(9, -1.7, dps=40)
    np.testing.assert_allclose(np.array(hi, dtype=complex), C, rtol=1e-14)


def test_apply_D_power_examples():
    assert dict(apply_D_power(0, 1.0).amps) == {(0, 0): 1}
    assert dict(apply_D_power(1, 1.0).amps) == {(0, 1): 1}
    s = apply_D_power(2, 1.0)
    assert s[(1, 1)] == pytest.approx(1.0)
    assert s[(0, 2)] == pytest.approx(SQ2)
    assert set(s.amps) == {(1, 1), (0, 2)}


def test_D_power_on_vacuum():
    assert check_D_power_vacuum(0, 1.0) == 0
    assert check_D_power_vacuum(1, 1.0) == 0
    assert check_D_power_vacuum(5, 0.5) < 1e-12
    for eta in (0.5, 1.0, 2.0):
        for n in range(11):
            assert check_D_power_vacuum(n, eta) <= 1e-12 * eta ** (-2 * n)


def test_assemble_state_examples():
    p = ABAParams(1.0, 0.0)
    C = compute_C_recursion(1, 1.0)
    np.testing.assert_array_equal(assemble_state(compute_F(f_values([1.0], 0)), C, 1), [1, 1])
    np.testing.assert_array_equal(assemble_state(compute_F(f_values([-1.0], 0)), C, 1), [1, -1])
    np.testing.assert_array_equal(assemble_state([1], compute_C_recursion(0, 1.0), 0), [1])
    np.testing.assert_array_equal(bethe_vector([], p), [1])
    with pytest.raises(ValueError):
        assemble_state([1, 2, 3], C, 1)


def test_product_form_oracle_examples():
    p = ABAParams(1.0, 0.0)
    s = product_form_oracle([1.0], p)
    assert dict(s.amps) == {(1, 0): 1, (0, 1): 1}
    assert dict(product_form_oracle([], p).amps) == {(0, 0): 1}
    p = ABAParams(0.8, 0.35)
    roots = [0.3 + 0.2j, -1.1, 0.9 - 0.4j, 0.05]
    a = product_form_oracle(roots, p)
    b = product_form_oracle(roots[::-1], p)
    assert (a - b).max_abs() <= 1e-12 * a.max_abs()
    assert a.sectors() == {4}


@given(
    st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False), min_size=1, max_size=6),
    st.floats(0.3, 2.5),
    st.floats(-1.5, 1.5),
)
@settings(max_examples=40, deadline=None)
def test_assembly_matches_product_form(roots, eta, omega):
    p = ABAParams(eta, omega)
    N = len(roots)
    oracle = restrict_to_sector(product_form_oracle(roots, p), N)
    for dps in (None, 34):
        psi = bethe_vector(roots, p, dps=dps)
        assert np.linalg.norm(psi - oracle) <= 1e-9 * np.linalg.norm(oracle) + 1e-300


def test_normalize():
    v = normalize(np.array([3.0, 4.0j]))
    assert np.linalg.norm(v) == pytest.approx(1.0)


def test_binomial_identity():
    X = np.diag([1.0, 2.0, 3.0])
    Y = np.diag([0.5, -1.0, 4.0])
    assert check_binomial_identity(2, X, Y) == 0
    rng = np.random.default_rng(11)
    X = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    Y = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert check_binomial_identity(2, X, Y) < 1e-13
    assert check_binomial_identity(3, X, Y) < 1e-12
    with pytest.raises(ValueError):
        check_binomial_identity(2, X, Y[:3, :3])
    with pytest.raises(ValueError):
        check_binomial_identity(4, X, Y)


def test_permutation_expansion():
    rng = np.random.default_rng(2)
    X, Y = rng.normal(size=(2, 3, 3))
    assert permutation_expansion(1, X, Y) == 0
    assert permutation_expansion(4, X, Y) < 1e-12
    assert permutation_expansion(6, X, Y, relative=True) < 1e-13
    with pytest.raises(ValueError):
        permutation_expansion(9, X, Y)


def test_word_expansion_of_dop_matches_power():
    for eta in (0.6, 1.0):
        words = dop_word_expansion(3, eta, cutoff=6)
        direct = apply_D_power(3, eta, cutoff=6)
        assert (words - direct).max_abs() < 1e-12
