import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bethe_dimer.bae import (
    BAESolveError,
    BetheRoots,
    CompletenessWarning,
    bae_jacobian,
    bae_residual,
    canonical_order,
    find_all_solutions,
    random_starts,
    scaled_residual,
    solve_newton,
    start_radius,
    tag_energy,
)
from bethe_dimer.integrable import ABAParams, build_hamiltonian, exact_spectrum, from_aba

from conftest import GRID_ETA, GRID_OMEGA, solutions

P1 = ABAParams(1.0, 0.0)


def test_residual_examples():
    assert bae_residual([1.0], P1).tolist() == [0]
    assert bae_residual([-1.0], P1).tolist() == [0]
    assert bae_residual([0.0], P1).tolist() == [-1]
    assert bae_residual([], P1).size == 0


def test_residual_is_finite_on_poles():
    # v_i - v_j = -eta is a pole of the rational equations, not of these
    r = bae_residual([0.0, 1.0], P1)
    assert np.all(np.isfinite(r))


def test_jacobian_matches_finite_differences():
    p = ABAParams(0.7, 0.4)
    v = np.array([0.3 + 0.1j, -1.2, 0.8 - 0.5j])
    J = bae_jacobian(v, p)
    h = 1e-7
    for k in range(3):
        dv = np.zeros(3, dtype=complex)
        dv[k] = h
        fd = (bae_residual(v + dv, p) - bae_residual(v - dv, p)) / (2 * h)
        np.testing.assert_allclose(J[:, k], fd, rtol=1e-6, atol=1e-8)


@given(
    st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False), min_size=1, max_size=5),
    st.randoms(use_true_random=False),
)
@settings(max_examples=50)
def test_residual_permutation_invariance(roots, random):
    p = ABAParams(1.3, -0.4)
    perm = list(range(len(roots)))
    random.shuffle(perm)
    r = bae_residual(roots, p)
    rp = bae_residual([roots[i] for i in perm], p)
    np.testing.assert_allclose(rp, r[perm], rtol=1e-12, atol=1e-12 * max(1, np.max(np.abs(r))))


def test_canonical_order():
    assert canonical_order([1, -1j, 1j, -2]) == (-2, -1j, 1j, 1)
    # ties below 1e-9 fall back to the imaginary part
    assert canonical_order([1 + 1j, 1 + 1e-12 - 1j]) == (1 + 1e-12 - 1j, 1 + 1j)


def test_solve_newton_examples():
    up = solve_newton([0.9], P1)
    assert up.v[0] == pytest.approx(1.0, abs=1e-12)
    assert up.residual < 1e-12
    assert np.max(np.abs(bae_residual(up.v, P1))) < 1e-12
    down = solve_newton([-0.9], P1)
    assert down.v[0] == pytest.approx(-1.0, abs=1e-12)
    assert solve_newton([], P1).v == ()


def test_solve_newton_n2_reaches_every_level():
    mp = from_aba(P1)
    H = build_hamiltonian(mp, 2)
    w, V = exact_spectrum(mp, 2)
    levels = set()
    for start in random_starts(P1, 2, 60, seed=4):
        try:
            sol = solve_newton(start, P1, tol=1e-12)
        except BAESolveError:
            continue
        tagged = tag_energy(sol, w, V, H)
        if tagged is not None:
            levels.add(tagged.level)
    assert levels == {0, 1, 2}


def test_solve_newton_rejects_coinciding_roots():
    with pytest.raises(BAESolveError) as info:
        solve_newton([0.3j, 0.3j], P1)
    assert info.value.reason == "rejected"
    with pytest.raises(BAESolveError) as info:
        solve_newton([0.2, 3.0, -1.0], ABAParams(0.5, 0.1), max_iter=1)
    assert info.value.reason == "no-convergence"
    with pytest.raises(ValueError):
        solve_newton([0.1], P1, tol=0)


def test_start_radius():
    assert start_radius(ABAParams(2.0, -0.5), 3) == pytest.approx(2 * (0.5 + 0.5 + 6))


def test_find_all_n1():
    sols = find_all_solutions(P1, 1, attempts=50)
    assert [s.v for s in sols] == [(1.0 + 0j,), (-1.0 + 0j,)]
    assert [s.energy for s in sols] == pytest.approx([-0.375, 0.625], abs=1e-15)


def test_find_all_n0():
    sols = find_all_solutions(P1, 0)
    assert len(sols) == 1
    assert sols[0].v == () and sols[0].energy == 0


def test_find_all_n3():
    p = ABAParams(1.0, 0.3)
    sols = find_all_solutions(p, 3, attempts=500)
    w = np.linalg.eigvalsh(build_hamiltonian(from_aba(p), 3))
    assert len(sols) == 4
    np.testing.assert_allclose([s.energy for s in sols], w, rtol=1e-8, atol=1e-8 * np.max(np.abs(w)))
    for s in sols:
        assert s.residual < 1e-10


def test_find_all_is_deterministic_across_thread_counts(monkeypatch):
    p = ABAParams(0.5, 1.0)
    monkeypatch.setenv("BETHE_DIMER_THREADS", "1")
    one = find_all_solutions(p, 5, seed=3)
    monkeypatch.setenv("BETHE_DIMER_THREADS", "4")
    four = find_all_solutions(p, 5, seed=3)
    assert one == four


def test_find_all_warns_when_incomplete():
    with pytest.warns(CompletenessWarning):
        sols = find_all_solutions(ABAParams(2.0, 1.0), 7, attempts=1)
    assert len(sols) < 8
    with pytest.raises(ValueError):
        find_all_solutions(P1, 2, attempts=0)


def test_physical_energies_in_model_units():
    p = ABAParams(1.0, 0.3)
    ej = 2.5
    sols = find_all_solutions(p, 3, ej=ej)
    w = np.linalg.eigvalsh(build_hamiltonian(from_aba(p, ej), 3))
    np.testing.assert_allclose([s.energy for s in sols], w, atol=1e-10)


@pytest.mark.parametrize("eta, omega", list(itertools.product(GRID_ETA, GRID_OMEGA)))
def test_grid_solutions_are_conjugation_closed(eta, omega):
    p = ABAParams(eta, omega)
    for N in range(1, 9):
        for s in solutions(eta, omega, N):
            assert isinstance(s, BetheRoots)
            assert np.max(np.abs(np.subtract(canonical_order(np.conj(s.v)), s.v))) < 1e-7
            assert scaled_residual(s.v, p) < 1e-10
