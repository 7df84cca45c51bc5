import numpy as np
import pytest

from switchctl.examples import (make_coupled_parabolic, make_full_actuation, make_heat,
                                make_random_controllable, make_wave)
from switchctl.system import forbidden_set_W, kalman_check, plan_frequencies

from oracles import brute_forbidden, exact_rank, heat_eigenvalues, krylov_int, same_set


def test_heat_single_node():
    s = make_heat(1, 2.0)
    assert s.A.tolist() == [[2.0]] and s.structure == "self_adjoint"


@pytest.mark.parametrize("d, L", [(3, 4.0), (6, 1.0), (10, 1.0)])
def test_heat_spectrum_closed_form(d, L):
    s = make_heat(d, L)
    np.testing.assert_allclose(np.linalg.eigvalsh(s.A), heat_eigenvalues(d, L), rtol=1e-12)
    assert np.array_equal(s.A, s.A.T)
    np.linalg.cholesky(s.A)
    assert kalman_check(s).controllable and s.n_blocks == d


def test_heat_d3_L4_eigenvalues():
    np.testing.assert_allclose(np.linalg.eigvalsh(make_heat(3, 4.0).A),
                               [2 - np.sqrt(2), 2, 2 + np.sqrt(2)], rtol=1e-14)


def test_heat_rejects_bad_parameters():
    with pytest.raises(ValueError):
        make_heat(0, 1.0)
    with pytest.raises(ValueError):
        make_heat(2, 0.0)


def test_wave_d1_L2_forbidden_set():
    s = make_wave(1, 2.0)
    assert s.structure == "general"
    sp = s.spectrum()
    np.testing.assert_allclose(sp.values, [-1j * np.sqrt(2), 1j * np.sqrt(2)], atol=1e-14)
    W = forbidden_set_W(sp)
    r2 = np.sqrt(2)
    np.testing.assert_allclose(W.values, [-2 * r2, -r2, 0, r2, 2 * r2], atol=1e-12)


@pytest.mark.parametrize("d", range(1, 9))
def test_wave_controllable_exact_rank(d):
    # entries of A are integers once L = d + 1 (h = 1)
    s = make_wave(d, float(d + 1))
    assert np.array_equal(s.A, np.round(s.A))
    A = s.A.astype(int).tolist()
    B = s.B.astype(int).tolist()
    assert exact_rank(krylov_int(A, B)) == 2 * d
    assert kalman_check(s).controllable


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_wave_spectrum_structure(d):
    s = make_wave(d, 1.0)
    v = s.spectrum().values
    assert np.max(np.abs(v.real)) <= 1e-10 * np.linalg.norm(s.A, 2)
    np.testing.assert_allclose(np.sort(v.imag), np.sort(-v.imag), atol=1e-9)
    assert same_set(forbidden_set_W(s.spectrum()).values, brute_forbidden(v, 1e-8 * np.linalg.norm(s.A, 2)))


def test_coupled_parabolic_blocks():
    s = make_coupled_parabolic(1, 1.0, 1.0, np.eye(2))
    np.testing.assert_array_equal(s.A, 2 * np.eye(2))
    P = np.array([[2.0, 1.0], [1.0, 2.0]])
    s = make_coupled_parabolic(2, 1.0, 2.0, P)
    np.testing.assert_array_equal(s.A[:2, :2], np.diag([1.0, 2.0]) + P)
    np.testing.assert_array_equal(s.A[2:, 2:], 4 * np.diag([1.0, 2.0]) + P)
    assert not np.any(s.A[:2, 2:])
    # oracle: direct eigen-solve of the explicit 4x4 matrix
    M = np.zeros((4, 4))
    M[:2, :2] = np.diag([1.0, 2.0]) + P
    M[2:, 2:] = np.diag([4.0, 8.0]) + P
    np.testing.assert_allclose(np.sort(s.spectrum().values.real), np.linalg.eigvalsh(M))
    assert list(forbidden_set_W(s.spectrum()).values) == [0.0]
    assert kalman_check(s).controllable and s.structure == "self_adjoint"
    np.testing.assert_array_equal(s.blocks[0][:, 0], [1, 0, 0, 0])
    np.testing.assert_array_equal(s.blocks[1][:, 1], [0, 0, 0, 1])


def test_coupled_parabolic_rejects_non_spd():
    with pytest.raises(ValueError):
        make_coupled_parabolic(1, 1.0, 1.0, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        make_coupled_parabolic(1, 1.0, 1.0, np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_coupled_parabolic_subdomain_actuator():
    from scipy.integrate import quad
    s = make_coupled_parabolic(3, 1.0, 1.0, np.eye(2), actuator_profile=(0.5, 2.0))
    M = s.blocks[0][0::2, :]
    for j in range(1, 4):
        for l in range(1, 4):
            ref = quad(lambda x: 2 / np.pi * np.sin(j * x) * np.sin(l * x), 0.5, 2.0)[0]
            assert abs(M[j - 1, l - 1] - ref) < 1e-12
    assert kalman_check(s).controllable


def test_random_controllable_is_deterministic():
    a = make_random_controllable(4, 2, seed=7)
    b = make_random_controllable(4, 2, seed=7)
    assert np.array_equal(a.A, b.A) and all(np.array_equal(x, y) for x, y in zip(a.blocks, b.blocks))
    assert kalman_check(a).controllable
    c = make_random_controllable(5, 3, block_dims=(1, 2, 1), seed=1)
    assert c.block_dims == (1, 2, 1)


def test_full_actuation():
    s = make_full_actuation(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert s.n_blocks == 2 and kalman_check(s).controllable


def test_heat_plan_is_distinct_ladder():
    assert plan_frequencies(make_heat(3)).omegas == (0.0, 0.5, 1.0)
