import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from switchctl.linalg import eigenvalues, expm, numerical_rank


def test_expm_zero_is_identity():
    assert np.array_equal(expm(np.zeros((3, 3))), np.eye(3))


def test_expm_diagonal():
    E = expm(np.diag([1.0, -2.0]))
    np.testing.assert_allclose(E, np.diag([np.e, np.exp(-2.0)]), rtol=1e-14, atol=0)


def test_expm_nilpotent():
    np.testing.assert_allclose(expm(np.array([[0.0, 1.0], [0.0, 0.0]])),
                               [[1.0, 1.0], [0.0, 1.0]], rtol=0, atol=1e-15)


def test_expm_rotation():
    th = 0.7
    E = expm(np.array([[0.0, -th], [th, 0.0]]))
    np.testing.assert_allclose(E, [[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]],
                               atol=1e-15)


@pytest.mark.parametrize("norm", [1e-3, 0.1, 1.0, 5.0, 50.0, 1e3])
def test_expm_matches_scipy(norm):
    # scipy's implementation serves as an independent oracle
    r = np.random.default_rng(int(norm * 1000) % 2**31)
    for _ in range(5):
        M = r.standard_normal((6, 6))
        M *= norm / np.linalg.norm(M, 2)
        if norm >= 50:
            # keep e^M representable: shift the spectrum to the left
            M -= (np.max(np.linalg.eigvals(M).real) + 1.0) * np.eye(6)
        ref = scipy.linalg.expm(M)
        err = np.linalg.norm(expm(M) - ref) / np.linalg.norm(ref)
        assert err <= 1e-12


def test_expm_complex_input():
    M = np.array([[1j, 0.0], [0.0, -1j]])
    np.testing.assert_allclose(expm(M), np.diag([np.exp(1j), np.exp(-1j)]), atol=1e-15)


@pytest.mark.parametrize("bad", [np.ones((2, 3)), np.array([[np.nan, 0.0], [0.0, 1.0]]),
                                 np.array([[np.inf]])])
def test_expm_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        expm(bad)


small = arrays(np.float64, (4, 4), elements=st.floats(-2.5, 2.5))


@given(small)
def test_expm_inverse(M):
    E = expm(M)
    np.testing.assert_allclose(E @ expm(-M), np.eye(4), atol=1e-10 * np.linalg.norm(E))


@given(small, st.floats(0, 1), st.floats(0, 1))
def test_expm_semigroup(M, s, t):
    lhs = expm((s + t) * M)
    rhs = expm(s * M) @ expm(t * M)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(lhs)


def test_eigenvalues_diagonal():
    sp = eigenvalues(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_allclose(sp.values, [1, 2, 3])
    assert [m for _, m in sp.clusters] == [1, 1, 1]


def test_eigenvalues_rotation_generator():
    sp = eigenvalues(np.array([[0.0, -2.0], [2.0, 0.0]]))
    np.testing.assert_allclose(sp.values, [-2j, 2j], atol=1e-14)


def test_eigenvalues_defective_block():
    # companion matrix of (x - 1)^2 = x^2 - 2x + 1
    C = np.array([[0.0, -1.0], [1.0, 2.0]])
    sp = eigenvalues(C)
    assert len(sp.clusters) == 1
    center, mult = sp.clusters[0]
    assert mult == 2 and abs(center - 1.0) < 1e-7
    assert sp.multiplicity(1.0) == 2


def test_eigenvalues_ordering_and_conjugate_pairs(rng):
    for _ in range(20):
        M = rng.standard_normal((7, 7))
        sp = eigenvalues(M)
        v = sp.values
        assert np.all(np.diff(v.real) >= -1e-12)
        assert sum(m for _, m in sp.clusters) == 7
        conj = np.sort_complex(np.conj(v))
        np.testing.assert_allclose(np.sort_complex(v), conj, atol=1e-10)


@pytest.mark.parametrize("d", [5, 20, 50])
def test_eigenvalue_sum_is_trace(rng, d):
    M = rng.standard_normal((d, d))
    sp = eigenvalues(M)
    assert abs(np.sum(sp.values) - np.trace(M)) <= 1e-8 * np.linalg.norm(M, 2)


def test_numerical_rank_examples():
    assert numerical_rank(np.eye(4)) == 4
    u, v = np.arange(1.0, 5.0), np.array([1.0, -2.0, 0.5])
    assert numerical_rank(np.outer(u, v)) == 1
    assert numerical_rank(np.array([[1.0, 1.0], [1.0, 1.0 + 1e-16]]), tol=1e-10) == 1
    assert numerical_rank(np.zeros((3, 2))) == 0


def test_numerical_rank_rejects_nan():
    with pytest.raises(ValueError):
        numerical_rank(np.array([[np.nan]]))
