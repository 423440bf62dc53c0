import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from iadrc.errors import NotHurwitz, NotSymmetric, SpectraOverlap
from iadrc.linalg import (
    char_poly,
    companion_from_poly,
    is_hurwitz,
    is_positive_definite,
    poly_from_roots,
    solve_lyapunov,
    solve_sylvester,
)
from iadrc.observers import extended_matrices

from conftest import F_PAPER, H_PAPER, L_PAPER, S_PAPER


def brute_force_sylvester(A, B, C):
    # Build the linear map X -> X B - A X column by column from unit matrices.
    m, n = C.shape
    cols = []
    for j in range(n):
        for i in range(m):
            E = np.zeros((m, n))
            E[i, j] = 1.0
            cols.append((E @ B - A @ E).ravel())
    K = np.array(cols).T
    x = np.linalg.solve(K, C.ravel())
    X = np.zeros((m, n))
    for idx, (j, i) in enumerate((j, i) for j in range(n) for i in range(m)):
        X[i, j] = x[idx]
    return X


def random_hurwitz(rng, m, margin=0.1):
    M = rng.normal(size=(m, m))
    shift = np.max(np.linalg.eigvals(M).real) + margin + rng.uniform(0, 2)
    return M - shift * np.eye(m)


def random_rotation_generator(rng, blocks):
    B = np.zeros((2 * blocks, 2 * blocks))
    for k in range(blocks):
        w = rng.uniform(0.5, 5.0)
        B[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = [[0, w], [-w, 0]]
    return B


# solve_sylvester

def test_sylvester_scalar():
    assert np.allclose(solve_sylvester([[0.0]], [[1.0]], [[5.0]]), [[5.0]])


def test_sylvester_example_plant_matches_frozen_q():
    A, b, c = extended_matrices(2, 3.0)
    Al = A - np.outer(L_PAPER, c)
    C = np.outer(b, H_PAPER)
    X = solve_sylvester(Al, S_PAPER, C)
    # exact solution from a symbolic solve
    expected = np.array(
        [
            [-0.00030546289942313952, 0.0015169998720051220],
            [-0.016779830218051523, 0.067654068441384209],
            [-2.2754998080076829, -0.45819434913470929],
        ]
    )
    assert np.allclose(X, expected, rtol=1e-11, atol=1e-14)
    residual = np.linalg.norm(X @ S_PAPER - Al @ X - C)
    assert residual <= 1e-9 * (1 + np.linalg.norm(C))
    assert np.allclose(X, brute_force_sylvester(Al, S_PAPER, C), atol=1e-8)


def test_sylvester_rejects_shared_eigenvalue():
    with pytest.raises(SpectraOverlap):
        solve_sylvester(np.diag([1.0, -2.0]), np.diag([3.0, 1.0]), np.ones((2, 2)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 2))
def test_sylvester_agrees_with_oracles(seed, m, blocks):
    rng = np.random.default_rng(seed)
    A = random_hurwitz(rng, m)
    B = random_rotation_generator(rng, blocks)
    C = rng.normal(size=(m, B.shape[0]))
    X = solve_sylvester(A, B, C)
    scale = 1 + np.linalg.norm(C)
    assert np.linalg.norm(X @ B - A @ X - C) <= 1e-8 * scale
    assert np.allclose(X, brute_force_sylvester(A, B, C), atol=1e-8 * scale)
    assert np.allclose(X, scipy.linalg.solve_sylvester(-A, B, C), atol=1e-8 * scale)


# solve_lyapunov

def test_lyapunov_scalar():
    assert np.allclose(solve_lyapunov([[-1.0]], [[1.0]]), [[1.0]])


def test_lyapunov_written_convention():
    P = solve_lyapunov(F_PAPER, 150 * np.eye(2))
    assert np.allclose(P, [[375.0, 75.0], [75.0, 75.0]], atol=1e-9)


def test_lyapunov_transposed_convention_gives_printed_matrix():
    P = solve_lyapunov(F_PAPER.T, 150 * np.eye(2))
    assert np.allclose(P, [[300.0, -150.0], [-150.0, 150.0]], atol=1e-9)


def test_lyapunov_requires_hurwitz():
    with pytest.raises(NotHurwitz):
        solve_lyapunov(S_PAPER, np.eye(2))
    with pytest.raises(NotHurwitz):
        solve_lyapunov(np.diag([-1.0, -1e-12]), np.eye(2))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_lyapunov_symmetric_pd_and_matches_scipy(seed, m):
    rng = np.random.default_rng(seed)
    F = random_hurwitz(rng, m)
    G = rng.normal(size=(m, m))
    Q = G @ G.T + 0.1 * np.eye(m)
    P = solve_lyapunov(F, Q)
    assert np.max(np.abs(P - P.T)) <= 1e-12 * max(1.0, np.max(np.abs(P)))
    assert is_positive_definite(P, tol=0.0)
    ref = scipy.linalg.solve_continuous_lyapunov(F.T, -2 * Q)
    assert np.allclose(P, ref, rtol=1e-8, atol=1e-8 * np.max(np.abs(ref)))


# characteristic polynomials and companion forms

@pytest.mark.parametrize(
    "M, expected",
    [
        (S_PAPER, [4.0, 0.0]),
        (F_PAPER, [2.0, 3.0]),
        (np.eye(2), [1.0, -2.0]),
    ],
)
def test_char_poly_examples(M, expected):
    assert np.allclose(char_poly(M), expected, atol=1e-12)


@pytest.mark.parametrize(
    "alpha, expected",
    [
        ([2.0, 3.0], [[0, 1], [-2, -3]]),
        ([4.0, 0.0], [[0, 1], [-4, 0]]),
        ([1.0], [[-1.0]]),
    ],
)
def test_companion_examples(alpha, expected):
    assert np.array_equal(companion_from_poly(alpha), np.array(expected, dtype=float))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=6))
def test_char_poly_companion_round_trip(alpha):
    alpha = np.array(alpha)
    assert np.max(np.abs(char_poly(companion_from_poly(alpha)) - alpha)) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_char_poly_matches_eigenvalue_product(seed, m):
    M = np.random.default_rng(seed).normal(size=(m, m))
    ref = np.real(np.poly(np.linalg.eigvals(M)))[::-1][:-1]
    assert np.allclose(char_poly(M), ref, atol=1e-9 * (1 + np.max(np.abs(ref))))


def test_poly_from_roots_handles_conjugate_pairs():
    assert np.allclose(poly_from_roots([-3.0, -3.0]), [9.0, 6.0])
    assert np.allclose(poly_from_roots([2j, -2j]), [4.0, 0.0])
    with pytest.raises(ValueError):
        poly_from_roots([1j])


# stability and definiteness tests

@pytest.mark.parametrize(
    "M, expected",
    [(F_PAPER, True), (S_PAPER, False), (np.zeros((2, 2)), False)],
)
def test_is_hurwitz_examples(M, expected):
    assert is_hurwitz(M) is expected


def test_is_hurwitz_agrees_with_independent_eigensolver():
    rng = np.random.default_rng(7)
    for _ in range(100):
        M = rng.normal(size=(4, 4)) - rng.uniform(0, 2) * np.eye(4)
        ref = np.max(scipy.linalg.eigvals(M).real) < -1e-10
        assert is_hurwitz(M) == ref


def test_is_positive_definite_examples():
    assert is_positive_definite(np.eye(2))
    assert not is_positive_definite(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NotSymmetric):
        is_positive_definite(np.array([[1.0, 0.5], [0.0, 1.0]]))
