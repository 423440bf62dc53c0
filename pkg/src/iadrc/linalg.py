"""Dense linear-algebra kernels for small observer design problems.

Matrices here are at most a handful of rows, so every Sylvester and
Lyapunov equation is solved through its vectorized (Kronecker) linear system
rather than a Schur-based method.

Characteristic polynomials use the convention of a monic polynomial

    s^m + a_{m-1} s^{m-1} + ... + a_1 s + a_0

stored as the ascending coefficient vector ``[a_0, a_1, ..., a_{m-1}]``.
"""

import numpy as np
import scipy.linalg

from .errors import NotHurwitz, NotSymmetric, SingularSystem, SpectraOverlap

__all__ = [
    "solve_sylvester",
    "solve_lyapunov",
    "char_poly",
    "poly_from_roots",
    "companion_from_poly",
    "is_hurwitz",
    "is_positive_definite",
]

SPECTRA_TOL = 1e-8
HURWITZ_TOL = 1e-10


def _square(M, name="matrix"):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def solve_sylvester(A, B, C):
    """Solve ``X B = A X + C`` for X.

    Parameters
    ----------
    A : (m, m) array_like
    B : (n, n) array_like
    C : (m, n) array_like

    Returns
    -------
    X : (m, n) ndarray

    Raises
    ------
    SpectraOverlap
        If A and B have eigenvalues closer than ``1e-8``.
    SingularSystem
        If the vectorized system is numerically rank deficient.
    """
    A = _square(A, "A")
    B = _square(B, "B")
    m, n = A.shape[0], B.shape[0]
    C = np.asarray(C, dtype=float).reshape(m, n)

    gap = np.min(np.abs(np.linalg.eigvals(A)[:, None] - np.linalg.eigvals(B)[None, :]))
    if gap < SPECTRA_TOL:
        raise SpectraOverlap(f"eigenvalue separation {gap:.3e} below {SPECTRA_TOL:g}")

    # column-major vec: vec(X B) = (B^T kron I) vec X, vec(A X) = (I kron A) vec X
    K = np.kron(B.T, np.eye(m)) - np.kron(np.eye(n), A)
    sv = np.linalg.svd(K, compute_uv=False)
    if sv[-1] <= sv[0] * K.shape[0] * np.finfo(float).eps:
        raise SingularSystem("vectorized Sylvester system is rank deficient")
    x = np.linalg.solve(K, C.reshape(-1, order="F"))
    return x.reshape(m, n, order="F")


def solve_lyapunov(F, Q):
    """Solve ``F^T P + P F = -2 Q`` for the symmetric matrix P.

    F must be Hurwitz and Q symmetric positive definite; the returned P is
    then symmetric positive definite. The solution of the transposed
    equation ``F P + P F^T = -2 Q`` is ``solve_lyapunov(F.T, Q)``.
    """
    F = _square(F, "F")
    Q = _square(Q, "Q")
    if not is_hurwitz(F):
        worst = np.max(np.linalg.eigvals(F).real)
        raise NotHurwitz(f"F has an eigenvalue with real part {worst:.3e}")
    if not is_positive_definite(Q):
        raise ValueError("Q must be positive definite")
    P = solve_sylvester(-F.T, F, -2.0 * Q)
    return 0.5 * (P + P.T)


def _hessenberg_charpoly(H):
    # Recurrence on the leading principal submatrices of an upper Hessenberg
    # matrix; polynomials are ascending coefficient arrays.
    m = H.shape[0]
    polys = [np.array([1.0])]
    for k in range(m):
        p = np.zeros(k + 2)
        p[1:] += polys[k]
        p[:-1] -= H[k, k] * polys[k]
        prod = 1.0
        for i in range(k - 1, -1, -1):
            prod *= H[i + 1, i]
            if prod == 0.0:
                break
            p[: i + 1] -= H[i, k] * prod * polys[i]
        polys.append(p)
    return polys[m]


def char_poly(M):
    """Coefficients ``[a_0, ..., a_{m-1}]`` of the monic characteristic polynomial.

    Hessenberg matrices (including both orientations of a companion matrix)
    are handled without any similarity transform, so their coefficients are
    recovered exactly; other matrices are first reduced to Hessenberg form.
    """
    M = _square(M)
    if not np.any(np.tril(M, -2)):
        H = M
    elif not np.any(np.triu(M, 2)):
        H = M.T
    else:
        H = scipy.linalg.hessenberg(M)
    return _hessenberg_charpoly(H)[:-1]


def poly_from_roots(roots):
    """Ascending monic coefficients of ``prod (s - r)`` for real or conjugate-paired roots."""
    coeffs = np.poly(np.asarray(roots))
    if np.iscomplexobj(coeffs):
        if np.max(np.abs(coeffs.imag)) > 1e-9 * max(1.0, np.max(np.abs(coeffs))):
            raise ValueError("complex roots must come in conjugate pairs")
        coeffs = coeffs.real
    return coeffs[::-1][:-1].astype(float)


def companion_from_poly(alpha):
    """Bottom-row companion matrix whose characteristic polynomial is ``alpha``.

    >>> companion_from_poly([2.0, 3.0])
    array([[ 0.,  1.],
           [-2., -3.]])
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if alpha.ndim != 1 or alpha.size == 0:
        raise ValueError("coefficient vector must be a nonempty 1-D array")
    m = alpha.size
    F = np.eye(m, k=1)
    F[-1, :] = -alpha
    return F


def is_hurwitz(M, tol=HURWITZ_TOL):
    """True iff every eigenvalue of M has real part below ``-tol``."""
    M = _square(M)
    return bool(np.max(np.linalg.eigvals(M).real) < -tol)


def is_positive_definite(M, tol=1e-12):
    """True iff the symmetric matrix M has minimum eigenvalue above ``tol``.

    Raises NotSymmetric when M deviates from its transpose by more than
    ``1e-12`` relative to its largest entry.
    """
    M = _square(M)
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > 1e-12 * scale:
        raise NotSymmetric("matrix is not symmetric")
    return bool(np.linalg.eigvalsh(0.5 * (M + M.T))[0] > tol)
