"""Observers: extended state observer, internal-model disturbance observer and
the adaptive estimator used when the exosystem matrix is unknown.

Notation (plant order n, exosystem dimension s):

- ``A`` is the (n+1)x(n+1) shift matrix, ``b = b_n e_n`` and ``c = e_1`` so
  that the extended plant reads ``x' = A x + b (u + d2) + f``.
- The ESO ``p' = A p + b u + l (y - c p)`` needs ``A - l c`` Hurwitz.
- The filter ``xi' = F xi + g (y - p_1)`` runs on a companion pair (F, g).
- The psi-chain maps xi to the part of the state driven by d2 and to d2
  itself: ``q ~ Psi^T xi`` and ``d2_hat = psi_u^T xi``.
"""

from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import NotFound, NotHurwitz, SingularFo
from .linalg import (
    char_poly,
    companion_from_poly,
    is_hurwitz,
    is_positive_definite,
    solve_lyapunov,
    solve_sylvester,
)

__all__ = [
    "extended_matrices",
    "EsoObserver",
    "eso_step_derivative",
    "psi_chain",
    "InternalModelObserver",
    "procedure1_construct",
    "xi_filter_derivative",
    "d2_estimate",
    "AdaptiveEstimator",
    "adaptive_update_derivatives",
    "HatChain",
    "procedure2_construct",
    "assemble_qc",
    "gamma_search",
    "AnalysisOracle",
    "sylvester_coordinates",
    "ErrorDecomposition",
    "lemma1_decompose",
]

FO_COND_LIMIT = 1e12


def extended_matrices(n, b_n):
    """Return ``(A, b, c)`` of the extended chain of length n+1."""
    A = np.eye(n + 1, k=1)
    b = np.zeros(n + 1)
    b[n - 1] = b_n
    c = np.zeros(n + 1)
    c[0] = 1.0
    return A, b, c


@dataclass(frozen=True)
class EsoObserver:
    """Extended state observer for a plant of order ``len(l) - 1``.

    ``driven_by`` records which input the observer integrates: ``"u"`` for the
    full control (BADRC, and the p-observer of the disturbance estimator) or
    ``"u_c"`` for the feedback part only (the v-observer of IADRC).
    """

    l: np.ndarray
    b_n: float
    driven_by: str = "u"
    p0: np.ndarray = None

    def __post_init__(self):
        l = np.atleast_1d(np.asarray(self.l, dtype=float))
        if l.size < 2:
            raise ValueError("observer gain needs at least two entries")
        object.__setattr__(self, "l", l)
        p0 = np.zeros(l.size) if self.p0 is None else np.asarray(self.p0, dtype=float)
        if p0.shape != l.shape:
            raise ValueError("initial observer state has wrong length")
        object.__setattr__(self, "p0", p0)
        if self.driven_by not in ("u", "u_c"):
            raise ValueError("driven_by must be 'u' or 'u_c'")
        if not is_hurwitz(self.error_matrix):
            raise NotHurwitz("A - l c is not Hurwitz for the given observer gain")

    @property
    def n(self):
        return self.l.size - 1

    @property
    def matrices(self):
        return extended_matrices(self.n, self.b_n)

    @property
    def error_matrix(self):
        A, _, c = extended_matrices(self.l.size - 1, self.b_n)
        return A - np.outer(self.l, c)


def eso_step_derivative(obs, p, y, inp):
    """``A p + b inp + l (y - p_1)``."""
    e = y - p[0]
    dp = np.empty_like(obs.l)
    dp[:-1] = p[1:]
    dp[-1] = 0.0
    dp += obs.l * e
    dp[obs.n - 1] += obs.b_n * inp
    return dp


def psi_chain(psi1, F, g, l, b_n):
    """Propagate psi1 through the observer-gain recursion.

    Returns ``(Fo, Psi, psi_u)`` with ``Fo = F + g psi1^T``, ``Psi`` the
    (n+1, s) array whose rows are psi_1 ... psi_{n+1}, and ``psi_u``.

    Raises SingularFo if Fo cannot be inverted.
    """
    psi1 = np.asarray(psi1, dtype=float)
    l = np.asarray(l, dtype=float)
    n = l.size - 1
    Fo = F + np.outer(g, psi1)
    try:
        Fo_inv = np.linalg.inv(Fo)
    except np.linalg.LinAlgError:
        raise SingularFo("F + g psi1^T is singular") from None
    # 1-norm condition number; cheaper than an SVD and called every step
    cond = np.abs(Fo).sum(axis=0).max() * np.abs(Fo_inv).sum(axis=0).max()
    if not cond <= FO_COND_LIMIT:
        raise SingularFo("F + g psi1^T is singular")

    Psi = np.empty((n + 1, psi1.size))
    Psi[0] = psi1
    for i in range(n - 1):
        Psi[i + 1] = Psi[i] @ Fo + l[i] * psi1
    Psi[n] = -l[n] * (psi1 @ Fo_inv)
    psi_u = (Psi[n - 1] @ Fo + l[n - 1] * psi1 - Psi[n]) / b_n
    return Fo, Psi, psi_u


def _companion_psi_chain(psi1, alpha_F, l, b_n):
    # psi_chain specialised to a bottom-row companion F with g = e_s, in
    # plain floats. With a = alpha_F - psi1 the row product is
    # (v^T Fo)_j = v_{j-1} - v_{s-1} a_j, and y^T Fo = psi1^T is solved by
    # back-substitution from y_{s-1} = -psi1_0 / a_0.
    s = len(psi1)
    n = len(l) - 1
    a = [alpha_F[j] - psi1[j] for j in range(s)]
    scale = max(1.0, max(abs(v) for v in a))
    if abs(a[0]) <= scale / FO_COND_LIMIT:
        raise SingularFo("F + g psi1^T is singular")

    def times_fo(v):
        last = v[s - 1]
        return [(v[j - 1] if j else 0.0) - last * a[j] for j in range(s)]

    rows = [list(psi1)]
    for i in range(n - 1):
        prod = times_fo(rows[i])
        rows.append([prod[j] + l[i] * psi1[j] for j in range(s)])
    y = [0.0] * s
    y[s - 1] = -psi1[0] / a[0]
    for j in range(1, s):
        y[j - 1] = psi1[j] + y[s - 1] * a[j]
    rows.append([-l[n] * v for v in y])
    prod = times_fo(rows[n - 1])
    psi_u = [(prod[j] + l[n - 1] * psi1[j] - rows[n][j]) / b_n for j in range(s)]
    return rows, psi_u


@dataclass(frozen=True)
class InternalModelObserver:
    """Filter ``xi' = F xi + g (y - p_1)`` together with its psi-chain."""

    F: np.ndarray
    g: np.ndarray
    Fo: np.ndarray
    Psi: np.ndarray
    psi_u: np.ndarray
    xi0: np.ndarray = None

    def __post_init__(self):
        if self.xi0 is None:
            object.__setattr__(self, "xi0", np.zeros(self.F.shape[0]))

    @property
    def psi1(self):
        return self.Psi[0]


def companion_pair(F):
    """Validate a Hurwitz bottom-row companion F and return it with ``g = e_s``."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if not np.array_equal(F, companion_from_poly(char_poly(F))):
        raise ValueError("F must be a bottom-row companion matrix")
    if not is_hurwitz(F):
        raise NotHurwitz("F must be Hurwitz")
    g = np.zeros(F.shape[0])
    g[-1] = 1.0
    return F, g


def procedure1_construct(S, F, l, b_n, xi0=None):
    """Disturbance observer for a known exosystem matrix S.

    With F in companion form and ``g = e_s``, ``psi1 = alpha_F - alpha_S``
    places the characteristic polynomial of S on ``F + g psi1^T``; the rest of
    the chain follows from :func:`psi_chain`.
    """
    F, g = companion_pair(F)
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape != F.shape:
        raise ValueError("S and F must have the same dimension")
    psi1 = char_poly(F) - char_poly(S)
    Fo, Psi, psi_u = psi_chain(psi1, F, g, l, b_n)
    return InternalModelObserver(F=F, g=g, Fo=Fo, Psi=Psi, psi_u=psi_u, xi0=xi0)


def xi_filter_derivative(imo, xi, y, p1):
    dxi = imo.F @ xi
    dxi += imo.g * (y - p1)
    return dxi


def d2_estimate(psi_u, xi):
    return float(np.dot(psi_u, xi))


@dataclass(frozen=True)
class AdaptiveEstimator:
    """Estimator of psi1 for an unknown exosystem matrix.

    Parameters
    ----------
    F, g : companion pair shared with the xi filter.
    Gamma : (s, s) positive definite adaptation matrix.
    Q1 : (s, s) positive definite weight defining P1.
    convention : ``"written"`` solves ``F^T P1 + P1 F = -2 Q1``;
        ``"transposed"`` solves ``F P1 + P1 F^T = -2 Q1``.
    gain_form : ``"direct"`` multiplies the regressor by Gamma,
        ``"inverse"`` by Gamma^{-1}.
    """

    F: np.ndarray
    g: np.ndarray
    Gamma: np.ndarray
    Q1: np.ndarray
    convention: str = "written"
    gain_form: str = "direct"
    zeta0: np.ndarray = None
    psi1_hat0: np.ndarray = None
    P1: np.ndarray = field(init=False, repr=False)
    gain: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s = self.F.shape[0]
        Gamma = np.atleast_2d(np.asarray(self.Gamma, dtype=float))
        if not is_positive_definite(Gamma):
            raise ValueError("Gamma must be positive definite")
        if self.convention == "written":
            P1 = solve_lyapunov(self.F, self.Q1)
        elif self.convention == "transposed":
            P1 = solve_lyapunov(self.F.T, self.Q1)
        else:
            raise ValueError("convention must be 'written' or 'transposed'")
        if self.gain_form == "direct":
            gain = Gamma
        elif self.gain_form == "inverse":
            gain = np.linalg.inv(Gamma)
        else:
            raise ValueError("gain_form must be 'direct' or 'inverse'")
        object.__setattr__(self, "Gamma", Gamma)
        object.__setattr__(self, "P1", P1)
        object.__setattr__(self, "gain", gain)
        for name in ("zeta0", "psi1_hat0"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, np.zeros(s))

    @property
    def output_row(self):
        """``g^T P1``, the row that turns e_xi into the adaptation error."""
        return self.g @ self.P1


def adaptive_update_derivatives(est, xi, zeta, psi1_hat):
    """Return ``(zeta', psi1_hat')``.

    ``zeta' = F zeta + g psi1_hat^T xi`` and
    ``psi1_hat' = G xi g^T P1 (xi - zeta)`` with G = Gamma or Gamma^{-1}.
    """
    dzeta = est.F @ zeta + est.g * float(np.dot(psi1_hat, xi))
    err = float(est.output_row @ (xi - zeta))
    dpsi = (est.gain @ xi) * err
    return dzeta, dpsi


class HatChain:
    """psi-chain rebuilt from the running estimate of psi1.

    Uses the companion structure of (F, g) and agrees with
    :func:`psi_chain` to rounding. When ``F + g psi1_hat^T`` is singular the previous chain is kept and the
    event is counted.
    """

    def __init__(self, F, g, l, b_n, warn_fraction=1e-3):
        F, g = companion_pair(F)
        self.F = F
        self.g = g
        self.l = np.asarray(l, dtype=float)
        self.b_n = b_n
        self._alpha = char_poly(F).tolist()
        self._l = self.l.tolist()
        self.warn_fraction = warn_fraction
        self.evaluations = 0
        self.singular_count = 0
        self.current = None

    def update(self, psi1_hat):
        self.evaluations += 1
        try:
            psi1 = [float(v) for v in psi1_hat]
            rows, psi_u = _companion_psi_chain(psi1, self._alpha, self._l, self.b_n)
            Fo = self.F + np.outer(self.g, psi1)
            self.current = (Fo, np.array(rows), np.array(psi_u))
        except SingularFo:
            self.singular_count += 1
            if self.current is None:
                raise
        return self.current

    def report(self):
        if self.evaluations and self.singular_count > self.warn_fraction * self.evaluations:
            warnings.warn(
                f"estimated Fo was singular in {self.singular_count} of "
                f"{self.evaluations} chain updates; previous chain was held",
                RuntimeWarning,
                stacklevel=2,
            )
        return self.singular_count


def procedure2_construct(psi1_hat, F, g, l, b_n, previous=None):
    """Estimated chain ``(Fo_hat, Psi_hat, psi_u_hat)`` from psi1_hat.

    Falls back to ``previous`` when Fo_hat is singular; with no previous
    chain the SingularFo error propagates.
    """
    try:
        return psi_chain(psi1_hat, F, g, l, b_n)
    except SingularFo:
        if previous is None:
            raise
        return previous


def assemble_qc(F, g, A, c, l, psi1, Q1, Q2, gamma1, gamma2):
    """Block matrix ``Q_c`` of the error system ``(e_xi, e_eta, eps)``.

    Uses ``P1`` from ``F^T P1 + P1 F = -2 Q1``; Q2 enters only through its
    diagonal block.
    """
    P1 = solve_lyapunov(F, Q1)
    P1g = P1 @ g
    X = -0.5 * np.outer(P1g, psi1)
    Y = -0.5 * np.outer(P1g, c)
    Z = 0.5 * gamma1 * np.outer(P1g, c)
    return np.block(
        [
            [Q1, X, Y],
            [X.T, gamma1 * Q1, Z],
            [Y.T, Z.T, gamma2 * Q2],
        ]
    )


def gamma_search(F, l, A, c, g, psi1, Q1, Q2, max_exponent=20):
    """Smallest powers of two ``(gamma1, gamma2)`` making Q_c positive definite.

    gamma1 is minimised first, then gamma2 for that gamma1. Only the
    stability argument needs these weights; the update law never does.

    Returns
    -------
    gamma1, gamma2 : float
    Qc : ndarray
    """
    grid = [2.0**k for k in range(max_exponent + 1)]
    for gamma1 in grid:
        for gamma2 in grid:
            Qc = assemble_qc(F, g, A, c, l, psi1, Q1, Q2, gamma1, gamma2)
            if is_positive_definite(Qc):
                return gamma1, gamma2, Qc
    raise NotFound("no (gamma1, gamma2) on the grid makes Q_c positive definite")


@dataclass
class AnalysisOracle:
    """Sylvester-equation coordinates; used for verification only.

    ``Q`` solves ``Q S = (A - l c) Q + b h^T`` so that ``q = Q w``; ``M``
    solves ``M S - F M = g Q_(1)`` so that ``eta = M w``.
    """

    Q: np.ndarray
    M: np.ndarray
    Psi: np.ndarray
    psi_u: np.ndarray
    Fo: np.ndarray


def sylvester_coordinates(S, h, F, g, l, b_n):
    """Chain obtained from the coordinate change instead of the recursion.

    ``Psi^T = Q M^{-1}``, ``psi_u^T = h^T M^{-1}`` and ``Fo = M S M^{-1}``.
    This needs h, so it is not implementable as an observer.
    """
    l = np.asarray(l, dtype=float)
    A, b, c = extended_matrices(l.size - 1, b_n)
    Q = solve_sylvester(A - np.outer(l, c), S, np.outer(b, h))
    M = solve_sylvester(F, S, np.outer(g, Q[0]))
    Minv = np.linalg.inv(M)
    return AnalysisOracle(Q=Q, M=M, Psi=Q @ Minv, psi_u=h @ Minv, Fo=M @ S @ Minv)


@dataclass
class ErrorDecomposition:
    t: np.ndarray
    p: np.ndarray
    q: np.ndarray
    eps: np.ndarray
    x: np.ndarray

    @property
    def residual(self):
        return self.x - self.p - self.q - self.eps

    @property
    def residual_norm(self):
        return np.linalg.norm(self.residual, axis=1)


def lemma1_decompose(trace, Q, l, b_n, p0=None, q0=None, eps0=None):
    """Integrate ``p``, ``q`` and ``eps`` along a recorded trajectory.

    ``p' = (A - l c) p + l y + b u``, ``q' = (A - l c) q + b d2`` and
    ``eps' = (A - l c) eps``, with y, u and d2 taken from ``trace`` through
    cubic interpolation and RK4 steps on the trace's time grid.

    Defaults give consistent initial conditions: ``q(0) = Q w(0)``,
    ``eps(0) = 0`` and ``p(0) = x(0) - q(0)``, where x is the extended state.
    """
    l = np.asarray(l, dtype=float)
    n = l.size - 1
    A, b, c = extended_matrices(n, b_n)
    Al = A - np.outer(l, c)

    t = trace.t
    x = trace.block("x", n + 1)
    u = trace["u"]
    d2 = trace["d2"]
    y = x[:, 0]
    w_init = trace.block("w", Q.shape[1])[0]

    q0 = Q @ w_init if q0 is None else np.asarray(q0, dtype=float)
    eps0 = np.zeros(n + 1) if eps0 is None else np.asarray(eps0, dtype=float)
    p0 = x[0] - q0 if p0 is None else np.asarray(p0, dtype=float)

    inputs = CubicSpline(t, np.column_stack([y, u, d2]), axis=0)
    m = n + 1
    # stacked state [p, q, eps]; block-diagonal dynamics
    big = np.kron(np.eye(3), Al)
    drive = np.zeros((3 * m, 3))
    drive[:m, 0] = l
    drive[:m, 1] = b
    drive[m : 2 * m, 2] = b

    def rhs(ti, z):
        return big @ z + drive @ inputs(ti)

    z = np.concatenate([p0, q0, eps0])
    out = np.empty((t.size, 3 * m))
    out[0] = z
    for k in range(t.size - 1):
        h = t[k + 1] - t[k]
        k1 = rhs(t[k], z)
        k2 = rhs(t[k] + 0.5 * h, z + 0.5 * h * k1)
        k3 = rhs(t[k] + 0.5 * h, z + 0.5 * h * k2)
        k4 = rhs(t[k] + h, z + h * k3)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = z
    return ErrorDecomposition(
        t=t, p=out[:, :m], q=out[:, m : 2 * m], eps=out[:, 2 * m :], x=x
    )
