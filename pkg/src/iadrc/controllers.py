"""BADRC and IADRC control laws.

BADRC feeds back the ESO state, ``u = -k^T v``, where the last entry of k
cancels the estimated extended state. IADRC adds the feedforward
``u_d = -d2_hat`` from the internal-model observer and drives its ESO with
the feedback part ``u_c`` only.

The cancelling entry is ``1 / b_n``: the extended state enters the last
plant equation without the input gain, so ``u = -x_{n+1} / b_n`` is what
removes it.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NotHurwitz
from .linalg import companion_from_poly, is_hurwitz, poly_from_roots
from .observers import (
    AdaptiveEstimator,
    EsoObserver,
    InternalModelObserver,
    companion_pair,
    procedure1_construct,
    psi_chain,
)

__all__ = [
    "MODES",
    "observer_gain",
    "feedback_gain",
    "ControllerConfig",
    "ControlOutput",
    "badrc_control",
    "iadrc_control",
    "build_controller",
]

MODES = ("BADRC", "IADRC_knownS", "IADRC_unknownS")


def observer_gain(poles):
    """Gain l placing the eigenvalues of ``A - l c`` at ``poles``."""
    return poly_from_roots(poles)[::-1].copy()


def feedback_gain(b_n, poles):
    """``k = [k_bar, 1/b_n]`` with ``A_bar - b_bar k_bar`` having eigenvalues ``poles``."""
    k_bar = poly_from_roots(poles) / b_n
    return np.append(k_bar, 1.0 / b_n)


@dataclass(frozen=True)
class ControlOutput:
    u: float
    u_c: float
    u_d: float
    d2_hat: float


def badrc_control(v, k):
    """``u = -k^T v``."""
    return -float(np.dot(k, v))


def iadrc_control(v, k, d2_hat):
    """Feedback ``u_c = -k^T v`` plus feedforward ``u_d = -d2_hat``."""
    u_c = -float(np.dot(k, v))
    u_d = -d2_hat
    return ControlOutput(u=u_c + u_d, u_c=u_c, u_d=u_d, d2_hat=d2_hat)


@dataclass(frozen=True)
class ControllerConfig:
    """Everything the closed loop needs besides the plant.

    ``eso`` is the observer whose state v is fed back. ``dob_eso`` is the
    u-driven observer p feeding the xi filter (IADRC only). ``imo`` holds the
    filter and, for known S, the fixed psi-chain; ``adaptive`` is present for
    unknown S. ``force_zero_psi_u`` disconnects the feedforward while keeping
    every observer running.
    """

    mode: str
    k: np.ndarray
    eso: EsoObserver
    dob_eso: EsoObserver = None
    imo: InternalModelObserver = None
    adaptive: AdaptiveEstimator = None
    force_zero_psi_u: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown controller mode {self.mode!r}")
        k = np.atleast_1d(np.asarray(self.k, dtype=float))
        object.__setattr__(self, "k", k)
        n = self.eso.n
        if k.size != n + 1:
            raise ValueError("feedback gain must have n+1 entries")
        closed = companion_from_poly(self.eso.b_n * k[:-1])
        if not is_hurwitz(closed):
            raise NotHurwitz("A_bar - b_bar k_bar is not Hurwitz")
        if self.mode == "BADRC":
            if self.eso.driven_by != "u":
                raise ValueError("the BADRC observer is driven by u")
            return
        if self.eso.driven_by != "u_c":
            raise ValueError("the IADRC observer must be driven by u_c")
        if self.dob_eso is None or self.imo is None:
            raise ValueError("IADRC needs the disturbance observer")
        if self.mode == "IADRC_unknownS" and self.adaptive is None:
            raise ValueError("unknown-S IADRC needs an adaptive estimator")

    @property
    def n(self):
        return self.eso.n

    @property
    def l(self):
        return self.eso.l

    @property
    def b_n(self):
        return self.eso.b_n


def build_controller(
    mode,
    n,
    b_n,
    k=None,
    l=None,
    feedback_poles=None,
    observer_poles=None,
    S=None,
    F=None,
    Gamma=None,
    Q1=None,
    convention="written",
    gain_form="direct",
    force_zero_psi_u=False,
    initial=None,
):
    """Assemble a :class:`ControllerConfig` from gains or pole locations.

    Defaults: feedback poles all at -3, observer poles all at -15.
    ``initial`` may hold initial states under the keys ``v``, ``p``, ``xi``,
    ``zeta`` and ``psi1_hat``.
    """
    initial = initial or {}
    if k is None:
        k = feedback_gain(b_n, feedback_poles if feedback_poles is not None else [-3.0] * n)
    if l is None:
        l = observer_gain(observer_poles if observer_poles is not None else [-15.0] * (n + 1))

    if mode == "BADRC":
        eso = EsoObserver(l=l, b_n=b_n, driven_by="u", p0=initial.get("v"))
        return ControllerConfig(mode=mode, k=k, eso=eso)

    eso = EsoObserver(l=l, b_n=b_n, driven_by="u_c", p0=initial.get("v"))
    dob_eso = EsoObserver(l=l, b_n=b_n, driven_by="u", p0=initial.get("p"))
    F = np.asarray(F if F is not None else [[0.0, 1.0], [-2.0, -3.0]], dtype=float)
    if mode == "IADRC_knownS":
        if S is None:
            raise ValueError("known-S IADRC needs the exosystem matrix S")
        imo = procedure1_construct(S, F, l, b_n, xi0=initial.get("xi"))
        return ControllerConfig(
            mode=mode, k=k, eso=eso, dob_eso=dob_eso, imo=imo, force_zero_psi_u=force_zero_psi_u
        )

    F, g = companion_pair(F)
    s = F.shape[0]
    psi1_hat0 = np.zeros(s) if initial.get("psi1_hat") is None else np.asarray(initial["psi1_hat"], float)
    # chain at the initial estimate; the simulation rebuilds it every step
    Fo, Psi, psi_u = psi_chain(psi1_hat0, F, g, l, b_n)
    imo = InternalModelObserver(F=F, g=g, Fo=Fo, Psi=Psi, psi_u=psi_u, xi0=initial.get("xi"))
    adaptive = AdaptiveEstimator(
        F=F,
        g=g,
        Gamma=np.eye(s) if Gamma is None else Gamma,
        Q1=np.eye(s) if Q1 is None else Q1,
        convention=convention,
        gain_form=gain_form,
        zeta0=initial.get("zeta"),
        psi1_hat0=psi1_hat0,
    )
    return ControllerConfig(
        mode=mode,
        k=k,
        eso=eso,
        dob_eso=dob_eso,
        imo=imo,
        adaptive=adaptive,
        force_zero_psi_u=force_zero_psi_u,
    )
