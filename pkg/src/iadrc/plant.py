"""Simulated truth: chain-of-integrators plant, exosystem and disturbance split.

The plant is

    x_i' = x_{i+1},                          i < n
    x_n' = f_n(x, w1, t) + b_n (u + w2(t))

with the matched external disturbance ``w2 = offset(t) + d2(t)``, where
``d2 = h^T w`` is produced by the exosystem ``w' = S w``. Folding everything
that is not ``d2`` into one extended state gives

    x_{n+1} = f_n(x, w1, t) + b_n offset(t),   d1 = x_{n+1} / b_n,   d = d1 + d2.
"""

from dataclasses import dataclass
import math
from typing import Callable, Union

import numpy as np
import scipy.linalg
from scipy.integrate import cumulative_trapezoid

from .errors import NonFinite, WindowTooShort

__all__ = [
    "PlantModel",
    "Exosystem",
    "NONLINEARITIES",
    "sinusoidal_exosystem",
    "exo_state",
    "exo_output",
    "plant_derivative",
    "true_extended_state",
    "persistent_excitation_check",
]


def zero_nonlinearity(x, omega1, t):
    return 0.0


def quadratic_plus_slow_sine(x, omega1, t):
    """``x_1^2 + ... + x_n^2 + sin(pi t / 40)``."""
    return float(np.dot(x, x)) + math.sin(math.pi * t / 40.0)


NONLINEARITIES = {
    "zero": zero_nonlinearity,
    "quadratic_plus_slow_sine": quadratic_plus_slow_sine,
}


def _zero_signal(t):
    return 0.0


@dataclass(frozen=True)
class PlantModel:
    """Chain of ``order`` integrators with input gain ``b_n``.

    ``offset`` is the part of the matched disturbance not generated by the
    exosystem (a constant or a function of time). ``omega1`` feeds the
    nonlinearity only and is the zero signal unless supplied.
    """

    order: int
    b_n: float
    nonlinearity: Callable = zero_nonlinearity
    offset: Union[float, Callable] = 0.0
    omega1: Callable = _zero_signal

    def __post_init__(self):
        if int(self.order) < 1:
            raise ValueError("plant order must be at least 1")
        if self.b_n == 0 or not np.isfinite(self.b_n):
            raise ValueError("b_n must be finite and nonzero")

    def offset_at(self, t):
        return self.offset(t) if callable(self.offset) else float(self.offset)

    def omega2(self, t, exo=None):
        """Total matched external disturbance, using the closed-form exosystem."""
        d2 = 0.0 if exo is None else exo_output(exo, t)
        return self.offset_at(t) + d2


@dataclass(frozen=True)
class Exosystem:
    """Autonomous generator ``w' = S w``, ``w(0) = w0``, ``d2 = h^T w``."""

    S: np.ndarray
    h: np.ndarray
    w0: np.ndarray

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        w0 = np.atleast_1d(np.asarray(self.w0, dtype=float))
        s = S.shape[0]
        if S.shape != (s, s) or h.shape != (s,) or w0.shape != (s,):
            raise ValueError("exosystem dimensions are inconsistent")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "w0", w0)

    @property
    def dim(self):
        return self.S.shape[0]


def sinusoidal_exosystem(amplitude, frequency, phase):
    """Exosystem for ``d2 = r sin(sigma t + phi)``.

    With ``w = [sin(sigma t), cos(sigma t)]`` the generator is
    ``S = [[0, sigma], [-sigma, 0]]``, ``w0 = [0, 1]`` and
    ``h = [r cos(phi), r sin(phi)]``.
    """
    S = np.array([[0.0, frequency], [-frequency, 0.0]])
    h = amplitude * np.array([np.cos(phase), np.sin(phase)])
    return Exosystem(S=S, h=h, w0=np.array([0.0, 1.0]))


def exo_state(exo, t):
    """Closed-form ``w(t) = expm(S t) w0``."""
    return scipy.linalg.expm(exo.S * t) @ exo.w0


def exo_output(exo, t):
    """Closed-form ``d2(t) = h^T expm(S t) w0``; ``t`` may be an array."""
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return float(exo.h @ exo_state(exo, float(t)))
    return np.array([exo.h @ exo_state(exo, ti) for ti in t])


def plant_derivative(model, x, u, t, d2=0.0):
    """Right-hand side of the plant for state ``x`` (length n).

    ``d2`` is the exosystem output at time ``t``; the total matched
    disturbance is ``model.offset_at(t) + d2``.
    """
    x = np.asarray(x, dtype=float)
    fn = model.nonlinearity(x, model.omega1(t), t)
    w2 = model.offset_at(t) + d2
    last = fn + model.b_n * (u + w2)
    if not np.isfinite(last):
        raise NonFinite(f"non-finite plant derivative at t={t}")
    dx = np.empty(model.order)
    dx[:-1] = x[1:]
    dx[-1] = last
    return dx


def true_extended_state(model, exo, x, t, d2=None):
    """Ground truth ``(x_{n+1}, d1, d2, d)`` for metrics; never fed to observers.

    ``d2`` defaults to the closed-form exosystem output.
    """
    x = np.asarray(x, dtype=float)
    if d2 is None:
        d2 = 0.0 if exo is None else exo_output(exo, t)
    ext = model.nonlinearity(x, model.omega1(t), t) + model.b_n * model.offset_at(t)
    d1 = ext / model.b_n
    return ext, d1, d2, d1 + d2


def persistent_excitation_check(t, signal, window, threshold):
    """Check that every window of length ``window`` satisfies

        lambda_min( integral xi xi^T dtau ) > threshold

    Integrals use the trapezoidal rule on the sample grid ``t``; windows start
    at every sample whose window fits inside the record.

    Parameters
    ----------
    t : (N,) array_like
        Increasing sample times.
    signal : (N, s) array_like
    window : float
    threshold : float

    Returns
    -------
    bool
    """
    t = np.asarray(t, dtype=float)
    sig = np.asarray(signal, dtype=float)
    if sig.ndim == 1:
        sig = sig[:, None]
    if t.size < 2 or t[-1] - t[0] < window * (1 - 1e-12):
        raise WindowTooShort(f"record of length {t[-1] - t[0]:.4g} shorter than window {window:.4g}")

    outer = sig[:, :, None] * sig[:, None, :]
    cum = cumulative_trapezoid(outer, t, axis=0, initial=0.0)
    ends = np.searchsorted(t, t + window * (1 - 1e-12))
    starts = np.nonzero(ends < t.size)[0]
    gram = cum[ends[starts]] - cum[starts]
    min_eig = np.linalg.eigvalsh(gram)[:, 0]
    return bool(np.min(min_eig) > threshold)
