"""
Designing the observer chain by hand
====================================

This walks through the pieces a scenario file assembles for you: observer and
feedback gains from poles, the internal-model construction for a known
generator, the Lyapunov weight of the adaptive law and the weights that make
the composite error system provably decreasing.
"""

# %%
import numpy as np

from iadrc import feedback_gain, observer_gain
from iadrc.linalg import char_poly, companion_from_poly, solve_lyapunov
from iadrc.observers import extended_matrices, gamma_search, procedure1_construct

b_n = 3.0
l = observer_gain([-10.0, -15.0, -20.0])
k = feedback_gain(b_n, [-1.0, -2.0])
print("ESO gains l =", l)
print("feedback k  =", k, "(last entry cancels the extended state)")

# %%
# Generator of a 2 rad/s sinusoid and a stable filter s^2 + 3 s + 2.
S = np.array([[0.0, 1.0], [-4.0, 0.0]])
F = companion_from_poly([2.0, 3.0])
imo = procedure1_construct(S, F, l, b_n)
print("psi1 =", imo.psi1)
print("psi_u =", imo.psi_u)
print("char poly of F + g psi1^T:", char_poly(imo.Fo), "matches S:", char_poly(S))

# %%
# Lyapunov weight for the adaptive law, both conventions side by side.
Q1 = np.eye(2)
print("F^T P + P F = -2 Q1 :\n", solve_lyapunov(F, Q1))
print("F P + P F^T = -2 Q1 :\n", solve_lyapunov(F.T, Q1))

# %%
# Smallest power-of-two weights making the composite matrix positive definite.
A, bvec, c = extended_matrices(2, b_n)
g = np.array([0.0, 1.0])
gamma1, gamma2, Qc = gamma_search(F, l, A, c, g, imo.psi1, Q1, np.eye(3))
print(f"gamma1 = {gamma1:g}, gamma2 = {gamma2:g}, min eig {np.linalg.eigvalsh(Qc).min():.3g}")
