import numpy as np
import pytest

from iadrc.config import build_scenario, load_config
from iadrc.sim import run_scenario

# Example constants: second-order plant, b2 = 3, d2 = 0.8 sin(2t + pi/5).
B2 = 3.0
SIGMA = 2.0
R = 0.8
PHI = np.pi / 5
S_PAPER = np.array([[0.0, SIGMA], [-SIGMA, 0.0]])
H_PAPER = R * np.array([np.cos(PHI), np.sin(PHI)])
F_PAPER = np.array([[0.0, 1.0], [-2.0, -3.0]])
G_PAPER = np.array([0.0, 1.0])
L_PAPER = np.array([45.0, 650.0, 3000.0])  # ESO poles -10, -15, -20
PSI1_TRUE = np.array([-2.0, 3.0])


@pytest.fixture(scope="session")
def traces():
    """Lazily simulated built-in scenarios shared by the whole session."""
    cache = {}

    def get(name, mode=None):
        key = (name, mode)
        if key not in cache:
            cache[key] = run_scenario(build_scenario(load_config(name), mode=mode))
        return cache[key]

    return get
