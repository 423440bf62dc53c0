"""Active disturbance rejection control with an internal-model disturbance observer.

The package is organised as

- :mod:`iadrc.linalg` for the small Sylvester, Lyapunov and polynomial kernels,
- :mod:`iadrc.plant` for the simulated plant and disturbance generator,
- :mod:`iadrc.observers` for the ESO, the internal-model observer and the
  adaptive estimator,
- :mod:`iadrc.controllers` for the BADRC and IADRC laws,
- :mod:`iadrc.sim` for closed-loop integration and metrics,
- :mod:`iadrc.config` and :mod:`iadrc.cli` for scenario files and the command line.
"""

from .config import build_scenario, builtin_names, load_config
from .controllers import build_controller, feedback_gain, observer_gain
from .plant import Exosystem, PlantModel, sinusoidal_exosystem
from .sim import SimScenario, compute_metrics, run_scenario

__all__ = [
    "PlantModel",
    "Exosystem",
    "sinusoidal_exosystem",
    "build_controller",
    "feedback_gain",
    "observer_gain",
    "SimScenario",
    "run_scenario",
    "compute_metrics",
    "load_config",
    "build_scenario",
    "builtin_names",
]
