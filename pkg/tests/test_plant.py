import numpy as np
import pytest

from iadrc.errors import NonFinite, WindowTooShort
from iadrc.plant import (
    Exosystem,
    PlantModel,
    exo_output,
    exo_state,
    persistent_excitation_check,
    plant_derivative,
    quadratic_plus_slow_sine,
    sinusoidal_exosystem,
    true_extended_state,
)

from conftest import B2, H_PAPER, PHI, R, S_PAPER

SIGMA0 = 0.5
EXO = sinusoidal_exosystem(R, 2.0, PHI)


def test_sinusoidal_exosystem_matches_example_matrices():
    assert np.array_equal(EXO.S, S_PAPER)
    assert np.allclose(EXO.h, H_PAPER)
    assert np.array_equal(EXO.w0, [0.0, 1.0])


def test_exo_output_examples():
    assert exo_output(EXO, 0.0) == pytest.approx(0.8 * np.sin(np.pi / 5), abs=1e-15)
    assert exo_output(EXO, 0.0) == pytest.approx(0.4702282018339785, abs=1e-15)
    assert exo_output(EXO, np.pi / 2) == pytest.approx(-0.8 * np.sin(np.pi / 5), abs=1e-12)
    silent = Exosystem(S=S_PAPER, h=[0.0, 0.0], w0=[0.0, 1.0])
    assert np.all(exo_output(silent, np.linspace(0, 10, 7)) == 0.0)


def test_exo_output_is_the_sinusoid():
    t = np.linspace(0, 20, 101)
    assert np.allclose(exo_output(EXO, t), R * np.sin(2 * t + PHI), atol=1e-12)


def test_exosystem_rejects_inconsistent_dimensions():
    with pytest.raises(ValueError):
        Exosystem(S=S_PAPER, h=[1.0, 2.0, 3.0], w0=[0.0, 1.0])


def test_plant_requires_nonzero_gain():
    with pytest.raises(ValueError):
        PlantModel(order=2, b_n=0.0)
    with pytest.raises(ValueError):
        PlantModel(order=0, b_n=1.0)


def test_plant_derivative_double_integrator():
    plant = PlantModel(order=2, b_n=B2)
    assert np.array_equal(plant_derivative(plant, [1.0, 2.0], 0.0, 0.0), [2.0, 0.0])


def test_plant_derivative_with_offset_and_d2():
    plant = PlantModel(order=2, b_n=B2, offset=SIGMA0)
    d2 = exo_output(EXO, 0.0)
    dx = plant_derivative(plant, [0.0, 0.0], 1.0, 0.0, d2=d2)
    assert dx[0] == 0.0
    assert dx[1] == pytest.approx(3 * (1 + SIGMA0 + 0.4702282018339785), rel=1e-14)


def test_plant_derivative_complex_case():
    plant = PlantModel(order=2, b_n=B2, nonlinearity=quadratic_plus_slow_sine, offset=SIGMA0)
    d2 = exo_output(EXO, 0.0)
    dx = plant_derivative(plant, [1.0, 1.0], 0.0, 0.0, d2=d2)
    assert dx[0] == 1.0
    assert dx[1] == pytest.approx(2 + 3 * (SIGMA0 + d2), rel=1e-14)


def test_plant_derivative_flags_non_finite():
    plant = PlantModel(order=2, b_n=B2, nonlinearity=lambda x, w, t: np.inf)
    with pytest.raises(NonFinite):
        plant_derivative(plant, [0.0, 0.0], 0.0, 0.0)
    plant = PlantModel(order=2, b_n=B2, offset=lambda t: np.nan)
    with pytest.raises(NonFinite):
        plant_derivative(plant, [0.0, 0.0], 0.0, 0.0)


def test_true_extended_state_constant_offset():
    plant = PlantModel(order=2, b_n=B2, offset=SIGMA0)
    ext, d1, d2, d = true_extended_state(plant, EXO, [0.3, -0.1], 1.7)
    assert ext == pytest.approx(3 * SIGMA0)
    assert d1 == pytest.approx(SIGMA0)
    assert d2 == pytest.approx(R * np.sin(2 * 1.7 + PHI))
    assert d == d1 + d2


def test_true_extended_state_zero_disturbances():
    plant = PlantModel(order=2, b_n=B2)
    assert true_extended_state(plant, None, [1.0, 2.0], 0.0) == (0.0, 0.0, 0.0, 0.0)


def test_true_extended_state_complex_case():
    plant = PlantModel(order=2, b_n=B2, nonlinearity=quadratic_plus_slow_sine, offset=SIGMA0)
    t, x = 12.5, np.array([0.4, -0.7])
    ext, *_ = true_extended_state(plant, EXO, x, t)
    assert ext == pytest.approx(0.16 + 0.49 + np.sin(np.pi * t / 40) + 3 * SIGMA0, rel=1e-14)


def test_nonlinearity_at_origin_is_constant_in_state():
    # f_n(0, 0, t) may vary in time only through the explicit t argument
    assert quadratic_plus_slow_sine(np.zeros(2), 0.0, 0.0) == 0.0


def test_persistent_excitation_examples():
    t = np.linspace(0, 4 * np.pi, 4001)
    w = np.column_stack([np.sin(2 * t), np.cos(2 * t)])
    assert persistent_excitation_check(t, w, np.pi, 0.1)
    # the window integral is (pi / 2) I, so a threshold just below passes
    assert persistent_excitation_check(t, w, np.pi, 1.55)
    assert not persistent_excitation_check(t, w, np.pi, 1.58)
    const = np.tile([1.0, 0.0], (t.size, 1))
    assert not persistent_excitation_check(t, const, 1.0, 1e-9)
    assert not persistent_excitation_check(t, np.zeros_like(w), 1.0, 0.0)


def test_persistent_excitation_window_too_short():
    t = np.linspace(0, 1, 11)
    with pytest.raises(WindowTooShort):
        persistent_excitation_check(t, np.ones((11, 2)), 2.0, 0.1)


def test_simulated_exosystem_matches_closed_form(traces):
    trace = traces("paper-unknownS")
    w = trace.block("w", 2)
    closed = np.array([exo_state(EXO, t) for t in trace.t[::50]])
    assert np.max(np.abs(w[::50] - closed)) < 1e-9
    assert np.max(np.abs(trace["d2"] - R * np.sin(2 * trace.t + PHI))) < 1e-9


def test_exosystem_energy_is_conserved(traces):
    w = traces("paper-unknownS").block("w", 2)
    assert np.max(np.abs(np.linalg.norm(w, axis=1) - 1.0)) < 1e-6


def test_reconstruction_of_extended_state(traces):
    # x2' - b u = x3 + b d2 along the trajectory; central differences on the
    # recorded grid are second-order accurate
    trace = traces("paper-knownS", "BADRC")
    t, x2 = trace.t, trace["x2"]
    h = t[1] - t[0]
    deriv = (x2[2:] - x2[:-2]) / (2 * h)
    lhs = deriv - B2 * trace["u"][1:-1]
    rhs = trace["x3"][1:-1] + B2 * trace["d2"][1:-1]
    late = t[1:-1] > 5.0
    assert np.max(np.abs(lhs - rhs)[late]) < 2e-3


def test_total_disturbance_identity(traces):
    trace = traces("paper-complex")
    assert np.array_equal(trace["d"], trace["d1"] + trace["d2"])
    assert np.allclose(trace["d1"], trace["x3"] / B2, rtol=1e-15, atol=0)
