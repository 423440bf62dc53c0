"""Scenario documents: schema, built-in library, overrides and construction.

A scenario is a YAML mapping validated against :data:`SCHEMA` before anything
is built. Unknown keys are rejected. Semantic problems the schema cannot
express (wrong vector lengths, unstable gains) surface as
:class:`~iadrc.errors.ConfigInvalid` from :func:`build_scenario`.
"""

import copy
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .controllers import MODES, build_controller
from .errors import ConfigInvalid
from .linalg import companion_from_poly
from .plant import NONLINEARITIES, Exosystem, PlantModel, sinusoidal_exosystem
from .sim import SimScenario

__all__ = [
    "SCHEMA_VERSION",
    "SCHEMA",
    "builtin_names",
    "load_config",
    "validate_config",
    "apply_overrides",
    "build_scenario",
]

SCHEMA_VERSION = 1

_number = {"type": "number"}
_vector = {"type": "array", "items": _number, "minItems": 1}
_matrix = {"type": "array", "items": _vector, "minItems": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "plant", "exosystem", "controller", "simulation"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "description": {"type": "string"},
        "plant": {
            "type": "object",
            "additionalProperties": False,
            "required": ["order", "b_n"],
            "properties": {
                "order": {"type": "integer", "minimum": 1},
                "b_n": {"type": "number", "not": {"const": 0}},
                "nonlinearity": {"enum": sorted(NONLINEARITIES)},
                "offset": _number,
            },
        },
        "exosystem": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["amplitude", "frequency", "phase"],
                    "properties": {"amplitude": _number, "frequency": _number, "phase": _number},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["S", "h", "w0"],
                    "properties": {"S": _matrix, "h": _vector, "w0": _vector},
                },
            ]
        },
        "controller": {
            "type": "object",
            "additionalProperties": False,
            "required": ["mode"],
            "properties": {
                "mode": {"enum": list(MODES)},
                "k": _vector,
                "feedback_poles": _vector,
                "l": _vector,
                "observer_poles": _vector,
                "filter_poly": _vector,
                "gamma_scale": {"type": "number", "exclusiveMinimum": 0},
                "q1_scale": {"type": "number", "exclusiveMinimum": 0},
                "p1_convention": {"enum": ["written", "transposed"]},
                "gain_form": {"enum": ["direct", "inverse"]},
                "force_zero_psi_u": {"type": "boolean"},
            },
            "not": {
                "anyOf": [
                    {"required": ["k", "feedback_poles"]},
                    {"required": ["l", "observer_poles"]},
                ]
            },
        },
        "baseline": {"enum": list(MODES)},
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                name: _vector for name in ("x", "v", "p", "xi", "zeta", "psi1_hat")
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "required": ["horizon"],
            "properties": {
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "decimation": {"type": "integer", "minimum": 1},
            },
        },
        "figures": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                kind: {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"}
                for kind in ("states", "disturbances", "psi1")
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"directory": {"type": "string"}},
        },
    },
}

_validator = jsonschema.Draft202012Validator(SCHEMA)


def _format_error(err):
    where = ".".join(str(p) for p in err.absolute_path) or "<root>"
    if err.validator == "not" and where == "controller":
        return "controller: give either k or feedback_poles, and either l or observer_poles, not both"
    return f"{where}: {err.message}"


def validate_config(cfg):
    """Raise :class:`ConfigInvalid` naming the offending key, else return ``cfg``."""
    errors = sorted(_validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        best = jsonschema.exceptions.best_match(errors)
        raise ConfigInvalid(_format_error(best))
    return cfg


def builtin_names():
    folder = resources.files("iadrc") / "scenarios"
    return sorted(p.name[: -len(".yaml")] for p in folder.iterdir() if p.name.endswith(".yaml"))


def load_config(source):
    """Load and validate a scenario from a file path or a built-in name."""
    path = Path(source)
    if path.is_file():
        text = path.read_text()
    elif str(source) in builtin_names():
        text = (resources.files("iadrc") / "scenarios" / f"{source}.yaml").read_text()
    else:
        raise ConfigInvalid(f"no scenario file or built-in named {source!r}")
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"unreadable YAML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigInvalid("<root>: scenario must be a mapping")
    cfg.setdefault("name", path.stem if path.is_file() else str(source))
    return validate_config(cfg)


def apply_overrides(cfg, overrides):
    """Return a copy of ``cfg`` with ``dotted.key=value`` assignments applied.

    Values are parsed as YAML, so ``controller.observer_poles=[-5,-6,-7]`` and
    ``simulation.dt=2e-3`` both work; ``key=null`` removes the key. The result
    is re-validated.
    """
    cfg = copy.deepcopy(cfg)
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigInvalid(f"override {item!r} is not of the form key=value")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigInvalid(f"{key}: cannot parse value {raw!r}") from exc
        if isinstance(value, str):
            # YAML 1.1 reads exponent-only floats such as 2e-3 as strings
            try:
                value = float(value)
            except ValueError:
                pass
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            if not isinstance(child, dict):
                raise ConfigInvalid(f"{key}: {part!r} is not a section")
            node = child
        if value is None:
            node.pop(parts[-1], None)
        else:
            node[parts[-1]] = value
    return validate_config(cfg)


def _exosystem(spec):
    if "amplitude" in spec:
        return sinusoidal_exosystem(spec["amplitude"], spec["frequency"], spec["phase"])
    return Exosystem(S=spec["S"], h=spec["h"], w0=spec["w0"])


def build_scenario(cfg, mode=None):
    """Turn a validated document into a :class:`~iadrc.sim.SimScenario`.

    ``mode`` replaces the controller mode, which is how the baseline run of a
    scenario is produced.
    """
    ctrl = cfg["controller"]
    mode = mode or ctrl["mode"]
    plant_cfg = cfg["plant"]
    sim_cfg = cfg["simulation"]
    init = cfg.get("initial", {})
    try:
        plant = PlantModel(
            order=plant_cfg["order"],
            b_n=float(plant_cfg["b_n"]),
            nonlinearity=NONLINEARITIES[plant_cfg.get("nonlinearity", "zero")],
            offset=float(plant_cfg.get("offset", 0.0)),
        )
        exo = _exosystem(cfg["exosystem"])
        s = exo.dim
        F = companion_from_poly(ctrl["filter_poly"]) if "filter_poly" in ctrl else None
        if F is None and s != 2:
            raise ValueError("controller.filter_poly is required when the exosystem is not 2-dimensional")
        controller = build_controller(
            mode,
            plant.order,
            plant.b_n,
            k=ctrl.get("k"),
            l=ctrl.get("l"),
            feedback_poles=ctrl.get("feedback_poles"),
            observer_poles=ctrl.get("observer_poles"),
            S=exo.S,
            F=F,
            Gamma=ctrl.get("gamma_scale", 1.0) * np.eye(s),
            Q1=ctrl.get("q1_scale", 1.0) * np.eye(s),
            convention=ctrl.get("p1_convention", "written"),
            gain_form=ctrl.get("gain_form", "direct"),
            force_zero_psi_u=ctrl.get("force_zero_psi_u", False),
            initial={key: init.get(key) for key in ("v", "p", "xi", "zeta", "psi1_hat")},
        )
        return SimScenario(
            plant=plant,
            exosystem=exo,
            controller=controller,
            horizon=float(sim_cfg["horizon"]),
            dt=float(sim_cfg.get("dt", 1e-3)),
            x0=init.get("x"),
            decimation=int(sim_cfg.get("decimation", 10)),
            name=cfg.get("name", "scenario") + ("" if mode == ctrl["mode"] else f"-{mode}"),
            config=cfg,
        )
    except (ValueError, np.linalg.LinAlgError) as exc:
        if isinstance(exc, ConfigInvalid):
            raise
        raise ConfigInvalid(f"controller/plant: {exc}") from exc
