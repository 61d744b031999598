"""Named reference experiments.

Energy-level indices in ``system.levels`` refer to the product energy basis of
the clocks (each clock ascending, first clock slowest).  For two spin clocks
the order is ``(-,-), (-,+), (+,-), (+,+)``.
"""
from __future__ import annotations

import copy

from .config import ExperimentConfig, serialize_config, validate

_TWO_SPIN = [
    {"label": "A", "kind": "spin", "omega": 1.0},
    {"label": "B", "kind": "spin", "omega": 0.5},
]

_SZ_B = {"name": "sz_B", "factor": "B", "op": "sigma-z"}

PRESETS = {
    "two-level-clock": {
        "name": "two-level-clock",
        "clocks": [{"label": "A", "kind": "spin", "omega": 1.0}],
        "system": {"preset": "pauli-x", "scale": -1.0},
        "constraint": {"rule": "paired"},
        "grid": {"num": 64, "periods": 1},
        "tasks": [
            {"task": "conditional-trace", "scope": "global",
             "observables": [{"name": "sx_S", "factor": "S", "op": "sigma-x"},
                             {"name": "sz_S", "factor": "S", "op": "sigma-z"}]},
            {"task": "amplitude-profile", "scope": "global"},
            {"task": "resolution", "scope": "global", "kind": "discrete-orthonormal"},
        ],
    },
    "two-spin-noninteracting": {
        "name": "two-spin-noninteracting",
        "clocks": copy.deepcopy(_TWO_SPIN),
        "system": {"preset": "paired", "levels": [3, 0], "seed": 7},
        "constraint": {"rule": "paired"},
        "grid": {"num": 64, "periods": 1},
        "tasks": [
            {"task": "transition-amplitude", "num": 16},
            {"task": "conditional-trace", "scope": "global"},
            {"task": "conditional-trace", "scope": "A", "observables": [_SZ_B]},
            {"task": "amplitude-profile", "scope": "A"},
            {"task": "resolution", "scope": "global", "kind": "overcomplete-discrete"},
        ],
    },
    "two-spin-tidit": {
        "name": "two-spin-tidit",
        "clocks": copy.deepcopy(_TWO_SPIN),
        "coupling_convention": "dimensionless",
        "couplings": {"A": {"B": 0.3}},
        "system": {"preset": "paired", "levels": [3, 0], "seed": 7},
        "constraint": {"rule": "paired"},
        "grid": {"num": 64, "periods": 2},
        "tasks": [
            {"task": "redshift", "clock": "A"},
            {"task": "time-dilated-trace", "clock": "A", "observables": [_SZ_B]},
            {"task": "amplitude-profile", "scope": "A"},
            {"task": "tidit-sweep", "clock": "A", "partner": "B",
             "values": [0.0, 0.3, 0.9, 1.0, 1.5]},
        ],
    },
    "three-spin-network": {
        "name": "three-spin-network",
        "clocks": copy.deepcopy(_TWO_SPIN) + [{"label": "C", "kind": "spin", "omega": 0.25}],
        "coupling_convention": "dimensionless",
        "couplings": {"A": {"B": 0.2, "C": 0.1}, "B": {"C": 0.05}},
        "system": {"preset": "paired", "levels": [7, 0], "seed": 11},
        "constraint": {"rule": "paired"},
        "grid": {"num": 64, "periods": 1},
        "tasks": [
            {"task": "redshift", "clock": "A"},
            {"task": "time-dilated-trace", "clock": "A", "observables": [_SZ_B]},
            {"task": "verify"},
        ],
    },
}


def preset_names() -> list[str]:
    return list(PRESETS)


def preset(name: str) -> ExperimentConfig:
    try:
        raw = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; have {preset_names()}") from None
    return validate(copy.deepcopy(raw))


def presets() -> list[ExperimentConfig]:
    return [preset(n) for n in PRESETS]


def emit(name: str) -> str:
    return serialize_config(preset(name))
