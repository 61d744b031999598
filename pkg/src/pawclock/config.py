"""Experiment configuration: parsing, validation and model construction.

Configs are YAML documents.  Example::

    name: two-spin-tidit
    clocks:
      - {label: A, kind: spin, omega: 1.0}
      - {label: B, kind: spin, omega: 0.5}
    coupling_convention: dimensionless
    couplings: {A: {B: 0.3}}
    system: {preset: paired, levels: [3, 0], seed: 7}
    constraint: {rule: paired}
    grid: {num: 256, periods: 1}
    tasks:
      - {task: redshift, clock: A}
    outputs: {dir: out, formats: [csv, json]}

``couplings`` is a nested mapping ``label -> label -> value``; a pair given
once applies symmetrically.  Every violation is reported with its key path.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

from . import linalg
from .clocks import ClockModel, ClockNetwork, spin_clock
from .errors import ConfigError
from .universe import GLOBAL, HistoryState, TimeGrid, UniverseSpec, paired_history, \
    select_history, solve_constraint

TASKS = ("conditional-trace", "amplitude-profile", "transition-amplitude", "resolution",
         "redshift", "time-dilated-trace", "tidit-sweep", "verify")
FORMATS = ("csv", "json")
SYSTEM_PRESETS = ("paired", "pauli-x", "pauli-z", "zero")
OPERATORS = {"sigma-x": linalg.SIGMA_X, "sigma-y": linalg.SIGMA_Y, "sigma-z": linalg.SIGMA_Z}


@dataclass
class ExperimentConfig:
    """A validated, normalized configuration.

    ``data`` is the normalized mapping; two configs are equal iff their
    ``data`` agree.  ``warnings`` lists non-fatal diagnostics.
    """

    data: dict
    warnings: list = field(default_factory=list, compare=False)

    @property
    def name(self) -> str:
        return self.data["name"]

    @property
    def tasks(self) -> list:
        return self.data["tasks"]

    def digest(self) -> str:
        canonical = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def with_value(self, path: str, value) -> "ExperimentConfig":
        """Copy with the dotted key ``path`` set to ``value``, re-validated."""
        raw = copy.deepcopy(self.data)
        set_path(raw, path, value)
        return validate(raw)


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x)


def set_path(raw: dict, path: str, value) -> None:
    keys = path.split(".")
    node = raw
    for key in keys[:-1]:
        if isinstance(node, list):
            node = node[int(key)]
        else:
            node = node.setdefault(key, {})
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


def parse_config(text: str) -> ExperimentConfig:
    """Parse YAML text into a validated config.

    Raises
    ------
    ConfigError
        On YAML syntax errors or any schema violation; every violation is
        listed with the path of the offending key.
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "?"
        raise ConfigError([("<document>", f"syntax error at {where}: {getattr(exc, 'problem', exc)}")]) from None
    if not isinstance(raw, dict):
        raise ConfigError([("<document>", "top level must be a mapping")])
    return validate(raw)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.data, sort_keys=False, default_flow_style=None)


def _complex_matrix(spec, path, errors):
    if isinstance(spec, dict):
        re = spec.get("re")
        im = spec.get("im")
    else:
        re, im = spec, None
    try:
        re_arr = np.asarray(re, dtype=float)
        im_arr = np.zeros_like(re_arr) if im is None else np.asarray(im, dtype=float)
    except (TypeError, ValueError):
        errors.append((path, "matrix entries must be numbers"))
        return None
    if re_arr.ndim != 2 or re_arr.shape[0] != re_arr.shape[1] or im_arr.shape != re_arr.shape:
        errors.append((path, "need square 're' (and optional 'im') matrices of equal shape"))
        return None
    return re_arr + 1j * im_arr


def _complex_vector(spec, path, errors):
    if spec is None:
        return None
    if isinstance(spec, dict):
        re, im = spec.get("re"), spec.get("im")
    else:
        re, im = spec, None
    try:
        re_arr = np.asarray(re, dtype=float).reshape(-1)
        im_arr = np.zeros_like(re_arr) if im is None else np.asarray(im, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        errors.append((path, "entries must be numbers"))
        return None
    if im_arr.shape != re_arr.shape:
        errors.append((path, "'re' and 'im' must have equal length"))
        return None
    return re_arr + 1j * im_arr


def _validate_clocks(raw, errors):
    clocks = raw.get("clocks")
    if not isinstance(clocks, list) or not clocks:
        errors.append(("clocks", "need a non-empty list of clocks"))
        return []
    out = []
    for i, c in enumerate(clocks):
        path = f"clocks[{i}]"
        if not isinstance(c, dict):
            errors.append((path, "clock must be a mapping"))
            continue
        label = str(c.get("label", chr(ord("A") + i)))
        kind = c.get("kind", "spin")
        entry = {"label": label, "kind": kind}
        if kind == "spin":
            omega = c.get("omega")
            if not _is_number(omega) or omega == 0:
                errors.append((f"{path}.omega", "spin clock needs a nonzero number"))
                omega = 1.0
            entry["omega"] = float(omega)
            n_levels = 2
        elif kind == "custom":
            freqs = c.get("frequencies")
            if not isinstance(freqs, list) or not freqs or not all(_is_number(f) for f in freqs):
                errors.append((f"{path}.frequencies", "need a list of numbers"))
                freqs = [0.0]
            elif any(b <= a for a, b in zip(freqs, freqs[1:])):
                errors.append((f"{path}.frequencies", "must be strictly ascending (non-degenerate)"))
            entry["frequencies"] = [float(f) for f in freqs]
            n_levels = len(freqs)
        else:
            errors.append((f"{path}.kind", f"unknown clock kind {kind!r}; use spin or custom"))
            continue
        phases = c.get("phases")
        if phases is not None:
            if not isinstance(phases, list) or len(phases) != n_levels or not all(_is_number(p) for p in phases):
                errors.append((f"{path}.phases", f"need {n_levels} numbers"))
            else:
                entry["phases"] = [float(p) for p in phases]
        out.append(entry)
    labels = [c["label"] for c in out]
    if len(set(labels)) != len(labels):
        errors.append(("clocks", f"clock labels must be unique, got {labels}"))
    if "S" in labels:
        errors.append(("clocks", "label 'S' is reserved for the system"))
    return out


def _validate_couplings(raw, labels, errors):
    spec = raw.get("couplings") or {}
    n = len(labels)
    g = np.zeros((n, n))
    if isinstance(spec, list):
        mat = np.asarray(spec, dtype=float) if spec else np.zeros((0, 0))
        if mat.shape != (n, n):
            errors.append(("couplings", f"matrix must be {n}x{n}"))
            return {}
        for j in range(n):
            if mat[j, j] != 0:
                errors.append((f"couplings.{labels[j]}.{labels[j]}", "self-coupling g_JJ must be 0"))
            for k in range(j + 1, n):
                if mat[j, k] != mat[k, j]:
                    errors.append((f"couplings.{labels[j]}.{labels[k]}", "matrix must be symmetric"))
        g = mat
    elif isinstance(spec, dict):
        seen = {}
        for a, row in spec.items():
            a = str(a)
            if a not in labels:
                errors.append((f"couplings.{a}", f"unknown clock label; have {labels}"))
                continue
            if not isinstance(row, dict):
                errors.append((f"couplings.{a}", "need a mapping label -> value"))
                continue
            for b, val in row.items():
                b = str(b)
                path = f"couplings.{a}.{b}"
                if b not in labels:
                    errors.append((path, f"unknown clock label; have {labels}"))
                    continue
                if not _is_number(val):
                    errors.append((path, "coupling must be a number"))
                    continue
                if a == b:
                    if val != 0:
                        errors.append((path, "self-coupling g_JJ must be 0"))
                    continue
                key = tuple(sorted((labels.index(a), labels.index(b))))
                if key in seen and seen[key] != val:
                    errors.append((path, f"conflicts with symmetric entry {seen[key]}"))
                    continue
                seen[key] = float(val)
        for (j, k), val in seen.items():
            g[j, k] = g[k, j] = val
    else:
        errors.append(("couplings", "need a nested mapping or a matrix"))
    out = {}
    for j in range(n):
        for k in range(j + 1, n):
            if g[j, k] != 0:
                out.setdefault(labels[j], {})[labels[k]] = float(g[j, k])
    return out


def _validate_system(raw, errors):
    spec = raw.get("system")
    if not isinstance(spec, dict):
        errors.append(("system", "need a mapping with 'matrix' or 'preset'"))
        return {}
    if "matrix" in spec:
        mat = _complex_matrix(spec["matrix"], "system.matrix", errors)
        if mat is not None and not linalg.is_hermitian(mat):
            errors.append(("system.matrix", "system Hamiltonian must be Hermitian"))
        if mat is None:
            return {}
        return {"matrix": {"re": mat.real.tolist(), "im": mat.imag.tolist()}}
    preset = spec.get("preset")
    if preset not in SYSTEM_PRESETS:
        errors.append(("system.preset", f"unknown preset {preset!r}; use one of {SYSTEM_PRESETS}"))
        return {}
    out = {"preset": preset}
    if preset == "paired":
        levels = spec.get("levels")
        if not isinstance(levels, list) or not levels or not all(isinstance(x, int) for x in levels):
            errors.append(("system.levels", "need a list of clock energy-level indices"))
        else:
            out["levels"] = levels
        seed = spec.get("seed", 0)
        if not isinstance(seed, int):
            errors.append(("system.seed", "seed must be an integer"))
        out["seed"] = seed
    elif preset in ("pauli-x", "pauli-z"):
        scale = spec.get("scale", 1.0)
        if not _is_number(scale):
            errors.append(("system.scale", "scale must be a number"))
        out["scale"] = float(scale) if _is_number(scale) else 1.0
    else:
        dim = spec.get("dim", 2)
        if not isinstance(dim, int) or dim < 1:
            errors.append(("system.dim", "dim must be a positive integer"))
        out["dim"] = dim
    return out


def _validate_grid(spec, path, errors):
    spec = spec or {}
    if not isinstance(spec, dict):
        errors.append((path, "grid must be a mapping"))
        return {"num": 256, "start": 0.0, "periods": 1.0}
    out = {}
    num = spec.get("num", 256)
    if not isinstance(num, int) or num < 1:
        errors.append((f"{path}.num", "must be a positive integer"))
        num = 256
    out["num"] = num
    start = spec.get("start", 0.0)
    if not _is_number(start):
        errors.append((f"{path}.start", "must be a number"))
        start = 0.0
    out["start"] = float(start)
    if "stop" in spec:
        stop = spec["stop"]
        if not _is_number(stop) or stop <= start:
            errors.append((f"{path}.stop", "must be a number greater than start"))
        else:
            out["stop"] = float(stop)
    else:
        periods = spec.get("periods", 1.0)
        if not _is_number(periods) or periods <= 0:
            errors.append((f"{path}.periods", "must be a positive number"))
            periods = 1.0
        out["periods"] = float(periods)
    return out


def _validate_tasks(raw, labels, errors):
    tasks = raw.get("tasks", [])
    if not isinstance(tasks, list):
        errors.append(("tasks", "need a list"))
        return []
    out = []
    ids = set()
    for i, t in enumerate(tasks):
        path = f"tasks[{i}]"
        if isinstance(t, str):
            t = {"task": t}
        if not isinstance(t, dict) or t.get("task") not in TASKS:
            errors.append((f"{path}.task", f"unknown task; use one of {TASKS}"))
            continue
        entry = dict(t)
        entry.setdefault("id", f"{i:02d}-{t['task']}")
        entry.setdefault("required", t["task"] == "verify")
        if entry["id"] in ids:
            errors.append((f"{path}.id", "task ids must be unique"))
        ids.add(entry["id"])
        for key in ("scope", "clock", "partner"):
            val = entry.get(key)
            if val is not None and val != GLOBAL and str(val) not in labels:
                errors.append((f"{path}.{key}", f"unknown clock {val!r}; have {labels}"))
        if "grid" in entry:
            entry["grid"] = _validate_grid(entry["grid"], f"{path}.grid", errors)
        if t["task"] == "tidit-sweep":
            vals = entry.get("values")
            if not isinstance(vals, list) or not vals or not all(_is_number(v) for v in vals):
                errors.append((f"{path}.values", "need a list of coupling values"))
        for k, obs in enumerate(entry.get("observables", []) or []):
            opath = f"{path}.observables[{k}]"
            if not isinstance(obs, dict) or "factor" not in obs or "op" not in obs:
                errors.append((opath, "observable needs 'factor' and 'op'"))
                continue
            if str(obs["factor"]) not in labels + ["S"]:
                errors.append((f"{opath}.factor", f"unknown factor; have {labels + ['S']}"))
            if obs["op"] not in OPERATORS and obs["op"] != "hamiltonian":
                errors.append((f"{opath}.op", f"unknown operator; use {list(OPERATORS)} or hamiltonian"))
        out.append(entry)
    return out


def validate(raw: dict) -> ExperimentConfig:
    errors: list[tuple[str, str]] = []
    data: dict[str, Any] = {"name": str(raw.get("name", "experiment"))}
    clocks = _validate_clocks(raw, errors)
    labels = [c["label"] for c in clocks]
    data["clocks"] = clocks
    conv = raw.get("coupling_convention", "inverse-energy")
    if conv not in ("dimensionless", "inverse-energy"):
        errors.append(("coupling_convention", "use 'dimensionless' or 'inverse-energy'"))
    data["coupling_convention"] = conv
    data["couplings"] = _validate_couplings(raw, labels, errors)
    interaction = raw.get("interaction", "gravitational-like" if data["couplings"] else "none")
    if interaction not in ("none", "gravitational-like"):
        errors.append(("interaction", "use 'none' or 'gravitational-like'"))
    data["interaction"] = interaction
    data["system"] = _validate_system(raw, errors)
    constraint = raw.get("constraint") or {"rule": "paired"}
    rule = constraint.get("rule", "paired") if isinstance(constraint, dict) else None
    if rule not in ("paired", "kernel"):
        errors.append(("constraint.rule", "use 'paired' or 'kernel'"))
    data["constraint"] = {"rule": rule}
    for key in ("weights", "coefficients"):
        if isinstance(constraint, dict) and key in constraint:
            vec = _complex_vector(constraint[key], f"constraint.{key}", errors)
            if vec is not None:
                data["constraint"][key] = {"re": vec.real.tolist(), "im": vec.imag.tolist()}
    data["grid"] = _validate_grid(raw.get("grid"), "grid", errors)
    data["tasks"] = _validate_tasks(raw, labels, errors)
    outputs = raw.get("outputs") or {}
    fmts = outputs.get("formats", list(FORMATS))
    if not isinstance(fmts, list) or any(f not in FORMATS for f in fmts):
        errors.append(("outputs.formats", f"formats must be a subset of {FORMATS}"))
        fmts = list(FORMATS)
    data["outputs"] = {"dir": str(outputs.get("dir", "out")), "formats": fmts}
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        errors.append(("seed", "must be an integer"))
        seed = 0
    data["seed"] = seed
    if errors:
        raise ConfigError(errors)

    cfg = ExperimentConfig(data)
    try:
        net = build_network(cfg)
    except ValueError as exc:
        raise ConfigError([("clocks", str(exc))]) from None
    w = np.sort(net.global_frequencies)
    scale = max(float(np.max(np.abs(w))), 1e-300)
    if w.size > 1 and np.min(np.diff(w)) <= linalg.DEGENERACY_RTOL * scale:
        cfg.warnings.append(
            "degenerate global clock: H_C has repeated levels (a two-spin clock is "
            "non-degenerate only for |alpha| != 1); global time states do not span "
            "a non-degenerate clock")
    if data["system"].get("preset") == "paired":
        bad = [lv for lv in data["system"].get("levels", []) if not 0 <= lv < net.dim]
        if bad:
            raise ConfigError([("system.levels", f"level indices {bad} outside 0..{net.dim - 1}")])
    return cfg


# --------------------------------------------------------------------------- #
#                              construction                                   #
# --------------------------------------------------------------------------- #

def build_clock(entry: dict) -> ClockModel:
    if entry["kind"] == "spin":
        return spin_clock(entry["omega"], entry.get("phases"))
    return ClockModel(entry["frequencies"], entry.get("phases"))


def build_network(cfg: ExperimentConfig) -> ClockNetwork:
    data = cfg.data
    clocks = [build_clock(c) for c in data["clocks"]]
    labels = [c["label"] for c in data["clocks"]]
    n = len(labels)
    g = np.zeros((n, n))
    for a, row in data["couplings"].items():
        for b, val in row.items():
            j, k = labels.index(a), labels.index(b)
            g[j, k] = g[k, j] = val
    interaction = data["interaction"] == "gravitational-like"
    if data["coupling_convention"] == "dimensionless":
        scales = np.array([c.energy_scale for c in clocks])
        g = g * scales[0] / np.outer(scales, scales)
    return ClockNetwork(tuple(clocks), g, tuple(labels), interaction and bool(np.any(g != 0)))


def build_system(cfg: ExperimentConfig, net: ClockNetwork) -> np.ndarray:
    spec = cfg.data["system"]
    if "matrix" in spec:
        return np.asarray(spec["matrix"]["re"]) + 1j * np.asarray(spec["matrix"]["im"])
    preset = spec["preset"]
    if preset == "pauli-x":
        return spec["scale"] * linalg.SIGMA_X
    if preset == "pauli-z":
        return spec["scale"] * linalg.SIGMA_Z
    if preset == "zero":
        return np.zeros((spec["dim"], spec["dim"]), dtype=complex)
    levels = spec["levels"]
    energies = -net.global_frequencies[levels]
    rng = np.random.default_rng(spec["seed"])
    u = linalg.random_unitary(len(levels), rng)
    return (u * energies) @ u.conj().T


def build_universe(cfg: ExperimentConfig) -> UniverseSpec:
    net = build_network(cfg)
    return UniverseSpec(net, build_system(cfg, net))


def build_history(cfg: ExperimentConfig, u: UniverseSpec | None = None) -> HistoryState:
    u = u or build_universe(cfg)
    cons = cfg.data["constraint"]
    if cons["rule"] == "paired":
        w = cons.get("weights")
        weights = None if w is None else np.asarray(w["re"]) + 1j * np.asarray(w["im"])
        return paired_history(u, weights)
    basis = solve_constraint(u)
    c = cons.get("coefficients")
    coeffs = np.ones(len(basis)) if c is None else np.asarray(c["re"]) + 1j * np.asarray(c["im"])
    if len(coeffs) != len(basis):
        raise ConfigError([("constraint.coefficients",
                            f"kernel has dimension {len(basis)}, got {len(coeffs)} coefficients")])
    return select_history(basis, coeffs)


def grid_from(spec: dict) -> tuple[TimeGrid, float | None]:
    """TimeGrid plus the number of periods to span when ``stop`` is absent."""
    if "stop" in spec:
        return TimeGrid(spec["num"], spec["start"], spec["stop"]), None
    return TimeGrid(spec["num"], spec["start"]), spec["periods"]


def observable(cfg_obs: dict, u: UniverseSpec, scope) -> np.ndarray:
    """Embed a named single-factor observable on the conditional space of ``scope``."""
    labels = list(u.clock.labels) + ["S"]
    if scope in (None, GLOBAL):
        factors = ["S"]
    else:
        factors = [lab for lab in labels if lab != scope]
    factor = str(cfg_obs["factor"])
    if factor not in factors:
        raise ValueError(f"factor {factor!r} is not part of the conditional state for scope {scope!r}")
    dims = [u.clock.locals[labels.index(f)].dim if f != "S" else u.d_system for f in factors]
    if cfg_obs["op"] == "hamiltonian":
        op = u.h_system if factor == "S" else u.clock.locals[labels.index(factor)].hamiltonian
    else:
        op = OPERATORS[cfg_obs["op"]]
    return linalg.embed_local(op, factors.index(factor), dims)
