"""Batch execution of configured tasks with deterministic CSV/JSON output."""
from __future__ import annotations

import csv
import io
import json
import os
import platform
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy

from . import __version__, invariants, linalg, tidit
from .clocks import build_resolution, classify_spectrum
from .config import ExperimentConfig, build_history, build_universe, grid_from, observable
from .errors import InfeasibleResolution, PawClockError
from .universe import GLOBAL, amplitude_profile, conditional_states, reconstruct, scope_period

OUT_ENV = "PAWCLOCK_OUT"


@dataclass(frozen=True)
class Check:
    """A numeric verdict ``value <= tolerance`` on a named invariant."""

    invariant: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)

    def as_dict(self) -> dict:
        return {"invariant": self.invariant, "value": self.value,
                "tolerance": self.tolerance, "passed": self.passed}


@dataclass
class TaskResult:
    id: str
    task: str
    required: bool
    status: str = "skipped"
    results: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    table: tuple | None = None
    files: list = field(default_factory=list)
    error: str | None = None

    def as_dict(self) -> dict:
        return {"id": self.id, "task": self.task, "required": self.required,
                "status": self.status, "error": self.error, "files": self.files,
                "checks": [c.as_dict() for c in self.checks]}


@dataclass
class RunReport:
    config_name: str
    config_hash: str
    tol_scale: float
    seed: int
    tasks: list = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def versions(self) -> dict:
        return {"pawclock": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                "python": platform.python_version()}

    @property
    def exit_code(self) -> int:
        required = [t for t in self.tasks if t.required]
        if any(t.status == "error" for t in required):
            return 3
        if any(t.status != "passed" for t in required):
            return 1
        return 0

    def as_dict(self) -> dict:
        """Report contents; wall-clock time is left out so the file is reproducible."""
        return {"meta": _meta(self), "exit_code": self.exit_code,
                "tasks": [t.as_dict() for t in self.tasks]}


def _meta(report: RunReport, task: TaskResult | None = None) -> dict:
    meta = {"tool": "pawclock", "version": __version__, "config": report.config_name,
            "config_sha256": report.config_hash, "tol_scale": report.tol_scale,
            "seed": report.seed, "versions": report.versions}
    if task is not None:
        meta["task"] = task.id
    return meta


# --------------------------------------------------------------------------- #
#                                serialization                                #
# --------------------------------------------------------------------------- #

def _plain(obj):
    """JSON-ready copy: arrays to lists, complex to ``[re, im]``, non-finite to None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [_plain(obj.real), _plain(obj.imag)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, allow_nan=False) + "\n"


def _cell(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    return format(float(x), ".17g")


def dumps_csv(header: str, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {header}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(x) for x in row])
    return buf.getvalue()


# --------------------------------------------------------------------------- #
#                                   tasks                                     #
# --------------------------------------------------------------------------- #

class _Context:
    def __init__(self, cfg: ExperimentConfig, tol_scale: float, seed: int):
        self.cfg = cfg
        self.tol_scale = tol_scale
        self.seed = seed

    @cached_property
    def universe(self):
        return build_universe(self.cfg)

    @cached_property
    def history(self):
        return build_history(self.cfg, self.universe)

    def check(self, invariant: str, value: float, tolerance: float) -> Check:
        return Check(invariant, float(value), tolerance * self.tol_scale)

    def times(self, task: dict, scope, u=None) -> np.ndarray:
        grid, periods = grid_from(task.get("grid", self.cfg.data["grid"]))
        if periods is None:
            return grid.times()
        period = scope_period(u or self.universe, scope)
        return grid.times(periods * period)


def _observables(task, u, scope):
    out = []
    for o in task.get("observables", []) or []:
        name = o.get("name", f"{o['op']}_{o['factor']}")
        out.append((name, observable(o, u, scope)))
    return out


def _expect(op, states):
    return np.real(np.einsum("ti,ij,tj->t", states.conj(), op, states)) / \
        np.real(np.einsum("ti,ti->t", states.conj(), states))


def task_conditional_trace(ctx: _Context, task: dict, res: TaskResult) -> None:
    u, h = ctx.universe, ctx.history
    scope = task.get("scope", GLOBAL)
    times = ctx.times(task, scope)
    a, psi = conditional_states(h, scope, times)
    obs = _observables(task, u, scope)
    columns = ["tau", "a"]
    for k in range(psi.shape[1]):
        columns += [f"re_{k}", f"im_{k}"]
    columns += [name for name, _ in obs]
    values = [_expect(op, psi) for _, op in obs]
    rows = []
    for i, t in enumerate(times):
        row = [t, a[i]]
        for z in psi[i]:
            row += [z.real, z.imag]
        rows.append(row + [v[i] for v in values])
    res.table = (columns, rows)
    res.results = {"scope": scope, "nodes": times.size,
                   "amplitude_min": float(a.min()), "amplitude_max": float(a.max())}
    if scope == GLOBAL:
        res.checks.append(ctx.check("global-amplitude-constancy", a.max() - a.min(), 1e-12))
        res.checks.append(ctx.check("schrodinger-infidelity",
                                    invariants.schrodinger_infidelity(h, times), 1e-10))


def task_amplitude_profile(ctx: _Context, task: dict, res: TaskResult) -> None:
    h = ctx.history
    scope = task.get("scope", GLOBAL)
    spec = task.get("grid", ctx.cfg.data["grid"])
    grid, periods = grid_from(spec)
    if periods is not None and periods != 1:
        grid = type(grid)(grid.num, grid.start, grid.start + periods * scope_period(ctx.universe, scope))
    prof = amplitude_profile(h, scope, grid)
    res.table = (["t", "a", "pr"], list(zip(prof.times, prof.amplitude, prof.probability)))
    res.results = {"scope": scope, "period": prof.period, "total": prof.total,
                   "amplitude_min": float(prof.amplitude.min()),
                   "amplitude_max": float(prof.amplitude.max())}
    freqs = np.unique(ctx.universe.clock.global_frequencies if scope == GLOBAL
                      else ctx.universe.clock.locals[ctx.universe.clock.index(scope)].frequencies)
    if periods == 1 and grid.stop is None and freqs.size > 1:
        r_max = classify_spectrum(freqs).r_max
        if grid.num > r_max:
            res.checks.append(ctx.check("time-density-normalization", abs(prof.total - 1.0), 1e-10))


def task_transition_amplitude(ctx: _Context, task: dict, res: TaskResult) -> None:
    net = ctx.universe.clock
    num = int(task.get("num", 16))
    period = scope_period(ctx.universe, GLOBAL)
    grid = np.arange(num) * period / num
    bra = np.ones((1, 1), dtype=complex)
    for c in net.locals:
        s = c.time_states(grid)
        bra = np.einsum("ai,tj->atij", bra, s).reshape(-1, bra.shape[1] * s.shape[1])
    kets = net.time_states(grid)
    amp = bra.conj() @ kets.T
    n_loc = len(net.locals)
    taus = np.stack(np.meshgrid(*([grid] * n_loc), indexing="ij"), axis=-1).reshape(-1, n_loc)
    columns = [f"tau_{lab}" for lab in net.labels] + ["t", "re_F", "im_F"]
    rows = []
    for i, tau in enumerate(taus):
        for j, t in enumerate(grid):
            rows.append(list(tau) + [t, amp[i, j].real, amp[i, j].imag])
    res.table = (columns, rows)
    res.results = {"nodes_per_axis": num, "period": period}
    if not net.interaction and all(c.dim == 2 for c in net.locals):
        omegas = np.array([c.energy_scale for c in net.locals])
        closed = np.prod(np.cos(omegas * (taus[:, None, :] - grid[None, :, None])), axis=-1)
        res.checks.append(ctx.check("transition-amplitude-closed-form",
                                    np.max(np.abs(amp - closed)), 1e-12))


def task_resolution(ctx: _Context, task: dict, res: TaskResult) -> None:
    u = ctx.universe
    scope = task.get("scope", GLOBAL)
    clock = u.clock.global_clock() if scope == GLOBAL else u.clock.locals[u.clock.index(scope)]
    spec = classify_spectrum(clock)
    default = {"evenly-spaced": "discrete-orthonormal",
               "rational": "overcomplete-discrete"}.get(spec.kind, "quadrature")
    kind = task.get("kind", default)
    roi = build_resolution(clock, kind, task.get("n_nodes"), spec)
    res.table = (["n", "t_n"], [[k, t] for k, t in enumerate(roi.nodes)])
    res.results = {"scope": scope, "kind": kind, "spectrum": spec.kind, "period": spec.period,
                   "r": list(spec.r), "nodes": roi.n_nodes, "weight": roi.weight,
                   "defect": roi.defect, "trend": [list(p) for p in roi.trend]}
    res.checks.append(ctx.check("identity-defect", roi.defect, roi.tolerance))
    if scope == GLOBAL:
        psi = reconstruct(ctx.history, roi)
        res.checks.append(ctx.check("history-reconstruction",
                                    1.0 - linalg.fidelity(psi, ctx.history.psi), 1e-10))


def _redshift_checks(ctx: _Context, u, clock, out: dict, checks: list) -> None:
    b = tidit.redshift(u, clock)
    out.update({"clock": b.clock, "epsilon": np.sort(b.eigenvalues), "spectral_radius": b.spectral_radius,
                "invertible": b.invertible, "epsilon_tolerance": b.tolerance})
    out["dilation"] = [{"epsilon": e.epsilon, "multiplicity": e.multiplicity,
                        "factor": e.factor, "behaviour": e.behaviour}
                       for e in tidit.dilation_sign_map(u, clock)]
    phi_comm, r_comm = invariants.generator_commutator(u, clock)
    out["phi_generator_commutator"] = phi_comm
    if b.invertible:
        r_inv = tidit.invert_redshift(b)
        heff = tidit.effective_hamiltonian(u, clock)
        out["anti_hermitian_defect"] = heff.anti_hermitian_defect
        out["redshift_generator_commutator"] = r_comm
        checks.append(ctx.check(f"redshift-inverse[{b.clock}]",
                                linalg.opnorm(b.R @ r_inv - np.eye(b.R.shape[0])), 1e-10))
        if phi_comm <= 1e-10:
            checks.append(ctx.check(f"redshift-generator-commutator[{b.clock}]", r_comm, 1e-10))
    else:
        split = tidit.degenerate_split(u, clock)
        out["frozen"] = {"dimension": int(round(np.real(np.trace(split.frozen_projector)))),
                         "stationary_states": int(split.stationary_states.shape[1]),
                         "stationary_residual": split.stationary_constraint_residual,
                         "frozen_constraint_spectrum": split.frozen_constraint_spectrum,
                         "dynamical_epsilon": split.dynamical_eigenvalues}
        if split.stationary_states.shape[1]:
            checks.append(ctx.check(f"stationary-residual[{b.clock}]",
                                    split.stationary_constraint_residual, 1e-10))
    if 0 < b.spectral_radius < 1:
        rep = invariants.series_report(u, clock)
        out["series"] = {"orders": rep.orders, "errors": rep.errors, "bounds": rep.bounds}
        checks.append(ctx.check(f"series-envelope[{b.clock}]", rep.envelope_excess, 1e-13))
        checks.append(ctx.check(f"series-monotone[{b.clock}]", rep.monotonicity_excess, 1e-13))


def task_redshift(ctx: _Context, task: dict, res: TaskResult) -> None:
    u = ctx.universe
    clock = task.get("clock", u.clock.labels[0])
    _redshift_checks(ctx, u, clock, res.results, res.checks)
    res.table = (["epsilon", "multiplicity", "factor", "behaviour"],
                 [[e["epsilon"], e["multiplicity"], np.nan if e["factor"] is None else e["factor"],
                   e["behaviour"]] for e in res.results["dilation"]])


def _conservation_tol(b) -> float:
    return 1e-8 if b.spectral_radius > 1 else 1e-10


def task_time_dilated_trace(ctx: _Context, task: dict, res: TaskResult) -> None:
    u, h = ctx.universe, ctx.history
    clock = task.get("clock", u.clock.labels[0])
    mode = task.get("mode", "exact")
    times = ctx.times(task, clock)
    worst, traj = invariants.route_infidelity(u, h, clock, times, mode)
    _, cond = conditional_states(h, clock, times)
    b = tidit.redshift(u, clock)
    r_vals = tidit.redshift_expectations(b, traj.states)
    obs = _observables(task, u, clock)
    values = [_expect(op, traj.states) for _, op in obs]
    fid = np.array([linalg.fidelity(c, s) for c, s in zip(cond, traj.states)])
    columns = ["tau", "route_fidelity", "redshift", "norm"] + [n for n, _ in obs]
    rows = [[t, fid[i], r_vals[i], traj.norms[i]] + [v[i] for v in values]
            for i, t in enumerate(times)]
    res.table = (columns, rows)
    drift = float(np.max(np.abs(r_vals - r_vals[0])))
    res.results = {"clock": b.clock, "mode": mode, "method": traj.method,
                   "hermitian": traj.hermitian, "norm_drift": traj.norm_drift,
                   "route_infidelity": worst, "redshift_drift": drift,
                   "amplitude_drift": invariants.amplitude_drift(h, clock, times)}
    res.checks.append(ctx.check(f"route-equivalence[{b.clock}]", worst, 1e-8))
    res.checks.append(ctx.check(f"redshift-conservation[{b.clock}]", drift, _conservation_tol(b)))


def task_tidit_sweep(ctx: _Context, task: dict, res: TaskResult) -> None:
    cfg = ctx.cfg
    labels = [c["label"] for c in cfg.data["clocks"]]
    clock = task.get("clock", labels[0])
    partner = task.get("partner", next(lab for lab in labels if lab != clock))
    first, second = sorted((clock, partner), key=labels.index)
    points, rows = [], []
    for g in task["values"]:
        sub = cfg.with_value(f"couplings.{first}.{second}", float(g))
        u = build_universe(sub)
        h = build_history(sub, u)
        b = tidit.redshift(u, clock)
        times = ctx.times(task, clock, u)
        entry = {"g": float(g), "degenerate": not b.invertible,
                 "epsilon": np.sort(b.eigenvalues), "spectral_radius": b.spectral_radius,
                 "dilation": [{"epsilon": e.epsilon, "factor": e.factor, "behaviour": e.behaviour}
                              for e in tidit.dilation_sign_map(u, clock)]}
        factors = [e.factor for e in tidit.dilation_sign_map(u, clock) if e.factor is not None]
        route = drift = frozen_inf = np.nan
        if b.invertible:
            route, traj = invariants.route_infidelity(u, h, clock, times)
            r_vals = tidit.redshift_expectations(b, traj.states)
            drift = float(np.max(np.abs(r_vals - r_vals[0])))
            entry.update({"route_infidelity": route, "redshift_drift": drift})
            res.checks.append(ctx.check(f"route-equivalence[g={g:g}]", route, 1e-8))
            res.checks.append(ctx.check(f"redshift-conservation[g={g:g}]", drift, _conservation_tol(b)))
        else:
            split = tidit.degenerate_split(u, clock)
            frozen_inf, compared = invariants.frozen_stationarity(u, h, clock, times)
            entry["frozen"] = {"dimension": int(round(np.real(np.trace(split.frozen_projector)))),
                               "stationary_states": int(split.stationary_states.shape[1]),
                               "stationary_residual": split.stationary_constraint_residual,
                               "dynamical_epsilon": split.dynamical_eigenvalues,
                               "stationarity_infidelity": frozen_inf, "nodes_compared": compared}
            res.checks.append(ctx.check(f"frozen-stationarity[g={g:g}]", frozen_inf, 1e-10))
            if split.stationary_states.shape[1]:
                res.checks.append(ctx.check(f"stationary-residual[g={g:g}]",
                                            split.stationary_constraint_residual, 1e-10))
        a_drift = invariants.amplitude_drift(h, clock, times)
        entry["amplitude_drift"] = a_drift
        points.append(entry)
        eps = np.sort(b.eigenvalues)
        rows.append([g, int(not b.invertible), eps[0], eps[-1],
                     min(factors, default=np.nan), max(factors, default=np.nan),
                     route, drift, frozen_inf, a_drift])
    res.results = {"clock": clock, "partner": partner, "points": points}
    res.table = (["g", "degenerate", "epsilon_min", "epsilon_max", "factor_min", "factor_max",
                  "route_infidelity", "redshift_drift", "frozen_infidelity", "amplitude_drift"], rows)


def task_verify(ctx: _Context, task: dict, res: TaskResult) -> None:
    u, h = ctx.universe, ctx.history
    checks = res.checks
    norm_h = max(linalg.opnorm(u.hamiltonian), 1e-300)
    checks.append(ctx.check("constraint-residual", h.residual / norm_h, 1e-10))
    checks.append(ctx.check("schmidt-reconstruction",
                            np.linalg.norm(h.schmidt.reconstruct() - h.psi), 1e-12))
    times = ctx.times(task, GLOBAL)
    checks.append(ctx.check("global-amplitude-constancy", invariants.amplitude_drift(h, GLOBAL, times), 1e-12))
    checks.append(ctx.check("schrodinger-infidelity", invariants.schrodinger_infidelity(h, times), 1e-10))
    notes = []
    try:
        clock = u.clock.global_clock()
        spec = classify_spectrum(clock)
        if spec.kind != "irrational-approximated":
            roi = build_resolution(clock, "overcomplete-discrete", spectrum=spec)
            checks.append(ctx.check("identity-defect[global]", roi.defect, roi.tolerance))
            checks.append(ctx.check("history-reconstruction",
                                    1.0 - linalg.fidelity(reconstruct(h, roi), h.psi), 1e-10))
        else:
            notes.append("global spectrum is not commensurate; resolution checks skipped")
    except (ValueError, InfeasibleResolution) as exc:
        notes.append(f"resolution checks skipped: {exc}")

    if u.clock.interaction:
        for label in u.clock.labels:
            out: dict = {}
            _redshift_checks(ctx, u, label, out, checks)
            local_times = ctx.times(task, label)
            if out["invertible"]:
                worst, traj = invariants.route_infidelity(u, h, label, local_times)
                b = tidit.redshift(u, label)
                r_vals = tidit.redshift_expectations(b, traj.states)
                checks.append(ctx.check(f"route-equivalence[{label}]", worst, 1e-8))
                checks.append(ctx.check(f"redshift-conservation[{label}]",
                                        np.max(np.abs(r_vals - r_vals[0])), _conservation_tol(b)))

    rng = np.random.default_rng(ctx.seed)
    n_random = int(task.get("random", 5))
    worst_fid = worst_amp = 0.0
    for _ in range(n_random):
        ru, rh = invariants.random_universe(rng, int(rng.integers(2, 5)), int(rng.integers(2, 4)))
        rt = np.linspace(0, scope_period(ru, GLOBAL), 256, endpoint=False)
        worst_fid = max(worst_fid, invariants.schrodinger_infidelity(rh, rt))
        worst_amp = max(worst_amp, invariants.amplitude_drift(rh, GLOBAL, rt))
    if n_random:
        checks.append(ctx.check("random-schrodinger-infidelity", worst_fid, 1e-10))
        checks.append(ctx.check("random-amplitude-constancy", worst_amp, 1e-12))
    res.results = {"checks": len(checks), "random_universes": n_random, "notes": notes}


TASK_FUNCTIONS = {
    "conditional-trace": task_conditional_trace,
    "amplitude-profile": task_amplitude_profile,
    "transition-amplitude": task_transition_amplitude,
    "resolution": task_resolution,
    "redshift": task_redshift,
    "time-dilated-trace": task_time_dilated_trace,
    "tidit-sweep": task_tidit_sweep,
    "verify": task_verify,
}


# --------------------------------------------------------------------------- #
#                                  driver                                     #
# --------------------------------------------------------------------------- #

def output_dir(cfg: ExperimentConfig, override=None) -> Path:
    return Path(override or os.environ.get(OUT_ENV) or cfg.data["outputs"]["dir"])


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def run(cfg: ExperimentConfig, out=None, tol_scale: float = 1.0, seed: int | None = None,
        tasks: list[dict] | None = None, write: bool = True) -> RunReport:
    """Execute the configured tasks in declaration order.

    A task whose checks all pass is ``passed``; a failing check makes it
    ``failed``; a library error makes it ``error``.  A required task that does
    not pass stops the run and the remaining tasks are ``skipped``.  ``tasks``
    replaces the configured task list.
    """
    started = time.perf_counter()
    seed = cfg.data["seed"] if seed is None else seed
    report = RunReport(cfg.name, cfg.digest(), tol_scale, seed)
    ctx = _Context(cfg, tol_scale, seed)
    out_dir = output_dir(cfg, out)
    formats = cfg.data["outputs"]["formats"]
    tasks = cfg.tasks if tasks is None else tasks
    abort = False
    for spec in tasks:
        res = TaskResult(spec["id"], spec["task"], bool(spec["required"]))
        report.tasks.append(res)
        if abort:
            continue
        try:
            TASK_FUNCTIONS[spec["task"]](ctx, spec, res)
            res.status = "passed" if all(c.passed for c in res.checks) else "failed"
        except (PawClockError, ValueError, np.linalg.LinAlgError) as exc:
            res.status, res.error = "error", f"{type(exc).__name__}: {exc}"
        if write and res.status != "error":
            header = (f"pawclock {__version__} config-sha256={report.config_hash} task={res.id}")
            if "csv" in formats and res.table is not None:
                path = out_dir / f"{res.id}.csv"
                _write(path, dumps_csv(header, *res.table))
                res.files.append(path.name)
            if "json" in formats:
                path = out_dir / f"{res.id}.json"
                _write(path, dumps_json({"meta": _meta(report, res), "results": res.results,
                                         "checks": [c.as_dict() for c in res.checks]}))
                res.files.append(path.name)
        if res.required and res.status != "passed":
            abort = True
    if write:
        _write(out_dir / "report.json", dumps_json(report.as_dict()))
    report.wall_clock = time.perf_counter() - started
    return report


def verify(cfg: ExperimentConfig, out=None, tol_scale: float = 1.0, seed: int | None = None,
           write: bool = True) -> RunReport:
    """Run only the verify tasks of ``cfg`` (a default one if none is configured)."""
    tasks = [dict(t, required=True) for t in cfg.tasks if t["task"] == "verify"]
    tasks = tasks or [{"task": "verify", "id": "verify", "required": True}]
    return run(cfg, out, tol_scale, seed, tasks, write)
