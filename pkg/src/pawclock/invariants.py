"""Measured invariants shared by the verify task and the test-suite.

Every function returns a non-negative defect (0 is ideal) so that checks read
uniformly as ``defect <= tolerance``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg, tidit
from .clocks import ClockModel, ClockNetwork
from .universe import GLOBAL, HistoryState, UniverseSpec, amplitudes, conditional_states, \
    energy_pairs, paired_history, unnormalized_conditionals


def schrodinger_infidelity(h: HistoryState, times) -> float:
    """Largest ``1 - F`` between globally conditioned states and ``exp(-i H_S t) psi(t_0)``."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    _, psi = conditional_states(h, GLOBAL, times)
    spec = linalg.eig_hermitian(h.universe.h_system)
    ref = spec.evolve_state(psi[0], times - times[0])
    return float(max(1.0 - linalg.fidelity(p, r) for p, r in zip(psi, ref)))


def amplitude_drift(h: HistoryState, scope, times) -> float:
    a = amplitudes(h, scope, times)
    return float(np.max(a) - np.min(a))


def route_infidelity(u: UniverseSpec, h: HistoryState, clock, times,
                     mode: str = "exact") -> tuple[float, tidit.Trajectory]:
    """Largest ``1 - F`` between local conditioning on ``clock`` and ``H_eff`` propagation.

    Propagation starts from the conditional state at ``times[0]``.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    _, cond = conditional_states(h, clock, times)
    traj = tidit.propagate_time_dilated(u, clock, cond[0], times - times[0], mode)
    worst = max(1.0 - linalg.fidelity(c, s) for c, s in zip(cond, traj.states))
    return float(max(worst, 0.0)), traj


def redshift_drift(u: UniverseSpec, clock, psi0, times, mode: str = "exact") -> float:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    return tidit.check_redshift_conservation(u, clock, psi0, times - times[0], mode)


def frozen_stationarity(u: UniverseSpec, h: HistoryState, clock, times,
                        floor: float = 1e-8) -> tuple[float, int]:
    """Largest ``1 - F`` of the frozen-subspace component against its first value.

    Nodes where the component norm is at most ``floor`` are skipped; the
    number of compared nodes is returned alongside.
    """
    split = tidit.degenerate_split(u, clock)
    chi = unnormalized_conditionals(h, clock, times)
    frozen = chi @ split.frozen_projector.T
    norms = np.linalg.norm(frozen, axis=1)
    keep = np.flatnonzero(norms > floor)
    if keep.size == 0:
        return 0.0, 0
    ref = frozen[keep[0]]
    worst = max(1.0 - linalg.fidelity(frozen[k], ref) for k in keep)
    return float(max(worst, 0.0)), int(keep.size)


@dataclass(frozen=True)
class SeriesReport:
    orders: np.ndarray
    errors: np.ndarray
    bounds: np.ndarray

    @property
    def envelope_excess(self) -> float:
        """``max_m (err_m - bound_m)``; at most rounding when the envelope holds."""
        return float(np.max(self.errors - self.bounds))

    @property
    def monotonicity_excess(self) -> float:
        return float(max(np.max(np.diff(self.errors), initial=0.0), 0.0))

    def first_below(self, level: float) -> int | None:
        hit = np.flatnonzero(self.errors < level)
        return int(self.orders[hit[0]]) if hit.size else None


def series_report(u: UniverseSpec, clock, max_order: int | None = None) -> SeriesReport:
    """Errors of the geometric-series partial sums of ``H_eff`` against exact inversion."""
    b = tidit.redshift(u, clock)
    if b.spectral_radius >= 1:
        raise tidit.SeriesDivergent(f"spectral radius {b.spectral_radius:.6g} >= 1")
    m = tidit.default_series_order(b.spectral_radius) if max_order is None else max_order
    heff = tidit.effective_hamiltonian(u, clock, "exact", order=m)
    errors = heff.series_errors()
    norm_h = linalg.opnorm(heff.conditional)
    orders = np.arange(errors.size)
    bounds = np.array([tidit.series_bound(norm_h, b.spectral_radius, k) for k in orders])
    return SeriesReport(orders, errors, bounds)


def generator_commutator(u: UniverseSpec, clock) -> tuple[float, float]:
    """``(|[Phi, H^(A)]|, |[R, H_eff]|)``; the second is NaN when ``R`` is singular."""
    b = tidit.redshift(u, clock)
    h = tidit.conditional_hamiltonian(u, clock)
    phi_comm = linalg.opnorm(linalg.commutator(b.Phi, h))
    if not b.invertible:
        return phi_comm, float("nan")
    heff = tidit.invert_redshift(b) @ h
    return phi_comm, linalg.opnorm(linalg.commutator(b.R, heff))


def random_universe(rng: np.random.Generator, d_clock: int, d_system: int,
                    interacting: bool = False, coupling: float = 0.2) -> tuple[UniverseSpec, HistoryState]:
    """A random commensurate clock with a system whose levels pair with it.

    Clock levels are distinct integers in ``[-4, 4]`` times a random scale, with
    random phases and a random energy eigenbasis.  The system spectrum is the
    negative of ``d_system`` distinct clock levels (unpaired extra levels if the
    clock has too few) in a random eigenbasis; the history is energy-paired
    with random complex weights.  With ``interacting=True`` the clock is split
    as a ``spin (x) d_clock`` pair with a gravitational-like coupling instead.
    """
    scale = rng.uniform(0.5, 2.0)
    if interacting:
        a = ClockModel([-scale, scale], rng.uniform(0, 2 * np.pi, 2), linalg.random_unitary(2, rng))
        w = np.sort(rng.choice(np.arange(-4, 5), d_clock, replace=False)) * scale / 2
        b = ClockModel(w, rng.uniform(0, 2 * np.pi, d_clock), linalg.random_unitary(d_clock, rng))
        net = ClockNetwork.from_dimensionless((a, b), [[0, coupling], [coupling, 0]])
    else:
        w = np.sort(rng.choice(np.arange(-4, 5), d_clock, replace=False)) * scale
        net = ClockNetwork((ClockModel(w, rng.uniform(0, 2 * np.pi, d_clock),
                                       linalg.random_unitary(d_clock, rng)),))
    levels = net.global_frequencies
    _, first = np.unique(np.round(levels, 9), return_index=True)
    pick = rng.choice(first, size=min(d_system, first.size), replace=False)
    # system levels beyond the clock's reach are placed where nothing pairs with them
    top = np.max(np.abs(levels))
    energies = np.concatenate([-levels[pick], top * (2 + np.arange(d_system - pick.size))])
    v = linalg.random_unitary(d_system, rng)
    h_s = (v * energies) @ v.conj().T
    u = UniverseSpec(net, h_s)
    count = len(energy_pairs(u))
    weights = rng.normal(size=count) + 1j * rng.normal(size=count)
    return u, paired_history(u, weights)
