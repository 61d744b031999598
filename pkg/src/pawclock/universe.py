"""Constrained Universe states and relational conditioning.

The Universe is ``clock network (x) system`` with factor order
``[clock A, clock B, ..., system]``.  A history state is a normalized kernel
vector of ``H = H_C (x) 1 + 1 (x) H_S``; conditioning it on a global or local
clock time state yields the relational state of the remaining factors.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import linalg
from .clocks import ClockModel, ClockNetwork, classify_spectrum, ResolutionOfIdentity
from .errors import EmptyKernel, ZeroAmplitude

AMPLITUDE_FLOOR = 1e-12
GLOBAL = "global"


@dataclass(frozen=True, eq=False)
class UniverseSpec:
    clock: ClockNetwork
    h_system: np.ndarray

    def __post_init__(self):
        h = linalg.as_operator(self.h_system)
        if not linalg.is_hermitian(h):
            raise ValueError("system Hamiltonian must be Hermitian")
        object.__setattr__(self, "h_system", h)

    @property
    def d_system(self) -> int:
        return self.h_system.shape[0]

    @property
    def dims(self) -> list[int]:
        return self.clock.dims + [self.d_system]

    @property
    def dim(self) -> int:
        return self.clock.dim * self.d_system

    @cached_property
    def hamiltonian(self) -> np.ndarray:
        return assemble_hamiltonian(self)


def assemble_hamiltonian(u: UniverseSpec) -> np.ndarray:
    """``H_C (x) 1_S + 1_C (x) H_S`` with the network's (possibly interacting) ``H_C``."""
    return (np.kron(u.clock.hamiltonian, np.eye(u.d_system))
            + np.kron(np.eye(u.clock.dim), u.h_system))


@dataclass(frozen=True, eq=False)
class HistoryState:
    universe: UniverseSpec
    psi: np.ndarray
    residual: float

    @cached_property
    def schmidt(self) -> linalg.SchmidtData:
        """Clock / system Schmidt decomposition."""
        return linalg.schmidt(self.psi, self.universe.clock.dim, self.universe.d_system)

    @cached_property
    def coefficients(self) -> np.ndarray:
        """``c_ab`` in the global clock energy basis, so that
        ``a^2(t) = sum_ab c_ab exp(-i (w_a - w_b) t)`` for zero phases."""
        net = self.universe.clock
        mat = self.psi.reshape(net.dim, self.universe.d_system)
        in_energy = net.energy_basis.conj().T @ mat
        rho_c = in_energy @ in_energy.conj().T
        return rho_c.T / net.dim

    def amplitude_squared(self, t: float) -> float:
        """``a^2(t)`` evaluated from the energy-basis coefficients."""
        net = self.universe.clock
        phase = net.global_frequencies * t + net.global_phases
        diff = phase[:, None] - phase[None, :]
        return float(np.real(np.sum(self.coefficients * np.exp(-1j * diff))))


def _history(u: UniverseSpec, psi: np.ndarray) -> HistoryState:
    psi = np.asarray(psi, dtype=complex)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("history state must be nonzero")
    psi = psi / norm
    return HistoryState(u, psi, float(np.linalg.norm(u.hamiltonian @ psi)))


def solve_constraint(u: UniverseSpec, tol: float = linalg.KERNEL_RTOL) -> list[HistoryState]:
    """One history state per orthonormal kernel vector of ``H``.

    Raises
    ------
    EmptyKernel
        If no eigenvalue of ``H`` lies within ``tol * |H|`` of zero.
    """
    vectors = linalg.kernel(u.hamiltonian, tol)
    if not vectors:
        raise EmptyKernel(
            "the Universe Hamiltonian has no zero eigenvalue; shift the clock "
            "spectrum or pick a system spectrum that cancels it")
    return [_history(u, v) for v in vectors]


def energy_pairs(u: UniverseSpec, tol: float = linalg.KERNEL_RTOL) -> list[tuple[int, np.ndarray]]:
    """``(k, s)`` with ``H_S s = -W_k s`` for global clock energy level ``k``."""
    spec = linalg.eig_hermitian(u.h_system)
    w = u.clock.global_frequencies
    scale = max(float(np.max(np.abs(w))), float(np.max(np.abs(spec.eigenvalues))), 1e-300)
    pairs = []
    for k, wk in enumerate(w):
        for j, e in enumerate(spec.eigenvalues):
            if abs(wk + e) <= tol * scale:
                pairs.append((k, spec.eigenvectors[:, j]))
    return pairs


def paired_history(u: UniverseSpec, weights: Sequence[complex] | None = None,
                   tol: float = linalg.KERNEL_RTOL) -> HistoryState:
    """Energy-paired history ``sum_p c_p |W_k> (x) |E = -W_k>``.

    Every clock energy level is paired with each system eigenvector of the
    opposite energy; ``weights`` (default all ones) weight the pairs in the
    order returned by :func:`energy_pairs`.
    """
    pairs = energy_pairs(u, tol)
    if not pairs:
        raise EmptyKernel("no clock level is matched by a system level of opposite energy")
    weights = np.ones(len(pairs)) if weights is None else np.asarray(weights, dtype=complex)
    if weights.shape != (len(pairs),):
        raise ValueError(f"need {len(pairs)} pair weights, got {weights.shape}")
    basis = u.clock.energy_basis
    psi = sum(c * np.kron(basis[:, k], s) for c, (k, s) in zip(weights, pairs))
    return _history(u, psi)


def select_history(basis: Sequence[HistoryState], coeffs: Sequence[complex]) -> HistoryState:
    """Normalized combination of kernel states with recomputed Schmidt data."""
    if len(basis) != len(coeffs) or not basis:
        raise ValueError("need one coefficient per basis state")
    psi = sum(c * h.psi for c, h in zip(coeffs, basis))
    if np.linalg.norm(psi) <= AMPLITUDE_FLOOR:
        raise ValueError("combination vanishes")
    return _history(basis[0].universe, psi)


@dataclass(frozen=True)
class ConditionalState:
    label: float
    amplitude: float
    psi: np.ndarray
    scope: object = GLOBAL


@dataclass(frozen=True)
class ConditionalDensity:
    label: float
    rho: np.ndarray
    scope: object = GLOBAL


def _scope_clock(u: UniverseSpec, scope):
    if scope is None or scope == GLOBAL:
        return None
    return u.clock.index(scope)


def rest_dims(u: UniverseSpec, scope) -> list[int]:
    """Factor dimensions of the conditional state for ``scope``."""
    j = _scope_clock(u, scope)
    if j is None:
        return [u.d_system]
    dims = u.dims
    return dims[:j] + dims[j + 1:]


def unnormalized_conditionals(h: HistoryState, scope, times) -> np.ndarray:
    """Rows ``(<t| (x) 1) Psi`` for each time, before normalization."""
    u = h.universe
    times = np.atleast_1d(np.asarray(times, dtype=float))
    j = _scope_clock(u, scope)
    if j is None:
        bras = u.clock.time_states(times).conj()
        return bras @ h.psi.reshape(u.clock.dim, u.d_system)
    dims = u.dims
    pre = int(np.prod(dims[:j], dtype=int))
    post = int(np.prod(dims[j + 1:], dtype=int))
    bras = u.clock.locals[j].time_states(times).conj()
    chi = np.einsum("tj,pjq->tpq", bras, h.psi.reshape(pre, dims[j], post))
    return chi.reshape(times.size, pre * post)


def amplitudes(h: HistoryState, scope, times) -> np.ndarray:
    return np.linalg.norm(unnormalized_conditionals(h, scope, times), axis=1)


def conditional_states(h: HistoryState, scope, times,
                       floor: float = AMPLITUDE_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """``(a, psi)`` on a grid; ``psi`` rows are normalized.

    Raises
    ------
    ZeroAmplitude
        At the first time where ``a <= floor``.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    chi = unnormalized_conditionals(h, scope, times)
    a = np.linalg.norm(chi, axis=1)
    bad = np.flatnonzero(a <= floor)
    if bad.size:
        raise ZeroAmplitude(float(times[bad[0]]), float(a[bad[0]]))
    return a, chi / a[:, None]


def condition_global(h: HistoryState, t: float) -> ConditionalState:
    a, psi = conditional_states(h, GLOBAL, t)
    return ConditionalState(float(t), float(a[0]), psi[0], GLOBAL)


def condition_local(h: HistoryState, clock, tau: float) -> ConditionalState:
    """Condition on local clock ``clock`` only; the state lives on the other clocks and S."""
    j = h.universe.clock.index(clock)
    a, psi = conditional_states(h, j, tau)
    return ConditionalState(float(tau), float(a[0]), psi[0], h.universe.clock.labels[j])


def conditional_density(h: HistoryState, scope, t: float) -> ConditionalDensity:
    a, psi = conditional_states(h, scope, t)
    return ConditionalDensity(float(t), linalg.density(psi[0]), scope or GLOBAL)


def expectation(h: HistoryState, op: np.ndarray, scope, t) -> np.ndarray | float:
    """``Tr[O rho(t)]``; vectorized over ``t``."""
    scalar = np.ndim(t) == 0
    _, psi = conditional_states(h, scope, t)
    op = linalg.as_operator(op)
    if op.shape[0] != psi.shape[1]:
        raise ValueError(f"observable of size {op.shape[0]} does not act on a "
                         f"{psi.shape[1]}-dim conditional state")
    vals = np.real(np.einsum("ti,ij,tj->t", psi.conj(), op, psi))
    return float(vals[0]) if scalar else vals


# --------------------------------------------------------------------------- #
#                            grids and profiles                               #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``num`` points on ``[start, stop)``.

    ``stop=None`` means one full period of the scoped clock after ``start``.
    """

    num: int = 256
    start: float = 0.0
    stop: float | None = None
    endpoint: bool = False

    def __post_init__(self):
        if self.num < 1:
            raise ValueError("grid needs at least one node")
        if self.stop is not None and not self.stop > self.start:
            raise ValueError("grid stop must exceed start")

    def times(self, period: float | None = None) -> np.ndarray:
        stop = self.stop
        if stop is None:
            if period is None:
                raise ValueError("grid without stop needs a period")
            stop = self.start + period
        return np.linspace(self.start, stop, self.num, endpoint=self.endpoint)


def scope_frequencies(u: UniverseSpec, scope) -> np.ndarray:
    j = _scope_clock(u, scope)
    if j is None:
        return u.clock.global_frequencies
    return u.clock.locals[j].frequencies


def scope_period(u: UniverseSpec, scope) -> float:
    w = np.unique(scope_frequencies(u, scope))
    if w.size < 2:
        return 2 * np.pi
    return classify_spectrum(w).period


@dataclass(frozen=True)
class AmplitudeProfile:
    times: np.ndarray
    amplitude: np.ndarray
    probability: np.ndarray
    total: float
    period: float


def amplitude_profile(h: HistoryState, scope=GLOBAL, grid: TimeGrid | None = None) -> AmplitudeProfile:
    """Sample ``a(t)`` and the time density ``Pr(t) = (d/T) a^2(t)``.

    ``d`` and ``T`` belong to the scoped clock.  ``total`` is the
    rectangle-rule integral of ``Pr`` over the grid span, equal to one when
    the grid covers a period with more than ``max r_k`` nodes.
    """
    grid = grid or TimeGrid()
    u = h.universe
    j = _scope_clock(u, scope)
    d = u.clock.dim if j is None else u.clock.locals[j].dim
    period = scope_period(u, scope)
    times = grid.times(period)
    a = amplitudes(h, scope, times)
    prob = d / period * a ** 2
    span = (times[-1] - times[0]) if grid.endpoint else (
        period if grid.stop is None else grid.stop - grid.start)
    n_cells = times.size - 1 if grid.endpoint else times.size
    if grid.endpoint and times.size > 1:
        total = float(np.sum(0.5 * (prob[1:] + prob[:-1])) * span / n_cells)
    else:
        total = float(np.sum(prob) * span / max(n_cells, 1))
    return AmplitudeProfile(times, a, prob, total, period)


def reconstruct(h: HistoryState, resolution: ResolutionOfIdentity) -> np.ndarray:
    """``weight * sum_n a(t_n) |t_n> (x) psi(t_n)`` using global time states."""
    u = h.universe
    states = u.clock.time_states(resolution.nodes)
    chi = unnormalized_conditionals(h, GLOBAL, resolution.nodes)
    return resolution.weight * np.einsum("nc,ns->cs", states, chi).reshape(-1)


def global_clock_model(u: UniverseSpec) -> ClockModel:
    return u.clock.global_clock()
