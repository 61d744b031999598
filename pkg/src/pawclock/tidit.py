"""Redshift operator, effective Hamiltonians and time-dilated propagation.

From the perspective of local clock ``A`` the conditional state of the rest
of the Universe obeys

    i R(A) d/dtau psi = H^(A) psi,    R(A) = 1 - Phi(A),  Phi(A) = sum_J g_AJ H_J

and, when ``R`` is invertible, ``i d/dtau psi = H_eff psi`` with
``H_eff = R^-1 H^(A)``.  Everything here acts on the rest space
``(x)_{K != A} H_K (x) H_S`` in network order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from . import linalg
from .errors import CalledOnInvertible, NonInvertible, SeriesDivergent
from .universe import UniverseSpec

HERMITIAN_ATOL = 1e-10
SERIES_TARGET = 1e-12
SERIES_MAX_ORDER = 200
EPSILON_RTOL = 1e-9


def _rest_layout(u: UniverseSpec, a: int) -> tuple[list[int], list[int]]:
    """Rest-space dims and, per remaining clock, its network index."""
    others = [k for k in range(len(u.clock.locals)) if k != a]
    dims = [u.clock.locals[k].dim for k in others] + [u.d_system]
    return dims, others


def _rest_clock_ops(u: UniverseSpec, a: int) -> tuple[list[int], dict[int, np.ndarray]]:
    dims, others = _rest_layout(u, a)
    ops = {k: linalg.embed_local(u.clock.locals[k].hamiltonian, pos, dims)
           for pos, k in enumerate(others)}
    return dims, ops


def _system_op(u: UniverseSpec, dims: list[int]) -> np.ndarray:
    return linalg.embed_local(u.h_system, len(dims) - 1, dims)


def conditional_hamiltonian(u: UniverseSpec, clock) -> np.ndarray:
    """``H_S + sum_{J != A} H_J - 1/2 sum_{J,K != A} g_JK H_J H_K`` on the rest space."""
    a = u.clock.index(clock)
    dims, ops = _rest_clock_ops(u, a)
    h = _system_op(u, dims) + sum(ops.values(), np.zeros_like(_system_op(u, dims)))
    g = u.clock.couplings
    if u.clock.interaction:
        for j, hj in ops.items():
            for k, hk in ops.items():
                if g[j, k] != 0:
                    h = h - 0.5 * g[j, k] * hj @ hk
    return h


def phi_operator(u: UniverseSpec, clock) -> np.ndarray:
    """``Phi(A) = sum_{J != A} g_AJ H_J``."""
    a = u.clock.index(clock)
    dims, ops = _rest_clock_ops(u, a)
    d = int(np.prod(dims))
    phi = np.zeros((d, d), dtype=complex)
    if u.clock.interaction:
        for j, hj in ops.items():
            phi += u.clock.couplings[a, j] * hj
    return phi


@dataclass(frozen=True, eq=False)
class RedshiftBundle:
    """``R(A) = 1 - Phi(A)`` with its spectral data."""

    clock: str
    R: np.ndarray
    Phi: np.ndarray
    spectral_radius: float
    eigenvalues: np.ndarray
    spectrum: linalg.SpectralDecomposition
    tolerance: float

    @property
    def invertible(self) -> bool:
        return bool(np.min(np.abs(self.eigenvalues)) > self.tolerance)


def redshift(u: UniverseSpec, clock) -> RedshiftBundle:
    a = u.clock.index(clock)
    phi = phi_operator(u, clock)
    r = np.eye(phi.shape[0]) - phi
    phi_spec = linalg.eig_hermitian(phi)
    rho = float(np.max(np.abs(phi_spec.eigenvalues)))
    spec = linalg.eig_hermitian(r)
    tol = EPSILON_RTOL * (1.0 + rho)
    return RedshiftBundle(u.clock.labels[a], r, phi, rho, spec.eigenvalues, spec, tol)


def default_series_order(rho: float) -> int:
    """Smallest ``m`` with ``rho**(m+1) / (1 - rho) <= 1e-12``, capped at 200."""
    if rho == 0:
        return 0
    for m in range(SERIES_MAX_ORDER + 1):
        if rho ** (m + 1) / (1 - rho) <= SERIES_TARGET:
            return m
    return SERIES_MAX_ORDER


def series_bound(norm_h: float, rho: float, m: int) -> float:
    """Tail bound ``|H| rho**(m+1) / (1 - rho)`` of the order-``m`` partial sum."""
    return norm_h * rho ** (m + 1) / (1 - rho)


def invert_redshift(b: RedshiftBundle, mode: str = "exact", order: int | None = None) -> np.ndarray:
    """Inverse of ``R`` by spectral inversion or by the geometric series in ``Phi``.

    Raises
    ------
    NonInvertible
        ``mode="exact"`` with an eigenvalue of ``R`` within tolerance of zero.
    SeriesDivergent
        ``mode="series"`` with spectral radius of ``Phi`` at least one.
    """
    if mode == "exact":
        if not b.invertible:
            raise NonInvertible(
                f"R({b.clock}) has eigenvalue {b.eigenvalues[np.argmin(np.abs(b.eigenvalues))]:.3e}")
        return b.spectrum.apply(lambda eps: 1.0 / eps)
    if mode == "series":
        if b.spectral_radius >= 1:
            raise SeriesDivergent(
                f"spectral radius {b.spectral_radius:.6g} >= 1; use exact inversion")
        m = default_series_order(b.spectral_radius) if order is None else int(order)
        return _partial_sums(b.Phi, np.eye(b.Phi.shape[0], dtype=complex), m)[-1]
    raise ValueError(f"unknown inversion mode {mode!r}")


def _partial_sums(phi: np.ndarray, h: np.ndarray, m: int) -> list[np.ndarray]:
    """``[sum_{n<=k} Phi^n h for k in 0..m]``."""
    term = h.copy()
    total = h.copy()
    sums = [total.copy()]
    for _ in range(m):
        term = phi @ term
        total = total + term
        sums.append(total.copy())
    return sums


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    clock: str
    mode: str
    conditional: np.ndarray
    exact: np.ndarray | None
    series: list = field(default_factory=list)
    redshift: RedshiftBundle | None = None

    @property
    def generator(self) -> np.ndarray:
        """Operator used for propagation in the requested mode."""
        if self.mode == "series":
            return self.series[-1]
        return self.exact

    @property
    def anti_hermitian_defect(self) -> float:
        g = self.generator
        return linalg.opnorm(0.5 * (g - g.conj().T))

    def series_errors(self) -> np.ndarray:
        return np.array([linalg.opnorm(s - self.exact) for s in self.series])


def effective_hamiltonian(u: UniverseSpec, clock, mode: str = "exact",
                          order: int | None = None) -> EffectiveHamiltonian:
    """``H_eff = R^-1 H^(A)`` together with the geometric-series partial sums.

    The partial sums are filled whenever ``rho(Phi) < 1`` (default order from
    :func:`default_series_order`).  Hermiticity is not assumed; see
    :attr:`EffectiveHamiltonian.anti_hermitian_defect`.
    """
    b = redshift(u, clock)
    h = conditional_hamiltonian(u, clock)
    exact = None
    if mode == "exact":
        exact = invert_redshift(b, "exact") @ h
    elif mode == "series":
        if b.spectral_radius >= 1:
            raise SeriesDivergent(
                f"spectral radius {b.spectral_radius:.6g} >= 1; use exact inversion")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if exact is None and b.invertible:
        exact = invert_redshift(b, "exact") @ h
    series = []
    if b.spectral_radius < 1:
        m = default_series_order(b.spectral_radius) if order is None else int(order)
        series = _partial_sums(b.Phi, h, m)
    return EffectiveHamiltonian(b.clock, mode, h, exact, series, b)


# --------------------------------------------------------------------------- #
#                         expansion in the couplings                          #
# --------------------------------------------------------------------------- #

def coupling_orders(u: UniverseSpec, clock, max_order: int) -> list[np.ndarray]:
    """Homogeneous parts of ``sum_n Phi^n H^(A)`` by total power of ``g``.

    With ``H^(A) = H0 + H1`` (``H1`` the pair couplings among the other
    clocks, first order in ``g``), the order-``k`` part is
    ``Phi^k H0 + Phi^(k-1) H1``.
    """
    a = u.clock.index(clock)
    dims, ops = _rest_clock_ops(u, a)
    h0 = _system_op(u, dims) + sum(ops.values(), np.zeros_like(_system_op(u, dims)))
    h1 = conditional_hamiltonian(u, clock) - h0
    phi = phi_operator(u, clock)
    parts = [h0]
    power = np.eye(phi.shape[0], dtype=complex)
    for k in range(1, max_order + 1):
        prev = power
        power = phi @ power
        parts.append(power @ h0 + prev @ h1)
    return parts


def explicit_second_order(u: UniverseSpec, clock) -> np.ndarray:
    """Term-by-term sum of the second-order expansion of ``H_eff``.

    Written directly as sums over clock labels::

        H_S + sum_J H_J - 1/2 sum_JK (g_JK - 2 g_AJ) H_J H_K
        + sum_J g_AJ H_J H_S + sum_JK g_AJ g_AK H_J H_K H_S
        - 1/2 sum_JKL g_AL (g_KJ - 2 g_AJ) H_J H_K H_L

    with every index running over clocks other than ``A``.
    """
    a = u.clock.index(clock)
    dims, ops = _rest_clock_ops(u, a)
    hs = _system_op(u, dims)
    g = u.clock.couplings if u.clock.interaction else np.zeros_like(u.clock.couplings)
    labels = list(ops)
    out = hs.copy()
    for j in labels:
        out += ops[j]
        out += g[a, j] * ops[j] @ hs
        for k in labels:
            out -= 0.5 * (g[j, k] - 2 * g[a, j]) * ops[j] @ ops[k]
            out += g[a, j] * g[a, k] * ops[j] @ ops[k] @ hs
            for l in labels:
                out -= 0.5 * g[a, l] * (g[k, j] - 2 * g[a, j]) * ops[j] @ ops[k] @ ops[l]
    return out


# --------------------------------------------------------------------------- #
#                          time-dilated propagation                           #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    norms: np.ndarray
    hermitian: bool
    method: str

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norms - self.norms[0])))


def evolve_generator(gen: np.ndarray, psi0: np.ndarray, times,
                     cond_limit: float = 1e8, step_tol: float = 1e-12) -> tuple[np.ndarray, str]:
    """Rows ``exp(-i G t) psi0`` for a possibly non-normal ``G``.

    Uses the eigen-decomposition when ``G`` is diagonalizable with a
    well-conditioned eigenbasis, otherwise Taylor steps with step-doubling
    error control.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    psi0 = np.asarray(psi0, dtype=complex)
    lam, vec = np.linalg.eig(gen)
    if np.linalg.cond(vec) <= cond_limit:
        coeff = np.linalg.solve(vec, psi0)
        phases = np.exp(-1j * np.outer(times, lam))
        return (phases * coeff) @ vec.T, "eigen"
    return _taylor_evolve(gen, psi0, times, step_tol), "taylor"


def _taylor_step(gen, psi, h, terms=40):
    out = psi.copy()
    term = psi.copy()
    for n in range(1, terms + 1):
        term = (-1j * h / n) * (gen @ term)
        out = out + term
        if np.linalg.norm(term) <= 1e-18 * max(np.linalg.norm(out), 1e-300):
            break
    return out


def _taylor_evolve(gen, psi0, times, tol):
    order = np.argsort(times)
    out = np.empty((times.size, psi0.size), dtype=complex)
    t_cur, psi = 0.0, psi0.copy()
    scale = max(linalg.opnorm(gen), 1e-300)
    for idx in order:
        target = times[idx]
        while abs(target - t_cur) > 1e-15 * max(1.0, abs(target)):
            h = float(np.clip(target - t_cur, -1.0 / scale, 1.0 / scale))
            while True:
                full = _taylor_step(gen, psi, h)
                half = _taylor_step(gen, _taylor_step(gen, psi, h / 2), h / 2)
                if np.linalg.norm(full - half) <= tol * max(np.linalg.norm(half), 1.0) or abs(h) < 1e-12:
                    break
                h /= 2
            psi, t_cur = half, t_cur + h
        out[idx] = psi
    return out


def propagate_time_dilated(u: UniverseSpec, clock, psi0: np.ndarray, times,
                           mode: str = "exact", heff: EffectiveHamiltonian | None = None) -> Trajectory:
    """Solve ``i d/dtau psi = H_eff psi`` from ``psi0`` on the rest space.

    Hermitian generators (anti-Hermitian part at most 1e-10) are evolved
    through their spectral decomposition; otherwise the full non-normal
    generator is used and the norm drift is reported.
    """
    heff = heff or effective_hamiltonian(u, clock, mode)
    gen = heff.generator
    if gen is None:
        raise NonInvertible(f"R({heff.clock}) is not invertible")
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (gen.shape[0],):
        raise ValueError(f"initial state must have length {gen.shape[0]}")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    hermitian = heff.anti_hermitian_defect <= HERMITIAN_ATOL
    if hermitian:
        spec = linalg.eig_hermitian(0.5 * (gen + gen.conj().T))
        states, method = spec.evolve_state(psi0, times), "spectral"
    else:
        states, method = evolve_generator(gen, psi0, times)
    return Trajectory(times, states, np.linalg.norm(states, axis=1), hermitian, method)


def redshift_expectations(b: RedshiftBundle, states: np.ndarray) -> np.ndarray:
    num = np.real(np.einsum("ti,ij,tj->t", states.conj(), b.R, states))
    return num / np.real(np.einsum("ti,ti->t", states.conj(), states))


def check_redshift_conservation(u: UniverseSpec, clock, psi0, times, mode: str = "exact") -> float:
    """``max_tau |<R>(tau) - <R>(0)|`` along the time-dilated trajectory."""
    heff = effective_hamiltonian(u, clock, mode)
    traj = propagate_time_dilated(u, clock, psi0, times, mode, heff)
    r_vals = redshift_expectations(heff.redshift, traj.states)
    return float(np.max(np.abs(r_vals - r_vals[0])))


# --------------------------------------------------------------------------- #
#                        non-invertible redshift                              #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class DegenerateSplit:
    """Frozen (kernel of ``R``) and dynamical parts of the rest space.

    ``stationary_states`` are columns spanning the solutions of
    ``H^(A) phi = 0`` inside the frozen subspace; ``dynamical_generator`` is
    ``R^+ H^(A)`` restricted to the dynamical subspace.
    """

    clock: str
    frozen_projector: np.ndarray
    dynamical_projector: np.ndarray
    stationary_states: np.ndarray
    stationary_constraint_residual: float
    frozen_constraint_spectrum: np.ndarray
    dynamical_eigenvalues: np.ndarray
    dynamical_generator: np.ndarray


def degenerate_split(u: UniverseSpec, clock, tol: float = linalg.KERNEL_RTOL) -> DegenerateSplit:
    b = redshift(u, clock)
    if b.invertible:
        raise CalledOnInvertible(f"R({b.clock}) is invertible; nothing is frozen")
    frozen = np.abs(b.eigenvalues) <= b.tolerance
    vec = b.spectrum.eigenvectors
    f_basis = vec[:, frozen]
    p_f = f_basis @ f_basis.conj().T
    p_d = np.eye(p_f.shape[0]) - p_f
    h = conditional_hamiltonian(u, clock)

    restricted = f_basis.conj().T @ h @ f_basis
    rspec = linalg.eig_hermitian(restricted)
    scale = max(linalg.opnorm(h), 1e-300)
    keep = np.abs(rspec.eigenvalues) <= tol * scale
    stationary = f_basis @ rspec.eigenvectors[:, keep]
    if stationary.shape[1]:
        residual = float(max(np.linalg.norm(h @ stationary[:, k]) for k in range(stationary.shape[1])))
    else:
        residual = float(np.min(np.abs(rspec.eigenvalues)))

    pinv = b.spectrum.apply(lambda eps: np.where(np.abs(eps) > b.tolerance,
                                                 1.0 / np.where(eps == 0, 1, eps), 0.0))
    return DegenerateSplit(b.clock, p_f, p_d, stationary, residual, rspec.eigenvalues,
                           b.eigenvalues[~frozen], pinv @ h @ p_d)


@dataclass(frozen=True)
class DilationEntry:
    """One eigenspace of ``R``: time runs at rate ``1/epsilon`` relative to ``H^(A)``."""

    epsilon: float
    multiplicity: int
    factor: float | None
    behaviour: str


def dilation_sign_map(u: UniverseSpec, clock) -> list[DilationEntry]:
    b = redshift(u, clock)
    entries = []
    for group in b.spectrum.degenerate_groups():
        eps = float(np.mean(b.eigenvalues[group]))
        if abs(eps) <= b.tolerance:
            entries.append(DilationEntry(0.0, len(group), None, "frozen"))
        else:
            entries.append(DilationEntry(eps, len(group), 1.0 / eps,
                                         "forward" if eps > 0 else "reversed"))
    return entries


# --------------------------------------------------------------------------- #
#                               frequency fit                                 #
# --------------------------------------------------------------------------- #

def fit_angular_frequency(times, signal) -> float:
    """Least-squares angular frequency of ``c + A cos(W t + p)``.

    The FFT peak of the mean-removed signal seeds the fit.
    """
    times = np.asarray(times, dtype=float)
    signal = np.asarray(signal, dtype=float)
    dt = times[1] - times[0]
    centred = signal - signal.mean()
    spectrum = np.abs(np.fft.rfft(centred))
    freqs = 2 * np.pi * np.fft.rfftfreq(times.size, dt)
    k = int(np.argmax(spectrum[1:]) + 1)
    guess = [freqs[k], 0.0, float(np.std(centred) * np.sqrt(2)), float(signal.mean())]

    def model(t, w, p, amp, c):
        return c + amp * np.cos(w * t + p)

    best = None
    for p0 in (0.0, np.pi / 2, np.pi, -np.pi / 2):
        guess[1] = p0
        try:
            popt, _ = curve_fit(model, times, signal, p0=guess, maxfev=20000)
        except RuntimeError:
            continue
        cost = float(np.sum((model(times, *popt) - signal) ** 2))
        if best is None or cost < best[0]:
            best = (cost, popt)
    if best is None:
        raise RuntimeError("oscillation fit did not converge")
    return abs(float(best[1][0]))
