"""Finite-dimensional clocks, clock networks and resolutions of the identity.

A clock is a non-degenerate spectrum ``w_k`` (ascending) with phases
``phi_k`` and an orthonormal energy eigenbasis expressed in the
computational basis of the clock factor.  Its time states are

    |t> = d**-0.5 * sum_k exp(-i (w_k t + phi_k)) |w_k>

A :class:`ClockNetwork` stacks local clocks into a global clock, optionally
with the pairwise coupling ``-1/2 sum_JK g_JK H_J H_K``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from . import linalg
from .errors import InfeasibleResolution

EVEN_SPACING_RTOL = 1e-9
RATIONAL_RTOL = 1e-9
DEFAULT_DENOMINATOR_CAP = 10 ** 6
ORTHONORMAL_TOL = 1e-12
RESOLUTION_TOL = 1e-10
MAX_QUADRATURE_NODES = 1 << 22


@dataclass(frozen=True, eq=False)
class ClockModel:
    """A non-degenerate clock.

    Parameters
    ----------
    frequencies : array_like
        Strictly ascending energy eigenvalues ``w_k`` (hbar = 1).
    phases : array_like, optional
        Reference-state phases ``phi_k``; zeros by default.
    basis : array_like, optional
        Unitary whose column ``k`` is ``|w_k>`` in the computational basis.
        Defaults to the identity, i.e. the clock is written in its energy basis.
    """

    frequencies: np.ndarray
    phases: np.ndarray = None
    basis: np.ndarray = None

    def __post_init__(self):
        w = np.asarray(self.frequencies, dtype=float).reshape(-1)
        if w.size < 1:
            raise ValueError("a clock needs at least one level")
        if np.any(np.diff(w) <= 0):
            raise ValueError("clock frequencies must be strictly ascending (non-degenerate)")
        phases = np.zeros_like(w) if self.phases is None else np.asarray(self.phases, dtype=float)
        if phases.shape != w.shape:
            raise ValueError("need one phase per frequency")
        basis = np.eye(w.size, dtype=complex) if self.basis is None else linalg.as_operator(self.basis)
        if basis.shape[0] != w.size or not linalg.is_unitary(basis):
            raise ValueError("basis must be a unitary matching the number of levels")
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.frequencies.size

    @property
    def energy_scale(self) -> float:
        """Largest ``|w_k|``; equals ``|omega|`` for a spin clock."""
        return float(np.max(np.abs(self.frequencies)))

    @cached_property
    def hamiltonian(self) -> np.ndarray:
        b = self.basis
        return (b * self.frequencies) @ b.conj().T

    def amplitudes(self, times) -> np.ndarray:
        """Energy-basis components of time states, one row per time."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        return np.exp(-1j * (np.outer(t, self.frequencies) + self.phases)) / np.sqrt(self.dim)

    def time_states(self, times) -> np.ndarray:
        return self.amplitudes(times) @ self.basis.T

    def with_phases(self, phases) -> "ClockModel":
        return ClockModel(self.frequencies, phases, self.basis)


def spin_clock(omega: float, phases: Sequence[float] | None = None) -> ClockModel:
    """Spin-1/2 clock with Hamiltonian ``omega * sigma_x``.

    Levels are ordered ascending, so for ``omega > 0`` the basis is
    ``(|->, |+>)`` with ``|+-> = (|0> +- |1>)/sqrt(2)``.
    """
    if omega == 0:
        raise ValueError("a spin clock needs omega != 0")
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    minus = np.array([1, -1], dtype=complex) / np.sqrt(2)
    w = abs(float(omega))
    basis = np.column_stack([minus, plus] if omega > 0 else [plus, minus])
    return ClockModel(np.array([-w, w]), phases, basis)


def reference_state(clock: ClockModel) -> np.ndarray:
    return clock.time_states(0.0)[0]


def time_state(clock: ClockModel, t: float) -> np.ndarray:
    return clock.time_states(t)[0]


def overlap(clock: ClockModel, s: float, t: float) -> complex:
    """``<s|t> = (1/d) sum_k exp(i w_k (s - t))``."""
    return complex(np.mean(np.exp(1j * clock.frequencies * (s - t))))


@dataclass(frozen=True, eq=False)
class ClockNetwork:
    """Ordered local clocks with symmetric couplings ``g_JK`` (units 1/energy)."""

    locals: tuple
    couplings: np.ndarray = None
    labels: tuple = None
    interaction: bool = None

    def __post_init__(self):
        clocks = tuple(self.locals)
        if not clocks:
            raise ValueError("a clock network needs at least one clock")
        n = len(clocks)
        g = np.zeros((n, n)) if self.couplings is None else np.asarray(self.couplings, dtype=float)
        if g.shape != (n, n):
            raise ValueError(f"couplings must be {n}x{n}")
        if np.any(np.diag(g) != 0):
            raise ValueError("self-couplings g_JJ must vanish")
        if not np.allclose(g, g.T, rtol=0, atol=1e-14):
            raise ValueError("couplings must be symmetric")
        labels = tuple(self.labels) if self.labels is not None else tuple(
            chr(ord("A") + k) for k in range(n))
        if len(labels) != n or len(set(labels)) != n:
            raise ValueError("need one unique label per clock")
        interaction = bool(np.any(g != 0)) if self.interaction is None else bool(self.interaction)
        object.__setattr__(self, "locals", clocks)
        object.__setattr__(self, "couplings", g)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "interaction", interaction)

    @classmethod
    def from_dimensionless(cls, clocks, g_tilde, labels=None) -> "ClockNetwork":
        """Build from couplings measured in units of the first clock's energy.

        The interaction energy of pair ``(J, K)`` is ``-w_1 * gt_JK * s_J s_K``
        for spin clocks, which is the convention in which the two-spin clock
        reads ``w (sx_A + alpha sx_B - g sx_A sx_B)``; hence
        ``g_JK = gt_JK * e_1 / (e_J e_K)`` with ``e_J`` the clock energy scale.
        """
        clocks = tuple(clocks)
        gt = np.asarray(g_tilde, dtype=float)
        scales = np.array([c.energy_scale for c in clocks])
        g = gt * scales[0] / np.outer(scales, scales)
        return cls(clocks, g, labels)

    def dimensionless_couplings(self) -> np.ndarray:
        scales = np.array([c.energy_scale for c in self.locals])
        return self.couplings * np.outer(scales, scales) / scales[0]

    @property
    def dims(self) -> list[int]:
        return [c.dim for c in self.locals]

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, label) -> int:
        if isinstance(label, (int, np.integer)):
            if not 0 <= label < len(self.locals):
                raise IndexError(f"clock index {label} out of range")
            return int(label)
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown clock label {label!r}; have {self.labels}") from None

    def local_hamiltonian(self, j: int, dims=None) -> np.ndarray:
        """``H_J`` embedded in the clock space (or in ``dims`` if given)."""
        dims = self.dims if dims is None else dims
        return linalg.embed_local(self.locals[j].hamiltonian, j, dims)

    @cached_property
    def free_hamiltonian(self) -> np.ndarray:
        return sum(self.local_hamiltonian(j) for j in range(len(self.locals)))

    @cached_property
    def interaction_hamiltonian(self) -> np.ndarray:
        d = self.dim
        h_int = np.zeros((d, d), dtype=complex)
        if not self.interaction:
            return h_int
        hs = [self.local_hamiltonian(j) for j in range(len(self.locals))]
        n = len(hs)
        for j in range(n):
            for k in range(n):
                if self.couplings[j, k] != 0:
                    h_int -= 0.5 * self.couplings[j, k] * hs[j] @ hs[k]
        return h_int

    @cached_property
    def hamiltonian(self) -> np.ndarray:
        return self.free_hamiltonian + self.interaction_hamiltonian

    @cached_property
    def _interaction_spectrum(self) -> linalg.SpectralDecomposition:
        return linalg.eig_hermitian(self.interaction_hamiltonian)

    @cached_property
    def energy_basis(self) -> np.ndarray:
        return linalg.tensor_product(*(c.basis for c in self.locals))

    @cached_property
    def global_frequencies(self) -> np.ndarray:
        """Diagonal of ``H_C`` in the product energy basis (not sorted)."""
        b = self.energy_basis
        return np.real(np.einsum("ij,ik,kj->j", b.conj(), self.hamiltonian, b))

    @cached_property
    def global_phases(self) -> np.ndarray:
        total = np.zeros(1)
        for c in self.locals:
            total = np.add.outer(total, c.phases).reshape(-1)
        return total

    def global_clock(self) -> ClockModel:
        """The global clock as a single :class:`ClockModel` (needs a non-degenerate H_C)."""
        order = np.argsort(self.global_frequencies, kind="stable")
        return ClockModel(self.global_frequencies[order], self.global_phases[order],
                          self.energy_basis[:, order])

    def reference_state(self) -> np.ndarray:
        return linalg.tensor_product(*(reference_state(c)[:, None] for c in self.locals))[:, 0]

    def product_time_states(self, times) -> np.ndarray:
        """Rows are ``(x)_J |t>_J`` for each ``t``."""
        rows = None
        for c in self.locals:
            s = c.time_states(times)
            rows = s if rows is None else np.einsum("ti,tj->tij", rows, s).reshape(len(s), -1)
        return rows

    def time_states(self, times) -> np.ndarray:
        """Global time states, one row per time."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        prod = self.product_time_states(times)
        if not self.interaction:
            return prod
        spec = self._interaction_spectrum
        v = spec.eigenvectors
        phases = np.exp(-1j * np.outer(times, spec.eigenvalues))
        return ((prod @ v.conj()) * phases) @ v.T


def global_time_state(net: ClockNetwork, t: float) -> np.ndarray:
    return net.time_states(t)[0]


def transition_amplitude(net: ClockNetwork, taus: Sequence[float], t: float) -> complex:
    """``F({tau_J}|t) = ((x)_J <tau_J|) |t>_C``."""
    if len(taus) != len(net.locals):
        raise ValueError(f"need {len(net.locals)} local times, got {len(taus)}")
    bra = linalg.tensor_product(*(time_state(c, tau)[:, None] for c, tau in zip(net.locals, taus)))[:, 0]
    return complex(np.vdot(bra, global_time_state(net, t)))


# --------------------------------------------------------------------------- #
#                     spectrum classes and resolutions                        #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class SpectrumClass:
    """Commensurability data of a spectrum.

    ``w_k ~= w_0 + 2 pi r_k / period``.  ``frequency_error`` is the largest
    mismatch of that relation, zero up to rounding unless ``kind`` is
    ``"irrational-approximated"``.
    """

    kind: str
    period: float
    r: tuple
    ratios: tuple
    frequency_error: float

    @property
    def r_max(self) -> int:
        return max(self.r)


def _frequencies_of(clock_or_w) -> np.ndarray:
    if isinstance(clock_or_w, ClockModel):
        return clock_or_w.frequencies
    w = np.unique(np.asarray(clock_or_w, dtype=float))
    return w


def classify_spectrum(clock_or_w, denominator_cap: int = DEFAULT_DENOMINATOR_CAP) -> SpectrumClass:
    """Detect evenly spaced / rational / irrational spectra.

    Non-even spectra are rationalized through continued fractions of
    ``(w_k - w_0)/(w_1 - w_0)`` with denominators up to ``denominator_cap``.
    Accepts a :class:`ClockModel` or an array of (possibly repeated) levels.
    """
    w = _frequencies_of(clock_or_w)
    if w.size < 2:
        raise ValueError("classification needs at least two distinct levels")
    gaps = np.diff(w)
    base = gaps[0]
    if np.all(np.abs(gaps - base) <= EVEN_SPACING_RTOL * base):
        r = tuple(range(w.size))
        period = 2 * np.pi / base
        err = float(np.max(np.abs(w - (w[0] + 2 * np.pi * np.arange(w.size) / period))))
        return SpectrumClass("evenly-spaced", period, r, tuple(Fraction(k) for k in r), err)

    x = (w - w[0]) / base
    fracs = [Fraction(0), Fraction(1)] + [
        Fraction(float(v)).limit_denominator(denominator_cap) for v in x[2:]]
    exact = all(abs(float(f) - v) <= RATIONAL_RTOL * max(1.0, v) for f, v in zip(fracs, x))
    r1 = math.lcm(*(f.denominator for f in fracs))
    r = tuple(int(f * r1) for f in fracs)
    period = 2 * np.pi * r1 / base
    err = float(np.max(np.abs(w - (w[0] + 2 * np.pi * np.array(r, dtype=float) / period))))
    kind = "rational" if exact else "irrational-approximated"
    return SpectrumClass(kind, period, r, tuple(fracs), err)


RESOLUTION_KINDS = ("discrete-orthonormal", "overcomplete-discrete", "quadrature")


@dataclass(frozen=True, eq=False)
class ResolutionOfIdentity:
    """``weight * sum_n |t_n><t_n| ~= 1`` on the clock space.

    ``trend`` lists ``(N, defect)`` pairs visited while choosing the node
    count (quadrature only).
    """

    kind: str
    nodes: np.ndarray
    weight: float
    defect: float
    tolerance: float
    period: float
    trend: tuple = field(default=())

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    def operator(self, clock: ClockModel) -> np.ndarray:
        states = clock.time_states(self.nodes)
        return self.weight * states.T @ states.conj()


def identity_defect(clock_or_w, nodes, weight) -> float:
    """Spectral-norm defect of ``weight * sum_n |t_n><t_n| - 1`` in the energy basis.

    Phases and the eigenbasis drop out, so only the spectrum enters.
    """
    w = _frequencies_of(clock_or_w)
    nodes = np.asarray(nodes, dtype=float)
    d = w.size
    diff = w[:, None] - w[None, :]
    acc = np.zeros((d, d), dtype=complex)
    for chunk in np.array_split(nodes, max(1, nodes.size // 1024)):
        acc += np.exp(-1j * diff[None] * chunk[:, None, None]).sum(axis=0)
    mat = weight / d * acc
    return linalg.opnorm(mat - np.eye(d))


def build_resolution(clock: ClockModel, kind: str, n_nodes: int | None = None,
                     spectrum: SpectrumClass | None = None,
                     tolerance: float | None = None) -> ResolutionOfIdentity:
    """Construct a resolution of the identity from time states.

    ``discrete-orthonormal`` needs an evenly spaced spectrum and uses the
    ``d`` nodes ``n T / d``.  ``overcomplete-discrete`` uses ``N > max r_k``
    nodes ``n T / N`` (default ``max r_k + 1``) with weight ``d / N``.
    ``quadrature`` doubles a uniform grid on ``[0, T)`` until the defect
    drops below ``tolerance``.

    Raises
    ------
    InfeasibleResolution
        If the kind does not exist for this spectrum or the tolerance cannot
        be met.
    """
    if kind not in RESOLUTION_KINDS:
        raise ValueError(f"unknown resolution kind {kind!r}; choose from {RESOLUTION_KINDS}")
    d = clock.dim
    if d == 1:
        return ResolutionOfIdentity(kind, np.zeros(1), 1.0, 0.0, ORTHONORMAL_TOL, 0.0)
    spec = spectrum or classify_spectrum(clock)
    T = spec.period

    if kind == "discrete-orthonormal":
        if spec.kind != "evenly-spaced":
            raise InfeasibleResolution(
                f"an orthonormal set of time states needs evenly spaced levels, spectrum is {spec.kind}")
        tol = ORTHONORMAL_TOL if tolerance is None else tolerance
        nodes = np.arange(d) * T / d
        defect = identity_defect(clock, nodes, 1.0)
        if defect > tol:
            raise InfeasibleResolution(f"orthonormal defect {defect:.3e} exceeds {tol:.1e}")
        return ResolutionOfIdentity(kind, nodes, 1.0, defect, tol, T)

    tol = RESOLUTION_TOL if tolerance is None else tolerance
    if kind == "overcomplete-discrete":
        n = spec.r_max + 1 if n_nodes is None else int(n_nodes)
        if n <= spec.r_max:
            raise InfeasibleResolution(f"need N > max r_k = {spec.r_max}, got {n}")
        nodes = np.arange(n) * T / n
        defect = identity_defect(clock, nodes, d / n)
        if defect > tol:
            raise InfeasibleResolution(
                f"overcomplete defect {defect:.3e} exceeds {tol:.1e} (spectrum is {spec.kind})")
        return ResolutionOfIdentity(kind, nodes, d / n, defect, tol, T)

    n = d if n_nodes is None else int(n_nodes)
    trend = []
    while True:
        nodes = np.arange(n) * T / n
        defect = identity_defect(clock, nodes, d / n)
        trend.append((n, defect))
        if defect <= tol:
            return ResolutionOfIdentity(kind, nodes, d / n, defect, tol, T, tuple(trend))
        if n >= MAX_QUADRATURE_NODES:
            raise InfeasibleResolution(
                f"quadrature defect {defect:.3e} still above {tol:.1e} at N={n}")
        n *= 2
