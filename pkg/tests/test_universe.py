import numpy as np
import pytest
from hypothesis import given, strategies as st

from pawclock import invariants, linalg
from pawclock.clocks import ClockNetwork, build_resolution, spin_clock, time_state
from pawclock.errors import EmptyKernel, ZeroAmplitude
from pawclock.universe import (GLOBAL, HistoryState, TimeGrid, UniverseSpec, amplitude_profile,
                               amplitudes, assemble_hamiltonian, condition_global, condition_local,
                               conditional_density, conditional_states, expectation, paired_history,
                               reconstruct, select_history, solve_constraint,
                               unnormalized_conditionals)

from conftest import paired_two_spin, two_spin_network

seeds = st.integers(0, 2**32 - 1)


def qubit_universe(omega=1.0):
    net = ClockNetwork((spin_clock(omega),))
    return UniverseSpec(net, -omega * linalg.SIGMA_X)


def raw_history(u, psi):
    psi = np.asarray(psi, dtype=complex) / np.linalg.norm(psi)
    return HistoryState(u, psi, float(np.linalg.norm(u.hamiltonian @ psi)))


def test_assemble_qubit_spectrum():
    assert np.allclose(np.linalg.eigvalsh(assemble_hamiltonian(qubit_universe())), [-2, 0, 0, 2])


def test_assemble_two_spin_interaction_term():
    g = 0.3
    u0 = UniverseSpec(two_spin_network(0.0), np.zeros((1, 1)))
    ug = UniverseSpec(two_spin_network(g), np.zeros((1, 1)))
    sx = linalg.SIGMA_X
    assert np.allclose(ug.hamiltonian - u0.hamiltonian, -g * np.kron(sx, sx))
    free = np.kron(sx, np.eye(2)) + 0.5 * np.kron(np.eye(2), sx)
    assert np.allclose(u0.hamiltonian, free)


def test_solve_constraint_qubit_two_vectors():
    u = qubit_universe(1.3)
    basis = solve_constraint(u)
    assert len(basis) == 2
    assert all(h.residual <= 1e-12 for h in basis)


def test_empty_kernel():
    u = UniverseSpec(ClockNetwork((spin_clock(1.0),)), np.diag([5.0, 7.0]))
    with pytest.raises(EmptyKernel):
        solve_constraint(u)
    with pytest.raises(EmptyKernel):
        paired_history(u)


def test_system_must_be_hermitian():
    with pytest.raises(ValueError):
        UniverseSpec(ClockNetwork((spin_clock(1.0),)), np.array([[0, 1], [0, 0]]))


def test_select_history_cases():
    basis = solve_constraint(qubit_universe())
    same = select_history(basis[:1], [1.0])
    assert np.allclose(same.psi, basis[0].psi)
    mixed = select_history(basis, [1.0, 1.0])
    assert np.linalg.norm(mixed.psi) == pytest.approx(1.0)
    assert mixed.residual <= 1e-12
    with pytest.raises(ValueError):
        select_history(basis, [1.0])


def test_energy_basis_schmidt_gives_flat_profile():
    u = qubit_universe()
    h = select_history(solve_constraint(u), [1.0, 0.4j])
    times = np.linspace(0, 2 * np.pi, 97)
    assert np.max(np.abs(amplitudes(h, GLOBAL, times) ** 2 - 0.5)) <= 1e-12
    assert np.max(np.abs([h.amplitude_squared(t) - 0.5 for t in times])) <= 1e-12


def test_two_frame_amplitude_formula():
    omega = 1.0
    u = qubit_universe(omega)
    clock = u.clock.locals[0]
    a0, a1 = 0.6, 0.8
    psi0, psi1 = np.array([1, 0]), np.array([0, 1])
    psi = a0 * np.kron(time_state(clock, 0.0), psi0) + a1 * np.kron(time_state(clock, np.pi / 2), psi1)
    h = raw_history(u, psi)
    times = np.linspace(0, 2 * np.pi, 33)
    expected = np.sqrt(a0**2 * np.cos(omega * times) ** 2 + a1**2 * np.sin(omega * times) ** 2)
    assert np.allclose(amplitudes(h, GLOBAL, times), expected, atol=1e-14)


def test_constraint_history_has_flat_half_amplitude():
    u = qubit_universe()
    h = paired_history(u)
    times = np.linspace(0, 2 * np.pi, 64)
    assert np.allclose(amplitudes(h, GLOBAL, times), 1 / np.sqrt(2), atol=1e-14)


def test_zero_amplitude_raises():
    u = qubit_universe()
    clock = u.clock.locals[0]
    h = raw_history(u, np.kron(time_state(clock, 0.0), [1, 0]))
    with pytest.raises(ZeroAmplitude) as info:
        condition_global(h, np.pi / 2)
    assert info.value.label == pytest.approx(np.pi / 2)


def test_condition_at_zero_uses_reference(rng):
    u, h = paired_two_spin(0.3)
    ref = u.clock.reference_state()
    chi = ref.conj() @ h.psi.reshape(u.clock.dim, u.d_system)
    state = condition_global(h, 0.0)
    assert state.amplitude == pytest.approx(np.linalg.norm(chi))
    assert np.allclose(state.psi, chi / np.linalg.norm(chi))


@given(seeds, st.integers(2, 4), st.integers(2, 3))
def test_evolution_without_evolution(seed, d_c, d_s):
    u, h = invariants.random_universe(np.random.default_rng(seed), d_c, d_s)
    times = np.linspace(0, 7.0, 40)
    assert invariants.schrodinger_infidelity(h, times) <= 1e-10
    assert invariants.amplitude_drift(h, GLOBAL, times) <= 1e-12


def test_local_amplitude_constant_without_interaction():
    u, h = paired_two_spin(0.0)
    taus = np.linspace(0, 4 * np.pi, 80)
    assert np.allclose(amplitudes(h, "A", taus), 1 / np.sqrt(2), atol=1e-14)


def test_joint_local_conditioning_via_global_resolution():
    u, h = paired_two_spin(0.3)
    net = u.clock
    roi = build_resolution(net.global_clock(), "overcomplete-discrete")
    ta, tb = 0.7, -1.9
    bra = np.kron(time_state(net.locals[0], ta), time_state(net.locals[1], tb))
    direct = bra.conj() @ h.psi.reshape(net.dim, u.d_system)
    kets = net.time_states(roi.nodes)
    F = kets @ bra.conj()
    chi = unnormalized_conditionals(h, GLOBAL, roi.nodes)
    via = roi.weight * F @ chi
    assert np.allclose(via, direct, atol=1e-10)


def test_single_clock_local_equals_global():
    u = qubit_universe()
    h = paired_history(u)
    for t in (0.0, 0.4, 2.2):
        g, l = condition_global(h, t), condition_local(h, "A", t)
        assert l.amplitude == pytest.approx(g.amplitude)
        assert np.allclose(l.psi, g.psi)


def test_conditional_density_properties():
    u, h = paired_two_spin(0.3)
    for scope in (GLOBAL, "A"):
        rho = conditional_density(h, scope, 0.9).rho
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
        assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-10)
        assert np.min(np.linalg.eigvalsh(rho)) >= -1e-10
    psi = condition_global(h, 0.9).psi
    assert np.allclose(conditional_density(h, GLOBAL, 0.9).rho, np.outer(psi, psi.conj()))


def test_von_neumann_equation():
    u, h = paired_two_spin(0.0)
    t, dt = 0.8, 1e-5
    drho = (conditional_density(h, GLOBAL, t + dt).rho - conditional_density(h, GLOBAL, t - dt).rho) / (2 * dt)
    rho = conditional_density(h, GLOBAL, t).rho
    assert np.max(np.abs(drho + 1j * linalg.commutator(u.h_system, rho))) <= 1e-6


def test_expectation_identity_and_heisenberg(rng):
    u, h = paired_two_spin(0.3, seed=3)
    assert expectation(h, np.eye(2), GLOBAL, 1.1) == pytest.approx(1.0)
    o = linalg.random_hermitian(2, rng)
    t, dt = 1.1, 1e-5
    deriv = (expectation(h, o, GLOBAL, t + dt) - expectation(h, o, GLOBAL, t - dt)) / (2 * dt)
    rho = conditional_density(h, GLOBAL, t).rho
    heis = np.real(np.trace(1j * linalg.commutator(u.h_system, o) @ rho))
    assert deriv == pytest.approx(heis, abs=1e-6)
    vals = expectation(h, o, GLOBAL, [0.1, 0.2])
    assert vals.shape == (2,)
    with pytest.raises(ValueError):
        expectation(h, np.eye(3), GLOBAL, 0.0)


def test_global_and_local_clock_agree_without_interaction(rng):
    # clock B sits in one energy level, so the system state does not depend on it
    net = two_spin_network(0.0)
    w = net.global_frequencies
    levels = [1, 3]  # (-,+) and (+,+)
    v = linalg.random_unitary(2, rng)
    u = UniverseSpec(net, (v * -w[levels]) @ v.conj().T)
    h = paired_history(u, [1.0, 0.5 - 0.3j])
    o = linalg.random_hermitian(2, rng)
    o_local = np.kron(np.eye(2), o)
    times = np.linspace(0, 6, 25)
    glob = expectation(h, o, GLOBAL, times)
    loc = expectation(h, o_local, "A", times)
    assert np.max(np.abs(glob - loc)) <= 1e-10


@pytest.mark.parametrize("g", [0.0, 0.3])
def test_amplitude_profile_constant_and_normalized(g):
    u, h = paired_two_spin(g)
    prof = amplitude_profile(h, GLOBAL, TimeGrid(256))
    assert np.max(np.abs(prof.amplitude - prof.amplitude[0])) <= 1e-12
    assert prof.total == pytest.approx(1.0, abs=1e-8)
    assert np.allclose(prof.probability, 4 / prof.period * prof.amplitude ** 2)


def test_reconstruct_history_from_time_states():
    u, h = paired_two_spin(0.3)
    roi = build_resolution(u.clock.global_clock(), "overcomplete-discrete")
    assert 1 - linalg.fidelity(reconstruct(h, roi), h.psi) <= 1e-10
    assert np.allclose(reconstruct(h, roi), h.psi, atol=1e-10)


def test_conditional_states_normalized():
    u, h = paired_two_spin(0.9)
    a, psi = conditional_states(h, "B", np.linspace(0, 3, 7))
    assert np.allclose(np.linalg.norm(psi, axis=1), 1.0)
    assert np.all(a > 0)
