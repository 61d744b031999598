import numpy as np
import pytest
from hypothesis import given, strategies as st

from pawclock import linalg
from pawclock.clocks import (ClockModel, ClockNetwork, build_resolution, classify_spectrum,
                             identity_defect, overlap, reference_state, spin_clock, time_state,
                             transition_amplitude)
from pawclock.errors import InfeasibleResolution

from conftest import two_spin_network

seeds = st.integers(0, 2**32 - 1)


def random_clock(rng, d, integer=True):
    if integer:
        w = np.sort(rng.choice(np.arange(-6, 7), d, replace=False)).astype(float)
    else:
        w = np.sort(rng.normal(size=d))
    return ClockModel(w, rng.uniform(0, 2 * np.pi, d), linalg.random_unitary(d, rng))


def test_clock_model_validation():
    with pytest.raises(ValueError):
        ClockModel([1.0, 1.0])
    with pytest.raises(ValueError):
        ClockModel([2.0, 1.0])
    with pytest.raises(ValueError):
        ClockModel([0.0, 1.0], phases=[0.0])


def test_qubit_reference_state():
    plus, minus = np.array([1, 1]) / np.sqrt(2), np.array([1, -1]) / np.sqrt(2)
    assert np.allclose(reference_state(spin_clock(1.0)), (plus + minus) / np.sqrt(2))


def test_three_level_reference_amplitudes():
    c = ClockModel([0.0, 1.0, 3.0])
    assert np.allclose(np.abs(c.basis.conj().T @ reference_state(c)), 1 / np.sqrt(3))


def test_phases_shift_reference_along_time():
    c = ClockModel([-1.0, 0.5, 2.0])
    s = 0.83
    shifted = c.with_phases(c.frequencies * s)
    assert np.allclose(reference_state(shifted), time_state(c, s), atol=1e-14)


def test_time_state_at_zero_is_reference(rng):
    c = random_clock(rng, 4)
    assert np.allclose(time_state(c, 0.0), reference_state(c))


def test_qubit_quarter_period_state():
    omega = 2.0
    c = spin_clock(omega)
    t = time_state(c, np.pi / (2 * omega))
    plus, minus = np.array([1, 1]) / np.sqrt(2), np.array([1, -1]) / np.sqrt(2)
    assert np.allclose(t, -1j / np.sqrt(2) * (plus - minus))
    assert abs(np.vdot(reference_state(c), t)) <= 1e-15


def test_qubit_antipodal_overlap():
    assert overlap(spin_clock(1.0), np.pi, 0.0) == pytest.approx(-1.0, abs=1e-15)


@given(seeds, st.floats(-10, 10), st.floats(-10, 10))
def test_overlap_matches_time_states(seed, s, t):
    c = random_clock(np.random.default_rng(seed), 3, integer=False)
    direct = np.vdot(time_state(c, s), time_state(c, t))
    assert abs(overlap(c, s, t) - direct) <= 1e-12
    assert abs(overlap(c, s, t)) <= 1 + 1e-12
    assert overlap(c, s, s) == pytest.approx(1.0)


def test_evenly_spaced_neighbouring_nodes_are_orthogonal():
    c = ClockModel([-1.0, 0.5, 2.0, 3.5])
    T = classify_spectrum(c).period
    assert abs(overlap(c, T / 4, 0.0)) <= 1e-12


def test_classify_two_levels():
    sc = classify_spectrum([-1.0, 1.0])
    assert sc.kind == "evenly-spaced"
    assert sc.period == pytest.approx(np.pi)


@pytest.mark.parametrize("p,q", [(1, 2), (1, 3), (2, 5), (3, 4)])
def test_classify_two_spin_period(p, q):
    omega = 1.3
    net = two_spin_network(0.0, omega=omega, alpha=p / q)
    assert classify_spectrum(net.global_frequencies).period == pytest.approx(np.pi * q / omega)


def test_classify_irrational():
    sc = classify_spectrum([0.0, 1.0, np.sqrt(2)], denominator_cap=1000)
    assert sc.kind == "irrational-approximated"
    # continued-fraction convergent 1393/985 of sqrt(2)
    assert sc.r == (0, 985, 1393)
    assert sc.frequency_error < 1e-6


def test_classify_rational():
    sc = classify_spectrum([0.0, 2.0, 5.0])
    assert sc.kind == "rational"
    assert sc.r == (0, 2, 5)
    assert sc.period == pytest.approx(2 * np.pi * 2 / 2.0)


@given(seeds)
def test_time_states_periodic_up_to_phase(seed):
    c = random_clock(np.random.default_rng(seed), 3)
    T = classify_spectrum(c).period
    t = 0.37
    expected = np.exp(-1j * c.frequencies[0] * T) * time_state(c, t)
    assert np.allclose(time_state(c, t + T), expected, atol=1e-10)


def test_qubit_orthonormal_resolution():
    omega = 1.5
    roi = build_resolution(spin_clock(omega), "discrete-orthonormal")
    assert np.allclose(roi.nodes, [0, np.pi / (2 * omega)])
    assert np.allclose(roi.operator(spin_clock(omega)), np.eye(2), atol=1e-15)


def test_two_spin_half_alpha_orthonormal_resolution():
    clock = two_spin_network(0.0, alpha=0.5).global_clock()
    roi = build_resolution(clock, "discrete-orthonormal")
    assert roi.n_nodes == 4 and roi.defect <= 1e-12


def test_orthonormal_infeasible_for_uneven():
    with pytest.raises(InfeasibleResolution):
        build_resolution(ClockModel([0.0, 1.0, 3.0]), "discrete-orthonormal")
    with pytest.raises(InfeasibleResolution):
        build_resolution(ClockModel([0.0, 1.0, np.sqrt(2)]), "overcomplete-discrete", n_nodes=5)


@given(seeds)
def test_overcomplete_rational_defect(seed):
    rng = np.random.default_rng(seed)
    c = random_clock(rng, 3)
    roi = build_resolution(c, "overcomplete-discrete")
    assert roi.n_nodes == classify_spectrum(c).r_max + 1
    assert roi.defect <= 1e-10
    assert linalg.opnorm(roi.operator(c) - np.eye(3)) <= 1e-10
    psi = linalg.random_state(3, rng)
    amps = c.time_states(roi.nodes).conj() @ psi
    assert abs(roi.weight * np.sum(np.abs(amps) ** 2) - 1) <= 1e-10


def test_quadrature_trend_halves():
    c = ClockModel([0.0, 1.0, 2.5, 7.0])
    roi = build_resolution(c, "quadrature")
    assert roi.defect <= 1e-10
    defects = [d for _, d in roi.trend]
    assert all(b <= 1.1 * a for a, b in zip(defects, defects[1:]))
    assert identity_defect(c, roi.nodes, roi.weight) == pytest.approx(roi.defect)


def test_network_validation():
    with pytest.raises(ValueError):
        ClockNetwork((spin_clock(1.0), spin_clock(1.0)), [[0.1, 0], [0, 0]])
    with pytest.raises(ValueError):
        ClockNetwork((spin_clock(1.0), spin_clock(1.0)), [[0, 0.1], [0.2, 0]])


def test_dimensionless_coupling_sign_convention():
    g, omega, alpha = 0.3, 1.0, 0.5
    net = two_spin_network(g, omega, alpha)
    sx = linalg.SIGMA_X
    expected = omega * (np.kron(sx, np.eye(2)) + alpha * np.kron(np.eye(2), sx) - g * np.kron(sx, sx))
    assert np.allclose(net.hamiltonian, expected)
    assert np.allclose(net.dimensionless_couplings(), [[0, g], [g, 0]])


def test_global_time_state_without_interaction_is_product():
    net = two_spin_network(0.0)
    t = 0.91
    assert np.allclose(net.time_states(t)[0],
                       np.kron(time_state(net.locals[0], t), time_state(net.locals[1], t)))


def test_global_time_state_with_interaction():
    net = two_spin_network(0.3)
    assert np.allclose(net.time_states(0.0)[0], net.reference_state())
    direct = linalg.evolve(net.hamiltonian, 1.0) @ net.reference_state()
    assert np.allclose(net.time_states(1.0)[0], direct, atol=1e-13)


def test_transition_amplitude_closed_form():
    net = two_spin_network(0.0, omega=1.0, alpha=0.5)
    for ta, tb, t in [(0.1, 0.7, 0.3), (2.0, -1.0, 4.0)]:
        expected = np.cos(1.0 * (ta - t)) * np.cos(0.5 * (tb - t))
        assert transition_amplitude(net, [ta, tb], t) == pytest.approx(expected, abs=1e-12)
    assert transition_amplitude(net, [1.2, 1.2], 1.2) == pytest.approx(1.0)


def test_transition_amplitude_interacting_matches_matrix_element():
    net = two_spin_network(0.3)
    ta, tb, t = 0.4, 1.1, 2.3
    bra = np.kron(time_state(net.locals[0], ta), time_state(net.locals[1], tb))
    ket = linalg.evolve(net.hamiltonian, t) @ net.reference_state()
    assert abs(transition_amplitude(net, [ta, tb], t) - np.vdot(bra, ket)) <= 1e-12
