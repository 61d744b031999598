import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pawclock import linalg
from pawclock.clocks import ClockNetwork, spin_clock
from pawclock.universe import UniverseSpec, paired_history

settings.register_profile("default", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def two_spin_network(g=0.0, omega=1.0, alpha=0.5, interaction=None):
    """Clock ``omega (sx_A + alpha sx_B - g sx_A sx_B)`` with dimensionless ``g``."""
    clocks = (spin_clock(omega), spin_clock(alpha * omega))
    net = ClockNetwork.from_dimensionless(clocks, [[0.0, g], [g, 0.0]])
    if interaction is not None:
        net = ClockNetwork(net.locals, net.couplings, net.labels, interaction)
    return net


def paired_two_spin(g, seed=7, levels=(3, 0), weights=None, **kw):
    """Two-spin universe with a random 2-level system paired to clock levels ``levels``."""
    net = two_spin_network(g, **kw)
    w = net.global_frequencies
    u_mat = linalg.random_unitary(len(levels), np.random.default_rng(seed))
    h_s = (u_mat * -w[list(levels)]) @ u_mat.conj().T
    u = UniverseSpec(net, h_s)
    return u, paired_history(u, weights)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
