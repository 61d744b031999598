"""Finite-dimensional relational clocks: history states, conditioning and
time-dilated effective dynamics."""

__version__ = "0.1.0"

from .errors import (CalledOnInvertible, ConfigError, EmptyKernel, InfeasibleResolution,
                     NonInvertible, PawClockError, SeriesDivergent, ZeroAmplitude)
from .clocks import (ClockModel, ClockNetwork, ResolutionOfIdentity, SpectrumClass,
                     build_resolution, classify_spectrum, global_time_state, identity_defect,
                     overlap, reference_state, spin_clock, time_state, transition_amplitude)
from .universe import (GLOBAL, AmplitudeProfile, ConditionalDensity, ConditionalState,
                       HistoryState, TimeGrid, UniverseSpec, amplitude_profile, amplitudes,
                       condition_global, condition_local, conditional_density,
                       conditional_states, energy_pairs, expectation, paired_history,
                       reconstruct, select_history, solve_constraint)
from .tidit import (DegenerateSplit, EffectiveHamiltonian, RedshiftBundle, Trajectory,
                    check_redshift_conservation, conditional_hamiltonian, degenerate_split,
                    dilation_sign_map, effective_hamiltonian, invert_redshift,
                    propagate_time_dilated, redshift)
