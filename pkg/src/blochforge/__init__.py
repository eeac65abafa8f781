"""Pulse-driven two-level dynamics: propagation, Floquet analysis, pulse sequences, protocols."""
__version__ = "0.1.0"

from .dyncore import (  # noqa: E402
    BlochPoint,
    DriveParams,
    Operator2,
    StateVector,
    bloch_from_state,
    hamiltonian_from_params,
    pauli_decompose,
    state_from_angles,
)
from .propagator import (  # noqa: E402
    PeriodicBlock,
    Schedule,
    Segment,
    Trajectory,
    evolve,
    rabi_population,
    reference_integrate,
    segment_propagator,
)
from .floquet import (  # noqa: E402
    FloquetParams,
    ep_threshold,
    floquet_evolve,
    monodromy,
    phase_diagram,
    quasi_energies,
)
from .fitting import FitResult, fit_damped_cosine, fit_exponential  # noqa: E402

__all__ = [
    "BlochPoint",
    "DriveParams",
    "FitResult",
    "FloquetParams",
    "Operator2",
    "PeriodicBlock",
    "Schedule",
    "Segment",
    "StateVector",
    "Trajectory",
    "bloch_from_state",
    "ep_threshold",
    "evolve",
    "fit_damped_cosine",
    "fit_exponential",
    "floquet_evolve",
    "hamiltonian_from_params",
    "monodromy",
    "pauli_decompose",
    "phase_diagram",
    "quasi_energies",
    "rabi_population",
    "reference_integrate",
    "segment_propagator",
    "state_from_angles",
]
