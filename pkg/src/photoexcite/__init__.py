"""Single-photon excitation of a two-level atom by shaped wavepackets.

The atom couples to a discretized flat continuum of modes; the package
propagates the one-excitation amplitudes, compares them with closed-form
continuum results and optimizes pulse shapes for peak excitation.
"""
__version__ = "0.1.0"

from .core import (  # noqa: E402
    AtomParams,
    InvariantError,
    ModeGrid,
    PhotonState,
    TemporalEnvelope,
    build_mode_grid,
    default_grid,
    envelope_state,
    excited_atom_state,
    gaussian_state,
    ideal_state,
    reflected_state,
    temporal_profile,
    vacuum_state,
)
from .propagator import PropagatorConfig, Trajectory, max_excitation, propagate  # noqa: E402

__all__ = [
    "__version__",
    "AtomParams",
    "InvariantError",
    "ModeGrid",
    "PhotonState",
    "TemporalEnvelope",
    "build_mode_grid",
    "default_grid",
    "envelope_state",
    "excited_atom_state",
    "gaussian_state",
    "ideal_state",
    "reflected_state",
    "temporal_profile",
    "vacuum_state",
    "PropagatorConfig",
    "Trajectory",
    "max_excitation",
    "propagate",
]
