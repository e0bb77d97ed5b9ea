"""Numerical laboratory for gapped adiabatic dynamics on finite spin
lattices: spectral filters, flow generators, counter-diabatic dressing,
driven propagators, and Kubo linear response."""

from .counterdiabatic import (
    DressingBuilder,
    DressingSequence,
    build_dressing,
    dressed_projector,
    dressing_defect,
)
from .dynamics import LRProbeResult, Trajectory, evolve_projector, evolve_state, lr_probe, parallel_transport
from .filters import FilterFunction, apply_filter_map, apply_filter_timedomain, offdiagonal_part, spectral_flow_generator
from .interactions import (
    Interaction,
    Schedule,
    assemble_hamiltonian,
    commutator_interaction,
    free_rotation_schedule,
    interaction_norm,
    model_preset,
    tfim_schedule,
)
from .lattice import DecayProfile, Lattice, decay_constants, graph_distance, lattice_preset, subadditive_envelope
from .linresp import ResponseSetup, kubo_commutator, kubo_time_integral, switched_evolution
from .operators import LocalOperator, commutator_local, conditional_expectation, delta_decomposition, embed
from .spectral import GapError, PatchData, SpectralData, diagonalize_and_patch, gap_along_path

__all__ = [
    "DecayProfile",
    "DressingBuilder",
    "DressingSequence",
    "FilterFunction",
    "GapError",
    "Interaction",
    "LRProbeResult",
    "Lattice",
    "LocalOperator",
    "PatchData",
    "ResponseSetup",
    "Schedule",
    "SpectralData",
    "Trajectory",
    "apply_filter_map",
    "apply_filter_timedomain",
    "assemble_hamiltonian",
    "build_dressing",
    "commutator_interaction",
    "commutator_local",
    "conditional_expectation",
    "decay_constants",
    "delta_decomposition",
    "diagonalize_and_patch",
    "dressed_projector",
    "dressing_defect",
    "embed",
    "evolve_projector",
    "evolve_state",
    "free_rotation_schedule",
    "gap_along_path",
    "graph_distance",
    "interaction_norm",
    "kubo_commutator",
    "kubo_time_integral",
    "lattice_preset",
    "lr_probe",
    "model_preset",
    "offdiagonal_part",
    "parallel_transport",
    "spectral_flow_generator",
    "subadditive_envelope",
    "switched_evolution",
    "tfim_schedule",
]

__version__ = "0.1.0"
