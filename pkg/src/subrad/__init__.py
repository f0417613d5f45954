"""Subradiance-protected excitation transport in dense atomic rings and chains."""

from ._accel import backend
from .couplings import OperatorKind, OperatorSet, ZeemanField, assemble, noninteracting
from .dynamics import (
    ExcitationState,
    EvolutionResult,
    evolve_const,
    evolve_scheduled,
    init_gaussian_packet,
    init_localized,
)
from .geometry import Geometry, Topology, build_chain, build_ring, sample_disordered
from .observables import TimeSeries, effective_decay_rate, plateau_stats
from .protocols import (
    EnsembleSpec,
    FieldSchedule,
    preset_chain_edge,
    preset_direction_switch,
    preset_freeze,
    preset_ring_packet,
    preset_ring_single_site,
    run_ensemble,
)
from .spectral import magic_angle, ring_spectrum_m0, sign_flip_angle, subradiant_fraction

__version__ = "0.1.0"

__all__ = [
    "backend",
    "OperatorKind", "OperatorSet", "ZeemanField", "assemble", "noninteracting",
    "ExcitationState", "EvolutionResult", "evolve_const", "evolve_scheduled", "init_gaussian_packet", "init_localized",
    "Geometry", "Topology", "build_chain", "build_ring", "sample_disordered",
    "TimeSeries", "effective_decay_rate", "plateau_stats",
    "EnsembleSpec", "FieldSchedule", "preset_chain_edge", "preset_direction_switch", "preset_freeze",
    "preset_ring_packet", "preset_ring_single_site", "run_ensemble",
    "magic_angle", "ring_spectrum_m0", "sign_flip_angle", "subradiant_fraction",
]
