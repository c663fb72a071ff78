"""Geodesic-transport parametrix of the perturbed stratified Helmholtz operator."""

from .assemble import (
    PiecewiseParametrix,
    assemble_parametrix,
    default_directions,
    error_coefficients,
    incident_wave,
    residual_decay_check,
    residual_envelope,
)
from .slab import (
    C1Correction,
    MatchingConstants,
    c1_correction,
    evanescent_lower_solve,
    match_layers,
    middle_bvp_solve,
    mode_channel_decompose,
    mode_channel_solve,
)
from .sphere_grid import GeodesicGrid
from .transport import (
    ErrorCoefficient,
    SphericalAmplitude,
    transport_step_incident,
    transport_step_offset,
)

__all__ = [
    "C1Correction",
    "ErrorCoefficient",
    "GeodesicGrid",
    "MatchingConstants",
    "PiecewiseParametrix",
    "SphericalAmplitude",
    "assemble_parametrix",
    "c1_correction",
    "default_directions",
    "error_coefficients",
    "evanescent_lower_solve",
    "incident_wave",
    "match_layers",
    "middle_bvp_solve",
    "mode_channel_decompose",
    "mode_channel_solve",
    "residual_decay_check",
    "residual_envelope",
    "transport_step_incident",
    "transport_step_offset",
]
