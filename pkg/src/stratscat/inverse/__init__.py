"""Inverse problems: geodesic ray transforms, layer stripping and 1D Marchenko inversion."""

from .marchenko import (
    Potential1D,
    ProfileEstimate,
    bound_states_from_modes,
    certify_roundtrip,
    kernel_data,
    marchenko_invert_1d,
    potential_from_profile,
    recover_c0_from_coefficients,
    reflectionless_potential,
)
from .rays import (
    AngularLayer,
    RayIntegralData,
    funk_invert_even,
    funk_multipliers,
    funk_transform,
    pole_grid,
    ray_family,
    recover_odd_part,
    reduce_order,
    reduce_to_base,
    weighted_ray_integral,
)
from .strip import (
    REFLECTED_MODE,
    TRANSMITTED_MODE,
    PrefactorTable,
    ScatteringSymbolData,
    StripResult,
    calibrate,
    extract_leading_symbol,
    fill_masked,
    layer_strip,
    leading_symbol_from_transport,
    recoverable_slots,
    recovered_gamma,
    symbol_grid,
    synthesize_symbols,
)

__all__ = [
    "AngularLayer",
    "Potential1D",
    "PrefactorTable",
    "ProfileEstimate",
    "REFLECTED_MODE",
    "RayIntegralData",
    "ScatteringSymbolData",
    "StripResult",
    "TRANSMITTED_MODE",
    "bound_states_from_modes",
    "calibrate",
    "certify_roundtrip",
    "extract_leading_symbol",
    "fill_masked",
    "funk_invert_even",
    "funk_multipliers",
    "funk_transform",
    "kernel_data",
    "layer_strip",
    "leading_symbol_from_transport",
    "marchenko_invert_1d",
    "pole_grid",
    "potential_from_profile",
    "ray_family",
    "recover_c0_from_coefficients",
    "recover_odd_part",
    "recoverable_slots",
    "recovered_gamma",
    "reduce_order",
    "reduce_to_base",
    "reflectionless_potential",
    "symbol_grid",
    "synthesize_symbols",
    "weighted_ray_integral",
]
