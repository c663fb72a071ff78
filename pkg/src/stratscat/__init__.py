"""Fixed-energy scattering on perturbed stratified media: 1D spectral layer,
order-by-order parametrix, singularity maps and layer-stripping inversion."""

__version__ = "0.1.0"
