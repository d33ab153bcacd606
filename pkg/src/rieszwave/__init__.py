"""rieszwave: a numerical laboratory for the 3D stochastic wave equation
driven by spatially correlated (Riesz-kernel) noise.

Modules
-------
lattice     periodic grid, spectral weights, the correlation inner product
wavekernel  exact wave propagator, spherical means, Green-Riesz integrals
noise       Brownian mode families, dyadic smoothing, localization events
solver      coupled time stepping of the equation and its approximations
norms       Hölder / fractional-Sobolev estimators, geometric sets, moments
experiments study drivers, configuration, persistence
"""
__version__ = "0.1.0"

from ._kernels import BACKEND
from .lattice import (
    Box,
    Field,
    ModeIndexMap,
    SpectralWeights,
    TorusGrid,
    h_inner_spectral,
    h_norm_kernel,
    make_weights,
    riesz_spectral_constant,
)
from .noise import (
    BrownianFamily,
    ControlPath,
    SmoothedNoise,
    dyadic_floor,
    localization_indicator,
    sample_family,
)
from .norms import (
    MomentEstimate,
    SpaceTimeWindow,
    enlarge_set,
    frac_sobolev,
    holder_modulus,
    holder_norm,
    lp_moment,
    shrinking_set,
)
from .solver import (
    CoefficientSet,
    DivergenceError,
    PathSolution,
    ScalarFn,
    SimConfig,
    picard_iterate,
    solve_regularized,
    solve_skeleton,
    solve_spde,
    solve_truncated,
)
from .wavekernel import (
    InitialData,
    WaveState,
    check_exponents,
    initial_field,
    mu_integral,
    mu_integral_with_error,
    propagate,
    spherical_mean,
)

__all__ = [
    "BACKEND",
    "__version__",
    "Box",
    "Field",
    "ModeIndexMap",
    "SpectralWeights",
    "TorusGrid",
    "h_inner_spectral",
    "h_norm_kernel",
    "make_weights",
    "riesz_spectral_constant",
    "BrownianFamily",
    "ControlPath",
    "SmoothedNoise",
    "dyadic_floor",
    "localization_indicator",
    "sample_family",
    "MomentEstimate",
    "SpaceTimeWindow",
    "enlarge_set",
    "frac_sobolev",
    "holder_modulus",
    "holder_norm",
    "lp_moment",
    "shrinking_set",
    "CoefficientSet",
    "DivergenceError",
    "PathSolution",
    "ScalarFn",
    "SimConfig",
    "picard_iterate",
    "solve_regularized",
    "solve_skeleton",
    "solve_spde",
    "solve_truncated",
    "InitialData",
    "WaveState",
    "check_exponents",
    "initial_field",
    "mu_integral",
    "mu_integral_with_error",
    "propagate",
    "spherical_mean",
]
