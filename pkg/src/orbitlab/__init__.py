"""orbitlab: multiplier spectra of hyperbolic polynomial maps at desk scale.

Enumerates repelling periodic orbits, estimates the Julia set dimension from
pressure roots, and runs counting, window, variance, and zeta-function
experiments over the resulting multiplier catalog.
"""

from .maps import (
    EscapeError,
    HyperbolicityReport,
    LogPolar,
    RationalMap,
    classify_hyperbolicity,
    iterate_with_derivative,
    parse_map_spec,
    wrap_angle,
)
from .catalog import (
    IncompleteEnumerationError,
    OrbitCatalog,
    PeriodicPoint,
    PrimitiveOrbit,
    Tolerances,
    ToleranceCollisionError,
    build_catalog,
    enumerate_fixed_points,
    mobius_check,
    partition_identity_ok,
    synthetic_catalog,
)
from .dimension import (
    DimensionEstimate,
    estimate_dimension,
    li,
    orbit_counting_report,
    pressure,
    reliable_t_range,
)
from .windows import TestFunction, WindowFunction, bump_f, bump_g
from .stats import (
    ThetaGrid,
    count_in_window,
    count_orbits,
    exact_window_variance,
    expectation_variance,
    interval_ratio_report,
    lambda_sum,
    miss_fraction,
    scaling_report,
    smooth_count_direct,
    smooth_count_fourier,
    variance_ratio_report,
)
from .lfunctions import log_derivative, pole_scan, zeta_euler, zeta_expsum

__version__ = "0.1.0"
