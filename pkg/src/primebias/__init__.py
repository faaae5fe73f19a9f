"""Chebyshev-bias calculus for Frobenius races in Galois extensions.

The package computes the logarithmic density with which one Frobenius
class beats another in a prime race: finite-group character data feeds a
catalog of extensions with exact conductors, L-function zero data turns a
race into a limiting random variable, and three independent routes
(characteristic-function inversion, Monte Carlo, Gaussian surrogate)
evaluate the density, with bound machinery and a desk-scale sieve for
empirical cross-checks.
"""

from .biasmodel import (
    Assumptions,
    BiasModel,
    DiagnosticReport,
    GaussianDensity,
    InversionDensity,
    MonteCarloDensity,
    bessel_j0,
    bias_factor,
    build_model,
    char_function,
    density_chebyshev_bound,
    density_gaussian,
    density_inversion,
    density_monte_carlo,
    diagnostic_bounds,
    large_deviation_bounds,
    log_cf_sandwich,
    model_from_zero_data,
    moments,
    report_row,
    variance,
)
from .empirical import (
    Classification,
    EmpiricalDensity,
    RaceSeries,
    empirical_density,
    equidistribution_report,
    explicit_formula_check,
    least_prime_search,
    least_primes,
    prime_count,
    race_series,
    sieve_classify,
)
from .errors import DataMissingError, InputError, InvariantError
from .families import (
    ExtensionSpec,
    chebotarev_error_bound,
    conductor_exponent,
    cyclotomic_extension,
    global_log_conductor,
    hilbert_class_field,
    multiquadratic_extension,
    murty_least_prime_bound,
    quadratic_extension,
    radical_extension,
)
from .groups import (
    ClassFunction,
    FiniteGroup,
    build_group,
    fourier_transform,
    fs_classify,
    inner_product,
    inverse_fourier,
    littlewood_norm,
    one_minus_root_count,
    race_function,
    root_count,
)
from .zerodata import (
    ZeroSet,
    b_sums,
    load_bundled,
    load_zeros,
    save_zeros,
    synthesize_zeros,
    validate_zero_count,
)

__version__ = "1.0.0"

__all__ = [name for name in dir() if not name.startswith("_")]
