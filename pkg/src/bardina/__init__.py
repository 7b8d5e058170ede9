"""Pseudo-spectral simulation and inequality certificates for the damped
Euler-Bardina equations on the periodic box [-pi, pi]^3."""

from .spectral import (
    PhysicalField,
    ResolutionMismatchError,
    SpectralField,
    advect,
    from_physical,
    grad_norm_sq,
    helmholtz_filter,
    helmholtz_sharpen,
    inner,
    leray_project,
    norm,
    norm_sq,
    random_divfree,
    spectral_tail_ratio,
    strain_radius,
    strain_sup,
    to_physical,
    wavenumbers,
)
from .dynamics import (
    BlowUpError,
    Simulator,
    SolverParams,
    Trajectory,
    load_checkpoint,
    rhs,
    save_checkpoint,
    semigroup_property_check,
    simulate,
    step,
)
from .certificates import (
    CertificateReport,
    GrowthRateResult,
    TestFunction,
    TimeLaw,
    check_dissipative_estimate,
    check_energy_inequality,
    check_variational_inequality,
    growth_rate_estimate,
    model_residual,
    override_tolerance,
    random_test_function,
)
from .limits import (
    SemicontinuityTable,
    SweepFamily,
    TrajMetricConfig,
    alpha_sweep,
    attractor_dimension_bound,
    check_absorbing,
    check_limit_distance_properties,
    consecutive_distances,
    envelope_entry_time,
    geometric_tail_estimate,
    limit_distance_estimate,
    semicontinuity_diagnostic,
    trajectory_distance,
    weak_strong_uniqueness_check,
)
from .scenarios import ScenarioError, build_forcing, build_initial
from .config import ConfigError, RunConfig, load_config, parse_config, serialize_config
from .selftest import run_selftest

__version__ = "0.1.0"
