"""flowlab: a desk-scale numerical laboratory for flows of non-smooth
vector fields under the standard Gaussian measure.

Capabilities: Gaussian expectations (tensor Gauss-Hermite / seeded Monte
Carlo), Orlicz modulars and Luxembourg norms, velocity-field diagnostics
(Gaussian divergence, growth and divergence norms, Ornstein-Uhlenbeck
smoothing), particle flows with divergence accumulators, exact and
empirical pushforward densities with integrability checks, transport
solutions by characteristics with quantitative stability checks, and a
reproducible experiment harness.
"""

from .gaussian import (
    ExpectationScheme,
    GaussianMeasure,
    NormEstimate,
    derive_seed,
    expect,
    expect_log,
    gaussian_pdf,
    sample,
)
from .orlicz import (
    DualityReport,
    ExpLog,
    PhiAlpha,
    Zygmund,
    duality_bound_check,
    log_plus,
    luxembourg_norm,
    modular,
)
from .fields import (
    FIELD_LIBRARY,
    FieldLibraryEntry,
    VectorField,
    beta_norm,
    beta_time_integral,
    div_mu,
    growth_norm,
    library_entry,
    make_field,
    ou_divergence_identity_check,
    ou_smooth,
    ou_smooth_scalar,
)
from .flow import (
    TimeInterval,
    TrajectoryBundle,
    check_inverse_identity,
    check_ode_residual,
    check_semigroup,
    distance_in_measure,
    integrate_backward,
    integrate_forward,
    load_bundle,
    save_bundle,
)
from .density import (
    ALPHA_CONSTANTS,
    DensityEstimate,
    alpha_threshold,
    density_empirical,
    density_exact,
    level_set_decay_check,
    lp_bound_check,
    mass_check,
    phi_alpha_modular,
)
from .transport import (
    IntervalSet,
    SpaceTimeTestFunction,
    TransportSolution,
    gaussian_bump_test,
    solve_characteristics,
    stability_double_log_check,
    stability_triple_log_check,
    weak_residual,
    weak_residual_lebesgue,
)
from .studies import (
    run_lebesgue_quasi_invariance,
    run_mollification_study,
    run_stability_study,
)
from .config import ExperimentConfig

__version__ = "0.1.0"
