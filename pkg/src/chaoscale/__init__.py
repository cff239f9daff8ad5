"""chaoscale: interacting-particle Monte Carlo for McKean-Vlasov SDEs.

Simulates N-particle approximations of mean-field SDEs, measures the
weak error E[U(mu_N)] - U(mu) against exact oracles, fits its expansion
in powers of 1/N, and builds Romberg-extrapolated ensemble estimators
with an interaction-cost model.
"""

from .errors import (
    ChaoscaleError,
    ConfigError,
    DerivativeUnavailableError,
    DimensionMismatchError,
    EnumerationTooLargeError,
    NumericalBlowupError,
    OracleUnavailableError,
    UnsupportedDimensionError,
)
from .expansion import (
    BiasGrid,
    ExpansionFit,
    StaticConstant,
    dynamic_bias_grid,
    first_order_bias_constant,
    fit_expansion,
    loglog_slope,
    static_bias_exact,
    static_bias_grid_exact,
    static_bias_mc,
    static_constant_cp,
)
from .functional import (
    CustomFunctional,
    FirstMomentLinear,
    LinearFunctional,
    MeasureFunctional,
    MomentCylinder,
    ProductOfLinear,
    cos_mean,
    mean_power,
    sin_mean,
    taylor_measure_expand,
    verify_polynomial_growth,
)
from .measure import (
    DiscreteLaw,
    EmpiricalMeasure,
    OutcomeEnumeration,
    enumerate_empirical,
    moment,
    wasserstein2_1d,
)
from .model import (
    AnalyticReference,
    CoefficientSpec,
    GaussianLaw,
    McKVModel,
    builtin_model,
    limit_functional_value,
    ou_variance,
)
from .romberg import (
    CostPlan,
    EnsembleEstimate,
    MseReport,
    RombergScheme,
    cost_plan,
    ensemble_estimate,
    mse_report,
    romberg_estimate,
    romberg_weights,
)
from .simulate import (
    ParticleSystemState,
    SimConfig,
    phi_estimate,
    phi_values,
    run_terminal_measure,
    step,
    step_exact_linear,
    stream_generator,
    terminal_positions,
)

__version__ = "0.1.0"
