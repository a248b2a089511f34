"""Sharp bounds, sensitivity analysis and bootstrap inference for average
effects of access in randomized experiments with latent choice sets."""

from .bounds_solver import (
    IdentificationProblem,
    Interval,
    build_problem,
    check_denominator,
    check_feasibility,
    solve_bounds,
)
from .empirical import (
    ClusteredSample,
    DiscretizationMap,
    EmpiricalDistribution,
    Observation,
    apply_discretizer,
    cluster_resample,
    estimate,
    fit_discretizer,
    itt_iv,
    load_csv,
    write_csv,
)
from .inference import (
    TestConfig,
    TestResult,
    bootstrap_test,
    confidence_interval,
    specification_test,
    test_statistic,
)
from .latent_space import (
    AlternativeSet,
    ChoiceSet,
    LatentIndex,
    LatentPoint,
    OutcomeGrid,
    PreferenceType,
    choice,
)
from .oracle import (
    SyntheticModel,
    bisect_bounds,
    generate,
    implied_cells,
    plant_violation,
    random_model,
)
from .parameters import (
    ParameterSpec,
    average_access_effect,
    average_effect_on_participants,
    custom_linear,
    participation_proportion,
)
from .restrictions import (
    PrunedSupport,
    RestrictionSet,
    ZeroSetRestriction,
    hsis_access,
    mfe_access,
    mtr,
    ohie_access,
    parse_restriction,
    prune,
    roy,
    unaltered_alternative,
)
from .sensitivity import (
    MixtureProblem,
    build_mixture_problem,
    solve_lambda_grid,
    solve_sensitivity,
)
from .solvers import (
    CvxoptQP,
    DenominatorNotPositive,
    HighsLP,
    InfeasibleModel,
    UnboundedModel,
)

__version__ = "0.1.0"
