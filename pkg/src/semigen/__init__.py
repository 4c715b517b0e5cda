"""Wild-bootstrap Cramer-von Mises specification test for semiparametric
models with nonparametrically generated regressors."""

from .bootstrap import (
    BootstrapDraw,
    TestResult,
    draw_bootstrap,
    run_test,
    warp_speed_pvalues,
)
from .cvm import (
    NuValues,
    ThirdStepFit,
    build_nu,
    fit_third_step,
    gram_matrix,
    select_bandwidth,
    statistic,
)
from .errors import (
    BandwidthNonPositive,
    DegenerateColumn,
    DegenerateIndex,
    DimensionMismatch,
    LengthMismatch,
    NonFiniteValue,
    OptimizerDidNotMove,
    SemigenError,
    TooFewObservations,
)
from .first_step import (
    FirstStepFit,
    compute_trimming,
    fit_first_step,
    silverman_bandwidth,
)
from .kernels import SmoothEval, boost_correct, kernel_value, nw_fit, nw_fit_loo
from .simulation import (
    DgpSpec,
    DgpVariant,
    McReport,
    bandwidth_rule_c,
    erp_experiment,
    generate_dgp,
    run_mc_experiment,
    simulation_model,
)
from .sls import IndexValues, SlsFit, build_index, fit_sls, sls_criterion
from .types import (
    AUTO,
    BandwidthSpec,
    GeneratedCovariate,
    IndexForm,
    KernelFamily,
    KernelSpec,
    ModelSpec,
    Sample,
    TestConfig,
    TrimmingMode,
    TrimmingSpec,
    validate_sample,
)

__version__ = "0.1.0"
