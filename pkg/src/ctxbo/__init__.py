"""Contextual Bayesian optimization from binary and preferential feedback.

Black-box systems observed only through context-dependent success/failure
(or pairwise-preference) outcomes: a probit Gaussian-process surrogate is
fitted by the Laplace approximation, query rules pick the parameters to try
and the test context to evaluate them in, and a benchmark harness plus a
visual-acuity application reproduce the experiment protocol end to end.
"""

from .acquisition import (
    AcquisitionConfig,
    Decision,
    bald_mi,
    bald_mi_from_moments,
    kg_binary,
    kg_gradient,
    maximize_ckg,
    select_duel_kss,
    select_duel_muc,
    select_s_bald,
    select_x_ts,
    select_x_ucb,
)
from .benchmarks import (
    BenchmarkSpec,
    ContextualOracle,
    benchmark_names,
    binary_query,
    duel_query,
    eval_benchmark,
    get_benchmark,
    standardize,
)
from .domain import Box, Domain, InputPoint
from .features import FeatureMap, build_feature_map, preference_features
from .harness import (
    RunConfig,
    Trace,
    TrialRecord,
    load_trace,
    run_experiment,
    save_trace,
)
from .hyperfit import fit_hyperparameters
from .kernels import (
    LinearContextSum,
    Matern32,
    Matern52,
    PreferenceKernel,
    ProductContext,
    SquaredExponential,
    gram,
    kernel_eval,
    kernel_grad_x,
    make_stationary,
)
from .laplace import (
    LaplaceError,
    LaplaceState,
    fit_laplace,
    log_marginal_likelihood,
    posterior_mean_argmax,
    predict_class_prob,
    predict_latent,
)
from .probit import moments_of_probit, probit_loglik_derivs
from .psychophysics import (
    PatientModel,
    VaConfig,
    VaSession,
    blur,
    response_prob,
    run_va_experiment,
    simulate_response,
    surrogate_kernel,
    visual_acuity,
)
from .rules import compose_sequential, make_rule, rules_for_mode
from .sampling import (
    FunctionSample,
    sample_argmax,
    sample_decoupled,
    sample_weight_space,
)
from .stats import StatsReport, auc, mann_whitney_u, stratified_ranking

__version__ = "0.1.0"
