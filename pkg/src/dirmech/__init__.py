"""Dependent bipartite rounding with strong negative correlation via the
Dirichlet copula, plus its three application pipelines: offline rounding
statistics, online matching with a 0.68 competitive floor, and unrelated-
machine weighted-completion-time scheduling, together with the series
bounds and numerical certificates their analyses rest on.
"""

from .certify import Box4, CertReport, box_upper_bound, certify_region, f_point, small_g_bound
from .copula import dirichlet_copula, dirichlet_copula_batch, psi_mc_oracle
from .online import (
    MatchingStream,
    OnlineParams,
    attenuation_F,
    cumulative_Q,
    derive_Q,
    edge_params,
    ratio_profile,
    run_odrs,
    run_odrs_batch,
)
from .psi import (
    PsiQuery,
    psi_infinitesimal_limit,
    psi_partial_sum,
    psi_upper_bound,
)
from .randomness import DirichletParams, RngState, StickBreaker
from .rounding import (
    BipartiteInstance,
    RoundingOutcome,
    dep_round,
    dep_round_batch,
    estimate_stats,
    stable_set_check,
    validate_instance,
)
from .scheduling import (
    AnalysisConstants,
    SchedulingInstance,
    SchedulingParams,
    analysis_constants,
    bonus_bound,
    cluster_jobs,
    schedule,
    z_and_lb,
)

__version__ = "0.1.0"

__all__ = [
    "Box4",
    "CertReport",
    "box_upper_bound",
    "certify_region",
    "f_point",
    "small_g_bound",
    "dirichlet_copula",
    "dirichlet_copula_batch",
    "psi_mc_oracle",
    "MatchingStream",
    "OnlineParams",
    "attenuation_F",
    "cumulative_Q",
    "derive_Q",
    "edge_params",
    "ratio_profile",
    "run_odrs",
    "run_odrs_batch",
    "PsiQuery",
    "psi_infinitesimal_limit",
    "psi_partial_sum",
    "psi_upper_bound",
    "DirichletParams",
    "RngState",
    "StickBreaker",
    "BipartiteInstance",
    "RoundingOutcome",
    "dep_round",
    "dep_round_batch",
    "estimate_stats",
    "stable_set_check",
    "validate_instance",
    "AnalysisConstants",
    "SchedulingInstance",
    "SchedulingParams",
    "analysis_constants",
    "bonus_bound",
    "cluster_jobs",
    "schedule",
    "z_and_lb",
]
