"""Profile matching, weighting estimators and paired sensitivity analysis."""

from ._core import (
    Error,
    brute_force_reference,
    cli,
    fit_binary_glm,
    generate_cohort,
    mcnemar_exact,
    profile_match,
    rosenbaum_gamma_binary,
    rosenbaum_gamma_rank,
    run_scenario,
    solve_assignment,
    solve_max_balanced_subset,
    wilcoxon_signed_rank,
)

__all__ = [
    "Error",
    "brute_force_reference",
    "cli",
    "fit_binary_glm",
    "generate_cohort",
    "mcnemar_exact",
    "profile_match",
    "rosenbaum_gamma_binary",
    "rosenbaum_gamma_rank",
    "run_scenario",
    "solve_assignment",
    "solve_max_balanced_subset",
    "wilcoxon_signed_rank",
]
