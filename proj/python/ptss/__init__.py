"""Truncated single-sample Krylov estimators for Gaussian-process training."""

from ._ptss import (
    PtssError,
    cg_iterate,
    default_config,
    dense_oracle,
    franke,
    gamma_factor,
    gram_derivative,
    gram_matrix,
    nlml_estimate,
    nlml_exact,
    run_experiment,
    slq_logdet,
    truncation_pmf,
    tss_solve,
)

__all__ = [
    "PtssError",
    "cg_iterate",
    "default_config",
    "dense_oracle",
    "franke",
    "gamma_factor",
    "gram_derivative",
    "gram_matrix",
    "nlml_estimate",
    "nlml_exact",
    "run_experiment",
    "slq_logdet",
    "truncation_pmf",
    "tss_solve",
]
