"""Applications: Gaussian surrogates, Bayesian robustness and distributed control."""

from .bvm import (BvMReport, bvm_bound_local, bvm_bound_smooth, bvm_linreg, bvm_report,
                  bvm_surrogate, optimal_local_radius)
from .control import (Utility, control_potential, control_value, control_value_stability,
                      linear_utility, quadratic_utility, softmin_utility, zero_utility)
from .robustness import (LogDensity, PriorSwapResult, contamination_sensitivity,
                         gaussian_log_density, gaussian_mixture_alpha, linreg_potential,
                         linreg_w2_bound, prior_swap_interval)
from ..oracle import GaussianProduct

__all__ = [
    "BvMReport", "GaussianProduct", "LogDensity", "PriorSwapResult", "Utility",
    "bvm_bound_local", "bvm_bound_smooth", "bvm_linreg", "bvm_report", "bvm_surrogate",
    "contamination_sensitivity", "control_potential", "control_value",
    "control_value_stability", "gaussian_log_density", "gaussian_mixture_alpha",
    "linear_utility", "linreg_potential", "linreg_w2_bound", "optimal_local_radius",
    "prior_swap_interval", "quadratic_utility", "softmin_utility", "zero_utility",
]
