"""Robustness of variational Bayes and the value of distributed control.

Prior swapping: the optimizer under a convenient prior gives an interval
for a Lipschitz statistic under the prior of interest, with no density
ratios. Control: the best distributed drift control has value
sup_mu int g dmu - KL(mu | N(0, T I)), a mean-field problem.
"""

import numpy as np

from lifted_mfvi.applications import (contamination_sensitivity, control_value,
                                      control_value_stability, gaussian_log_density,
                                      gaussian_mixture_alpha, linear_utility, prior_swap_interval,
                                      softmin_utility)
from lifted_mfvi.potentials import add_potentials, gaussian, logistic_regression, standard_gaussian
from lifted_mfvi.lifted_solver import solve_lifted
from lifted_mfvi.transport import MCQuadrature, map_moments, push_samples

rng = np.random.default_rng(0)
A = rng.standard_normal((30, 2))
y = np.sign(A @ [0.8, -0.5] + 0.5 * rng.standard_normal(30))
lik = logistic_regression(A, y, 1e-3)
q = MCQuadrature(0, 20_000, 2)

mu = np.array([0.3, 0.0])
nu_t = solve_lifted(add_potentials(lik, gaussian(np.eye(2), mu)), q=q)
r = prior_swap_interval(1.0, lambda X: -X, lambda X: -(X - mu), push_samples(nu_t.map, q),
                        lik.alpha, 1.0, statistic=lambda X: X[:, 0])
nu = solve_lifted(add_potentials(lik, standard_gaussian(2)), q=q)
print(f"prior swap: E[x_1] in [{r.interval[0]:.4f}, {r.interval[1]:.4f}], "
      f"actual {map_moments(nu.map)[0][0]:.4f}")

p, qq = gaussian_log_density([0.0, 0.0], 1.0), gaussian_log_density([1.0, 0.0], 1.0)
a_eps = gaussian_mixture_alpha(1.0, [1.0, 0.0])
for eps in (0.01, 0.05, 0.1):
    b = contamination_sensitivity(p, qq, eps, push_samples(nu.map, q), lik.alpha, a_eps)
    print(f"contamination eps={eps:<5} W2 bound {b:.4f}")

T = 2.0
c, ct = np.array([0.5, -1.0]), np.array([0.6, -0.8])
M, sol = control_value(linear_utility(c), T, q=q)
Mt, _ = control_value(linear_utility(ct), T, q=q)
b = control_value_stability(linear_utility(c), linear_utility(ct), 0.0, T, push_samples(sol.map, q))
print(f"\ncontrol, linear utilities: M = {M:.5f} (exact {T * c @ c / 2:.5f}), "
      f"|dM| = {abs(Mt - M):.4f} <= {b:.4f}")
M, _ = control_value(softmin_utility(2), T, q=q)
print(f"control, softmin utility: M = {M:.5f}")
