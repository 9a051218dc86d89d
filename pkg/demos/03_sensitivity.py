"""Derivative of the optimal map in a parameter, from a Galerkin solve.

For V_theta(x) = theta x^2 / 2 the optimal map is u / sqrt(theta), so its
derivative at theta = 1 is -u / 2: the He_1 coefficient is -1/2 and all
others vanish. The first-order prediction T0 + (theta - theta0) S improves
quadratically as theta approaches theta0.
"""

import numpy as np

from lifted_mfvi.potentials import builtin_family
from lifted_mfvi.sensitivity import HermiteBasis, finite_diff_check, first_order_predict, solve_derivative
from lifted_mfvi.lifted_solver import solve_lifted
from lifted_mfvi.transport import MCQuadrature, lp_distance

fam = builtin_family("gaussian_precision_scale", dim=1)
q = MCQuadrature(0, 20_000, 1)
T0 = solve_lifted(fam.at(1.0), q=q).map
S = solve_derivative(fam, 1.0, T0, HermiteBasis(6), q)
print("Hermite coefficients of dT/dtheta:", np.round(S.coeffs[0], 5))
print(f"lambda_min of the bilinear form {S.lambda_min:.6f}, condition {S.matrix_condition:.2f}")

fd = finite_diff_check(fam, 1.0, [0.2, 0.1, 0.05], q=q)
print("central differences:", ", ".join(f"h={h}: {e:.2e}" for h, e in zip(fd.h, fd.err)),
      f"(slope {fd.slope:.2f})")

for dt in (0.4, 0.2, 0.1, 0.05):
    pred = first_order_predict(T0, S, 1 + dt, 1.0)
    err = lp_distance(pred, solve_lifted(fam.at(1 + dt), q=q).map)
    print(f"theta - theta0 = {dt:<5} prediction error {err:.2e}  ratio {err / dt:.4f}")
