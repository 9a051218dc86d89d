"""How far does the mean-field optimizer move when the potential changes?

The W2 distance between optimizers is at most |grad V~ - grad V| in
L2(nu~) divided by alpha, which needs samples from one optimizer only. For
a mean shift along the softest direction of P the bound is attained.
"""

import numpy as np

from lifted_mfvi.potentials import gaussian, logistic_regression
from lifted_mfvi.lifted_solver import solve_lifted
from lifted_mfvi.stability import density_envelope, lipschitz_w2_bound, reward_bound
from lifted_mfvi.transport import MCQuadrature, lp_distance, push_samples

P = np.array([[2.0, 0.5], [0.5, 1.0]])
w, V = np.linalg.eigh(P)
q = MCQuadrature(seed=0, n_samples=20_000, dim=2)
base = solve_lifted(gaussian(P), q=q)

print("mean shift along the softest eigenvector")
for delta in (0.1, 0.5, 1.0):
    pt = gaussian(P, delta * V[:, 0])
    s = solve_lifted(pt, q=q)
    rep = lipschitz_w2_bound(gaussian(P), pt, push_samples(s.map, q))
    print(f"  delta={delta:.1f}  bound {rep.bound_w2:.6f}  measured {lp_distance(s.map, base.map):.6f}")

rng = np.random.default_rng(3)
A = rng.standard_normal((40, 2))
y = np.sign(A @ [1.0, -0.5] + 0.3 * rng.standard_normal(40))
p, pt = logistic_regression(A, y, 1.0), logistic_regression(A, y, 1.5)
s, st = solve_lifted(p, q=q), solve_lifted(pt, q=q)
Xt = push_samples(st.map, q)
rep = lipschitz_w2_bound(p, pt, Xt, push_samples(s.map, q))
print("\nlogistic regression, ridge 1.0 -> 1.5")
print(f"  W2 bound {rep.bound_w2:.4f} (reversed {rep.bound_w2_reversed:.4f}), measured {lp_distance(s.map, st.map):.4f}")
print(f"  |max ELBO difference| {abs(st.elbo - s.elbo):.4f} <= reward bound {reward_bound(p, pt, Xt):.4f}")

env = density_envelope(p, q)
print(f"  density envelope: log C = {env.log_C:.1f}, alpha = {env.alpha:.3g}, KL upper bound {env.kl_upper:.3g}")
