import time

import numpy as np

from malab.lp_dual import (LpDualProblem, dual_jacobian_values,
                           lp_dual_residual, solve_lp_dual_planar,
                           uniqueness_experiment)

t0 = time.time()
one = lambda a: np.ones_like(a)

prob = LpDualProblem(p=3.0, q=1.0, f=one, g=one)
r = lp_dual_residual(prob, np.ones(prob.n))
print("h=1 residual (p=3,q=1):", np.max(np.abs(r)))

xi = prob.xi
inits = [
    np.ones(prob.n) * 1.7,
    1.0 + 0.3 * np.cos(xi) + 0.15 * np.sin(2 * xi),
    0.8 + 0.25 * np.sin(3 * xi) + 0.1 * np.cos(xi),
]

rep = uniqueness_experiment(prob, inits, tol=1e-7)
for c in rep.checks:
    print(f"  {c.check_id}: passed={c.passed} residual={c.residual:.3e}")
h, srep = solve_lp_dual_planar(prob, h0=inits[1])
print("sup |h - 1| from cosine init:", np.max(np.abs(h - 1.0)))
print("t after p=3,q=1:", round(time.time() - t0, 2), "s")

# p = q = 2, f = g = 1: dilation family of constants; gauge keeps the
# init's geometric mean
prob2 = LpDualProblem(p=2.0, q=2.0, f=one, g=one)
h22, rep22 = solve_lp_dual_planar(prob2, h0=2.0 * np.ones(prob2.n))
print("p=q=2 from h=2: range", h22.min(), h22.max())
rep2 = uniqueness_experiment(prob2, inits, tol=1e-7)
for c in rep2.checks:
    print(f"  {c.check_id}: passed={c.passed} residual={c.residual:.3e}"
          + (f" factor={c.details['factor']:.6f}" if "factor" in c.details else ""))
jv = dual_jacobian_values(h22, 2 * np.pi / prob2.n)
print("jacobian values range:", jv.min(), jv.max())

try:
    solve_lp_dual_planar(LpDualProblem(p=1.0, q=2.0, f=one, g=one))
except ValueError as e:
    print("p<q refusal:", e)
try:
    lp_dual_residual(prob, -np.ones(prob.n))
except ValueError as e:
    print("negative h guard:", e)

print("total:", round(time.time() - t0, 2), "s")
