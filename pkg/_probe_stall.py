import sys
import time

import numpy as np

from malab.convexity import Domain
from malab.dirichlet import DirichletProblem, lebesgue_target, solve_dirichlet
from malab.gallery.cantor import build_cantor

g = 13
t = 10.0
cc = build_cantor(0.1, 6)
dom = Domain.box_grid([-1.0] * 3, [1.0] * 3, (g,) * 3)
X = dom.nodes
target = lebesgue_target(dom)
bidx = dom.boundary_indices
gb = cc.v(X[bidx, 0]) + t * np.abs(X[bidx, 1])
prob = DirichletProblem(dom, target, gb)

for tol in (1e-4, 1e-5, 1e-6):
    t0 = time.time()
    u, rep = solve_dirichlet(prob, tol=tol, max_iter=120)
    r = rep.final_residual
    worst = np.argsort(r)[::-1][:5]
    print(f"tol={tol:.0e}: conv={rep.converged} sweeps={rep.iterations} "
          f"maxres={rep.max_residual:.2e} {time.time()-t0:.0f}s")
    for i in worst:
        print(f"   node {i} at {X[i]} res={r[i]:.2e} target={target.masses[i]:.2e}")
