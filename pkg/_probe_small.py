import sys
import time

import numpy as np

from malab.convexity import Domain
from malab.dirichlet import DirichletProblem, lebesgue_target, solve_dirichlet
from malab.gallery.cantor import build_cantor

g = int(sys.argv[1]) if len(sys.argv) > 1 else 9
t = float(sys.argv[2]) if len(sys.argv) > 2 else 10.0
cc = build_cantor(0.1, 6)
dom = Domain.box_grid([-1.0] * 3, [1.0] * 3, (g,) * 3)
X = dom.nodes
target = lebesgue_target(dom)
bidx = dom.boundary_indices
gb = cc.v(X[bidx, 0]) + t * np.abs(X[bidx, 1])
t0 = time.time()
u, rep = solve_dirichlet(DirichletProblem(dom, target, gb), tol=1e-8, max_iter=200)
print(f"g={g} t={t}: converged={rep.converged} sweeps={rep.iterations} "
      f"outer={rep.outer_iterations} maxres={rep.max_residual:.2e} "
      f"in {time.time()-t0:.1f}s msg={rep.message!r}")
