import time

import numpy as np

from malab.convexity import Domain, lower_envelope
from malab.dirichlet import DirichletProblem, lebesgue_target, solve_dirichlet
from malab.gallery.cantor import build_cantor
from malab.sections import section

c = build_cantor(0.1, 6)
dom = Domain.box_grid([-1.0] * 3, [1.0] * 3, (17,) * 3)
X = dom.nodes
try:
    vals = np.load("/root/pkg/_mooney17_t10.npy")
    u = lower_envelope(dom, vals)
    print("loaded cached solve")
except FileNotFoundError:
    g = c.v(X[dom.boundary_indices, 0]) + 10.0 * np.abs(X[dom.boundary_indices, 1])
    prob = DirichletProblem(dom, lebesgue_target(dom), g)
    t0 = time.time()
    u, srep = solve_dirichlet(prob, tol=1e-4)
    print(f"solve {time.time()-t0:.1f}s conv={srep.converged} res={srep.max_residual:.2e}")
    np.save("/root/pkg/_mooney17_t10.npy", u.values)

print("n facets:", len(u.facets))
# time a section at each rung for a generic interior node
spread = float(np.ptp(u.values))
i = int(np.argmin(np.sum((X - np.array([0.25, 0.25, 0.25])) ** 2, axis=1)))
p = u.gradient_at_node(i)
for r in range(8):
    t = spread / 8.0 * 0.5 ** r
    t0 = time.time()
    try:
        sec = section(u, i, p, t)
        bb = sec.vertices.max(0) - sec.vertices.min(0) if len(sec.vertices) else 0.0
        print(f"rung {r} t={t:.3f}: clip {time.time()-t0:.2f}s "
              f"V={len(sec.vertices)} internal={sec.internal} bbox={np.round(bb,3)}")
    except ValueError as e:
        print(f"rung {r} t={t:.3f}: {e}")
