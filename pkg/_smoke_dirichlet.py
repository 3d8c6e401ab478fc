import time
import numpy as np
from malab.convexity import Domain, DiscreteMeasure, ma_measure
from malab.dirichlet import DirichletProblem, solve_dirichlet, compare

# --- 1D Dirac: mass 2 at 0, g=0 at +-1 => u = |x| - 1, u(0) = -1
dom = Domain.box_grid([-1.0], [1.0], (3,))
masses = np.zeros(3)
inner = dom.interior_indices[0]
masses[inner] = 2.0
prob = DirichletProblem(dom, DiscreteMeasure(masses), np.zeros(2))
u, rep = solve_dirichlet(prob, tol=1e-10)
print("1D dirac u(0):", u.values[inner], "err:", abs(u.values[inner] + 1.0))
print("  converged:", rep.converged, "sweeps:", rep.iterations, "maxres:", rep.max_residual)

# 1D finer: 33 nodes, same dirac at center
n = 33
dom1 = Domain.box_grid([-1.0], [1.0], (n,))
masses = np.zeros(n)
center = n // 2
masses[center] = 2.0
bvals = np.zeros(len(dom1.boundary_indices))
prob1 = DirichletProblem(dom1, DiscreteMeasure(masses), bvals)
u1, rep1 = solve_dirichlet(prob1, tol=1e-10)
print("1D dirac 33 nodes u(0):", u1.values[center], "err:", abs(u1.values[center] + 1.0),
      "converged:", rep1.converged, "sweeps:", rep1.iterations)

# --- 2D quadratic: g = |x|^2/2 on boundary, Lebesgue targets (cell volumes)
def quad_instance(m):
    dom = Domain.box_grid([-1.0, -1.0], [1.0, 1.0], (m, m))
    h = 2.0 / (m - 1)
    masses = np.full(len(dom.nodes), h * h)
    # boundary nodes carry 0; interior cell volume h^2 for uniform density 1
    masses[dom.boundary_indices] = 0.0
    g = 0.5 * np.einsum("ij,ij->i", dom.nodes, dom.nodes)
    bvals = g[dom.boundary_indices]
    return dom, DiscreteMeasure(masses), bvals, g

for m in (9, 17, 33):
    dom2, mu2, bv2, gfull = quad_instance(m)
    t0 = time.time()
    u2, rep2 = solve_dirichlet(DirichletProblem(dom2, mu2, bv2), tol=1e-9)
    dt = time.time() - t0
    err = np.max(np.abs(u2.values - 0.5 * np.einsum("ij,ij->i", dom2.nodes, dom2.nodes)))
    print(f"2D quad {m}x{m}: {dt:.2f}s sweeps={rep2.iterations} conv={rep2.converged} "
          f"maxres={rep2.max_residual:.2e} sup|u-g|={err:.3e}")

# quick compare sanity: u vs itself must not falsify
repc = compare(u2, u2)
print("compare self:", repc.passed, [c.check_id for c in repc.failures])
