import numpy as np
import time
from malab.convexity import Domain, lower_envelope
from malab.flatness import sigma_estimate, FLAT, STRICT, INCONCLUSIVE

# 1) 2D quadratic: every interior node strictly convex
dom = Domain.box_grid([-1, -1], [1, 1], [13, 13])
u = lower_envelope(dom, 0.5 * np.sum(dom.nodes**2, axis=1))
t0 = time.time()
sig = sigma_estimate(u)
print("quadratic 13x13: %.2fs" % (time.time() - t0))
inter = dom.interior_indices
flags = sig.flags
print("  interior strict:", np.sum(flags[inter] == STRICT), "/", len(inter))
print("  interior flat:", np.sum(flags[inter] == FLAT))
print("  interior inconclusive:", np.sum(flags[inter] == INCONCLUSIVE))
bd = dom.boundary_indices
print("  boundary all inconclusive:", np.all(flags[bd] == INCONCLUSIVE))
print("  flat sets found:", len(sig.flat_sets))

# 2) 2D cylinder u = x1^2: every interior node flat, segments = x2-lines
u2 = lower_envelope(dom, dom.nodes[:, 0] ** 2)
sig2 = sigma_estimate(u2)
print("cylinder x1^2:")
print("  interior flat:", np.sum(sig2.flags[inter] == FLAT), "/", len(inter))
print("  interior strict:", np.sum(sig2.flags[inter] == STRICT))
# segments should include vertical lines: check at least one run is along e2
runs_dirs = set()
for run in sig2.flat_sets:
    d = dom.nodes[run[-1]] - dom.nodes[run[0]]
    d = d / np.linalg.norm(d)
    runs_dirs.add(tuple(np.round(np.abs(d), 6)))
print("  run directions (abs):", sorted(runs_dirs)[:6])

# affine invariance: add affine function, flags unchanged
u2b = lower_envelope(dom, dom.nodes[:, 0] ** 2 + 0.3 * dom.nodes[:, 0] - 0.7 * dom.nodes[:, 1] + 2.0)
sig2b = sigma_estimate(u2b)
print("  affine invariance:", np.array_equal(sig2.flags, sig2b.flags))

# 3) 3D pointed sample |x'|^{3/2}(1+x3^2): axis flat, off-axis strict
# (convex only for x3^2 <= 1/5, so the box must stay inside that slab)
dom3 = Domain.box_grid([-1, -1, -0.4], [1, 1, 0.4], [11, 11, 11])
X3 = dom3.nodes
vals3 = (X3[:, 0] ** 2 + X3[:, 1] ** 2) ** 0.75 * (1.0 + X3[:, 2] ** 2)
u3 = lower_envelope(dom3, vals3)
t0 = time.time()
sig3 = sigma_estimate(u3, ladder=0.25 * 0.5 ** np.arange(12))
print("pointed 11^3: %.2fs" % (time.time() - t0))
axis = np.flatnonzero((np.abs(X3[:, 0]) < 1e-12) & (np.abs(X3[:, 1]) < 1e-12) & (np.abs(X3[:, 2]) < 0.4 - 1e-12))
print("  axis interior nodes flat:", np.sum(sig3.flags[axis] == FLAT), "/", len(axis))
offax = np.flatnonzero((~dom3.is_boundary) & ((np.abs(X3[:, 0]) > 1e-12) | (np.abs(X3[:, 1]) > 1e-12)))
print("  off-axis strict:", np.sum(sig3.flags[offax] == STRICT), "/", len(offax))
print("  off-axis flat:", np.sum(sig3.flags[offax] == FLAT))
vcounts = {f: int(np.sum(sig3.flags[offax] == f)) for f in (FLAT, STRICT, INCONCLUSIVE)}
print("  off-axis verdicts:", vcounts)
