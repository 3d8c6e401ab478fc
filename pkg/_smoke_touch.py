import numpy as np
import time
from malab.convexity import Domain, lower_envelope
from malab.flatness import touching_construction

# 2D cylinder u = x1^2 on a finer grid: touch at center along e2
dom = Domain.box_grid([-1, -1], [1, 1], [17, 17])
u = lower_envelope(dom, dom.nodes[:, 0] ** 2)
i0 = int(np.flatnonzero(np.all(np.abs(dom.nodes) < 1e-12, axis=1))[0])
t0 = time.time()
v, rep = touching_construction(u, i0, np.array([0.0, 1.0]), M=1.2, delta=0.5)
print("cylinder touch: %.2fs passed=%s" % (time.time() - t0, rep.passed))
for c in rep.checks:
    print("   %-22s %-6s res=%s" % (c.check_id, c.passed, c.residual))

# error path: not a flat node (quadratic center)
uq = lower_envelope(dom, 0.5 * np.sum(dom.nodes**2, axis=1))
try:
    touching_construction(uq, i0, np.array([0.0, 1.0]), M=1.2, delta=0.5)
    print("ERROR: no exception")
except ValueError as e:
    print("quadratic center correctly rejected:", e)

# delta = 0 identity path
v0, rep0 = touching_construction(u, i0, np.array([0.0, 1.0]), M=1.2, delta=0.0)
names = [c.check_id for c in rep0.checks]
print("delta=0 checks:", names, "passed:", rep0.passed)

# 3D pointed function, touch at origin along e3
dom3 = Domain.box_grid([-0.4, -0.4, -0.4], [0.4, 0.4, 0.4], [15, 15, 15])
X3 = dom3.nodes
vals3 = (X3[:, 0] ** 2 + X3[:, 1] ** 2) ** 0.75 * (1.0 + X3[:, 2] ** 2)
u3 = lower_envelope(dom3, vals3)
i3 = int(np.flatnonzero(np.all(np.abs(X3) < 1e-12, axis=1))[0])
t0 = time.time()
v3, rep3 = touching_construction(u3, i3, np.array([0.0, 0.0, 1.0]), M=1.2, delta=0.5)
print("pointed 15^3 touch: %.2fs passed=%s" % (time.time() - t0, rep3.passed))
print("   params:", {k: rep3.params[k] for k in ("radius", "ball_nodes", "segment_nodes", "ball_mass", "squeeze_leaves_domain")})
for c in rep3.checks:
    print("   %-22s %-6s res=%s" % (c.check_id, c.passed, c.residual))
