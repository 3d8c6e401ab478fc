import time

import numpy as np

from malab.convexity import Domain, lower_envelope
from malab.flatness import FLAT, sigma_estimate

dom = Domain.box_grid([-1.0] * 3, [1.0] * 3, (17,) * 3)
vals = np.load("/root/pkg/_mooney17_t10.npy")
u = lower_envelope(dom, vals)
spread = float(np.ptp(u.values))
ladder = spread / 64.0 * np.array([1.0, 0.5])
t0 = time.time()
est = sigma_estimate(u, ladder=ladder, slope_tol=0.125 / 100.0)
dt = time.time() - t0
flat = est.nodes_flagged(FLAT)
X = dom.nodes
print(f"sigma {dt:.1f}s  n_flat={len(flat)}")
x2max = np.max(np.abs(X[flat, 1])) if len(flat) else -1.0
print(f"max |x2| among flat: {x2max}")
x1s = np.unique(np.round(X[flat, 0], 6))
print(f"x1 levels of flat nodes: {x1s}")
from collections import Counter

cnt = Counter(est.flags)
print("flag counts:", dict(cnt))
