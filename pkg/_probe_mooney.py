import time

from malab.gallery.cantor import build_cantor, mooney_experiment

t0 = time.time()
c = build_cantor(0.1, 6)
rep = mooney_experiment(c, t=10.0, grid_n=17)
print(f"total {time.time() - t0:.1f}s  passed={rep.passed}")
print("params:", rep.params)
for ch in rep.checks:
    print(f"  {ch.check_id}: passed={ch.passed} residual={ch.residual} "
          f"tol={ch.tolerance} {ch.details}")
