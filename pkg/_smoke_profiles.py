import time

import numpy as np

from malab.gallery.profiles import (PARABOLOID, SLAB, integrate_profile,
                                    step_halving_ratio,
                                    verify_paraboloid_identity,
                                    verify_slab_identity)

t0 = time.time()
for variant, oracle in ((SLAB, lambda f: (f**4 - 1) / 4),
                        (PARABOLOID, lambda f: f**4 - 1)):
    prof = integrate_profile(variant, s_max=0.6, step=1e-3)
    res = np.max(np.abs(prof.identity_residual()))
    orc = np.max(np.abs(prof.fp**2 - oracle(prof.f)))
    print(f"{variant}: nodes={len(prof.s)} maxres={res:.3e} oracle={orc:.3e} "
          f"f(smax)={prof.f[-1]:.6f} truncated={prof.truncated}")
    ratio, rc, rf = step_halving_ratio(variant, s_max=0.6, step=0.05)
    print(f"  halving ratio {ratio:.2f}  coarse {rc:.3e} fine {rf:.3e}")

# blow-up handling for the paraboloid variant (singularity near 1.311)
trunc = integrate_profile(PARABOLOID, s_max=2.0, step=1e-3)
print("blow-up: truncated =", trunc.truncated, " reached s =", trunc.s_max)

slab = integrate_profile(SLAB, s_max=0.6, step=1e-3)
y = np.linspace(-0.5, 0.5, 200)
rep = verify_slab_identity(slab, y, n_s=200, t_values=(1.0, 2.0, 5.0))
for c in rep.checks:
    print(f"  {c.check_id}: passed={c.passed} residual={c.residual:.3e}")
print("slab report passed:", rep.passed)

par = integrate_profile(PARABOLOID, s_max=0.6, step=1e-3)
rep2 = verify_paraboloid_identity(par, n=3, extent=0.2, grid_n=7, fd_step=1e-2)
for c in rep2.checks:
    print(f"  {c.check_id}: passed={c.passed} residual={c.residual}")
print("paraboloid report passed:", rep2.passed)

# worked closed-form value at (0, 0, 0.1): prefactor 1, validity 0.9, W^2 = 0.01
f0, fp0, fpp0 = par.evaluate(0.0)
pref = 0.5 * f0 * fpp0 - fp0**2
print("closed form at (0,0,0.1):", pref * (1 - f0 * 0.1) * 0.01, "(expect 0.009)")

# n = 4 path
rep3 = verify_paraboloid_identity(par, n=4, extent=0.15, grid_n=5, fd_step=1e-2)
print("n=4 fd check:", rep3.checks[0].passed, rep3.checks[0].residual)
print("total:", round(time.time() - t0, 2), "s")
