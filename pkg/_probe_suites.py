import time

from malab.suites import (
    abp_suite,
    comparison_suite,
    dirichlet_oracle_suite,
    legendre_involution_suite,
    quadratic_section_ratio,
    smp_desk_suite,
)


def show(rep, dt):
    print(f"{rep.name}: {dt:.1f}s passed={rep.passed} inconclusive={rep.inconclusive}")
    for c in rep.checks:
        print(f"  {c.check_id}: {c.passed} res={c.residual} {c.details}")


t0 = time.time()
show(legendre_involution_suite(50, seed=0), time.time() - t0)

t0 = time.time()
show(dirichlet_oracle_suite(), time.time() - t0)

t0 = time.time()
show(comparison_suite(100, seed=0), time.time() - t0)

t0 = time.time()
show(abp_suite(20, seed=0), time.time() - t0)

t0 = time.time()
show(smp_desk_suite(10, seed=0), time.time() - t0)

for d, g in ((1, 129), (2, 65), (3, 17)):
    t0 = time.time()
    r = quadratic_section_ratio(d, g)
    print(f"quadratic ratio dim={d} grid={g}: {r:.4f} half={r/2:.4f} "
          f"({time.time()-t0:.1f}s)")
