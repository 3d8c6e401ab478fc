"""Planar solver for a dual-weighted Minkowski-type curvature equation.

The unknown is a support function h on normal angles xi.  Writing
theta(xi) for the radial angle of the boundary point attached to the
normal direction xi, the equation balances a curvature term weighted in
the dual (radial) variable against a power of h weighted in the primal
one:

    g(theta(xi)) (h'' + h) / (h^2 + h'^2)^((2 - q)/2) = f(xi) h^(p - 1).

For p > q the solution is unique; for p = q both sides are homogeneous
of the same degree, solutions come in scale families, and the solver
fixes the gauge by normalizing the geometric mean of h to 1.  For p < q
uniqueness genuinely fails and the solver refuses to pretend otherwise.

Discretization is a uniform periodic angle grid with central
differences.  Newton steps are damped by a backtracking line search on
the residual norm, with the Jacobian assembled by forward differences
(the system is small; robustness beats cleverness here).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._parallel import ordered_map
from .report import ExperimentReport

__all__ = [
    "LpDualProblem",
    "lp_dual_residual",
    "dual_jacobian_values",
    "solve_lp_dual_planar",
    "uniqueness_experiment",
]


@dataclass
class LpDualProblem:
    """Problem data for the planar dual-weighted curvature equation.

    ``f`` takes normal angles, ``g`` takes radial angles; both must be
    positive and 2 pi periodic.  ``n`` is the number of grid angles.
    """

    p: float
    q: float
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    n: int = 256

    xi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 16:
            raise ValueError("need at least 16 grid angles")
        self.xi = np.linspace(0.0, 2.0 * np.pi, self.n, endpoint=False)


def _derivatives(h: np.ndarray, dxi: float) -> tuple[np.ndarray, np.ndarray]:
    hp = (np.roll(h, -1) - np.roll(h, 1)) / (2.0 * dxi)
    hpp = (np.roll(h, -1) - 2.0 * h + np.roll(h, 1)) / dxi**2
    return hp, hpp


def lp_dual_residual(problem: LpDualProblem, h: np.ndarray) -> np.ndarray:
    """Pointwise equation residual at the grid angles."""
    h = np.asarray(h, float)
    if h.shape != (problem.n,):
        raise ValueError("h has the wrong length for this problem")
    if np.any(h <= 0):
        raise ValueError("support function must stay positive")
    dxi = 2.0 * np.pi / problem.n
    hp, hpp = _derivatives(h, dxi)
    xi = problem.xi
    # boundary point of the support parameterization and its radial angle
    px = h * np.cos(xi) - hp * np.sin(xi)
    py = h * np.sin(xi) + hp * np.cos(xi)
    theta = np.arctan2(py, px)
    rad2 = h**2 + hp**2
    lhs = np.asarray(problem.g(theta), float) * (hpp + h) / rad2 ** ((2.0 - problem.q) / 2.0)
    rhs = np.asarray(problem.f(xi), float) * h ** (problem.p - 1.0)
    return lhs - rhs


def dual_jacobian_values(h: np.ndarray, dxi: float) -> np.ndarray:
    """The transport factor h (h'' + h) / (h^2 + h'^2) on the grid.

    This is the Jacobian of the change from normal to radial angle
    parameterization; it shows up whenever densities are moved between
    the two weightings and is reported for diagnostics.
    """
    h = np.asarray(h, float)
    hp, hpp = _derivatives(h, dxi)
    return h * (hpp + h) / (h**2 + hp**2)


def _gauge(h: np.ndarray, target: float) -> np.ndarray:
    return h * (target / np.exp(np.mean(np.log(h))))


def solve_lp_dual_planar(
    problem: LpDualProblem,
    h0: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 60,
) -> tuple[np.ndarray, ExperimentReport]:
    """Damped Newton iteration for the discrete curvature equation.

    Returns the solved support values and a report with the residual
    trace.  For p = q every iterate is re-gauged so its geometric mean
    stays that of the initial guess (the dilation gauge).  Raises for
    p < q, where the solution set is genuinely non-unique and a single
    returned h would be arbitrary.
    """
    if problem.p < problem.q:
        raise ValueError("p < q refused: uniqueness fails in this range")
    n = problem.n
    h = np.ones(n) if h0 is None else np.asarray(h0, float).copy()
    if h.shape != (n,):
        raise ValueError("h0 has the wrong length")
    if np.any(h <= 0):
        raise ValueError("h0 must be positive")
    gauged = problem.p == problem.q
    gm0 = float(np.exp(np.mean(np.log(h))))

    rep = ExperimentReport(
        "lp_dual_solve",
        params={"p": problem.p, "q": problem.q, "n": n, "tol": tol,
                "gauged": gauged, "gauge_value": gm0 if gauged else None},
    )
    trace = []
    res = lp_dual_residual(problem, h)
    norm = float(np.max(np.abs(res)))
    converged = False
    for it in range(max_iter):
        trace.append(norm)
        if norm <= tol:
            converged = True
            break
        # forward-difference Jacobian; least squares absorbs the scale
        # null direction in the gauged case
        J = np.empty((n, n))
        step = 1e-7 * (1.0 + np.abs(h))
        for j in range(n):
            hj = h.copy()
            hj[j] += step[j]
            J[:, j] = (lp_dual_residual(problem, hj) - res) / step[j]
        delta = np.linalg.lstsq(J, -res, rcond=None)[0]
        # backtrack on the 2-norm (the lstsq direction descends it);
        # convergence is still judged in the max norm
        two = float(np.dot(res, res))
        lam = 1.0
        ok = False
        for _ in range(40):
            trial = h + lam * delta
            if np.all(trial > 0):
                if gauged:
                    trial = _gauge(trial, gm0)
                trial_res = lp_dual_residual(problem, trial)
                if float(np.dot(trial_res, trial_res)) < two * (1.0 - 1e-4 * lam):
                    h, res = trial, trial_res
                    norm = float(np.max(np.abs(res)))
                    ok = True
                    break
            lam *= 0.5
        if not ok:
            break
    else:
        trace.append(norm)

    dxi = 2.0 * np.pi / n
    hp, hpp = _derivatives(h, dxi)
    rep.params["residual_trace"] = trace[:50]
    rep.add("converged", "max residual below tol", converged,
            residual=norm, tolerance=tol, iterations=len(trace) - 1)
    rep.add("convexity", "curvature factor h'' + h stays positive",
            bool(np.all(hpp + h > 0)), residual=float(np.min(hpp + h)))
    return h, rep


def uniqueness_experiment(
    problem: LpDualProblem,
    inits: list[np.ndarray],
    tol: float = 1e-10,
) -> ExperimentReport:
    """Solve from several initial guesses and compare the limits.

    For p > q all runs must land on one function: pairwise sup distance
    at most 10 tol.  For p = q the runs must land on one scale family:
    each pairwise ratio must be constant across the grid to within
    10 tol.  Reports one check per pair plus one per-run convergence
    check; runs are independent and executed through the ordered map
    helper, so the report order never depends on thread scheduling.
    """
    rep = ExperimentReport(
        "lp_dual_uniqueness",
        params={"p": problem.p, "q": problem.q, "n": problem.n,
                "n_inits": len(inits), "tol": tol},
    )
    results = ordered_map(
        lambda h0: solve_lp_dual_planar(problem, h0=h0, tol=tol), inits)
    sols = []
    for i, (h, srep) in enumerate(results):
        c = srep.checks[0]
        rep.add(f"run_{i}_converged", "solver converged from this init",
                c.passed, residual=c.residual, tolerance=tol)
        sols.append(h)
    same_scale = problem.p == problem.q
    bound = 10.0 * tol
    for i in range(len(sols)):
        for j in range(i + 1, len(sols)):
            if same_scale:
                ratio = sols[i] / sols[j]
                const = float(np.mean(ratio))
                dev = float(np.max(np.abs(ratio - const)))
                rep.add(
                    f"pair_{i}{j}_ratio_constant",
                    "solutions from two inits differ by a constant factor",
                    dev <= bound,
                    residual=dev,
                    tolerance=bound,
                    factor=const,
                )
            else:
                dist = float(np.max(np.abs(sols[i] - sols[j])))
                rep.add(
                    f"pair_{i}{j}_coincide",
                    "solutions from two inits coincide",
                    dist <= bound,
                    residual=dist,
                    tolerance=bound,
                )
    return rep
