"""File formats: node meshes with values, measures, problems, bodies.

Three kinds of artifact move between runs.  Functions on node sets use a
plain-text format: a header line ``dim n_nodes n_boundary`` followed by
one line per node holding the coordinates, the value, and a 0/1 boundary
flag.  Measures and boundary data use two-column CSV keyed by node index.
Problem descriptions and convex bodies are small JSON documents whose
relative paths resolve against the JSON file's own directory.

Every float is written with 17 significant digits, which round-trips
IEEE doubles exactly, so write -> read -> write is byte-stable.
"""

from __future__ import annotations

import json
import os
from typing import Any, Callable

import numpy as np

from .bodies import ConvexBody
from .convexity import DiscreteMeasure, Domain, PLConvexFunction
from .dirichlet import DirichletProblem
from .lp_dual import LpDualProblem
from .report import ExperimentReport, canonical_json

__all__ = [
    "write_function",
    "read_function",
    "write_measure",
    "read_measure",
    "write_indexed_csv",
    "read_indexed_csv",
    "write_problem_bundle",
    "read_problem",
    "write_body",
    "read_body",
    "density_from_spec",
    "read_lp_problem",
    "write_report",
]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# Mesh/function text format.
# ---------------------------------------------------------------------------


def write_function(path: str, u: PLConvexFunction | Domain,
                   values: np.ndarray | None = None) -> None:
    """Write node coordinates, values, and boundary flags as plain text.

    Accepts a solved function directly, or a domain plus an explicit
    value array (one entry per node).
    """
    if isinstance(u, PLConvexFunction):
        domain, vals = u.domain, u.values
    else:
        domain = u
        if values is None:
            raise ValueError("a bare domain needs an explicit value array")
        vals = np.asarray(values, float)
    if len(vals) != len(domain.nodes):
        raise ValueError("one value per node")
    lines = [f"{domain.dim} {len(domain.nodes)} {int(np.sum(domain.is_boundary))}"]
    for x, v, bflag in zip(domain.nodes, vals, domain.is_boundary):
        coords = " ".join(_fmt(c) for c in x)
        lines.append(f"{coords} {_fmt(v)} {1 if bflag else 0}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_function(path: str) -> tuple[Domain, np.ndarray]:
    """Read the mesh/function text format back to a domain and values.

    The domain polytope is rebuilt as the hull of the nodes, which is
    what :func:`write_function` loses; grids written by this package
    include their corner nodes, so nothing changes on a round trip.
    """
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: header must be 'dim n_nodes n_boundary'")
        dim, n, nb = (int(t) for t in header)
        body = np.loadtxt(fh, ndmin=2)
    if body.shape != (n, dim + 2):
        raise ValueError(
            f"{path}: expected {n} rows of {dim + 2} fields, got {body.shape}"
        )
    flags = body[:, -1]
    if not np.all((flags == 0) | (flags == 1)):
        raise ValueError(f"{path}: boundary flags must be 0 or 1")
    is_boundary = flags.astype(bool)
    if int(np.sum(is_boundary)) != nb:
        raise ValueError(f"{path}: header says {nb} boundary nodes, "
                         f"rows say {int(np.sum(is_boundary))}")
    domain = Domain.from_nodes(body[:, :dim], is_boundary)
    return domain, body[:, dim].copy()


# ---------------------------------------------------------------------------
# Indexed CSV (measures, boundary data).
# ---------------------------------------------------------------------------


def write_indexed_csv(path: str, indices: np.ndarray, values: np.ndarray,
                      label: str = "mass") -> None:
    indices = np.asarray(indices, int)
    values = np.asarray(values, float)
    if len(indices) != len(values):
        raise ValueError("one value per index")
    with open(path, "w") as fh:
        fh.write(f"node_index,{label}\n")
        for i, v in zip(indices, values):
            fh.write(f"{int(i)},{_fmt(v)}\n")


def read_indexed_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    idx, vals = [], []
    with open(path) as fh:
        for ln, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{ln + 1}: expected two columns")
            if ln == 0 and parts[0] == "node_index":
                continue
            idx.append(int(parts[0]))
            vals.append(float(parts[1]))
    return np.asarray(idx, int), np.asarray(vals, float)


def write_measure(path: str, measure: DiscreteMeasure | np.ndarray) -> None:
    masses = measure.masses if isinstance(measure, DiscreteMeasure) else measure
    masses = np.asarray(masses, float)
    write_indexed_csv(path, np.arange(len(masses)), masses, label="mass")


def read_measure(path: str, n_nodes: int | None = None) -> DiscreteMeasure:
    """Read a ``node_index,mass`` CSV into a dense measure.

    Indices absent from the file get zero mass.  ``n_nodes`` fixes the
    length when trailing nodes are massless; otherwise the largest index
    present decides it.
    """
    idx, vals = read_indexed_csv(path)
    if len(idx) == 0 and n_nodes is None:
        raise ValueError(f"{path}: empty measure needs an explicit n_nodes")
    n = int(np.max(idx)) + 1 if n_nodes is None else int(n_nodes)
    masses = np.zeros(n)
    if np.any(idx >= n) or np.any(idx < 0):
        raise ValueError(f"{path}: node index out of range for {n} nodes")
    masses[idx] = vals
    return DiscreteMeasure(masses)


# ---------------------------------------------------------------------------
# Dirichlet problem JSON.
# ---------------------------------------------------------------------------


def write_problem_bundle(outdir: str, problem: DirichletProblem,
                         tol: float = 1e-8, max_iter: int = 400,
                         name: str = "problem") -> str:
    """Write a problem as JSON plus its mesh/target/boundary side files.

    Returns the path of the JSON document.  Only fixed-target problems
    serialize; the state-dependent mode carries callables.
    """
    if problem.rhs_mode != "fixed":
        raise ValueError("only fixed-target problems serialize to JSON")
    os.makedirs(outdir, exist_ok=True)
    dom = problem.domain
    mesh = f"{name}_mesh.txt"
    target = f"{name}_target.csv"
    bvals = f"{name}_boundary.csv"
    write_function(os.path.join(outdir, mesh), dom, np.zeros(len(dom.nodes)))
    write_measure(os.path.join(outdir, target), problem.target)
    bidx = dom.boundary_indices
    write_indexed_csv(os.path.join(outdir, bvals), bidx,
                      np.asarray(problem.boundary_values, float), label="value")
    doc = {
        "domain": mesh,
        "target": target,
        "boundary_values": bvals,
        "mode": "fixed",
        "tol": tol,
        "max_iter": max_iter,
    }
    path = os.path.join(outdir, f"{name}.json")
    with open(path, "w") as fh:
        fh.write(canonical_json(doc) + "\n")
    return path


def read_problem(path: str) -> tuple[DirichletProblem, dict[str, Any]]:
    """Read a problem JSON; returns the problem and solver options.

    Relative side-file paths resolve against the JSON's directory.  The
    value column of the referenced mesh file is ignored here; boundary
    data comes from its own CSV, keyed by node index.
    """
    with open(path) as fh:
        doc = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(base, p)

    mode = doc.get("mode", "fixed")
    if mode != "fixed":
        raise ValueError(f"{path}: mode {mode!r} does not serialize; "
                         "build state-dependent problems in code")
    domain, _ = read_function(resolve(doc["domain"]))
    target = read_measure(resolve(doc["target"]), n_nodes=len(domain.nodes))
    bidx, bvals = read_indexed_csv(resolve(doc["boundary_values"]))
    order = np.argsort(bidx)
    bidx, bvals = bidx[order], bvals[order]
    if not np.array_equal(bidx, domain.boundary_indices):
        raise ValueError(f"{path}: boundary CSV indices do not match the "
                         "mesh's boundary nodes")
    problem = DirichletProblem(domain, target, bvals)
    options = {
        "tol": float(doc.get("tol", 1e-8)),
        "max_iter": int(doc.get("max_iter", 400)),
    }
    return problem, options


# ---------------------------------------------------------------------------
# Convex bodies and the planar dual problem.
# ---------------------------------------------------------------------------


def write_body(path: str, body: ConvexBody, n_samples: int = 512) -> None:
    """Write a body as JSON: vertices for polytopes, support samples else.

    A smooth planar body is stored as its support values on ``n_samples``
    uniform angles; reading that back gives the polytope those support
    halfspaces carve out, so the round trip tightens smooth bodies to
    circumscribed polytopes.
    """
    if body.mode == "polytope":
        doc: dict[str, Any] = {"mode": "polytope",
                               "vertices": body.vertices.tolist()}
    else:
        th = np.linspace(0.0, 2.0 * np.pi, n_samples, endpoint=False)
        dirs = np.column_stack([np.cos(th), np.sin(th)])
        doc = {"mode": "support", "n": n_samples,
               "h": body.support(dirs).tolist()}
    with open(path, "w") as fh:
        fh.write(canonical_json(doc) + "\n")


def read_body(path: str) -> ConvexBody:
    with open(path) as fh:
        doc = json.load(fh)
    mode = doc.get("mode")
    if mode == "polytope":
        return ConvexBody(vertices=np.asarray(doc["vertices"], float))
    if mode == "support":
        n = int(doc["n"])
        h = np.asarray(doc["h"], float)
        if len(h) != n:
            raise ValueError(f"{path}: expected {n} support samples, got {len(h)}")
        th = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        A = np.column_stack([np.cos(th), np.sin(th)])
        return ConvexBody.from_halfspaces(A, h)
    raise ValueError(f"{path}: unknown body mode {mode!r}")


def density_from_spec(spec: Any) -> Callable[[np.ndarray], np.ndarray]:
    """Build a positive 2pi-periodic density from its JSON description.

    Accepted forms: a bare number, ``{"kind": "constant", "value": c}``,
    ``{"kind": "fourier", "const": a0, "cos": [...], "sin": [...]}``, or
    ``{"kind": "table", "values": [...]}`` sampled on uniform angles and
    interpolated periodically.
    """
    if isinstance(spec, (int, float)):
        spec = {"kind": "constant", "value": float(spec)}
    kind = spec.get("kind")
    if kind == "constant":
        c = float(spec["value"])
        return lambda x: np.full_like(np.asarray(x, float), c)
    if kind == "fourier":
        a0 = float(spec.get("const", 0.0))
        ac = np.asarray(spec.get("cos", []), float)
        bs = np.asarray(spec.get("sin", []), float)

        def density(x):
            x = np.asarray(x, float)
            out = np.full_like(x, a0)
            for k, a in enumerate(ac, start=1):
                out += a * np.cos(k * x)
            for k, b in enumerate(bs, start=1):
                out += b * np.sin(k * x)
            return out

        return density
    if kind == "table":
        vals = np.asarray(spec["values"], float)
        if len(vals) < 2:
            raise ValueError("table density needs at least two samples")
        grid = np.linspace(0.0, 2.0 * np.pi, len(vals) + 1)
        wrapped = np.append(vals, vals[0])
        return lambda x: np.interp(np.mod(np.asarray(x, float), 2.0 * np.pi),
                                   grid, wrapped)
    raise ValueError(f"unknown density kind {kind!r}")


def read_lp_problem(path: str) -> LpDualProblem:
    """Read ``{"p", "q", "n", "f", "g"}`` JSON into a planar dual problem."""
    with open(path) as fh:
        doc = json.load(fh)
    return LpDualProblem(
        p=float(doc["p"]),
        q=float(doc["q"]),
        f=density_from_spec(doc.get("f", 1.0)),
        g=density_from_spec(doc.get("g", 1.0)),
        n=int(doc.get("n", 256)),
    )


def write_report(path: str, report: ExperimentReport) -> None:
    with open(path, "w") as fh:
        fh.write(report.to_json() + "\n")
