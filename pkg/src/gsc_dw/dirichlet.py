"""Discrete Dirichlet energy, harmonic solves and self-similar gluing.

The energy of a cell function ``u`` on a level-n graph is the sum over
facet-adjacent pairs of ``(u[a] - u[b])**2``. Harmonic functions between
two opposite faces are computed by eliminating the pinned cells and running
a Jacobi-preconditioned conjugate gradient on the remaining Laplacian.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError, GluingError, IsolatedRegionError
from .gsc_core import CarpetSpec, face_subgroup
from .graph_approx import (
    DEFAULT_BUDGET,
    CellGraph,
    FaceSet,
    apply_symmetry_to_graph,
    build_cell_graph,
    face_cells,
    level_origins,
)

DEFAULT_TOL = 1e-10


class EnergyForm:
    """Quadratic form ``u -> sum over facet edges of (u_a - u_b)**2`` on a cell graph."""

    def __init__(self, graph: CellGraph):
        self.graph = graph

    def energy(self, u) -> float:
        u = np.asarray(u, dtype=float)
        diff = u[self.graph.edges[:, 0]] - u[self.graph.edges[:, 1]]
        # numpy reduces contiguous float arrays pairwise
        return float(np.sum(diff * diff))

    def bilinear(self, u, v) -> float:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        a, b = self.graph.edges[:, 0], self.graph.edges[:, 1]
        return float(np.sum((u[a] - u[b]) * (v[a] - v[b])))

    def edge_energies(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        diff = u[self.graph.edges[:, 0]] - u[self.graph.edges[:, 1]]
        return diff * diff


def energy(form: EnergyForm, u) -> float:
    return form.energy(u)


@dataclass(eq=False)
class HarmonicSolution:
    graph: CellGraph
    values: np.ndarray
    boundary0: FaceSet | np.ndarray
    boundary1: FaceSet | np.ndarray
    energy: float
    residual: float
    iterations: int
    tol: float
    symmetrized: bool = False
    raw_range: tuple[float, float] = (0.0, 1.0)
    meta: dict = field(default_factory=dict)

    @property
    def resistance(self) -> float:
        return math.inf if self.energy == 0 else 1.0 / self.energy

    def metadata(self) -> dict:
        return {
            "spec_hash": self.graph.spec.spec_hash(),
            "level": self.graph.level,
            "energy": self.energy,
            "residual": self.residual,
            "iterations": self.iterations,
            "tolerance": self.tol,
            "symmetrized": self.symmetrized,
            **self.meta,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.graph.spec.d
        w.writerow([f"origin_{k + 1}" for k in range(d)] + ["value"])
        for o, x in zip(self.graph.origins.tolist(), self.values.tolist()):
            w.writerow([*o, repr(float(x))])
        return buf.getvalue()

    def export(self, directory, stem="solution"):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / f"{stem}.json").write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")
        (directory / f"{stem}.csv").write_text(self.to_csv())


def _cells(b):
    return np.asarray(b.cells if isinstance(b, FaceSet) else b, dtype=np.int64)


def pcg(A: sp.csr_matrix, b: np.ndarray, tol: float = DEFAULT_TOL, maxiter: int | None = None, x0=None):
    """Jacobi-preconditioned conjugate gradients for SPD ``A``.

    Stops when ``max|b - A x| <= tol * max|b|``. Returns ``(x, residual,
    iterations)`` with the relative max-norm residual of the returned
    iterate.
    """
    n = len(b)
    if maxiter is None:
        maxiter = max(1, int(50 * math.sqrt(n)))
    bnorm = float(np.max(np.abs(b))) if n else 0.0
    if bnorm == 0.0:
        return np.zeros(n), 0.0, 0
    inv_diag = 1.0 / A.diagonal()
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    res = float(np.max(np.abs(r))) / bnorm
    it = 0
    while res > tol:
        if it >= maxiter:
            raise ConvergenceError(
                f"conjugate gradient did not converge in {maxiter} iterations (residual {res:.3e})",
                residual=res, iterations=it,
            )
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        it += 1
        if it % 50 == 0:
            r = b - A @ x  # refresh to stop drift of the recursive residual
        res = float(np.max(np.abs(r))) / bnorm
        if res <= tol:
            r = b - A @ x
            res = float(np.max(np.abs(r))) / bnorm
            if res <= tol:
                break
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, res, it


def _split(graph: CellGraph, boundary0, boundary1):
    b0 = _cells(boundary0)
    b1 = _cells(boundary1)
    if len(b0) == 0 or len(b1) == 0:
        raise ValueError("boundary sets must be non-empty")
    pinned = np.zeros(graph.num_cells, dtype=bool)
    pinned[b0] = True
    if pinned[b1].any():
        raise ValueError("boundary sets must be disjoint")
    pinned[b1] = True
    free = np.flatnonzero(~pinned)
    return b0, b1, pinned, free


def _check_attached(graph, pinned, free):
    if len(free) == 0:
        return
    ncomp, labels = connected_components(graph.adjacency, directed=False)
    attached = np.zeros(ncomp, dtype=bool)
    attached[labels[pinned]] = True
    lonely = ~attached[labels[free]]
    if lonely.any():
        cells = free[lonely]
        raise IsolatedRegionError(
            f"{len(cells)} free cells lie in components touching neither boundary, "
            f"e.g. origin {graph.origins[cells[0]].tolist()}",
            cells=cells,
        )


def solve_harmonic(form: EnergyForm, boundary0, boundary1, tol: float = DEFAULT_TOL, maxiter=None) -> HarmonicSolution:
    """Minimize the energy with value 0 on ``boundary0`` and 1 on ``boundary1``.

    Values are clamped to ``[0, 1]`` after the solve; by the maximum
    principle the clamp moves nothing by more than the solver error.
    """
    graph = form.graph
    b0, b1, pinned, free = _split(graph, boundary0, boundary1)
    _check_attached(graph, pinned, free)
    u = np.zeros(graph.num_cells)
    u[b1] = 1.0
    it = 0
    res = 0.0
    if len(free):
        L = graph.laplacian
        Lff = L[free][:, free].tocsr()
        rhs = -(L[free][:, b1] @ np.ones(len(b1)))
        x, res, it = pcg(Lff, rhs, tol=tol, maxiter=maxiter)
        u[free] = x
    lo, hi = float(u.min()), float(u.max())
    np.clip(u, 0.0, 1.0, out=u)
    u[b0] = 0.0
    u[b1] = 1.0
    return HarmonicSolution(
        graph=graph,
        values=u,
        boundary0=boundary0,
        boundary1=boundary1,
        energy=form.energy(u),
        residual=res,
        iterations=it,
        tol=tol,
        raw_range=(lo, hi),
    )


def solve_harmonic_dense(form: EnergyForm, boundary0, boundary1) -> np.ndarray:
    """Direct dense solve of the same boundary value problem.

    Assembles the Laplacian densely from the edge list and uses LU; meant
    as an independent check of :func:`solve_harmonic` on small graphs.
    """
    graph = form.graph
    b0, b1, pinned, free = _split(graph, boundary0, boundary1)
    n = graph.num_cells
    L = np.zeros((n, n))
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    np.add.at(L, (a, b), -1.0)
    np.add.at(L, (b, a), -1.0)
    np.add.at(L, (a, a), 1.0)
    np.add.at(L, (b, b), 1.0)
    u = np.zeros(n)
    u[b1] = 1.0
    if len(free):
        u[free] = np.linalg.solve(L[np.ix_(free, free)], -L[np.ix_(free, b1)].sum(axis=1))
    return u


def effective_resistance(form: EnergyForm, boundary0, boundary1, tol: float = DEFAULT_TOL) -> float:
    """Reciprocal of the minimal energy; ``inf`` when the faces are not connected."""
    return solve_harmonic(form, boundary0, boundary1, tol).resistance


def orbit_representatives(graph: CellGraph, subgroup) -> np.ndarray:
    perms = np.stack([apply_symmetry_to_graph(graph, g) for g in subgroup])
    return perms.min(axis=0)


def symmetrize(u, graph: CellGraph, subgroup) -> np.ndarray:
    """Clamp to ``[0, 1]`` and average over the orbits of ``subgroup``.

    Every member of an orbit receives the same floating point number, so
    the output is exactly invariant.
    """
    v = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    rep = orbit_representatives(graph, subgroup)
    sums = np.bincount(rep, weights=v, minlength=graph.num_cells)
    counts = np.bincount(rep, minlength=graph.num_cells)
    return sums[rep] / counts[rep]


def invariance_defect(u, graph: CellGraph, subgroup) -> float:
    """``max |u(g x) - u(x)|`` over the subgroup."""
    u = np.asarray(u, dtype=float)
    worst = 0.0
    for g in subgroup:
        p = apply_symmetry_to_graph(graph, g)
        worst = max(worst, float(np.max(np.abs(u[p] - u))))
    return worst


def solve_face_problem(graph: CellGraph, k: int = 1, tol: float = DEFAULT_TOL, symmetric: bool = True) -> HarmonicSolution:
    """Harmonic function from face ``{x_k = 0}`` (value 0) to ``{x_k = 1}`` (value 1).

    With ``symmetric`` the solution is averaged over the reflections fixing
    coordinate ``k``; ``meta['raw_defect']`` records how far the raw solve
    was from invariant.
    """
    form = EnergyForm(graph)
    sol = solve_harmonic(form, face_cells(graph, k, 0), face_cells(graph, k, 1), tol)
    if symmetric:
        group = face_subgroup(graph.spec.d, k - 1)
        sol.meta["raw_defect"] = invariance_defect(sol.values, graph, group)
        sol.meta["raw_energy"] = sol.energy
        sol.values = symmetrize(sol.values, graph, group)
        sol.energy = form.energy(sol.values)
        sol.symmetrized = True
    sol.meta["k"] = k
    return sol


def glue_hm(h0: HarmonicSolution, spec: CarpetSpec, m: int, target: CellGraph | None = None,
            budget: int = DEFAULT_BUDGET, k: int = 1) -> np.ndarray:
    """Self-similar assembly of ``h0`` on level ``n + m``.

    On the copy of the level-n graph inside the outer cell ``w`` the value
    is ``(h0(v) + origin_k(w)) / l**m``. ``h0`` must take the values 0 and 1
    exactly on the faces ``x_k = 0`` and ``x_k = 1`` and be exactly
    invariant under the reflections fixing coordinate ``k``; then copies
    agree across every shared facet. Returned values are indexed by the
    cells of the level-``n + m`` graph (``target``, built if omitted).
    """
    graph = h0.graph
    n = graph.level
    if m < 0:
        raise ValueError("outer level must be >= 0")
    b0, b1 = _cells(h0.boundary0), _cells(h0.boundary1)
    left = face_cells(graph, k, 0).cells
    right = face_cells(graph, k, 1).cells
    if not (np.array_equal(np.sort(b0), left) and np.array_equal(np.sort(b1), right)):
        raise GluingError(f"h0 must be solved between the faces x_{k} = 0 (value 0) and x_{k} = 1 (value 1)")
    if np.any(h0.values[left] != 0.0) or np.any(h0.values[right] != 1.0):
        raise GluingError("h0 boundary values are not exactly 0 and 1")
    for g in face_subgroup(spec.d, k - 1):
        p = apply_symmetry_to_graph(graph, g)
        if not np.array_equal(h0.values[p], h0.values):
            raise GluingError(f"h0 is not exactly invariant under reflection {g.to_dict()}")
    if m == 0:
        return h0.values.copy()
    if target is None:
        target = build_cell_graph(spec, n + m, budget)
    outer = level_origins(spec, m)
    full = (outer[:, None, :] * spec.l**n + graph.origins[None, :, :]).reshape(-1, spec.d)
    vals = ((h0.values[None, :] + outer[:, k - 1:k].astype(float)) / float(spec.l**m)).ravel()
    out = np.empty(target.num_cells)
    out[target.index_of(full)] = vals
    return out
