"""Conductance ratios, walk-dimension estimates and related diagnostics.

For each level n the harmonic function between the faces ``x_1 = 0`` and
``x_1 = 1`` is computed, giving an energy ``E_n``. Gluing the level-n
solution into level n+1 produces an admissible function of energy exactly
``(#S / l**2) * E_n``, so the fresh solve satisfies ``E_{n+1} <= (#S/l**2) E_n``;
a strictly positive gap is the discrete form of ``d_w > 2``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels, rng
from .dirichlet import DEFAULT_TOL, EnergyForm, HarmonicSolution, glue_hm, invariance_defect, solve_face_problem
from .errors import BudgetExceededError, ConvergenceError, WalkGuardError
from .gsc_core import CarpetSpec, face_subgroup
from .graph_approx import DEFAULT_BUDGET, CellGraph, build_cell_graph, face_cells

WALK_GUARD = 10**9


@dataclass
class LevelDiagnostics:
    level: int
    cells: int
    iterations: int
    residual: float
    raw_min: float
    raw_max: float
    raw_defect: float  # G1 invariance defect before averaging
    defect: float  # same, after averaging; 0.0 exactly
    min_value: float
    max_value: float


@dataclass
class ScalingReport:
    """Energies by level and everything derived from them.

    ``glued_energies[t]`` is the energy on level ``levels[t] + 1`` of the
    function glued from level ``levels[t]``; it is ``None`` for the last
    level.
    """

    num_cells: int  # #S
    l: int
    levels: list[int]
    energies: list[float]
    glued_energies: list[float | None] = field(default_factory=list)
    two_step_glued: list[float | None] = field(default_factory=list)
    k: int = 1
    tol: float = DEFAULT_TOL
    complete: bool = True
    error: str | None = None
    error_kind: str | None = None  # "budget" or "convergence"
    spec_hash: str | None = None
    diagnostics: list[LevelDiagnostics] = field(default_factory=list)

    @property
    def bound(self) -> float:
        """``#S / l**2``: the ratio that corresponds to ``d_w = 2``."""
        return self.num_cells / self.l**2

    @property
    def ratios(self) -> list[float]:
        return [self.energies[t + 1] / self.energies[t] for t in range(len(self.energies) - 1)]

    @property
    def dw_estimates(self) -> list[float]:
        return [math.log(self.num_cells / r, self.l) for r in self.ratios]

    @property
    def margins(self) -> list[float]:
        return [self.bound - r for r in self.ratios]

    @property
    def glue_gaps(self) -> list[float]:
        """``E_{n+1}(glued) - E_{n+1}(harmonic)`` for consecutive levels."""
        return [self.glued_energies[t] - self.energies[t + 1] for t in range(len(self.energies) - 1)]

    @property
    def relative_glue_gaps(self) -> list[float]:
        return [gap / self.glued_energies[t] for t, gap in enumerate(self.glue_gaps)]

    @property
    def two_step_gaps(self) -> list[float]:
        out = []
        for t in range(len(self.energies) - 2):
            g = self.two_step_glued[t] if t < len(self.two_step_glued) else None
            if g is not None:
                out.append(g - self.energies[t + 2])
        return out

    @property
    def scaling_identity_errors(self) -> list[float]:
        """Relative deviation of ``E(glued)`` from ``(#S/l**2) E_n``."""
        out = []
        for t in range(len(self.energies) - 1):
            pred = self.bound * self.energies[t]
            out.append(abs(self.glued_energies[t] - pred) / pred)
        return out

    @property
    def dw_regression(self) -> float | None:
        """Least-squares ``log_l(#S) - slope`` of ``log_l E_n`` against n."""
        if len(self.energies) < 2:
            return None
        slope = np.polyfit(self.levels, np.log(self.energies) / math.log(self.l), 1)[0]
        return math.log(self.num_cells, self.l) - float(slope)

    @property
    def ratios_monotone(self) -> bool:
        r = self.ratios
        return all(a <= b for a, b in zip(r, r[1:])) or all(a >= b for a, b in zip(r, r[1:]))

    def to_dict(self) -> dict:
        return {
            "schema": "gsc-dw/scaling/1",
            "spec_hash": self.spec_hash,
            "num_cells": self.num_cells,
            "l": self.l,
            "k": self.k,
            "tol": self.tol,
            "complete": self.complete,
            "error": self.error,
            "error_kind": self.error_kind,
            "levels": self.levels,
            "energies": self.energies,
            "glued_energies": self.glued_energies,
            "two_step_glued": self.two_step_glued,
            "bound": self.bound,
            "ratios": self.ratios,
            "dw_estimates": self.dw_estimates,
            "dw_regression": self.dw_regression,
            "margins": self.margins,
            "glue_gaps": self.glue_gaps,
            "relative_glue_gaps": self.relative_glue_gaps,
            "two_step_gaps": self.two_step_gaps,
            "scaling_identity_errors": self.scaling_identity_errors,
            "ratios_monotone": self.ratios_monotone,
            "diagnostics": [vars(x) for x in self.diagnostics],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "energy", "ratio", "dw_estimate", "margin", "glue_gap"])
        ratios, dws, margins, gaps = self.ratios, self.dw_estimates, self.margins, self.glue_gaps
        for t, n in enumerate(self.levels):
            row = [n, repr(self.energies[t])]
            if t < len(ratios):
                row += [repr(ratios[t]), repr(dws[t]), repr(margins[t]), repr(gaps[t])]
            else:
                row += ["", "", "", ""]
            w.writerow(row)
        return buf.getvalue()


def resistance_sequence(spec: CarpetSpec, n_max: int, tol: float = DEFAULT_TOL,
                        budget: int = DEFAULT_BUDGET, k: int = 1, two_step: bool = True) -> ScalingReport:
    """Face-to-face energies for levels ``1..n_max`` and the glue comparison.

    Budget and convergence failures stop the sequence; the partial report
    comes back with ``complete = False``.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    report = ScalingReport(spec.size, spec.l, [], [], k=k, tol=tol, spec_hash=spec.spec_hash())
    sols: dict[int, HarmonicSolution] = {}
    for n in range(1, n_max + 1):
        try:
            graph = build_cell_graph(spec, n, budget)
            sol = solve_face_problem(graph, k=k, tol=tol)
        except (BudgetExceededError, ConvergenceError) as exc:
            report.complete = False
            report.error = f"level {n}: {exc}"
            report.error_kind = "budget" if isinstance(exc, BudgetExceededError) else "convergence"
            break
        form = EnergyForm(graph)
        if n - 1 in sols:
            report.glued_energies.append(form.energy(glue_hm(sols[n - 1], spec, 1, graph, k=k)))
        if two_step and n - 2 in sols:
            report.two_step_glued.append(form.energy(glue_hm(sols[n - 2], spec, 2, graph, k=k)))
        report.levels.append(n)
        report.energies.append(sol.energy)
        report.diagnostics.append(LevelDiagnostics(
            level=n, cells=graph.num_cells, iterations=sol.iterations, residual=sol.residual,
            raw_min=sol.raw_range[0], raw_max=sol.raw_range[1], raw_defect=sol.meta["raw_defect"],
            defect=invariance_defect(sol.values, graph, face_subgroup(spec.d, k - 1)),
            min_value=float(sol.values.min()), max_value=float(sol.values.max()),
        ))
        sols[n] = sol
        sols.pop(n - 2, None)
    report.glued_energies.append(None)
    return report


@dataclass
class WitnessVerdict:
    passed: bool
    min_margin: float
    min_gap: float
    reasons: list[str]

    def to_dict(self):
        return vars(self).copy()


def dw_witness(report: ScalingReport) -> WitnessVerdict:
    """Strict ``ratio < #S/l**2`` at every level together with a positive glue gap."""
    if not report.complete or len(report.energies) < 2:
        raise ValueError("witness needs a complete report with at least two levels")
    reasons = []
    for n, r, m in zip(report.levels, report.ratios, report.margins):
        if not r < report.bound:
            reasons.append(f"level {n}: ratio {r!r} is not below {report.bound!r}")
    for n, gap in zip(report.levels, report.glue_gaps):
        if not gap > 0:
            reasons.append(f"level {n}: glue gap {gap!r} is not positive")
    return WitnessVerdict(not reasons, min(report.margins), min(report.glue_gaps), reasons)


# ---------------------------------------------------------------------------
# random walks


@dataclass
class WalkStats:
    level: int
    trials: int
    seed: int
    mean: float
    stderr: float
    k: int = 1
    backend: str = ""
    steps: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "schema": "gsc-dw/walk/1",
            "level": self.level,
            "trials": self.trials,
            "seed": self.seed,
            "k": self.k,
            "mean": self.mean,
            "stderr": self.stderr,
        }


def _walk_inputs(graph: CellGraph, k: int):
    adj = graph.adjacency
    indptr = adj.indptr.astype(np.int64)
    indices = adj.indices.astype(np.int64)
    absorbing = np.zeros(graph.num_cells, dtype=np.uint8)
    absorbing[face_cells(graph, k, 1).cells] = 1
    return indptr, indices, absorbing


def random_walk_crossing(spec: CarpetSpec, n: int, trials: int, seed: int, k: int = 1,
                         budget: int = DEFAULT_BUDGET, starts=None, threads: int = 1,
                         backend: str | None = None, max_steps: int = WALK_GUARD) -> WalkStats:
    """Mean steps for a simple random walk to cross from ``x_k = 0`` to ``x_k = 1``.

    Starting cells are uniform on the ``x_k = 0`` face unless ``starts``
    (cell indices, one per trial or a single index) is given. Trial ``t``
    draws from its own stream keyed by ``(seed, t)``, so the result does not
    depend on ``threads`` or on the backend.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    graph = build_cell_graph(spec, n, budget)
    indptr, indices, absorbing = _walk_inputs(graph, k)
    keys = rng.stream_keys(seed, trials)
    if starts is None:
        face = face_cells(graph, k, 0).cells
        pick = rng.bounded_array(rng.draw_array(keys, 0), len(face)).astype(np.int64)
        starts = face[pick]
    else:
        starts = np.broadcast_to(np.asarray(starts, dtype=np.int64), (trials,)).copy()
    if backend == "python":
        fn = kernels.python_crossing_steps
    elif backend in (None, kernels.BACKEND):
        fn = kernels.crossing_steps
    else:
        raise ValueError(f"backend {backend!r} is not available (have {kernels.BACKEND!r})")
    chunks = np.array_split(np.arange(trials), max(1, min(threads, trials)))
    try:
        if len(chunks) == 1:
            steps = fn(indptr, indices, absorbing, keys, starts, max_steps)
        else:
            with ThreadPoolExecutor(len(chunks)) as pool:
                parts = pool.map(lambda c: fn(indptr, indices, absorbing, keys[c], starts[c], max_steps), chunks)
                steps = np.concatenate(list(parts))
    except OverflowError as exc:
        raise WalkGuardError(f"a walk exceeded {max_steps} steps (trial {exc.args[0]})") from None
    x = steps.astype(float)
    mean = float(np.sum(x) / trials)
    var = float(np.sum((x - mean) ** 2) / (trials - 1)) if trials > 1 else 0.0
    return WalkStats(n, trials, seed, mean, math.sqrt(var / trials), k,
                     "python" if fn is kernels.python_crossing_steps else kernels.BACKEND, steps)


def expected_crossing_time(graph: CellGraph, k: int = 1) -> float:
    """Exact mean crossing time from the uniform start, by first-step analysis."""
    indptr, indices, absorbing = _walk_inputs(graph, k)
    free = np.flatnonzero(absorbing == 0)
    P = sp.diags(1.0 / graph.degrees) @ graph.adjacency
    M = sp.eye(len(free)) - P[free][:, free]
    T = np.zeros(graph.num_cells)
    T[free] = spla.spsolve(M.tocsc(), np.ones(len(free)))
    return float(T[face_cells(graph, k, 0).cells].mean())


# ---------------------------------------------------------------------------
# energy concentration


QUANTILES = (0.5, 0.9, 0.99)


@dataclass
class EnergyProfile:
    level: int  # level of the underlying solution
    m: int  # coarsening level
    masses: np.ndarray  # nu(w) per level-m cell, canonical order
    reference: float  # mu(w) = (#S)**-m
    curve: dict[float, float]

    @property
    def empty(self) -> bool:
        return len(self.masses) == 0

    def to_dict(self):
        return {
            "schema": "gsc-dw/profile/1",
            "level": self.level,
            "m": self.m,
            "empty": self.empty,
            "reference": self.reference,
            "curve": {repr(q): v for q, v in self.curve.items()},
            "masses": self.masses.tolist(),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantile", "mu_mass"])
        for q, v in self.curve.items():
            w.writerow([repr(q), repr(v)])
        return buf.getvalue()


def concentration(masses, reference, q) -> float:
    """Smallest mu-mass of a set of cells carrying at least a fraction ``q`` of the energy."""
    nu = np.sort(np.asarray(masses, dtype=float))[::-1]
    cum = np.cumsum(nu)
    count = int(np.searchsorted(cum, q * cum[-1] * (1 - 1e-12))) + 1
    return min(count, len(nu)) * reference


def energy_profile(solution: HarmonicSolution, m: int, quantiles=QUANTILES) -> EnergyProfile:
    """Distribute the solution's energy over level-``m`` cells.

    Each edge's energy goes half to the level-m ancestor of each endpoint.
    A zero-energy solution gives an empty profile.
    """
    graph = solution.graph
    spec = graph.spec
    n = graph.level
    if not 0 <= m < n:
        raise ValueError(f"coarsening level must satisfy 0 <= m < {n}")
    reference = float(spec.size) ** -m
    e = EnergyForm(graph).edge_energies(solution.values)
    total = float(np.sum(e))
    if total == 0.0:
        return EnergyProfile(n, m, np.zeros(0), reference, {})
    anc = graph.origins // spec.l ** (n - m)
    side = spec.l**m
    code = anc @ (side ** np.arange(spec.d, dtype=np.int64))
    uniq, owner = np.unique(code, return_inverse=True)
    owner = owner.ravel()
    nu = np.bincount(owner[graph.edges[:, 0]], weights=e / 2, minlength=len(uniq))
    nu += np.bincount(owner[graph.edges[:, 1]], weights=e / 2, minlength=len(uniq))
    nu /= np.sum(nu)
    curve = {q: concentration(nu, reference, q) for q in quantiles}
    return EnergyProfile(n, m, nu, reference, curve)
