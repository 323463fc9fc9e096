"""Level-n cell graphs of a carpet.

Vertices are the ``(#S)**n`` level-n cells, identified by the integer lower
corner of the cell at resolution ``l**n``. Two cells are adjacent when they
share a (d-1)-dimensional facet. Cells are indexed in increasing order of
the mixed-radix code of their origin, which fixes iteration order for
everything downstream.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import BudgetExceededError, SymmetryError
from .gsc_core import CarpetSpec, CubeSymmetry, Word, cell_origin

DEFAULT_BUDGET = 1 << 22


def level_origins(spec: CarpetSpec, n: int) -> np.ndarray:
    """Origins of all words of length ``n`` in lexicographic word order."""
    origins = np.zeros((1, spec.d), dtype=np.int64)
    for _ in range(n):
        origins = (origins[:, None, :] * spec.l + spec.points[None, :, :]).reshape(-1, spec.d)
    return origins


@dataclass(eq=False)
class CellGraph:
    spec: CarpetSpec
    level: int
    origins: np.ndarray  # (N, d), sorted by code
    codes: np.ndarray  # (N,)
    edges: np.ndarray  # (E, 2), a < b, lexicographically sorted

    @property
    def side(self) -> int:
        return self.spec.l**self.level

    @property
    def num_cells(self) -> int:
        return len(self.codes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def index_of(self, origins, missing="raise"):
        """Cell indices of the given origins; ``-1`` for absent ones if ``missing='ignore'``."""
        origins = np.asarray(origins, dtype=np.int64)
        inside = np.all((origins >= 0) & (origins < self.side), axis=-1)
        codes = _codes(np.where(inside[..., None], origins, 0), self.side)
        pos = np.searchsorted(self.codes, codes)
        pos = np.minimum(pos, self.num_cells - 1)
        found = inside & (self.codes[pos] == codes)
        if missing == "raise" and not found.all():
            bad = origins[~found][0] if origins.ndim > 1 else origins
            raise KeyError(f"no level-{self.level} cell with origin {tuple(int(x) for x in bad)}")
        return np.where(found, pos, -1)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        n = self.num_cells
        a, b = self.edges[:, 0], self.edges[:, 1]
        ones = np.ones(2 * len(a))
        return sp.csr_matrix((ones, (np.concatenate([a, b]), np.concatenate([b, a]))), shape=(n, n))

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        return (sp.diags(self.degrees.astype(float)) - self.adjacency).tocsr()

    def touch_edges(self) -> np.ndarray:
        """Pairs of cells whose closed cubes intersect at all."""
        return _neighbor_pairs(self.origins, self.codes, self.side, _touch_offsets(self.spec.d))

    def word(self, index: int) -> Word:
        o = self.origins[index]
        letters = []
        for t in range(self.level):
            letters.append(tuple(int(x) for x in (o // self.spec.l ** (self.level - 1 - t)) % self.spec.l))
        return Word(tuple(letters))

    def header(self) -> dict:
        return {
            "spec_hash": self.spec.spec_hash(),
            "level": self.level,
            "cells": self.num_cells,
            "edges": self.num_edges,
            "d": self.spec.d,
            "l": self.spec.l,
        }

    def adjacency_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.spec.d
        w.writerow([f"cell_{k + 1}" for k in range(d)] + [f"neighbor_{k + 1}" for k in range(d)])
        for a, b in self.edges:
            w.writerow([*self.origins[a].tolist(), *self.origins[b].tolist()])
        return buf.getvalue()


def _codes(origins, side):
    d = origins.shape[-1]
    return origins @ (side ** np.arange(d, dtype=np.int64))


def _touch_offsets(d):
    out = []
    for off in itertools.product((-1, 0, 1), repeat=d):
        nz = [x for x in off if x]
        if nz and nz[0] > 0:
            out.append(off)
    return out


def _neighbor_pairs(origins, codes, side, offsets):
    d = origins.shape[1]
    weights = side ** np.arange(d, dtype=np.int64)
    parts = []
    for off in offsets:
        off = np.asarray(off, dtype=np.int64)
        q = origins + off
        ok = np.all((q >= 0) & (q < side), axis=1)
        a = np.flatnonzero(ok)
        qc = q[ok] @ weights
        pos = np.minimum(np.searchsorted(codes, qc), len(codes) - 1)
        hit = codes[pos] == qc
        a, b = a[hit], pos[hit]
        parts.append(np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1))
    pairs = np.concatenate(parts) if parts else np.zeros((0, 2), np.int64)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return pairs[order]


def build_cell_graph(spec: CarpetSpec, n: int, budget: int = DEFAULT_BUDGET) -> CellGraph:
    if n < 1:
        raise ValueError(f"level must be >= 1, got {n}")
    cells = spec.size**n
    if cells > budget:
        raise BudgetExceededError(cells, budget, n)
    side = spec.l**n
    if spec.d * np.log2(float(side)) >= 62:
        raise BudgetExceededError(cells, budget, n)
    origins = level_origins(spec, n)
    codes = _codes(origins, side)
    order = np.argsort(codes, kind="stable")
    origins, codes = origins[order], codes[order]
    origins.flags.writeable = False
    codes.flags.writeable = False
    unit = [tuple(int(j == k) for j in range(spec.d)) for k in range(spec.d)]
    edges = _neighbor_pairs(origins, codes, side, unit)
    edges.flags.writeable = False
    return CellGraph(spec, n, origins, codes, edges)


@dataclass(frozen=True, eq=False)
class FaceSet:
    k: int  # 1-based coordinate
    side: int  # 0 or 1
    cells: np.ndarray

    def __len__(self):
        return len(self.cells)


def face_cells(graph: CellGraph, k: int, side: int) -> FaceSet:
    if not 1 <= k <= graph.spec.d:
        raise ValueError(f"coordinate must be in 1..{graph.spec.d}, got {k}")
    if side not in (0, 1):
        raise ValueError(f"side must be 0 or 1, got {side}")
    target = 0 if side == 0 else graph.side - 1
    cells = np.flatnonzero(graph.origins[:, k - 1] == target)
    cells.flags.writeable = False
    return FaceSet(k, side, cells)


def subcell_embedding(spec: CarpetSpec, w: Word, n_inner: int, outer: CellGraph | None = None) -> np.ndarray:
    """Level-``(|w| + n_inner)`` indices of the cells ``w·v`` for each level-``n_inner`` cell ``v``.

    The result is ordered like the cells of ``build_cell_graph(spec, n_inner)``.
    """
    m = w.level
    inner = level_origins(spec, n_inner)
    inner = inner[np.argsort(_codes(inner, spec.l**n_inner), kind="stable")]
    if m == 0:
        return np.arange(len(inner))
    if outer is None:
        outer = build_cell_graph(spec, m + n_inner, budget=max(DEFAULT_BUDGET, spec.size ** (m + n_inner)))
    if outer.level != m + n_inner:
        raise ValueError(f"outer graph has level {outer.level}, expected {m + n_inner}")
    base = np.array(cell_origin(w, spec), dtype=np.int64)
    return outer.index_of(base * spec.l**n_inner + inner)


def apply_symmetry_to_graph(graph: CellGraph, g: CubeSymmetry) -> np.ndarray:
    """Permutation ``p`` with ``p[i]`` the index of the image of cell ``i`` under ``g``."""
    image = g.apply(graph.origins, graph.side)
    idx = graph.index_of(image, missing="ignore")
    if np.any(idx < 0):
        n = int(np.argmax(idx < 0))
        witness = {"symmetry": g.to_dict(), "cell": graph.origins[n].tolist(), "image": image[n].tolist()}
        raise SymmetryError("symmetry does not preserve the cell set", witness)
    return idx


def export_graph(graph: CellGraph, directory, stem=None):
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or f"graph_L{graph.level}"
    (directory / f"{stem}.json").write_text(json.dumps(graph.header(), indent=2, sort_keys=True) + "\n")
    (directory / f"{stem}.csv").write_text(graph.adjacency_csv())
    return directory / f"{stem}.json", directory / f"{stem}.csv"
