"""Carpet specifications, cube symmetries and the defining axioms.

A carpet is given by a triple ``(d, l, S)``: the unit cube is cut into
``l**d`` congruent sub-cubes and ``S`` lists the integer indices of those
kept. Indices are stored as an ``(#S, d)`` integer array sorted by the
mixed-radix code ``sum(i_k * l**(k-1))``, so coordinate 1 is the fastest
varying digit.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .errors import SpecError

ND_METHODS = ("ND_m1", "ND_2", "NDF")


def encode(points, l):
    """Mixed-radix code of integer tuples (last axis is the coordinate)."""
    points = np.asarray(points, dtype=np.int64)
    d = points.shape[-1]
    weights = l ** np.arange(d, dtype=np.int64)
    return points @ weights


def decode(codes, l, d):
    codes = np.asarray(codes, dtype=np.int64)
    out = np.empty(codes.shape + (d,), dtype=np.int64)
    rest = codes.copy()
    for k in range(d):
        out[..., k] = rest % l
        rest //= l
    return out


class CarpetSpec:
    """The triple ``(d, l, S)`` defining a candidate carpet.

    Construction enforces the structural invariants only: ``d >= 2``,
    ``l >= 3``, entries in range, no duplicates, and ``S`` a non-empty
    proper subset of the full grid. The four axioms are checked separately
    by :func:`validate_spec`.
    """

    __slots__ = ("d", "l", "points", "codes", "_grid")

    def __init__(self, d: int, l: int, cells: Iterable[Sequence[int]]):
        if int(d) != d or d < 2:
            raise SpecError(f"field 'd': dimension must be an integer >= 2, got {d!r}")
        if int(l) != l or l < 3:
            raise SpecError(f"field 'l': subdivision factor must be an integer >= 3, got {l!r}")
        d, l = int(d), int(l)
        if isinstance(cells, np.ndarray) and cells.ndim == 2 and cells.shape[1] == d:
            pts = cells.astype(np.int64)
        else:
            rows = [tuple(c) for c in cells]
            for row in rows:
                if len(row) != d:
                    raise SpecError(f"field 'S': tuple {row} has length {len(row)}, expected {d}")
                for x in row:
                    if int(x) != x:
                        raise SpecError(f"field 'S': tuple {row} has non-integer entry {x!r}")
            pts = np.array(rows, dtype=np.int64).reshape(-1, d)
        if len(pts) == 0:
            raise SpecError("field 'S': cell set is empty")
        bad = np.any((pts < 0) | (pts > l - 1), axis=1)
        if bad.any():
            row = tuple(int(x) for x in pts[np.argmax(bad)])
            raise SpecError(f"field 'S': tuple {row} has an entry outside [0, {l - 1}]")
        codes = encode(pts, l)
        uniq, first, counts = np.unique(codes, return_index=True, return_counts=True)
        if np.any(counts > 1):
            dup = tuple(int(x) for x in pts[first[np.argmax(counts > 1)]])
            raise SpecError(f"field 'S': duplicate tuple {dup}")
        if len(uniq) == l**d:
            raise SpecError(f"field 'S': S must be a proper subset of {{0..{l - 1}}}^{d}")
        self.d = d
        self.l = l
        self.codes = uniq
        self.codes.flags.writeable = False
        self.points = decode(uniq, l, d)
        self.points.flags.writeable = False
        self._grid = None

    @property
    def size(self) -> int:
        return len(self.codes)

    @property
    def grid(self) -> np.ndarray:
        """Boolean membership array of shape ``(l,) * d``; axis k is coordinate k+1."""
        if self._grid is None:
            g = np.zeros((self.l,) * self.d, dtype=bool)
            g[tuple(self.points.T)] = True
            g.flags.writeable = False
            self._grid = g
        return self._grid

    def contains(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.int64)
        inside = np.all((points >= 0) & (points < self.l), axis=-1)
        out = np.zeros(points.shape[:-1], dtype=bool)
        out[inside] = self.grid[tuple(points[inside].T)]
        return out

    def cells(self) -> list[tuple[int, ...]]:
        return [tuple(int(x) for x in p) for p in self.points]

    def __eq__(self, other):
        if not isinstance(other, CarpetSpec):
            return NotImplemented
        return self.d == other.d and self.l == other.l and np.array_equal(self.codes, other.codes)

    def __hash__(self):
        return hash((self.d, self.l, self.codes.tobytes()))

    def __repr__(self):
        return f"CarpetSpec(d={self.d}, l={self.l}, #S={self.size})"

    # serialization

    def to_dict(self) -> dict:
        return {"d": self.d, "l": self.l, "S": [list(c) for c in self.cells()]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def spec_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data) -> "CarpetSpec":
        if not isinstance(data, dict):
            raise SpecError("top level: expected a JSON object with keys 'd', 'l', 'S'")
        for key in ("d", "l", "S"):
            if key not in data:
                raise SpecError(f"field '{key}': missing")
        if not isinstance(data["S"], list):
            raise SpecError("field 'S': expected a list of integer lists")
        for n, row in enumerate(data["S"]):
            if not isinstance(row, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in row):
                raise SpecError(f"field 'S[{n}]': expected a list of integers, got {row!r}")
        for key in ("d", "l"):
            if not isinstance(data[key], int) or isinstance(data[key], bool):
                raise SpecError(f"field '{key}': expected an integer, got {data[key]!r}")
        return cls(data["d"], data["l"], data["S"])

    @classmethod
    def from_json(cls, text: str) -> "CarpetSpec":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(data)


def sierpinski_carpet() -> CarpetSpec:
    return CarpetSpec(2, 3, [(i, j) for i in range(3) for j in range(3) if (i, j) != (1, 1)])


def menger_sponge() -> CarpetSpec:
    cells = [c for c in itertools.product(range(3), repeat=3) if sum(x == 1 for x in c) <= 1]
    return CarpetSpec(3, 3, cells)


# ---------------------------------------------------------------------------
# cube symmetries


@dataclass(frozen=True)
class CubeSymmetry:
    """Signed permutation of the cube ``[0, 1]^d``.

    Acting on an index ``i`` in ``{0..side-1}^d``, output coordinate ``k``
    is ``i[perm[k]]``, replaced by ``side - 1 - i[perm[k]]`` when
    ``flips[k]`` is set. ``perm`` is 0-based.
    """

    perm: tuple[int, ...]
    flips: tuple[bool, ...]

    @property
    def d(self) -> int:
        return len(self.perm)

    @classmethod
    def identity(cls, d):
        return cls(tuple(range(d)), (False,) * d)

    @classmethod
    def reflection(cls, d, coords):
        """Reflection in the given 0-based coordinates."""
        return cls(tuple(range(d)), tuple(k in coords for k in range(d)))

    def apply(self, points, side):
        points = np.asarray(points, dtype=np.int64)
        out = points[..., list(self.perm)]
        flip = np.array(self.flips, dtype=bool)
        if flip.any():
            out = np.where(flip, side - 1 - out, out)
        return out

    def compose(self, other: "CubeSymmetry") -> "CubeSymmetry":
        """``self ∘ other``: apply ``other`` first."""
        perm = tuple(other.perm[p] for p in self.perm)
        flips = tuple(self.flips[k] ^ other.flips[self.perm[k]] for k in range(self.d))
        return CubeSymmetry(perm, flips)

    def inverse(self) -> "CubeSymmetry":
        inv = [0] * self.d
        flips = [False] * self.d
        for k, p in enumerate(self.perm):
            inv[p] = k
            flips[p] = self.flips[k]
        return CubeSymmetry(tuple(inv), tuple(flips))

    def face_image(self, k, side):
        """Image of the face ``{x_k = side}`` (k 0-based) as ``(k', side')``."""
        kk = self.perm.index(k)
        return kk, side ^ int(self.flips[kk])

    def to_dict(self):
        return {"perm": [p + 1 for p in self.perm], "flips": list(self.flips)}


def enumerate_cube_group(d: int) -> list[CubeSymmetry]:
    """All ``2**d * d!`` symmetries of the d-cube, identity first."""
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be >= 1, got {d!r}")
    return [
        CubeSymmetry(perm, flips)
        for perm in itertools.permutations(range(d))
        for flips in itertools.product((False, True), repeat=d)
    ]


def face_subgroup(d: int, k: int = 0) -> list[CubeSymmetry]:
    """Reflections in every coordinate except ``k`` (0-based).

    For ``k = 0`` this is the group of reflections fixing the first
    coordinate, which preserves each of the two faces ``{x_1 = 0}`` and
    ``{x_1 = 1}``.
    """
    others = [j for j in range(d) if j != k]
    out = []
    for bits in itertools.product((False, True), repeat=d - 1):
        out.append(CubeSymmetry.reflection(d, {j for j, b in zip(others, bits) if b}))
    return out


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class Verdict:
    name: str
    passed: bool
    witness: dict | None = None
    detail: str = ""

    def __post_init__(self):
        if not self.passed and self.witness is None:
            raise ValueError(f"failing verdict {self.name} needs a witness")

    def __bool__(self):
        return self.passed

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "witness": self.witness, "detail": self.detail}


def _tup(p):
    return [int(x) for x in p]


def check_symmetry(spec: CarpetSpec) -> Verdict:
    for g in enumerate_cube_group(spec.d):
        image = g.apply(spec.points, spec.l)
        bad = ~spec.contains(image)
        if bad.any():
            n = int(np.argmax(bad))
            return Verdict(
                "GSC1",
                False,
                {"symmetry": g.to_dict(), "cell": _tup(spec.points[n]), "image": _tup(image[n])},
                "cell set is not invariant under the cube group",
            )
    return Verdict("GSC1", True)


def check_connectedness(spec: CarpetSpec) -> Verdict:
    """Connectivity of the union of the closed kept cubes.

    Two closed cubes meet iff their indices differ by at most one in every
    coordinate, so this is connectivity under the full ``3**d`` stencil.
    """
    labels, count = ndimage.label(spec.grid, structure=np.ones((3,) * spec.d, dtype=bool))
    if count <= 1:
        return Verdict("GSC2", True, detail=f"{count} component")
    lab = labels[tuple(spec.points.T)]
    a = spec.points[int(np.argmax(lab == lab[0]))]
    b = spec.points[int(np.argmax(lab != lab[0]))]
    return Verdict(
        "GSC2", False, {"cell_a": _tup(a), "cell_b": _tup(b), "components": int(count)},
        f"{count} connected components",
    )


def check_border(spec: CarpetSpec) -> Verdict:
    border = np.zeros((spec.l, spec.d), dtype=np.int64)
    border[:, 0] = np.arange(spec.l)
    have = spec.contains(border)
    if have.all():
        return Verdict("GSC4", True)
    k = int(np.argmax(~have))
    return Verdict("GSC4", False, {"missing": _tup(border[k])}, "bottom edge not contained in Q1")


# ---------------------------------------------------------------------------
# non-diagonality


def _shifted(padded, offset, d):
    """View of a 1-padded boolean grid shifted by ``offset`` (in {-1,0,1}^d)."""
    sl = tuple(slice(1 + o, padded.shape[k] - 1 + o) for k, o in enumerate(offset))
    return padded[sl]


def monotone_path(spec: CarpetSpec, i, j):
    """A shortest unit-step lattice path from ``i`` to ``j`` inside ``S``, or None.

    Only meaningful for ``i``, ``j`` whose cubes touch, where the path moves
    once along each coordinate in which they differ.
    """
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    diff = [k for k in range(spec.d) if i[k] != j[k]]
    if not (spec.contains(i) and spec.contains(j)):
        return None
    for order in itertools.permutations(diff):
        path = [i.copy()]
        cur = i.copy()
        ok = True
        for k in order:
            cur = cur.copy()
            cur[k] = j[k]
            if not spec.contains(cur):
                ok = False
                break
            path.append(cur)
        if ok:
            return [_tup(p) for p in path]
    return None


def _check_ndf(spec: CarpetSpec) -> Verdict:
    d = spec.d
    padded = np.pad(spec.grid, 1, constant_values=False)
    for delta in itertools.product((-1, 0, 1), repeat=d):
        nz = [k for k in range(d) if delta[k] != 0]
        if len(nz) < 2 or delta[nz[0]] < 0:
            continue  # unit steps are trivially paths; each unordered pair once
        # reach[mask]: cell i can walk to i + delta|mask through S using the
        # coordinates in mask, one unit step each.
        reach = {0: spec.grid}
        for size in range(1, len(nz) + 1):
            for sub in itertools.combinations(range(len(nz)), size):
                mask = sum(1 << s for s in sub)
                off = [0] * d
                for s in sub:
                    off[nz[s]] = delta[nz[s]]
                acc = np.zeros_like(spec.grid)
                for s in sub:
                    acc |= reach[mask & ~(1 << s)]
                reach[mask] = acc & _shifted(padded, off, d)
        full = (1 << len(nz)) - 1
        pairs = spec.grid & _shifted(padded, delta, d)
        bad = pairs & ~reach[full]
        if bad.any():
            i = np.array(np.unravel_index(int(np.argmax(bad)), bad.shape))
            return Verdict(
                "GSC3", False,
                {"method": "NDF", "cell_a": _tup(i), "cell_b": _tup(i + np.array(delta))},
                "touching cells without a monotone lattice path in S",
            )
    return Verdict("GSC3", True, detail="NDF")


@lru_cache(maxsize=None)
def _hypercube_edges(d):
    return [(a, a | (1 << k)) for a in range(1 << d) for k in range(d) if not a & (1 << k)]


def block_connected(mask: int, d: int) -> bool:
    """Whether the sub-cubes of a 2^d block selected by ``mask`` are facet-connected.

    Bit ``sum(eta_k << k)`` selects the sub-cube at offset ``eta``. Empty
    blocks count as connected.
    """
    verts = [v for v in range(1 << d) if mask >> v & 1]
    if not verts:
        return True
    seen = {verts[0]}
    stack = [verts[0]]
    while stack:
        v = stack.pop()
        for k in range(d):
            w = v ^ (1 << k)
            if mask >> w & 1 and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(verts)


def _nd_blocks(spec: CarpetSpec, level: int, exhaustive: bool = False) -> Verdict:
    """Interior connectivity of Q1 inside every 2^d block of level-``level`` cells.

    A level-``level`` cell ``c`` lies in Q1 iff its level-1 ancestor
    ``c // l**(level-1)`` is in S. Interior connectivity of a union of
    closed cubes is facet connectivity. Block indices along one coordinate
    whose two columns have the same pair of ancestors produce identical
    blocks, so unless ``exhaustive`` only one representative per pair is
    visited.
    """
    d, l = spec.d, spec.l
    side = l**level
    scale = l ** (level - 1)
    idx = np.arange(1, side)
    if exhaustive:
        reps = idx
    else:
        keys = (idx - 1) // scale * l + idx // scale
        _, first = np.unique(keys, return_index=True)
        reps = idx[np.sort(first)]
    blocks = np.stack(np.meshgrid(*([reps] * d), indexing="ij"), axis=-1).reshape(-1, d)
    masks = np.zeros(len(blocks), dtype=np.int64)
    for bit, eta in enumerate(itertools.product((0, 1), repeat=d)):
        eta = np.array(eta[::-1], dtype=np.int64)  # bit b <-> eta_k = (b >> k) & 1
        cells = blocks - 1 + eta
        masks |= spec.contains(cells // scale).astype(np.int64) << bit
    uniq = np.unique(masks)
    ok = {int(m): block_connected(int(m), d) for m in uniq}
    good = np.array([ok[int(m)] for m in masks]) if len(masks) else np.ones(0, bool)
    name = "ND_2" if level == 2 else "ND_m1" if level == 1 else f"ND_{level}"
    if good.all():
        return Verdict("GSC3", True, detail=f"{name}: {len(blocks)} blocks")
    n = int(np.argmax(~good))
    members = [
        _tup(blocks[n] - 1 + np.array(eta[::-1]))
        for b, eta in enumerate(itertools.product((0, 1), repeat=d))
        if masks[n] >> b & 1
    ]
    return Verdict(
        "GSC3", False,
        {"method": name, "block_index": _tup(blocks[n]), "cells": members},
        "block interior is disconnected",
    )


def check_nondiagonality(spec: CarpetSpec, method: str = "ND_2", exhaustive: bool = False) -> Verdict:
    if method == "NDF":
        return _check_ndf(spec)
    if method == "ND_2":
        return _nd_blocks(spec, 2, exhaustive)
    if method == "ND_m1":
        return _nd_blocks(spec, 1, exhaustive)
    raise ValueError(f"unknown non-diagonality method {method!r}; expected one of {ND_METHODS}")


# ---------------------------------------------------------------------------
# aggregate report, BB99, counterexamples


@dataclass
class ValidationReport:
    spec: CarpetSpec
    symmetry: Verdict
    connectedness: Verdict
    nondiagonality: Verdict
    border: Verdict
    bb99: Verdict
    nondiagonality_method: str = "ND_2"

    @property
    def passed(self) -> bool:
        return all((self.symmetry, self.connectedness, self.nondiagonality, self.border))

    def failures(self) -> list[Verdict]:
        return [v for v in (self.symmetry, self.connectedness, self.nondiagonality, self.border) if not v]

    def to_dict(self):
        return {
            "spec": {"d": self.spec.d, "l": self.spec.l, "size": self.spec.size, "hash": self.spec.spec_hash()},
            "GSC1": self.symmetry.to_dict(),
            "GSC2": self.connectedness.to_dict(),
            "GSC3": self.nondiagonality.to_dict(),
            "GSC4": self.border.to_dict(),
            "nondiagonality_method": self.nondiagonality_method,
            "bb99": self.bb99.to_dict(),
            "passed": self.passed,
        }


def validate_spec(spec: CarpetSpec, method: str = "ND_2") -> ValidationReport:
    return ValidationReport(
        spec=spec,
        symmetry=check_symmetry(spec),
        connectedness=check_connectedness(spec),
        nondiagonality=check_nondiagonality(spec, method),
        border=check_border(spec),
        bb99=bb99_condition(spec),
        nondiagonality_method=method,
    )


def slab_counts(spec: CarpetSpec, axis: int = 0) -> list[int]:
    """``#{i in S : i[axis] = j}`` for each ``j``."""
    return np.bincount(spec.points[:, axis], minlength=spec.l).tolist()


def bb99_condition(spec: CarpetSpec) -> Verdict:
    """Some slab ``i_1 = j`` (j >= 1) has a different count than ``i_1 = 0``."""
    c = slab_counts(spec, 0)
    if any(cj != c[0] for cj in c[1:]):
        return Verdict("BB99", True, {"slab_counts": c})
    return Verdict("BB99", False, {"slab_counts": c}, "all slab counts equal")


def counterexample_mask(d: int, l_param: int) -> np.ndarray:
    """Membership grid of the family violating the slab-count condition."""
    side = 2 * l_param * d
    axes = np.meshgrid(*([np.arange(side)] * d), indexing="ij")
    a = np.sort(np.stack([np.abs(2 * x - side + 1) for x in axes], axis=-1), axis=-1)
    keep = np.ones((side,) * d, dtype=bool)
    for j in range(1, 2 * l_param, 2):
        target = j + 2 * l_param * np.arange(d)
        keep &= ~np.all(a == target, axis=-1)
    return keep


def gen_counterexample(d: int, l_param: int) -> CarpetSpec:
    if d < 3 or l_param < 2:
        raise ValueError(f"construction needs d >= 3 and l >= 2, got d={d}, l={l_param}")
    keep = counterexample_mask(d, l_param)
    return CarpetSpec(d, 2 * l_param * d, np.argwhere(keep))


# ---------------------------------------------------------------------------
# words


@dataclass(frozen=True)
class Word:
    letters: tuple[tuple[int, ...], ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple(tuple(int(x) for x in a) for a in self.letters))

    @property
    def level(self) -> int:
        return len(self.letters)

    def check(self, spec: CarpetSpec):
        for a in self.letters:
            if len(a) != spec.d or not spec.contains(np.array(a)):
                raise SpecError(f"letter {a} is not in S")
        return self

    def __add__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)


def cell_origin(w: Word, spec: CarpetSpec) -> tuple[int, ...]:
    """Integer lower corner of the cell ``F_w([0,1]^d)`` at resolution ``l**|w|``."""
    w.check(spec)
    origin = np.zeros(spec.d, dtype=np.int64)
    for a in w.letters:
        origin = origin * spec.l + np.array(a, dtype=np.int64)
    return tuple(int(x) for x in origin)


# ---------------------------------------------------------------------------
# enumeration of small symmetric specs


def cube_orbits(d: int, l: int) -> list[np.ndarray]:
    """Orbits of the cube group on ``{0..l-1}^d``, as arrays of codes."""
    pts = decode(np.arange(l**d), l, d)
    images = np.stack([encode(g.apply(pts, l), l) for g in enumerate_cube_group(d)])
    rep = images.min(axis=0)
    return [np.flatnonzero(rep == r) for r in np.unique(rep)]


def symmetric_specs(d: int, l: int, connected=True, border=True):
    """Every cube-invariant proper cell set, optionally filtered by GSC2/GSC4."""
    orbits = cube_orbits(d, l)
    for bits in itertools.product((False, True), repeat=len(orbits)):
        chosen = [o for o, b in zip(orbits, bits) if b]
        if not chosen or all(bits):
            continue
        codes = np.concatenate(chosen)
        spec = CarpetSpec(d, l, decode(codes, l, d))
        if border and not check_border(spec):
            continue
        if connected and not check_connectedness(spec):
            continue
        yield spec
