import copy
import csv
import io
import itertools
import json
import math
import os
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from gsc_dw import kernels
from gsc_dw.dirichlet import solve_face_problem
from gsc_dw.errors import WalkGuardError
from gsc_dw.graph_approx import build_cell_graph, face_cells
from gsc_dw.gsc_core import gen_counterexample, menger_sponge, sierpinski_carpet
from gsc_dw.scaling import (
    ScalingReport,
    concentration,
    dw_witness,
    energy_profile,
    expected_crossing_time,
    random_walk_crossing,
    resistance_sequence,
)

from conftest import load_fixture


def first_step_oracle_sc1():
    """Mean crossing time on the SC level-1 ring, in exact arithmetic.

    The graph is rebuilt from the 3x3 grid by hand; unknowns are the mean
    absorption times of the five cells off the right column.
    """
    cells = [(i, j) for i in range(3) for j in range(3) if (i, j) != (1, 1)]
    nbrs = {c: [e for e in cells if abs(c[0] - e[0]) + abs(c[1] - e[1]) == 1] for c in cells}
    free = [c for c in cells if c[0] != 2]
    idx = {c: n for n, c in enumerate(free)}
    size = len(free)
    # T(c) - mean over neighbours T = 1
    a = [[Fraction(0)] * size + [Fraction(1)] for _ in range(size)]
    for c in free:
        r = idx[c]
        a[r][r] += 1
        for e in nbrs[c]:
            if e in idx:
                a[r][idx[e]] -= Fraction(1, len(nbrs[c]))
    for col in range(size):
        piv = next(r for r in range(col, size) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        for r in range(size):
            if r != col and a[r][col] != 0:
                f = a[r][col] / a[col][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    t = {c: a[idx[c]][size] / a[idx[c]][idx[c]] for c in free}
    left = [c for c in cells if c[0] == 0]
    return sum(t[c] for c in left) / len(left)


@pytest.fixture(scope="module")
def sc_report():
    return resistance_sequence(sierpinski_carpet(), 4)


# reports


def test_sc_report_matches_frozen_energies(sc_report):
    frozen = load_fixture("dense_energies.json")["sc"]["energies"]
    assert sc_report.energies[0] == 1.0
    for n, e in zip(sc_report.levels, sc_report.energies):
        assert e == pytest.approx(frozen[str(n)], rel=1e-8)
    assert sc_report.ratios[0] == pytest.approx(frozen["2"] / frozen["1"], rel=1e-8)


def test_ratio_estimate_consistency(sc_report):
    r = sc_report
    for ratio, dw, margin in zip(r.ratios, r.dw_estimates, r.margins):
        assert abs(r.num_cells * r.l**-dw - ratio) <= 1e-12 * ratio
        assert math.log(r.num_cells / ratio, r.l) == dw
        assert (margin > 0) == (dw > 2)


def test_glue_gaps_and_identity(sc_report):
    assert all(g > 0 for g in sc_report.glue_gaps)
    assert all(g > 0 for g in sc_report.two_step_gaps)
    assert len(sc_report.two_step_gaps) == 2
    assert max(sc_report.scaling_identity_errors) <= 1e-12
    assert sc_report.glued_energies[-1] is None


def test_witness_passes_on_sc(sc_report):
    v = dw_witness(sc_report)
    assert v.passed and v.reasons == []
    assert v.min_margin == min(sc_report.margins) > 0
    assert sc_report.ratios_monotone
    assert 2 < sc_report.dw_regression < 2.5


def test_witness_is_strict():
    bound = 8 / 9
    rep = ScalingReport(8, 3, [1, 2], [1.0, bound], glued_energies=[bound, None])
    assert rep.ratios == [bound] and rep.margins == [0.0]
    v = dw_witness(rep)
    assert not v.passed and len(v.reasons) == 2


def test_witness_needs_two_levels():
    with pytest.raises(ValueError):
        dw_witness(ScalingReport(8, 3, [1], [1.0], glued_energies=[None]))


def test_budget_gives_partial_report():
    rep = resistance_sequence(sierpinski_carpet(), 4, budget=100)
    assert not rep.complete and rep.error_kind == "budget"
    assert rep.levels == [1, 2] and "level 3" in rep.error
    with pytest.raises(ValueError):
        dw_witness(rep)


def test_face_direction_does_not_matter():
    for spec, n in ((sierpinski_carpet(), 3), (menger_sponge(), 2)):
        e1 = resistance_sequence(spec, n, two_step=False).energies
        for k in range(2, spec.d + 1):
            ek = resistance_sequence(spec, n, k=k, two_step=False).energies
            np.testing.assert_allclose(ek, e1, rtol=1e-10)


def test_counterexample_level1_frozen():
    rep = resistance_sequence(gen_counterexample(3, 2), 1)
    frozen = load_fixture("margins.json")["counterexample:3,2"]
    assert rep.energies[0] == pytest.approx(frozen["energies"][0], rel=1e-10)


def test_serialization(sc_report):
    data = json.loads(json.dumps(sc_report.to_dict()))
    assert data["schema"] == "gsc-dw/scaling/1"
    assert data["spec_hash"] == sierpinski_carpet().spec_hash()
    rows = list(csv.reader(io.StringIO(sc_report.to_csv())))
    assert rows[0] == ["level", "energy", "ratio", "dw_estimate", "margin", "glue_gap"]
    assert len(rows) == 5
    assert float(rows[1][4]) == sc_report.margins[0]


# walks


def test_exact_crossing_time_sc1():
    assert first_step_oracle_sc1() == Fraction(25, 3)
    g = build_cell_graph(sierpinski_carpet(), 1)
    assert expected_crossing_time(g) == pytest.approx(25 / 3, rel=1e-12)


def test_walk_from_absorbing_face_takes_no_steps():
    g = build_cell_graph(sierpinski_carpet(), 1)
    start = int(face_cells(g, 1, 1).cells[0])
    stats = random_walk_crossing(sierpinski_carpet(), 1, 50, seed=1, starts=start)
    assert stats.mean == 0.0 and stats.stderr == 0.0


def test_walk_sc1_matches_oracle():
    stats = random_walk_crossing(sierpinski_carpet(), 1, 20_000, seed=99)
    assert abs(stats.mean - 25 / 3) <= 3 * stats.stderr
    assert stats.mean > 0


def test_walk_reproducible_and_thread_independent():
    sc = sierpinski_carpet()
    a = random_walk_crossing(sc, 2, 3000, seed=7)
    b = random_walk_crossing(sc, 2, 3000, seed=7, threads=4)
    np.testing.assert_array_equal(a.steps, b.steps)
    assert a.mean == b.mean
    c = random_walk_crossing(sc, 2, 3000, seed=8)
    assert not np.array_equal(a.steps, c.steps)


def test_backends_agree():
    sc = sierpinski_carpet()
    py = random_walk_crossing(sc, 2, 2000, seed=4, backend="python")
    assert py.backend == "python"
    native = random_walk_crossing(sc, 2, 2000, seed=4)
    assert native.backend == kernels.BACKEND
    np.testing.assert_array_equal(py.steps, native.steps)


def test_walk_guard():
    for backend in {"python", kernels.BACKEND}:
        with pytest.raises(WalkGuardError):
            random_walk_crossing(sierpinski_carpet(), 2, 100, seed=1, max_steps=2, backend=backend)


def test_walk_validation():
    with pytest.raises(ValueError):
        random_walk_crossing(sierpinski_carpet(), 1, 0, seed=1)
    with pytest.raises(ValueError):
        random_walk_crossing(sierpinski_carpet(), 1, 10, seed=1, backend="fortran")


# energy profiles


@pytest.fixture(scope="module")
def sc3():
    return solve_face_problem(build_cell_graph(sierpinski_carpet(), 3))


def test_profile_root(sc3):
    prof = energy_profile(sc3, 0)
    assert prof.masses.tolist() == [1.0]
    assert prof.reference == 1.0
    assert all(v == 1.0 for v in prof.curve.values())


def test_profile_empty_for_constant(sc3):
    flat = copy.copy(sc3)
    flat.values = np.full_like(sc3.values, 0.25)
    prof = energy_profile(flat, 1)
    assert prof.empty and prof.curve == {}
    assert prof.to_dict()["empty"] is True


def test_profile_attribution_by_hand(sc3):
    g = sc3.graph
    prof = energy_profile(sc3, 1)
    anc = {}
    for cell in sierpinski_carpet().cells():
        anc[cell] = 0.0
    u = sc3.values
    for a, b in g.edges:
        e = (u[a] - u[b]) ** 2
        anc[tuple((g.origins[a] // 9).tolist())] += e / 2
        anc[tuple((g.origins[b] // 9).tolist())] += e / 2
    total = sum(anc.values())
    # canonical order of level-1 cells is by code, i.e. coordinate 1 fastest
    order = sorted(anc, key=lambda c: c[0] + 3 * c[1])
    np.testing.assert_allclose(prof.masses, [anc[c] / total for c in order], rtol=1e-12)
    assert prof.masses.sum() == pytest.approx(1.0, abs=1e-14)
    # the profile respects the reflection fixing coordinate 1
    for c in order:
        mirror = (c[0], 2 - c[1])
        assert anc[c] == pytest.approx(anc[mirror], rel=1e-12)


def test_profile_bad_level(sc3):
    for m in (-1, 3):
        with pytest.raises(ValueError):
            energy_profile(sc3, m)


def test_concentration():
    assert concentration([0.5, 0.25, 0.25], 1 / 3, 0.5) == pytest.approx(1 / 3)
    assert concentration([0.5, 0.25, 0.25], 1 / 3, 0.75) == pytest.approx(2 / 3)
    assert concentration([0.25] * 4, 0.25, 0.9) == 1.0
    for masses in itertools.permutations([0.4, 0.3, 0.2, 0.1]):
        assert concentration(masses, 0.25, 0.65) == 0.5


def test_fallback_selected_by_environment():
    env = dict(os.environ, GSC_DW_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from gsc_dw import kernels; print(kernels.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True).stdout.strip()
    assert out == "python"
