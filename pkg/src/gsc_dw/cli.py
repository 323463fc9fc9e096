"""Command line front end.

Exit codes: 0 ok, 1 checked negative (an axiom or witness fails),
2 usage or parse error, 3 cell budget exceeded, 4 numerical failure.

Usage:
    gsc-dw validate --builtin sc
    gsc-dw generate --counterexample 3,2 -o s32.json
    gsc-dw dw --builtin menger --levels 3
    gsc-dw walk --builtin sc --level 2 --trials 100000 --seed 7
    gsc-dw profile --builtin sc --level 5 --coarsen 2
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernels
from .dirichlet import DEFAULT_TOL, solve_face_problem
from .errors import BudgetExceededError, ConvergenceError, IsolatedRegionError, SpecError, WalkGuardError
from .graph_approx import DEFAULT_BUDGET, build_cell_graph, export_graph
from .gsc_core import CarpetSpec, gen_counterexample, menger_sponge, sierpinski_carpet, validate_spec
from .scaling import dw_witness, energy_profile, random_walk_crossing, resistance_sequence

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_RESOURCE, EXIT_NUMERIC = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def builtin_spec(name: str) -> CarpetSpec:
    if name == "sc":
        return sierpinski_carpet()
    if name == "menger":
        return menger_sponge()
    if name.startswith("counterexample:"):
        d, l = _pair(name.split(":", 1)[1])
        return gen_counterexample(d, l)
    raise UsageError(f"unknown builtin {name!r}; expected sc, menger or counterexample:d,l")


def _pair(text):
    try:
        d, l = (int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"expected 'd,l', got {text!r}") from None
    return d, l


def load_spec(args) -> CarpetSpec:
    path = args.spec or getattr(args, "spec_path", None)
    if path and args.builtin:
        raise UsageError("give either a spec file or --builtin, not both")
    if args.builtin:
        try:
            return builtin_spec(args.builtin)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if not path:
        raise UsageError("a spec source is required: --spec PATH or --builtin NAME")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    try:
        return CarpetSpec.from_json(text)
    except SpecError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x).__name__)


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def write_manifest(out: Path, args, spec: CarpetSpec | None) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema": "gsc-dw/manifest/1",
        "command": args.command,
        "config": _config(args),
        "spec_hash": spec.spec_hash() if spec is not None else None,
        "spec": {"d": spec.d, "l": spec.l, "size": spec.size} if spec is not None else None,
        "versions": {
            "gsc_dw": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "kernel_backend": kernels.BACKEND,
        },
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    path = out / f"{args.command}_manifest.json"
    path.write_text(_dump(manifest))
    return path


def _formats(args):
    fmts = {f.strip() for f in args.format.split(",") if f.strip()}
    bad = fmts - {"json", "csv"}
    if bad:
        raise UsageError(f"unknown output format(s): {', '.join(sorted(bad))}")
    return fmts


def cmd_validate(args) -> int:
    spec = load_spec(args)
    out = Path(args.out)
    write_manifest(out, args, spec)
    report = validate_spec(spec, method=args.method)
    (out / "validation.json").write_text(_dump(report.to_dict()))
    for v in (report.symmetry, report.connectedness, report.nondiagonality, report.border):
        line = f"{v.name}: {'pass' if v.passed else 'FAIL'}"
        if not v.passed:
            line += f"  {v.detail}; witness {json.dumps(v.witness, default=_json_default)}"
        print(line)
    print(f"BB99: {'holds' if report.bb99.passed else 'fails'}  slab counts {report.bb99.witness['slab_counts']}")
    print(f"{spec}: {'generalized Sierpinski carpet' if report.passed else 'not a generalized Sierpinski carpet'}")
    return EXIT_OK if report.passed else EXIT_NEGATIVE


def cmd_generate(args) -> int:
    d, l = _pair(args.counterexample)
    try:
        spec = gen_counterexample(d, l)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_manifest(Path(args.out), args, spec)
    Path(args.output).write_text(json.dumps(spec.to_dict(), sort_keys=True) + "\n")
    print(f"wrote {args.output}: d={spec.d} l={spec.l} #S={spec.size} hash={spec.spec_hash()}")
    return EXIT_OK


def _require_valid(spec) -> int | None:
    report = validate_spec(spec)
    if report.passed:
        return None
    names = ", ".join(v.name for v in report.failures())
    print(f"spec is not a generalized Sierpinski carpet (fails {names})", file=sys.stderr)
    return EXIT_NEGATIVE


def cmd_dw(args) -> int:
    if args.levels < 2:
        raise UsageError("--levels must be >= 2 (a ratio needs two levels)")
    spec = load_spec(args)
    fmts = _formats(args)
    out = Path(args.out)
    write_manifest(out, args, spec)
    bad = _require_valid(spec)
    if bad is not None:
        return bad
    for n in range(1, args.levels + 1):
        if spec.size**n > args.budget:
            raise BudgetExceededError(spec.size**n, args.budget, n)
    report = resistance_sequence(spec, args.levels, tol=args.tol, budget=args.budget)
    verdict = dw_witness(report) if report.complete else None
    data = report.to_dict()
    data["witness"] = verdict.to_dict() if verdict else None
    if "json" in fmts:
        (out / "scaling.json").write_text(_dump(data))
    if "csv" in fmts:
        (out / "scaling.csv").write_text(report.to_csv())
    for n, e in zip(report.levels, report.energies):
        print(f"level {n}: energy {e:.12g}")
    for n, r, dw, m in zip(report.levels, report.ratios, report.dw_estimates, report.margins):
        print(f"levels {n}->{n + 1}: ratio {r:.12g}  d_w estimate {dw:.6f}  margin {m:.6g}")
    if not report.complete:
        print(f"incomplete: {report.error}", file=sys.stderr)
        return EXIT_RESOURCE if report.error_kind == "budget" else EXIT_NUMERIC
    print(f"d_w > 2 witness: {'pass' if verdict.passed else 'FAIL'} (minimal margin {verdict.min_margin:.6g})")
    for reason in verdict.reasons:
        print(f"  {reason}")
    return EXIT_OK if verdict.passed else EXIT_NEGATIVE


def cmd_walk(args) -> int:
    spec = load_spec(args)
    out = Path(args.out)
    write_manifest(out, args, spec)
    bad = _require_valid(spec)
    if bad is not None:
        return bad
    stats = random_walk_crossing(spec, args.level, args.trials, args.seed, budget=args.budget,
                                 threads=args.threads)
    (out / "walk.json").write_text(_dump(stats.to_dict()))
    print(f"level {stats.level}: mean crossing steps {stats.mean:.6f} +- {stats.stderr:.6f} ({stats.trials} trials)")
    return EXIT_OK


def cmd_profile(args) -> int:
    spec = load_spec(args)
    fmts = _formats(args)
    out = Path(args.out)
    write_manifest(out, args, spec)
    bad = _require_valid(spec)
    if bad is not None:
        return bad
    if not 0 <= args.coarsen < args.level:
        raise UsageError("--coarsen must satisfy 0 <= coarsen < level")
    sol = solve_face_problem(build_cell_graph(spec, args.level, args.budget), tol=args.tol)
    profile = energy_profile(sol, args.coarsen)
    if "json" in fmts:
        (out / "profile.json").write_text(_dump(profile.to_dict()))
    if "csv" in fmts:
        (out / "profile.csv").write_text(profile.to_csv())
    if profile.empty:
        print("zero energy: profile is empty")
        return EXIT_NEGATIVE
    for q, v in profile.curve.items():
        print(f"{q:.2f} of energy on mu-mass {v:.6f}")
    return EXIT_OK


def cmd_solve(args) -> int:
    spec = load_spec(args)
    out = Path(args.out)
    write_manifest(out, args, spec)
    bad = _require_valid(spec)
    if bad is not None:
        return bad
    graph = build_cell_graph(spec, args.level, args.budget)
    sol = solve_face_problem(graph, k=args.k, tol=args.tol)
    sol.export(out, stem=f"solution_L{args.level}")
    print(f"level {args.level}: energy {sol.energy:.12g} resistance {sol.resistance:.12g} "
          f"({sol.iterations} iterations, residual {sol.residual:.2e})")
    return EXIT_OK


def cmd_graph(args) -> int:
    spec = load_spec(args)
    out = Path(args.out)
    write_manifest(out, args, spec)
    graph = build_cell_graph(spec, args.level, args.budget)
    export_graph(graph, out)
    print(f"level {args.level}: {graph.num_cells} cells, {graph.num_edges} facet edges")
    return EXIT_OK


def _spec_args(p, positional=True):
    if positional:
        p.add_argument("spec_path", nargs="?", metavar="SPEC", help="spec JSON file")
    p.add_argument("--spec", help="spec JSON file")
    p.add_argument("--builtin", help="sc, menger or counterexample:d,l")


def _common(p):
    p.add_argument("--out", default="gsc_out", help="output directory")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="maximum cells per level")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--format", default="json,csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gsc-dw", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the four carpet axioms")
    _spec_args(p)
    _common(p)
    p.add_argument("--method", choices=("ND_m1", "ND_2", "NDF"), default="ND_2")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("generate", help="write a spec from the slab-count counterexample family")
    p.add_argument("--counterexample", required=True, metavar="D,L")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--out", default="gsc_out", help="directory for the manifest")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("dw", help="conductance ratios and the d_w > 2 witness")
    _spec_args(p)
    _common(p)
    p.add_argument("--levels", type=int, required=True)
    p.set_defaults(func=cmd_dw)

    p = sub.add_parser("walk", help="Monte Carlo face-to-face crossing time")
    _spec_args(p)
    _common(p)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--trials", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("profile", help="energy concentration on coarse cells")
    _spec_args(p)
    _common(p)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--coarsen", type=int, required=True)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("solve", help="harmonic function between opposite faces")
    _spec_args(p)
    _common(p)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--k", type=int, default=1, help="face coordinate")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("graph", help="export the level-n cell graph")
    _spec_args(p)
    _common(p)
    p.add_argument("--level", type=int, required=True)
    p.set_defaults(func=cmd_graph)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConvergenceError, IsolatedRegionError, WalkGuardError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
