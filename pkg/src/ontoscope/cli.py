"""Command-line front end.

    ontoscope zoo --model bell --dim 3 --grid 10000 --contexts ctx.json --out m.json
    ontoscope verify --model m.json --checks born,support_invariance --seed 7 --out report.json
    ontoscope feasibility color --fixture ks18 --out cert.json
    ontoscope feasibility lp --problem p.json --out cert.json

Exit codes: 0 pass/feasible, 1 usage or parse error, 2 verification failure,
3 infeasible, 4 coverage gap.  Every output is written once, at the end,
as key-sorted JSON, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any, Sequence

import numpy as np

from .feasibility import FeasibilityProblem, RaySet, ks_colorable, load_fixture, lp_feasible
from .ontic import OntologicalModel, is_outcome_deterministic
from .quantum import Ket, ProjectiveContext
from .verifier import CHECK_IDS, SuiteConfig, run_report
from .zoo import ZooSpec, build_model

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 3


class UsageError(Exception):
    pass


def _read_json(path: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


def _dump(obj: Any, path: str | None, compact: bool = False) -> None:
    if compact:
        text = json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
    else:
        text = json.dumps(obj, sort_keys=True, indent=1, allow_nan=False)
    if path is None or path == "-":
        sys.stdout.write(text + "\n")
        return
    with open(path, "w") as fh:
        fh.write(text + "\n")


def _ket(obj) -> Ket:
    """Ket JSON, or a bare real vector that gets normalized."""
    if isinstance(obj, dict):
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
        return Ket.normalized(re + 1j * im, obj.get("label"))
    return Ket.normalized(np.asarray(obj, dtype=complex))


def load_states(path: str) -> list[Ket]:
    obj = _read_json(path)
    if isinstance(obj, dict):
        obj = obj.get("states", [])
    return [_ket(s) for s in obj]


def load_contexts(path: str) -> list[ProjectiveContext]:
    obj = _read_json(path)
    if isinstance(obj, dict):
        obj = obj.get("contexts", [])
    out = []
    for i, c in enumerate(obj):
        rays = c["rays"] if isinstance(c, dict) else c
        label = c.get("label", f"ctx-{i}") if isinstance(c, dict) else f"ctx-{i}"
        out.append(ProjectiveContext.from_rays([_ket(r) for r in rays], label))
    return out


# -- zoo ----------------------------------------------------------------------

def cmd_zoo(args) -> int:
    spec = ZooSpec(args.model, dim=args.dim, n_points=args.n, n_grid=args.grid, seed=args.seed)
    states = load_states(args.states) if args.states else []
    contexts = load_contexts(args.contexts) if args.contexts else []
    model = build_model(spec, states, contexts)
    snapshot = model.to_json()
    _dump(snapshot, args.out, compact=True)
    if args.out and args.out != "-":
        det, _ = is_outcome_deterministic(model)
        print(
            f"{model.name}: {len(model.ontic)} ontic points, {len(model.contexts)} contexts, "
            f"{len(model.states)} states, deterministic={det}, "
            f"lambda_sufficient={not model.is_state_dependent()}"
        )
    return EXIT_OK


# -- verify -------------------------------------------------------------------

def _check_list(text: str | None) -> tuple[str, ...]:
    if text is None:
        return CHECK_IDS
    return tuple(c.strip() for c in text.split(",") if c.strip())


def cmd_verify(args) -> int:
    checks = _check_list(args.checks)
    unknown = [c for c in checks if c not in CHECK_IDS]
    if unknown:
        raise UsageError(f"unknown check id(s): {', '.join(unknown)}; choose from {', '.join(CHECK_IDS)}")
    model = OntologicalModel.from_json(_read_json(args.model))
    config = SuiteConfig(
        checks=checks,
        seed=args.seed,
        states=tuple(load_states(args.states)) if args.states else None,
        contexts=tuple(load_contexts(args.contexts)) if args.contexts else None,
        n_random_states=args.random_states,
        born_tolerance=args.born_tol,
        context_tolerance=args.context_tol,
        max_witnesses=args.max_witnesses,
    )
    report = run_report(model, config)
    _dump(report.to_json(), args.out)
    if args.out and args.out != "-":
        for v in report.verdicts:
            status = "pass" if v.passed else "FAIL"
            if not v.applicable:
                status = "n/a"
            print(f"{v.check:20s} {status:5s} max_defect={v.max_defect:.3e}")
    return report.exit_code


# -- feasibility ----------------------------------------------------------------

def cmd_color(args) -> int:
    if args.fixture:
        rayset = load_fixture(args.fixture)
    else:
        rayset = RaySet.from_json(_read_json(args.rays))
    result = ks_colorable(rayset)
    _dump({"feasible": result.feasible, "certificate": result.certificate}, args.out)
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def cmd_lp(args) -> int:
    problem = FeasibilityProblem.from_json(_read_json(args.problem))
    result = lp_feasible(problem, exact=True if args.exact else None)
    _dump(result.to_json(), args.out)
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ontoscope", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    z = sub.add_parser("zoo", help="build a zoo model and write its JSON snapshot")
    z.add_argument("--model", required=True, help="bb, ks_qubit or bell")
    z.add_argument("--dim", type=int, default=2)
    z.add_argument("--grid", type=int, default=10_000, help="bell: number of cells")
    z.add_argument("--n", type=int, default=100_000, help="ks_qubit: sphere points")
    z.add_argument("--seed", type=int)
    z.add_argument("--states", help="JSON list of state vectors")
    z.add_argument("--contexts", help="JSON list of contexts")
    z.add_argument("--out")
    z.set_defaults(func=cmd_zoo)

    v = sub.add_parser("verify", help="run verifier checks on a model snapshot")
    v.add_argument("--model", required=True)
    v.add_argument("--checks", help="comma-separated check ids (default: all)")
    v.add_argument("--seed", type=int)
    v.add_argument("--states")
    v.add_argument("--contexts")
    v.add_argument("--random-states", type=int, default=0)
    v.add_argument("--born-tol", type=float)
    v.add_argument("--context-tol", type=float)
    v.add_argument("--max-witnesses", type=int, default=50)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("feasibility", help="coloring and LP feasibility")
    fsub = f.add_subparsers(dest="kind", required=True)
    c = fsub.add_parser("color", help="complete search for a noncontextual 0/1 assignment")
    src = c.add_mutually_exclusive_group(required=True)
    src.add_argument("--rays")
    src.add_argument("--fixture")
    c.add_argument("--out")
    c.set_defaults(func=cmd_color)
    lp = fsub.add_parser("lp", help="linear feasibility with one side of the model fixed")
    lp.add_argument("--problem", required=True)
    lp.add_argument("--exact", action="store_true", help="rationalize and solve exactly")
    lp.add_argument("--out")
    lp.set_defaults(func=cmd_lp)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ValueError, KeyError, TypeError, LookupError, FileNotFoundError) as exc:
        print(f"ontoscope {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
