"""Linear feasibility of one side of an ontological model.

With the epistemic states fixed, the Born constraints are linear in the
response tables (``fix_rho_solve_xi``); with the response tables fixed they
are linear in the densities (``fix_xi_solve_rho``).  Both reduce to
``A x = b, x >= 0``.  Rational inputs are solved exactly; float inputs go
through HiGHS and the residual of the returned point is reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from ..ontic import DEFAULT_PREP, ModelMetadata, OnticSpace, OntologicalModel, ResponseFunction
from ..quantum import EPS_NORM, Ket, ProjectiveContext, born_probability
from .simplex import exact_feasibility

MODES = ("fix_rho_solve_xi", "fix_xi_solve_rho")
BILINEAR_MODES = ("joint", "solve_both", "bilinear")
TOL_LP = 1e-7
FARKAS_TOL = 1e-9


class BilinearProblemError(ValueError):
    """Both rho and xi free: the Born constraints are bilinear."""


class InconsistentTargetsError(ValueError):
    pass


def _is_rational(v) -> bool:
    return isinstance(v, Rational) and not isinstance(v, bool)


def parse_number(v):
    """JSON number or "p/q" string -> int/Fraction/float."""
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, bool):
        raise ValueError("booleans are not numbers here")
    return v


def format_number(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else int(v.numerator)
    if isinstance(v, (np.floating, float)):
        return float(v)
    return v


XiKey = tuple  # (context index, effect index, state index or None)


@dataclass(frozen=True, eq=False)
class FeasibilityProblem:
    mode: str
    point_ids: tuple[str, ...]
    measure: tuple
    states: tuple[Ket, ...]
    contexts: tuple[ProjectiveContext, ...]
    targets: tuple  # [state][context][effect]
    rho: tuple | None = None  # [state][point]
    xi: Mapping[XiKey, tuple] | None = None
    lambda_sufficient: bool = True
    noncontextual: bool = True
    prep: str = DEFAULT_PREP

    def __post_init__(self):
        if self.mode in BILINEAR_MODES:
            raise BilinearProblemError("joint (rho, xi) search is bilinear and not supported")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {MODES}")
        n = len(self.point_ids)
        if len(self.measure) != n:
            raise ValueError("measure length differs from the number of ontic points")
        dims = {s.dim for s in self.states} | {c.dim for c in self.contexts}
        if len(dims) > 1:
            raise ValueError("states and contexts have mixed dimensions")
        if len(self.targets) != len(self.states):
            raise ValueError("targets need one block per state")
        for s, block in enumerate(self.targets):
            if len(block) != len(self.contexts):
                raise ValueError("targets need one row per context")
            for c, row in enumerate(block):
                if len(row) != len(self.contexts[c].effects):
                    raise ValueError("targets need one value per effect")
                for v in row:
                    if v < -EPS_NORM or v > 1 + EPS_NORM:
                        raise InconsistentTargetsError(f"target {v} outside [0, 1]")
                total = sum(row)
                exact = all(_is_rational(v) for v in row)
                if (total != 1) if exact else abs(total - 1) > EPS_NORM:
                    raise InconsistentTargetsError(
                        f"targets of state {s} in context {self.contexts[c].label!r} sum to {float(total)}"
                    )
        if self.mode == "fix_rho_solve_xi":
            if self.rho is None or len(self.rho) != len(self.states):
                raise ValueError("fix_rho_solve_xi needs one fixed density per state")
            if any(len(r) != n for r in self.rho):
                raise ValueError("density length differs from the number of ontic points")
        else:
            if self.xi is None:
                raise ValueError("fix_xi_solve_rho needs fixed response tables")
            for key, t in self.xi.items():
                if len(t) != n:
                    raise ValueError(f"response table {key} has the wrong length")
                if self.lambda_sufficient and key[2] is not None:
                    raise ValueError("state-dependent response given for a lambda-sufficient problem")
            for c, ctx in enumerate(self.contexts):
                for e in range(len(ctx.effects)):
                    for s in range(len(self.states)):
                        if self._xi_key(c, e, s) not in self.xi:
                            raise ValueError(f"missing fixed response for context {c}, effect {e}")

    def _xi_key(self, c: int, e: int, s: int) -> XiKey:
        if self.xi is not None and (c, e, s) in self.xi:
            return (c, e, s)
        return (c, e, None)

    def numbers(self):
        yield from self.measure
        for block in self.targets:
            for row in block:
                yield from row
        for r in self.rho or ():
            yield from r
        for t in (self.xi or {}).values():
            yield from t

    @property
    def is_exact(self) -> bool:
        return all(_is_rational(v) for v in self.numbers())

    def rationalized(self, max_denominator: int = 10**6, tol: float = 1e-12) -> "FeasibilityProblem":
        """Copy with every number replaced by a nearby small-denominator fraction.

        Raises ValueError when some entry is not within ``tol`` of such a fraction.
        """
        def q(v):
            if _is_rational(v):
                return Fraction(v)
            f = Fraction(float(v)).limit_denominator(max_denominator)
            if abs(float(f) - float(v)) > tol:
                raise ValueError(f"{v!r} is not close to a small-denominator rational")
            return f

        return FeasibilityProblem(
            self.mode, self.point_ids, tuple(q(v) for v in self.measure), self.states, self.contexts,
            tuple(tuple(tuple(q(v) for v in row) for row in block) for block in self.targets),
            None if self.rho is None else tuple(tuple(q(v) for v in r) for r in self.rho),
            None if self.xi is None else {k: tuple(q(v) for v in t) for k, t in self.xi.items()},
            self.lambda_sufficient, self.noncontextual, self.prep,
        )

    @classmethod
    def from_model(
        cls,
        mode: str,
        model: OntologicalModel,
        states: Sequence[Ket],
        contexts: Sequence[ProjectiveContext],
        targets=None,
        lambda_sufficient: bool | None = None,
        noncontextual: bool = True,
        prep: str = DEFAULT_PREP,
    ) -> "FeasibilityProblem":
        """Take the fixed side from ``model``; targets default to Born."""
        states, contexts = tuple(states), tuple(contexts)
        if targets is None:
            targets = born_targets(states, contexts)
        rho = xi = None
        if mode == "fix_rho_solve_xi":
            rho = tuple(tuple(float(v) for v in model.density(s, prep)) for s in states)
            if lambda_sufficient is None:
                lambda_sufficient = True
        elif mode == "fix_xi_solve_rho":
            xi = {}
            dep = False
            for c, ctx in enumerate(contexts):
                for e, eff in enumerate(ctx.effects):
                    rf = model.response_function(eff, ctx)
                    if rf.is_state_dependent:
                        dep = True
                        for s, st in enumerate(states):
                            xi[(c, e, s)] = tuple(float(v) for v in rf.table_for(st))
                    else:
                        xi[(c, e, None)] = tuple(float(v) for v in rf.table_for(None))
            if lambda_sufficient is None:
                lambda_sufficient = not dep
        return cls(mode, model.ontic.ids, tuple(float(v) for v in model.ontic.measure), states, contexts,
                   targets, rho, xi, bool(lambda_sufficient), noncontextual, prep)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "mode": self.mode,
            "dim": self.contexts[0].dim if self.contexts else (self.states[0].dim if self.states else None),
            "ontic": {"ids": list(self.point_ids), "measure": [format_number(v) for v in self.measure]},
            "states": [s.to_json() for s in self.states],
            "contexts": [c.to_json() for c in self.contexts],
            "targets": [[[format_number(v) for v in row] for row in block] for block in self.targets],
            "lambda_sufficient": self.lambda_sufficient,
            "noncontextual": self.noncontextual,
            "prep": self.prep,
        }
        if self.rho is not None:
            out["rho"] = [[format_number(v) for v in r] for r in self.rho]
        if self.xi is not None:
            out["xi"] = [
                {"context": k[0], "effect": k[1], "state": k[2], "table": [format_number(v) for v in t]}
                for k, t in sorted(self.xi.items(), key=lambda kv: (kv[0][0], kv[0][1], -1 if kv[0][2] is None else kv[0][2]))
            ]
        return out

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "FeasibilityProblem":
        mode = obj["mode"]
        if mode in BILINEAR_MODES:
            raise BilinearProblemError("joint (rho, xi) search is bilinear and not supported")
        states = tuple(Ket.from_json(s) for s in obj["states"])
        contexts = tuple(ProjectiveContext.from_json(c) for c in obj["contexts"])
        ontic = obj["ontic"]
        measure = tuple(parse_number(v) for v in ontic["measure"])
        if obj.get("targets") is not None:
            targets = tuple(tuple(tuple(parse_number(v) for v in row) for row in block) for block in obj["targets"])
        else:
            targets = born_targets(states, contexts)
        rho = None
        if obj.get("rho") is not None:
            rho = tuple(tuple(parse_number(v) for v in r) for r in obj["rho"])
        xi = None
        if obj.get("xi") is not None:
            xi = {
                (int(r["context"]), int(r["effect"]), None if r.get("state") is None else int(r["state"])):
                tuple(parse_number(v) for v in r["table"])
                for r in obj["xi"]
            }
        problem = cls(mode, tuple(ontic["ids"]), measure, states, contexts, targets, rho, xi,
                      bool(obj.get("lambda_sufficient", True)), bool(obj.get("noncontextual", True)),
                      obj.get("prep", DEFAULT_PREP))
        if obj.get("exact"):
            problem = problem.rationalized()
        return problem


def born_targets(states: Sequence[Ket], contexts: Sequence[ProjectiveContext]) -> tuple:
    return tuple(
        tuple(tuple(born_probability(s, e) for e in c.effects) for c in contexts) for s in states
    )


@dataclass
class LinearSystem:
    A: list[list]
    b: list
    variables: list[tuple]
    row_labels: list[str]

    def scaled(self, row: int, factor) -> "LinearSystem":
        if not factor > 0:
            raise ValueError("row scaling factor must be positive")
        A = [list(r) for r in self.A]
        b = list(self.b)
        A[row] = [v * factor for v in A[row]]
        b[row] = b[row] * factor
        return LinearSystem(A, b, list(self.variables), list(self.row_labels))


def assemble(problem: FeasibilityProblem) -> LinearSystem:
    """Equality system ``A x = b`` (x >= 0) for the free side of ``problem``."""
    n = len(problem.point_ids)
    mu = problem.measure
    S = len(problem.states)
    zero = 0
    variables: list[tuple] = []
    index: dict[tuple, int] = {}

    def var(key: tuple) -> int:
        if key not in index:
            index[key] = len(variables)
            variables.append(key)
        return index[key]

    rows: list[dict[int, Any]] = []
    b: list = []
    labels: list[str] = []

    if problem.mode == "fix_rho_solve_xi":
        slots = [None] if problem.lambda_sufficient else list(range(S))

        def xi_var(p, c, e, s):
            ctx = problem.contexts[c]
            who = ("E", ctx.effects[e].key) if problem.noncontextual else ("M", c, e)
            return var(("xi", p) + who + (s,))

        for c, ctx in enumerate(problem.contexts):
            for s in slots:
                for p in range(n):
                    rows.append({xi_var(p, c, e, s): 1 for e in range(len(ctx.effects))})
                    b.append(1)
                    labels.append(f"norm:xi:{problem.point_ids[p]}:{ctx.label}:{s}")
        for s in range(S):
            slot = None if problem.lambda_sufficient else s
            for c, ctx in enumerate(problem.contexts):
                for e in range(len(ctx.effects)):
                    row: dict[int, Any] = {}
                    for p in range(n):
                        w = problem.rho[s][p] * mu[p]  # type: ignore[index]
                        if w != 0:
                            j = xi_var(p, c, e, slot)
                            row[j] = row.get(j, zero) + w
                    rows.append(row)
                    b.append(problem.targets[s][c][e])
                    labels.append(f"born:{s}:{ctx.label}:{e}")
        # every table entry is a variable even when no Born row touches it
        for c, ctx in enumerate(problem.contexts):
            for s in slots:
                for p in range(n):
                    for e in range(len(ctx.effects)):
                        xi_var(p, c, e, s)
    else:
        for s in range(S):
            rows.append({var(("rho", s, p)): mu[p] for p in range(n)})
            b.append(1)
            labels.append(f"norm:rho:{s}")
        for s in range(S):
            for c, ctx in enumerate(problem.contexts):
                for e in range(len(ctx.effects)):
                    t = problem.xi[problem._xi_key(c, e, s)]  # type: ignore[index]
                    row = {var(("rho", s, p)): t[p] * mu[p] for p in range(n) if t[p] * mu[p] != 0}
                    rows.append(row)
                    b.append(problem.targets[s][c][e])
                    labels.append(f"born:{s}:{ctx.label}:{e}")
        for s in range(S):
            for p in range(n):
                var(("rho", s, p))

    width = len(variables)
    A = [[row.get(j, zero) for j in range(width)] for row in rows]
    return LinearSystem(A, b, variables, labels)


@dataclass
class SystemSolution:
    feasible: bool
    exact: bool
    x: list | None
    farkas: list | None
    residual: float
    farkas_check: dict[str, float] = field(default_factory=dict)


def _farkas_stats(A, b, z) -> dict[str, float]:
    At = np.asarray(A, dtype=float).T
    zf = np.asarray([float(v) for v in z])
    return {"min_ATz": float(np.min(At @ zf)) if At.size else 0.0,
            "bTz": float(np.dot(np.asarray([float(v) for v in b]), zf))}


def solve_system(system: LinearSystem, exact: bool, tol: float = TOL_LP) -> SystemSolution:
    A, b = system.A, system.b
    if exact:
        x, z = exact_feasibility(A, b)
        if x is not None:
            # exact arithmetic: the residual is zero by construction; recompute to be sure
            res = max((abs(sum(a * v for a, v in zip(row, x)) - bi) for row, bi in zip(A, b)), default=0)
            return SystemSolution(res == 0, True, x, None, float(res))
        At_z = [sum(A[i][j] * z[i] for i in range(len(b))) for j in range(len(A[0]))]
        bz = sum(bi * zi for bi, zi in zip(b, z))
        if min(At_z, default=0) < 0 or bz >= 0:
            raise ArithmeticError("exact Farkas certificate failed verification")
        return SystemSolution(False, True, None, z, 0.0,
                              {"min_ATz": float(min(At_z, default=0)), "bTz": float(bz)})
    Af = np.asarray(A, dtype=float)
    bf = np.asarray([float(v) for v in b])
    n = Af.shape[1]
    res = linprog(np.zeros(n), A_eq=Af, b_eq=bf, bounds=[(0, None)] * n, method="highs")
    if res.status == 0:
        x = res.x
        residual = float(max(np.max(np.abs(Af @ x - bf)) if bf.size else 0.0, -min(0.0, float(np.min(x)))))
        return SystemSolution(residual <= tol, False, list(x), None, residual)
    # Farkas: A^T z >= 0, b^T z = -1, z free
    m = Af.shape[0]
    far = linprog(np.zeros(m), A_ub=-Af.T, b_ub=np.zeros(n), A_eq=bf.reshape(1, -1), b_eq=[-1.0],
                  bounds=[(None, None)] * m, method="highs")
    if far.status == 0:
        stats = _farkas_stats(A, b, far.x)
        return SystemSolution(False, False, None, list(far.x), float("nan"), stats)
    return SystemSolution(False, False, None, None, float("nan"), {"status": float(res.status)})


@dataclass
class LpResult:
    feasible: bool
    exact: bool
    residual: float
    tables: dict[tuple, np.ndarray]
    certificate: dict[str, Any]
    system: LinearSystem

    def to_json(self) -> dict[str, Any]:
        return {"feasible": self.feasible, "exact": self.exact,
                "residual": None if np.isnan(self.residual) else self.residual,
                "certificate": self.certificate}


def lp_feasible(problem: FeasibilityProblem, exact: bool | None = None, tol: float = TOL_LP) -> LpResult:
    """Decide whether the free side of ``problem`` can meet every Born target."""
    if exact is None:
        exact = problem.is_exact
    elif exact and not problem.is_exact:
        problem = problem.rationalized()
    system = assemble(problem)
    sol = solve_system(system, exact, tol)
    tables: dict[tuple, np.ndarray] = {}
    if sol.x is not None:
        tables = _tables(problem, system, sol.x)
        cert = {
            "type": "solution",
            "residual": sol.residual,
            "tables": [
                {"key": [_key_json(k) for k in key], "table": [format_number(v) for v in t]}
                for key, t in sorted(tables.items(), key=lambda kv: repr(kv[0]))
            ],
        }
    else:
        cert = {
            "type": "infeasible",
            "farkas": None if sol.farkas is None else [format_number(v) for v in sol.farkas],
            "row_labels": system.row_labels,
            "check": sol.farkas_check,
            "verified": sol.farkas is not None and sol.farkas_check.get("min_ATz", -1) >= -FARKAS_TOL
            and abs(sol.farkas_check.get("bTz", 0) + 1) <= FARKAS_TOL,
        }
    return LpResult(sol.feasible, exact, sol.residual, tables, cert, system)


def _key_json(k):
    return None if k is None else k


def _tables(problem: FeasibilityProblem, system: LinearSystem, x: Sequence) -> dict[tuple, np.ndarray]:
    """Solved tables keyed (context, effect, state) for xi or ("rho", state) for rho."""
    index = {key: j for j, key in enumerate(system.variables)}
    n = len(problem.point_ids)
    out: dict[tuple, np.ndarray] = {}
    exact = isinstance(x[0], Fraction) if len(x) else False
    if problem.mode == "fix_rho_solve_xi":
        slots = [None] if problem.lambda_sufficient else list(range(len(problem.states)))
        for c, ctx in enumerate(problem.contexts):
            for e, eff in enumerate(ctx.effects):
                who = ("E", eff.key) if problem.noncontextual else ("M", c, e)
                for s in slots:
                    vals = [x[index[("xi", p) + who + (s,)]] for p in range(n)]
                    out[(c, e, s)] = np.array(vals, dtype=object if exact else float)
    else:
        for s in range(len(problem.states)):
            vals = [x[index[("rho", s, p)]] for p in range(n)]
            out[("rho", s)] = np.array(vals, dtype=object if exact else float)
    return out


def solution_model(problem: FeasibilityProblem, result: LpResult) -> OntologicalModel:
    """Explicit model combining the fixed side with the solved tables."""
    if not result.feasible:
        raise ValueError("no solution to turn into a model")
    ontic = OnticSpace(problem.point_ids, np.array([float(v) for v in problem.measure]))
    dim = problem.contexts[0].dim
    f = lambda t: np.array([float(v) for v in t])  # noqa: E731
    if problem.mode == "fix_rho_solve_xi":
        rho = {s: f(problem.rho[s]) for s in range(len(problem.states))}  # type: ignore[index]
        xi = {k: f(t) for k, t in result.tables.items()}
    else:
        rho = {s: f(result.tables[("rho", s)]) for s in range(len(problem.states))}
        xi = {k: f(t) for k, t in problem.xi.items()}  # type: ignore[union-attr]
    epistemic = {}
    from ..ontic import EpistemicState

    for s, st in enumerate(problem.states):
        epistemic[(st.key, problem.prep)] = EpistemicState(st, rho[s], problem.prep)
    responses = {}
    for c, ctx in enumerate(problem.contexts):
        for e, eff in enumerate(ctx.effects):
            if (c, e, None) in xi:
                rf = ResponseFunction(eff, ctx.label, xi[(c, e, None)])
            else:
                tables = {st.key: xi[(c, e, s)] for s, st in enumerate(problem.states)}
                rf = ResponseFunction(eff, ctx.label, None, tables)
            responses[(ctx.label, eff.key)] = rf
    meta = ModelMetadata(name=f"lp-{problem.mode}", claims_lambda_sufficient=problem.lambda_sufficient)
    return OntologicalModel(dim, ontic, meta, epistemic, responses,
                            states=problem.states, contexts=problem.contexts)
