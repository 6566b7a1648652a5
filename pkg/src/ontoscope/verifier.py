"""Structural checks on ontological models.

Each check returns a :class:`Verdict`.  Failures carry :class:`Witness`
records that name the ontic point, state, effect and context(s) involved;
:func:`replay_witness` recomputes a witness's defect from the model alone.

Responses that depend on the prepared state are always evaluated at the
state under consideration: ``xi(lambda, M; psi)``.  For lambda-sufficient
models this reduces to the usual ``xi(lambda, M)``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .ontic import (
    DEFAULT_PREP,
    DELTA_SUPP,
    Measurement,
    MissingEntryError,
    OntologicalModel,
    is_outcome_deterministic,
    predicted_probability,
    validate_model,
)
from .quantum import EPS_NORM, Effect, Ket, ProjectiveContext, born_probability, make_rng, random_ket

CHECK_IDS = (
    "validate",
    "born",
    "support_invariance",
    "basis_exclusion",
    "outcome_exclusion",
    "deficiency",
    "cross_context",
    "lambda_sufficiency",
)
LAMBDA_SUFFICIENCY_TOL = 1e-12

EXIT_PASS = 0
EXIT_FAIL = 2
EXIT_COVERAGE = 4


class UnknownCheckError(ValueError):
    pass


@dataclass
class Witness:
    check: str
    defect: float
    point: str | None = None
    state: Ket | None = None
    other_state: Ket | None = None
    effect: Effect | None = None
    other_effect: Effect | None = None
    context: Measurement | None = None
    other_context: Measurement | None = None
    prep: str = DEFAULT_PREP
    values: dict[str, Any] = field(default_factory=dict)

    def sort_key(self) -> tuple:
        return (
            -self.defect,
            self.point or "",
            self.state.key if self.state else "",
            self.other_state.key if self.other_state else "",
            self.effect.key if self.effect else "",
            self.other_effect.key if self.other_effect else "",
            self.context.label if self.context else "",
            self.other_context.label if self.other_context else "",
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "check": self.check,
            "defect": float(self.defect),
            "point": self.point,
            "state": self.state.to_json() if self.state else None,
            "other_state": self.other_state.to_json() if self.other_state else None,
            "effect": self.effect.to_json() if self.effect else None,
            "other_effect": self.other_effect.to_json() if self.other_effect else None,
            "context": self.context.label if self.context else None,
            "other_context": self.other_context.label if self.other_context else None,
            "prep": self.prep,
            "values": {k: _jsonable(v) for k, v in sorted(self.values.items())},
        }


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


@dataclass
class Verdict:
    check: str
    passed: bool
    max_defect: float = 0.0
    witnesses: list[Witness] = field(default_factory=list)
    applicable: bool = True
    coverage_gaps: list[str] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)
    n_witnesses: int = 0

    def __post_init__(self):
        if self.max_defect < 0:
            raise ValueError("defects are nonnegative")
        self.witnesses.sort(key=Witness.sort_key)
        self.n_witnesses = max(self.n_witnesses, len(self.witnesses))
        if not self.passed and not self.witnesses and not self.coverage_gaps:
            raise ValueError(f"failing verdict {self.check!r} without witnesses")

    def truncated(self, max_witnesses: int | None) -> "Verdict":
        if max_witnesses is None or len(self.witnesses) <= max_witnesses:
            return self
        return Verdict(
            self.check, self.passed, self.max_defect, self.witnesses[:max_witnesses],
            self.applicable, self.coverage_gaps, self.details, self.n_witnesses,
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.check,
            "pass": self.passed,
            "applicable": self.applicable,
            "max_defect": float(self.max_defect),
            "n_witnesses": self.n_witnesses,
            "witnesses": [w.to_json() for w in self.witnesses],
            "coverage_gaps": list(self.coverage_gaps),
            "details": _details_json(self.details),
        }


def _details_json(d: Mapping[str, Any]) -> dict[str, Any]:
    out = {}
    for k in sorted(d):
        v = d[k]
        if isinstance(v, Mapping):
            out[k] = _details_json(v)
        elif isinstance(v, (list, tuple)):
            out[k] = [_details_json(x) if isinstance(x, Mapping) else _jsonable(x) for x in v]
        else:
            out[k] = _jsonable(v)
    return out


def _not_applicable(check: str, reason: str) -> Verdict:
    return Verdict(check, True, applicable=False, details={"reason": reason})


def _eval_states(model: OntologicalModel, rows_dependent: bool, states: Sequence[Ket]) -> Sequence[Ket | None]:
    return tuple(states) if rows_dependent else (None,)


def _dependent(model: OntologicalModel, measurements: Iterable[Measurement]) -> bool:
    dep = False
    for m in measurements:
        for e in m.effects:
            try:
                dep = dep or model.response_function(e, m).is_state_dependent
            except MissingEntryError:
                pass
    return dep


# -- Born agreement ---------------------------------------------------------------

def check_born_agreement(
    model: OntologicalModel,
    states: Sequence[Ket],
    contexts: Sequence[Measurement],
    tol: float | None = None,
    prep: str = DEFAULT_PREP,
    paired: bool = False,
) -> Verdict:
    """max |predicted - Born| over all (state, effect, context) triples.

    With ``paired=True`` states and contexts are zipped instead of crossed.
    """
    tol = model.metadata.born_tolerance if tol is None else tol
    pairs = zip(states, contexts) if paired else ((s, c) for s in states for c in contexts)
    worst = 0.0
    witnesses: list[Witness] = []
    gaps: list[str] = []
    n = 0
    for s, c in pairs:
        for e in c.effects:
            try:
                pred = predicted_probability(model, s, prep, e, c, clamp=False)
            except MissingEntryError as exc:
                gaps.append(str(exc))
                continue
            born = born_probability(s, e)
            d = abs(pred - born)
            n += 1
            worst = max(worst, d)
            if d > tol:
                witnesses.append(Witness("born", d, state=s, effect=e, context=c, prep=prep,
                                         values={"predicted": pred, "born": born}))
    return Verdict("born", not witnesses, worst, witnesses, coverage_gaps=gaps,
                   details={"tolerance": tol, "n_triples": n})


# -- support structure ------------------------------------------------------------

def _basis_for(ctx: ProjectiveContext, basis_states: Mapping[str, Sequence[Ket]] | None) -> tuple[Ket, ...]:
    if basis_states is None or ctx.label not in basis_states:
        return ctx.rays
    given = tuple(basis_states[ctx.label])
    if len(given) != len(ctx.rays) or not all(a.same_ray(b) for a, b in zip(given, ctx.rays)):
        raise ValueError(f"basis states do not match the rays of context {ctx.label!r}")
    return given


def check_support_invariance(
    model: OntologicalModel,
    measurements: Sequence[Measurement],
    states: Sequence[Ket] = (),
    threshold: float = DELTA_SUPP,
) -> Verdict:
    """The union of response supports is the same set for every measurement."""
    if not measurements:
        raise ValueError("at least one measurement is required")
    gaps: list[str] = []
    witnesses: list[Witness] = []
    worst = 0.0
    dep = _dependent(model, measurements)
    for s in _eval_states(model, dep, states or model.states):
        sums: dict[int, np.ndarray] = {}
        for k, m in enumerate(measurements):
            try:
                sums[k] = np.sum([model.response(e, m, s) for e in m.effects], axis=0)
            except MissingEntryError as exc:
                gaps.append(str(exc))
        if not sums:
            continue
        unions = {k: v > threshold for k, v in sums.items()}
        ref = np.logical_or.reduce(list(unions.values()))
        for k, u in unions.items():
            for i in np.flatnonzero(ref & ~u):
                # any measurement whose union holds the point serves as reference
                other = next(j for j in unions if unions[j][i])
                d = float(sums[other][i] - sums[k][i])
                worst = max(worst, d)
                witnesses.append(Witness(
                    "support_invariance", d, point=model.ontic.ids[i], state=s,
                    context=measurements[k], other_context=measurements[other],
                ))
    return Verdict("support_invariance", not witnesses, worst, witnesses, coverage_gaps=gaps,
                   details={"n_measurements": len(measurements)})


def check_basis_exclusion(
    model: OntologicalModel,
    contexts: Sequence[ProjectiveContext],
    basis_states: Mapping[str, Sequence[Ket]] | None = None,
    prep: str = DEFAULT_PREP,
    threshold: float = DELTA_SUPP,
) -> Verdict:
    """Supp xi_{E_i}(., M) and Supp rho(. | psi_j) are disjoint for i != j."""
    gaps: list[str] = []
    witnesses: list[Witness] = []
    worst = 0.0
    mu = model.ontic.measure
    for ctx in contexts:
        basis = _basis_for(ctx, basis_states)
        for j, psi in enumerate(basis):
            try:
                rho = model.density(psi, prep)
            except MissingEntryError as exc:
                gaps.append(str(exc))
                continue
            for i, e in enumerate(ctx.effects):
                if i == j:
                    continue
                try:
                    xi = model.response(e, ctx, psi)
                except MissingEntryError as exc:
                    gaps.append(str(exc))
                    continue
                for p in np.flatnonzero((xi > threshold) & (rho > threshold)):
                    d = float(xi[p] * rho[p] * mu[p])
                    worst = max(worst, d)
                    witnesses.append(Witness("basis_exclusion", d, point=model.ontic.ids[p], state=psi,
                                             effect=e, context=ctx, prep=prep))
    return Verdict("basis_exclusion", not witnesses, worst, witnesses, coverage_gaps=gaps,
                   details={"n_contexts": len(contexts)})


def check_outcome_exclusion(
    model: OntologicalModel,
    contexts: Sequence[ProjectiveContext],
    states: Sequence[Ket] = (),
    threshold: float = DELTA_SUPP,
) -> Verdict:
    """For outcome-deterministic models, effect supports in one context are disjoint."""
    states = tuple(states) or model.states
    try:
        det, wit = is_outcome_deterministic(model, states=states, contexts=contexts)
    except MissingEntryError as exc:
        return Verdict("outcome_exclusion", True, applicable=False, coverage_gaps=[str(exc)])
    if not det:
        return _not_applicable(
            "outcome_exclusion", f"model is not outcome-deterministic (xi = {wit.value:.6g} at {wit.point})"
        )
    witnesses: list[Witness] = []
    worst = 0.0
    gaps: list[str] = []
    dep = _dependent(model, contexts)
    for ctx in contexts:
        for s in _eval_states(model, dep, states):
            try:
                tables = [model.response(e, ctx, s) for e in ctx.effects]
            except MissingEntryError as exc:
                gaps.append(str(exc))
                continue
            for a, b in combinations(range(len(tables)), 2):
                for p in np.flatnonzero((tables[a] > threshold) & (tables[b] > threshold)):
                    d = float(min(tables[a][p], tables[b][p]))
                    worst = max(worst, d)
                    witnesses.append(Witness("outcome_exclusion", d, point=model.ontic.ids[p], state=s,
                                             effect=ctx.effects[a], other_effect=ctx.effects[b],
                                             context=ctx))
    return Verdict("outcome_exclusion", not witnesses, worst, witnesses, coverage_gaps=gaps,
                   details={"n_contexts": len(contexts)})


def check_support_lemmas(
    model: OntologicalModel,
    povm_list: Sequence[Measurement],
    context_list: Sequence[ProjectiveContext],
    basis_states: Mapping[str, Sequence[Ket]] | None = None,
    states: Sequence[Ket] = (),
) -> dict[str, Verdict]:
    """Support invariance over ``povm_list`` + ``context_list``; basis and outcome exclusion over the contexts."""
    if not povm_list:
        raise ValueError("povm_list must be nonempty")
    measurements = list(povm_list) + [c for c in context_list if all(c is not p for p in povm_list)]
    eval_states = tuple(states) or model.states
    extra = tuple(r for c in context_list for r in _basis_for(c, basis_states))
    return {
        "support_invariance": check_support_invariance(model, measurements, eval_states + extra),
        "basis_exclusion": check_basis_exclusion(model, context_list, basis_states),
        "outcome_exclusion": check_outcome_exclusion(model, context_list, eval_states + extra),
    }


# -- deficiency and varying effects --------------------------------------------------

@dataclass
class DeficiencyResult:
    state: Ket
    context: ProjectiveContext
    deficient: bool
    included: bool
    rho_support_size: int
    xi_support_size: int
    measure_gap: float
    varying_effects: tuple[str, ...]
    multi_varying: bool | None
    witnesses: list[Witness]

    def to_json(self) -> dict[str, Any]:
        return {
            "state": self.state.to_json(),
            "context": self.context.label,
            "deficient": self.deficient,
            "included": self.included,
            "rho_support_size": self.rho_support_size,
            "xi_support_size": self.xi_support_size,
            "measure_gap": self.measure_gap,
            "varying_effects": list(self.varying_effects),
            "multi_varying": self.multi_varying,
        }


def varying_effects(
    model: OntologicalModel,
    contexts: Sequence[ProjectiveContext],
    state: Ket | None = None,
    threshold: float = DELTA_SUPP,
) -> tuple[str, ...]:
    """Keys of effects whose response support changes across the contexts holding them."""
    by_effect: dict[str, list[tuple[Effect, ProjectiveContext]]] = {}
    for ctx in contexts:
        for e in ctx.effects:
            by_effect.setdefault(e.key, []).append((e, ctx))
    out = []
    for key in sorted(by_effect):
        members = by_effect[key]
        if len(members) < 2:
            continue
        masks = [model.response(e, ctx, state) > threshold for e, ctx in members]
        if any(not np.array_equal(masks[0], m) for m in masks[1:]):
            out.append(key)
    return tuple(out)


def check_deficiency(
    model: OntologicalModel,
    state: Ket,
    prep: str,
    context: ProjectiveContext,
    contexts: Sequence[ProjectiveContext] = (),
    threshold: float = DELTA_SUPP,
) -> DeficiencyResult:
    """Is Supp rho(.|psi) a proper subset of Supp xi_{E_psi}(., M)?

    Also reports the effects whose supports vary across ``context`` and
    ``contexts`` (evaluated at ``state``).  ``multi_varying`` is None unless the
    model claims to be deterministic and contextual, in which case it is True
    iff at least two effects vary.
    """
    matches = [i for i, r in enumerate(context.rays) if r.same_ray(state)]
    if not matches:
        raise ValueError(f"state {state!r} is not a ray of context {context.label!r}")
    effect = context.effects[matches[0]]
    mu = model.ontic.measure
    rho = model.density(state, prep)
    xi = model.response(effect, context, state)
    s_rho = rho > threshold
    s_xi = xi > threshold
    outside = np.flatnonzero(s_rho & ~s_xi)
    witnesses = [
        Witness("deficiency", float(rho[p] * mu[p]), point=model.ontic.ids[p], state=state,
                effect=effect, context=context, prep=prep)
        for p in outside
    ]
    gap = float(np.sum(mu[s_xi & ~s_rho]))
    included = outside.size == 0
    all_ctx = [context] + [c for c in contexts if c is not context]
    varying = varying_effects(model, all_ctx, state, threshold)
    meta = model.metadata
    multi = (len(varying) >= 2) if (meta.claims_deterministic and meta.claims_contextual) else None
    return DeficiencyResult(
        state, context, included and gap > threshold, included,
        int(s_rho.sum()), int(s_xi.sum()), gap, varying, multi, witnesses,
    )


# -- cross-context constraint -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class ContextFamily:
    shared_effect: Effect
    contexts: tuple[ProjectiveContext, ...]

    def __post_init__(self):
        object.__setattr__(self, "contexts", tuple(self.contexts))
        for c in self.contexts:
            if not c.contains(self.shared_effect):
                raise ValueError(f"context {c.label!r} lacks the shared effect")


def context_families(contexts: Sequence[ProjectiveContext]) -> list[ContextFamily]:
    """Group contexts by every effect that appears in at least two of them."""
    by_effect: dict[str, tuple[Effect, list[ProjectiveContext]]] = {}
    for c in contexts:
        for e in c.effects:
            by_effect.setdefault(e.key, (e, []))[1].append(c)
    return [
        ContextFamily(e, tuple(cs))
        for key, (e, cs) in sorted(by_effect.items())
        if len(cs) >= 2
    ]


def check_cross_context(
    model: OntologicalModel,
    family: ContextFamily,
    states: Sequence[Ket],
    preps: Sequence[str] = (DEFAULT_PREP,),
    tol: float | None = None,
    threshold: float = DELTA_SUPP,
) -> Verdict:
    """Outcome probability of the shared effect must not depend on the context.

    For each pair (M, M') the contextual set lambda_c = {xi_E(., M) != xi_E(., M')}
    is collected, and for every basis state psi_i of M or M' the points of
    lambda_c(psi_i) must lie outside Supp rho(.|psi_i).
    """
    tol = model.metadata.context_tolerance if tol is None else tol
    E = family.shared_effect
    mu = model.ontic.measure
    ids = model.ontic.ids
    witnesses: list[Witness] = []
    gaps: list[str] = []
    worst = 0.0
    pair_stats = []
    interstitial_ok = True
    for a, b in combinations(family.contexts, 2):
        ea, eb = a.effects[a.index_of(E)], b.effects[b.index_of(E)]
        lam_c = np.zeros(len(ids), dtype=bool)
        pair_worst = 0.0
        for prep in preps:
            for s in states:
                try:
                    rho = model.density(s, prep)
                    xa, xb = model.response(ea, a, s), model.response(eb, b, s)
                except MissingEntryError as exc:
                    gaps.append(str(exc))
                    continue
                pa, pb = float(np.dot(xa * rho, mu)), float(np.dot(xb * rho, mu))
                d = abs(pa - pb)
                pair_worst = max(pair_worst, d)
                lam_c |= np.abs(xa - xb) > threshold
                if d > tol:
                    witnesses.append(Witness("cross_context", d, state=s, effect=E, context=a,
                                             other_context=b, prep=prep,
                                             values={"p": pa, "p_other": pb}))
        worst = max(worst, pair_worst)
        # basis states of both contexts: contextual points must avoid their supports
        basis = {r.key: r for r in a.rays + b.rays}
        for r in basis.values():
            for prep in preps:
                try:
                    rho = model.density(r, prep)
                    xa, xb = model.response(ea, a, r), model.response(eb, b, r)
                except MissingEntryError as exc:
                    gaps.append(str(exc))
                    continue
                diff = np.abs(xa - xb)
                lc = diff > threshold
                lam_c |= lc
                for p in np.flatnonzero(lc & (rho > threshold)):
                    interstitial_ok = False
                    witnesses.append(Witness(
                        "cross_context", float(diff[p] * rho[p] * mu[p]), point=ids[p], state=r,
                        effect=E, context=a, other_context=b, prep=prep,
                        values={"kind": "interstitial"},
                    ))
        pair_stats.append({"contexts": [a.label, b.label], "lambda_c_size": int(lam_c.sum()),
                           "max_delta": pair_worst})
    uniformity = _uniformity(model, family, states, preps[0], threshold) if states else None
    worst = max([worst] + [w.defect for w in witnesses])
    return Verdict(
        "cross_context", not witnesses, worst, witnesses,
        coverage_gaps=gaps,
        details={
            "tolerance": tol,
            "shared_effect": E.key,
            "n_contexts": len(family.contexts),
            "n_states": len(states),
            "pairs": pair_stats,
            "pairs_with_lambda_c": sum(1 for p in pair_stats if p["lambda_c_size"] > 0),
            "interstitial_disjoint": interstitial_ok,
            "uniformity_variance": uniformity,
        },
    )


def _uniformity(model, family, states, prep, threshold) -> float | None:
    """Mean over states of the variance of rho on union(Supp xi_E) - intersection(Supp xi_E)."""
    E = family.shared_effect
    vals = []
    for s in states:
        try:
            rho = model.density(s, prep)
            masks = [model.response(c.effects[c.index_of(E)], c, s) > threshold for c in family.contexts]
        except MissingEntryError:
            continue
        region = np.logical_or.reduce(masks) & ~np.logical_and.reduce(masks)
        if region.any():
            vals.append(float(np.var(rho[region])))
    return float(np.mean(vals)) if vals else None


# -- lambda-sufficiency -------------------------------------------------------------

def check_lambda_sufficiency(
    model: OntologicalModel,
    states: Sequence[Ket] | None = None,
    effects: Sequence[Effect] | None = None,
    contexts: Sequence[Measurement] | None = None,
    tol: float = LAMBDA_SUFFICIENCY_TOL,
) -> Verdict:
    """Pass structurally when no row depends on the state; otherwise compare
    every state-dependent row across the listed states."""
    states = model.states if states is None else tuple(states)
    contexts = model.contexts if contexts is None else tuple(contexts)
    rows = []
    gaps: list[str] = []
    for m in contexts:
        for e in m.effects:
            if effects is not None and not any(e.close_to(f) for f in effects):
                continue
            try:
                rows.append((e, m, model.response_function(e, m)))
            except MissingEntryError as exc:
                gaps.append(str(exc))
    dependent = [(e, m, rf) for e, m, rf in rows if rf.is_state_dependent]
    if not dependent:
        return Verdict("lambda_sufficiency", True, coverage_gaps=gaps,
                       details={"mode": "structural", "n_rows": len(rows)})
    witnesses: list[Witness] = []
    worst = 0.0
    for e, m, rf in dependent:
        usable, tables = [], []
        for s in states:
            try:
                tables.append(rf.table_for(s))
                usable.append(s)
            except MissingEntryError as exc:
                gaps.append(str(exc))
        if len(tables) < 2:
            continue
        t = np.array(tables)
        spread = t.max(axis=0) - t.min(axis=0)
        p = int(np.argmax(spread))
        d = float(spread[p])
        worst = max(worst, d)
        if d > tol:
            hi, lo = int(np.argmax(t[:, p])), int(np.argmin(t[:, p]))
            witnesses.append(Witness(
                "lambda_sufficiency", d, point=model.ontic.ids[p], state=usable[hi],
                other_state=usable[lo], effect=e, context=m,
                values={"xi": float(t[hi, p]), "xi_other": float(t[lo, p])},
            ))
    return Verdict("lambda_sufficiency", not witnesses, worst, witnesses, coverage_gaps=gaps,
                   details={"mode": "behavioral", "n_rows": len(rows),
                            "n_state_dependent_rows": len(dependent), "n_states": len(states)})


# -- model validation as a check ---------------------------------------------------

def check_validate(
    model: OntologicalModel,
    states: Sequence[Ket] | None = None,
    contexts: Sequence[Measurement] | None = None,
) -> Verdict:
    states = model.states if states is None else tuple(states)
    contexts = model.contexts if contexts is None else tuple(contexts)
    by_state = {s.key: s for s in states}
    by_ctx = {c.label: c for c in contexts}
    effects = {e.key: e for c in contexts for e in c.effects}
    witnesses = []
    gaps = []
    for v in validate_model(model, states, contexts):
        if v.kind.startswith("missing"):
            gaps.append(f"{v.kind}: {v.context or v.state}")
            continue
        witnesses.append(Witness(
            "validate", v.defect, point=v.point,
            state=by_state.get(v.state) if v.state else None,
            effect=effects.get(v.effect) if v.effect else None,
            context=by_ctx.get(v.context) if v.context else None,
            values={"kind": v.kind},
        ))
    worst = max((w.defect for w in witnesses), default=0.0)
    return Verdict("validate", not witnesses, worst, witnesses, coverage_gaps=gaps,
                   details={"n_states": len(states), "n_contexts": len(contexts)})


# -- witness replay ---------------------------------------------------------------------

def replay_witness(model: OntologicalModel, w: Witness) -> float:
    """Recompute the defect a witness reports, from the model alone."""
    mu = model.ontic.measure
    p = model.ontic.index(w.point) if w.point is not None else None
    if w.check == "born":
        pred = predicted_probability(model, w.state, w.prep, w.effect, w.context, clamp=False)
        return abs(pred - born_probability(w.state, w.effect))
    if w.check == "support_invariance":
        def total(m):
            return sum(model.response(e, m, w.state)[p] for e in m.effects)
        return float(total(w.other_context) - total(w.context))
    if w.check == "basis_exclusion":
        xi = model.response(w.effect, w.context, w.state)
        return float(xi[p] * model.density(w.state, w.prep)[p] * mu[p])
    if w.check == "outcome_exclusion":
        a = model.response(w.effect, w.context, w.state)[p]
        b = model.response(w.other_effect, w.context, w.state)[p]
        return float(min(a, b))
    if w.check == "deficiency":
        return float(model.density(w.state, w.prep)[p] * mu[p])
    if w.check == "cross_context":
        a, b = w.context, w.other_context
        xa = model.response(a.effects[a.index_of(w.effect)], a, w.state)
        xb = model.response(b.effects[b.index_of(w.effect)], b, w.state)
        rho = model.density(w.state, w.prep)
        if p is None:
            return abs(float(np.dot(xa * rho, mu)) - float(np.dot(xb * rho, mu)))
        return float(abs(xa[p] - xb[p]) * rho[p] * mu[p])
    if w.check == "lambda_sufficiency":
        rf = model.response_function(w.effect, w.context)
        return float(abs(rf.table_for(w.state)[p] - rf.table_for(w.other_state)[p]))
    if w.check == "validate":
        kind = w.values.get("kind")
        if kind == "epistemic_normalization":
            return abs(model.epistemic_state(w.state, w.prep).mass(model.ontic) - 1.0)
        if kind == "epistemic_range":
            return float(-model.density(w.state, w.prep)[p])
        if kind == "response_normalization":
            return float(abs(sum(model.response(e, w.context, w.state)[p] for e in w.context.effects) - 1.0))
        if kind == "response_range":
            v = model.response(w.effect, w.context, w.state)[p]
            return float(-v if v < 0 else v - 1.0)
        if kind == "context_invalid":
            from .quantum import validate_context
            cv = validate_context(w.context)
            return max(cv.orthogonality_defect, cv.completeness_defect)
    raise ValueError(f"cannot replay witness of check {w.check!r} ({w.values.get('kind')})")


# -- suite runner -----------------------------------------------------------------------

@dataclass
class SuiteConfig:
    checks: tuple[str, ...] = CHECK_IDS
    seed: int | None = None
    states: tuple[Ket, ...] | None = None
    contexts: tuple[ProjectiveContext, ...] | None = None
    povms: tuple[Measurement, ...] = ()
    n_random_states: int = 0
    born_tolerance: float | None = None
    context_tolerance: float | None = None
    max_witnesses: int | None = 50
    threads: int | None = None

    def __post_init__(self):
        self.checks = tuple(self.checks)
        unknown = [c for c in self.checks if c not in CHECK_IDS]
        if unknown:
            raise UnknownCheckError(f"unknown check id(s): {', '.join(unknown)}")
        if self.n_random_states and self.seed is None:
            raise ValueError("random probe states need a seed")


@dataclass
class VerificationReport:
    model: str
    seed: int | None
    verdicts: list[Verdict]
    parameters: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    @property
    def coverage_gaps(self) -> list[str]:
        return [g for v in self.verdicts for g in v.coverage_gaps]

    @property
    def failing(self) -> list[str]:
        return [v.check for v in self.verdicts if not v.passed]

    def verdict(self, check: str) -> Verdict:
        for v in self.verdicts:
            if v.check == check:
                return v
        raise KeyError(check)

    @property
    def exit_code(self) -> int:
        if not self.passed:
            return EXIT_FAIL
        if self.coverage_gaps:
            return EXIT_COVERAGE
        return EXIT_PASS

    def to_json(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "seed": self.seed,
            "pass": self.passed,
            "exit_code": self.exit_code,
            "parameters": _details_json(self.parameters),
            "checks": [v.to_json() for v in self.verdicts],
        }


def thread_count(explicit: int | None = None) -> int:
    if explicit:
        return max(1, int(explicit))
    env = os.environ.get("ONTOSCOPE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _deficiency_suite(model, contexts, prep) -> Verdict:
    witnesses: list[Witness] = []
    gaps: list[str] = []
    rows = []
    for ctx in contexts:
        for r in ctx.rays:
            try:
                res = check_deficiency(model, r, prep, ctx, contexts)
            except MissingEntryError as exc:
                gaps.append(str(exc))
                continue
            witnesses.extend(res.witnesses)
            rows.append(res)
    worst = max((w.defect for w in witnesses), default=0.0)
    flags = [r.multi_varying for r in rows if r.multi_varying is not None]
    return Verdict(
        "deficiency", not witnesses, worst, witnesses, applicable=bool(rows) or bool(gaps),
        coverage_gaps=gaps,
        details={
            "n_tested": len(rows),
            "n_deficient": sum(r.deficient for r in rows),
            "max_varying_effects": max((len(r.varying_effects) for r in rows), default=0),
            "multi_varying_holds": (any(flags) if flags else None),
        },
    )


def _cross_context_suite(model, contexts, states, tol) -> Verdict:
    families = context_families(contexts)
    if not families:
        return _not_applicable("cross_context", "no effect is shared by two contexts")
    parts = [check_cross_context(model, f, states, tol=tol) for f in families]
    witnesses = [w for v in parts for w in v.witnesses]
    return Verdict(
        "cross_context", all(v.passed for v in parts), max(v.max_defect for v in parts),
        witnesses, coverage_gaps=[g for v in parts for g in v.coverage_gaps],
        details={"families": [v.details for v in parts]},
    )


def run_report(model: OntologicalModel, config: SuiteConfig | None = None) -> VerificationReport:
    """Run the selected checks; verdicts come back in ``config.checks`` order."""
    config = config or SuiteConfig()
    states = tuple(config.states) if config.states is not None else model.states
    if config.n_random_states:
        states = states + tuple(
            random_ket(model.dim, make_rng(config.seed, 10, i)) for i in range(config.n_random_states)
        )
    contexts = tuple(config.contexts) if config.contexts is not None else model.contexts
    basis = tuple(r for c in contexts for r in c.rays)
    prep = DEFAULT_PREP

    def run(check: str) -> Verdict:
        if check == "validate":
            return check_validate(model, states, contexts)
        if check == "born":
            return check_born_agreement(model, states, contexts, config.born_tolerance)
        if check in ("support_invariance", "basis_exclusion", "outcome_exclusion"):
            if not contexts:
                return _not_applicable(check, "no contexts")
            if check == "support_invariance":
                return check_support_invariance(model, list(config.povms) + list(contexts), states + basis)
            if check == "basis_exclusion":
                return check_basis_exclusion(model, contexts)
            return check_outcome_exclusion(model, contexts, states + basis)
        if check == "deficiency":
            return _deficiency_suite(model, contexts, prep)
        if check == "cross_context":
            return _cross_context_suite(model, contexts, states, config.context_tolerance)
        if check == "lambda_sufficiency":
            return check_lambda_sufficiency(model, states + basis, None, contexts)
        raise UnknownCheckError(check)

    workers = min(thread_count(config.threads), max(1, len(config.checks)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            verdicts = list(pool.map(run, config.checks))
    else:
        verdicts = [run(c) for c in config.checks]
    verdicts = [v.truncated(config.max_witnesses) for v in verdicts]
    params = {
        "checks": list(config.checks),
        "n_states": len(states),
        "n_contexts": len(contexts),
        "contexts": [c.label for c in contexts],
        "n_povms": len(config.povms),
        "born_tolerance": config.born_tolerance if config.born_tolerance is not None
        else model.metadata.born_tolerance,
        "context_tolerance": config.context_tolerance if config.context_tolerance is not None
        else model.metadata.context_tolerance,
        "support_threshold": DELTA_SUPP,
        "norm_tolerance": EPS_NORM,
    }
    return VerificationReport(model.name, config.seed, verdicts, params)
