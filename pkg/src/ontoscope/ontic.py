"""Discrete ontic spaces and ontological models.

An ontological model assigns every preparation a distribution ``rho`` over a
finite set of ontic points and every (effect, measurement) pair a response
table ``xi``.  Outcome probabilities are the finite sums

    p(E | psi) = sum_lambda xi_E(lambda, M) * rho(lambda | psi, P) * mu(lambda)

where ``mu`` is the per-point measure of the ontic space.
"""

from __future__ import annotations

import dataclasses
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from .quantum import EPS_NORM, Effect, Ket, Povm, ProjectiveContext, validate_context

DEFAULT_PREP = "P0"
DELTA_SUPP = 1e-12

Measurement = Union[ProjectiveContext, Povm]


class MissingEntryError(LookupError):
    """The model has no epistemic state or response row for the request."""


def _frozen_real(values) -> np.ndarray:
    a = np.array(values, dtype=float).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class OnticSpace:
    ids: tuple[str, ...]
    measure: np.ndarray

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        mu = _frozen_real(self.measure)
        if len(ids) != mu.size:
            raise ValueError("ids and measure differ in length")
        if len(set(ids)) != len(ids):
            raise ValueError("ontic point ids must be unique")
        if mu.size and not np.all(mu > 0):
            raise ValueError("ontic point measures must be positive")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "measure", mu)
        object.__setattr__(self, "_index", {k: i for i, k in enumerate(ids)})

    @classmethod
    def uniform(cls, n: int, weight: float, prefix: str = "l") -> "OnticSpace":
        return cls(tuple(f"{prefix}{i}" for i in range(n)), np.full(n, weight))

    def __len__(self) -> int:
        return len(self.ids)

    def index(self, point_id: str) -> int:
        return self._index[point_id]  # type: ignore[attr-defined]

    def to_json(self) -> dict[str, Any]:
        return {"ids": list(self.ids), "measure": [float(x) for x in self.measure]}

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "OnticSpace":
        return cls(tuple(obj["ids"]), np.asarray(obj["measure"], dtype=float))


@dataclass(frozen=True, eq=False)
class EpistemicState:
    """rho(lambda | psi, P) over the points of an ontic space."""

    state: Ket
    density: np.ndarray
    prep: str = DEFAULT_PREP

    def __post_init__(self):
        object.__setattr__(self, "density", _frozen_real(self.density))

    def mass(self, space: OnticSpace) -> float:
        return float(np.dot(self.density, space.measure))


@dataclass(frozen=True, eq=False)
class ResponseFunction:
    """xi_E(lambda, M), optionally also depending on the prepared state.

    A state-independent row stores ``table``.  A lambda-insufficient row
    stores tables per state key in ``state_dependent`` and/or computes them
    with ``state_rule``; ``table`` is then unused.
    """

    effect: Effect
    context_label: str
    table: np.ndarray | None = None
    state_dependent: Mapping[str, np.ndarray] | None = None
    state_rule: Callable[[Ket], np.ndarray] | None = None

    def __post_init__(self):
        if self.table is not None:
            object.__setattr__(self, "table", _frozen_real(self.table))
        if self.state_dependent is not None:
            frozen = {k: _frozen_real(v) for k, v in self.state_dependent.items()}
            object.__setattr__(self, "state_dependent", frozen)
        if self.table is None and not self.is_state_dependent:
            raise ValueError("response function needs a table or state-dependent tables")

    @property
    def is_state_dependent(self) -> bool:
        return self.state_dependent is not None or self.state_rule is not None

    def table_for(self, state: Ket | None = None) -> np.ndarray:
        if not self.is_state_dependent:
            return self.table  # type: ignore[return-value]
        if state is None:
            raise MissingEntryError(
                f"response for {self.effect!r} in {self.context_label!r} depends on the state"
            )
        if self.state_dependent is not None and state.key in self.state_dependent:
            return self.state_dependent[state.key]
        if self.state_rule is not None:
            return _frozen_real(self.state_rule(state))
        raise MissingEntryError(
            f"no response for {self.effect!r} in {self.context_label!r} at state {state!r}"
        )


@dataclass(frozen=True)
class ModelMetadata:
    name: str
    claims_deterministic: bool = False
    claims_lambda_sufficient: bool = True
    claims_contextual: bool = False
    # default Born tolerance for verification; discretized models scale it
    born_tolerance: float = 1e-9
    context_tolerance: float = 1e-9
    extra: Mapping[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["extra"] = dict(self.extra)
        return out

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "ModelMetadata":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in obj.items() if k in names})


@dataclass(frozen=True, eq=False)
class OntologicalModel:
    """Ontic space plus epistemic states and response functions.

    Entries are looked up explicitly first and fall back to the optional
    rules, which lets zoo models cover continuous state families while
    snapshots and mutated copies stay plain tables.  ``states`` and
    ``contexts`` list what the model was built for; checks default to them.
    """

    dim: int
    ontic: OnticSpace
    metadata: ModelMetadata
    epistemic: Mapping[tuple[str, str], EpistemicState] = field(default_factory=dict)
    responses: Mapping[tuple[str, str], ResponseFunction] = field(default_factory=dict)
    epistemic_rule: Callable[[Ket, str], np.ndarray] | None = None
    response_rule: Callable[[Effect, Measurement], ResponseFunction] | None = None
    states: tuple[Ket, ...] = ()
    contexts: tuple[ProjectiveContext, ...] = ()
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "contexts", tuple(self.contexts))
        for ctx in self.contexts:
            if ctx.dim != self.dim:
                raise ValueError(f"context {ctx.label!r} has dimension {ctx.dim}")
            verdict = validate_context(ctx)
            if not verdict.passed:
                raise ValueError(f"context {ctx.label!r} is not a valid projective context")
        labels = [c.label for c in self.contexts]
        if len(set(labels)) != len(labels):
            raise ValueError("context labels must be unique within a model")

    @property
    def name(self) -> str:
        return self.metadata.name

    def epistemic_state(self, state: Ket, prep: str = DEFAULT_PREP) -> EpistemicState:
        if state.dim != self.dim:
            raise ValueError(f"state dimension {state.dim} != model dimension {self.dim}")
        key = (state.key, prep)
        found = self.epistemic.get(key)
        if found is not None:
            return found
        if self.epistemic_rule is None:
            raise MissingEntryError(f"no epistemic state for {state!r} with preparation {prep!r}")
        cached = self._cache.get(key)
        if cached is None:
            cached = EpistemicState(state, self.epistemic_rule(state, prep), prep)
            # idempotent fill; concurrent writers store equal values
            with self._lock:
                cached = self._cache.setdefault(key, cached)
        return cached

    def density(self, state: Ket, prep: str = DEFAULT_PREP) -> np.ndarray:
        return self.epistemic_state(state, prep).density

    def response_function(self, effect: Effect, measurement: Measurement) -> ResponseFunction:
        found = self.responses.get((measurement.label, effect.key))
        if found is not None:
            return found
        if self.response_rule is None:
            raise MissingEntryError(
                f"no response for {effect!r} in measurement {measurement.label!r}"
            )
        return self.response_rule(effect, measurement)

    def response(self, effect: Effect, measurement: Measurement, state: Ket | None = None) -> np.ndarray:
        return self.response_function(effect, measurement).table_for(state)

    def is_state_dependent(self, measurements: Iterable[Measurement] | None = None) -> bool:
        ms = self.contexts if measurements is None else measurements
        return any(
            self.response_function(e, m).is_state_dependent for m in ms for e in m.effects
        )

    # copies with overrides; the original stays untouched

    def with_epistemic(self, state: Ket, density, prep: str = DEFAULT_PREP) -> "OntologicalModel":
        ep = dict(self.epistemic)
        ep[(state.key, prep)] = EpistemicState(state, density, prep)
        return dataclasses.replace(self, epistemic=ep, _cache={}, _lock=threading.Lock())

    def with_response(
        self,
        measurement: Measurement,
        effect: Effect,
        table,
        state: Ket | None = None,
    ) -> "OntologicalModel":
        """Override one response row (or one state's row when ``state`` is given)."""
        rs = dict(self.responses)
        if state is None:
            rf = ResponseFunction(effect, measurement.label, table)
        else:
            base = self.response_function(effect, measurement)
            tables = dict(base.state_dependent or {})
            tables[state.key] = np.asarray(table, dtype=float)
            fallback = base.table_for if base.is_state_dependent else (lambda s, t=base.table: t)
            rf = ResponseFunction(effect, measurement.label, None, tables, fallback)
        rs[(measurement.label, effect.key)] = rf
        return dataclasses.replace(self, responses=rs, _cache={}, _lock=threading.Lock())

    def with_metadata(self, **changes) -> "OntologicalModel":
        return dataclasses.replace(
            self, metadata=dataclasses.replace(self.metadata, **changes),
            _cache={}, _lock=threading.Lock(),
        )

    def to_json(
        self,
        states: Sequence[Ket] | None = None,
        contexts: Sequence[ProjectiveContext] | None = None,
    ) -> dict[str, Any]:
        """Snapshot of the model restricted to ``states`` x ``contexts``."""
        states = tuple(self.states if states is None else states)
        contexts = tuple(self.contexts if contexts is None else contexts)
        responses = []
        for ctx in contexts:
            for i, eff in enumerate(ctx.effects):
                rf = self.response_function(eff, ctx)
                row: dict[str, Any] = {"context": ctx.label, "effect": eff.to_json(), "effect_index": i}
                if rf.is_state_dependent:
                    row["table"] = None
                    row["state_dependent"] = [
                        {"state": s.to_json(), "table": _floats(rf.table_for(s))} for s in states
                    ]
                else:
                    row["table"] = _floats(rf.table_for(None))
                responses.append(row)
        epistemic = []
        for s in states:
            es = self.epistemic_state(s)
            epistemic.append({"state": s.to_json(), "prep": es.prep, "density": _floats(es.density)})
        return {
            "name": self.name,
            "dim": self.dim,
            "metadata": self.metadata.to_json(),
            "ontic": self.ontic.to_json(),
            "states": [s.to_json() for s in states],
            "contexts": [c.to_json() for c in contexts],
            "responses": responses,
            "epistemic": epistemic,
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "OntologicalModel":
        dim = int(obj["dim"])
        ontic = OnticSpace.from_json(obj["ontic"])
        meta = ModelMetadata.from_json(obj.get("metadata", {"name": obj.get("name", "model")}))
        if "name" in obj:
            meta = dataclasses.replace(meta, name=obj["name"])
        contexts = tuple(ProjectiveContext.from_json(c) for c in obj.get("contexts", []))
        states = tuple(Ket.from_json(s) for s in obj.get("states", []))
        n = len(ontic)
        responses: dict[tuple[str, str], ResponseFunction] = {}
        for row in obj.get("responses", []):
            eff = Effect.from_json(row["effect"])
            sd = row.get("state_dependent")
            if sd is not None:
                tables = {Ket.from_json(e["state"]).key: _checked(e["table"], n) for e in sd}
                rf = ResponseFunction(eff, row["context"], None, tables)
            else:
                rf = ResponseFunction(eff, row["context"], _checked(row["table"], n))
            responses[(row["context"], eff.key)] = rf
        epistemic: dict[tuple[str, str], EpistemicState] = {}
        for e in obj.get("epistemic", []):
            s = Ket.from_json(e["state"])
            prep = e.get("prep", DEFAULT_PREP)
            epistemic[(s.key, prep)] = EpistemicState(s, _checked(e["density"], n), prep)
        return cls(dim, ontic, meta, epistemic, responses, states=states, contexts=contexts)


def _floats(a: np.ndarray) -> list[float]:
    return [float(x) for x in a]


def _checked(values, n: int) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"table has shape {a.shape}, expected ({n},)")
    return a


def predicted_probability(
    model: OntologicalModel,
    state: Ket,
    prep: str,
    effect: Effect,
    context: Measurement,
    clamp: bool = True,
) -> float:
    """sum_lambda xi * rho * mu.

    Values within EPS_NORM of [0, 1] are clamped; anything further out is
    returned unchanged so broken models surface as large defects.
    """
    rho = model.density(state, prep)
    xi = model.response(effect, context, state)
    p = float(np.dot(xi * rho, model.ontic.measure))
    if clamp and -EPS_NORM <= p < 0.0:
        return 0.0
    if clamp and 1.0 < p <= 1.0 + EPS_NORM:
        return 1.0
    return p


def support_mask(values: np.ndarray, threshold: float = DELTA_SUPP) -> np.ndarray:
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    return np.asarray(values, dtype=float) > threshold


def support(values, threshold: float = DELTA_SUPP, space: OnticSpace | None = None) -> frozenset:
    """Points where ``values`` exceeds ``threshold`` (ids if ``space`` given, else indices)."""
    idx = np.flatnonzero(support_mask(values, threshold))
    if space is None:
        return frozenset(int(i) for i in idx)
    return frozenset(space.ids[i] for i in idx)


@dataclass(frozen=True)
class Violation:
    kind: str
    defect: float
    point: str | None = None
    context: str | None = None
    effect: str | None = None
    state: str | None = None

    def to_json(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def validate_model(
    model: OntologicalModel,
    states: Sequence[Ket] | None = None,
    contexts: Sequence[Measurement] | None = None,
    tol: float = EPS_NORM,
) -> list[Violation]:
    """Normalization and range checks for rho and xi.  Empty list means valid."""
    states = model.states if states is None else tuple(states)
    contexts = model.contexts if contexts is None else tuple(contexts)
    space = model.ontic
    out: list[Violation] = []
    for s in states:
        try:
            es = model.epistemic_state(s)
        except MissingEntryError:
            out.append(Violation("missing_epistemic", 1.0, state=s.key))
            continue
        d = es.density
        neg = np.flatnonzero(d < -tol)
        for i in neg:
            out.append(Violation("epistemic_range", float(-d[i]), space.ids[i], state=s.key))
        defect = abs(es.mass(space) - 1.0)
        if defect > tol:
            out.append(Violation("epistemic_normalization", defect, state=s.key))
    for m in contexts:
        if isinstance(m, ProjectiveContext):
            cv = validate_context(m)
            if not cv.passed:
                out.append(Violation(
                    "context_invalid", max(cv.orthogonality_defect, cv.completeness_defect),
                    context=m.label,
                ))
        try:
            rfs = [model.response_function(e, m) for e in m.effects]
        except MissingEntryError:
            out.append(Violation("missing_response", 1.0, context=m.label))
            continue
        dependent = any(rf.is_state_dependent for rf in rfs)
        for s in (states if dependent else (None,)):
            try:
                tables = [rf.table_for(s) for rf in rfs]
            except MissingEntryError:
                out.append(Violation("missing_response", 1.0, context=m.label,
                                     state=None if s is None else s.key))
                continue
            skey = None if s is None else s.key
            for rf, t in zip(rfs, tables):
                bad = np.flatnonzero((t < -tol) | (t > 1.0 + tol))
                for i in bad:
                    dev = float(-t[i] if t[i] < 0 else t[i] - 1.0)
                    out.append(Violation("response_range", dev, space.ids[i], m.label, rf.effect.key, skey))
            total = np.sum(tables, axis=0)
            for i in np.flatnonzero(np.abs(total - 1.0) > tol):
                out.append(Violation(
                    "response_normalization", float(abs(total[i] - 1.0)), space.ids[i], m.label, state=skey,
                ))
    return out


@dataclass(frozen=True)
class DeterminismWitness:
    point: str
    effect: str
    context: str
    value: float
    state: str | None = None


def is_outcome_deterministic(
    model: OntologicalModel,
    tolerance: float = 1e-9,
    states: Sequence[Ket] | None = None,
    contexts: Sequence[Measurement] | None = None,
) -> tuple[bool, DeterminismWitness | None]:
    """True iff every response entry is within ``tolerance`` of 0 or 1.

    Only the listed (or the model's own) contexts and states are inspected.
    """
    states = model.states if states is None else tuple(states)
    contexts = model.contexts if contexts is None else tuple(contexts)
    for m in contexts:
        for e in m.effects:
            rf = model.response_function(e, m)
            for s in (states if rf.is_state_dependent else (None,)):
                t = rf.table_for(s)
                off = np.minimum(np.abs(t), np.abs(t - 1.0)) > tolerance
                if np.any(off):
                    i = int(np.flatnonzero(off)[0])
                    return False, DeterminismWitness(
                        model.ontic.ids[i], e.key, m.label, float(t[i]),
                        None if s is None else s.key,
                    )
    return True, None
