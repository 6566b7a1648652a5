"""Concrete ontological models.

``bb``
    psi-complete: the ontic state *is* the ray.  Responses are Born weights
    of the ontic ray, so measurements are outcome-indeterministic.
``ks_qubit``
    Deterministic, lambda-sufficient, noncontextual qubit model on the Bloch
    sphere (cosine-weighted hemisphere distribution, hemisphere responses),
    discretized by a Fibonacci lattice.
``bell``
    Bell's construction: a uniform hidden variable on [0, 1] split into
    consecutive intervals of length <psi|E_k|psi> in the context's order.
    Deterministic, but the responses depend on the quantum state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ontic import (
    MissingEntryError,
    Measurement,
    ModelMetadata,
    OnticSpace,
    OntologicalModel,
    ResponseFunction,
)
from .quantum import (
    Effect,
    Ket,
    ProjectiveContext,
    born_probability,
    canonical_context,
    make_rng,
    random_context,
    random_ket,
    validate_context,
)

MODEL_IDS = ("bb", "ks_qubit", "bell")
MIN_SPHERE_POINTS = 1000
MIN_GRID_CELLS = 100
# |n . lambda| below this is a tie on the hemisphere boundary
HEMISPHERE_TIE = 1e-12
GOLDEN = (1.0 + 5.0 ** 0.5) / 2.0


@dataclass(frozen=True)
class ZooSpec:
    model_id: str
    dim: int = 2
    n_points: int = 100_000
    n_grid: int = 10_000
    seed: int | None = None

    def __post_init__(self):
        if self.model_id not in MODEL_IDS:
            raise ValueError(f"unknown model {self.model_id!r}; choose from {MODEL_IDS}")
        if self.model_id == "ks_qubit":
            if self.dim != 2:
                raise ValueError("ks_qubit is a qubit model (dim=2)")
            if self.n_points < MIN_SPHERE_POINTS:
                raise ValueError(f"ks_qubit needs at least {MIN_SPHERE_POINTS} sphere points")
        if self.model_id == "bell" and self.n_grid < MIN_GRID_CELLS:
            raise ValueError(f"bell needs at least {MIN_GRID_CELLS} grid cells")
        if self.dim < 2:
            raise ValueError("dim must be at least 2")


def _effect_index(effect: Effect, measurement: Measurement) -> int:
    try:
        return measurement.index_of(effect)
    except ValueError as exc:
        raise MissingEntryError(str(exc)) from None


def _rays_with(states: Sequence[Ket], contexts: Sequence[ProjectiveContext]) -> tuple[Ket, ...]:
    seen: dict[str, Ket] = {}
    for k in list(states) + [r for c in contexts for r in c.rays]:
        seen.setdefault(k.key, k)
    return tuple(seen.values())


def _check_contexts(dim: int, contexts: Sequence[ProjectiveContext]) -> None:
    for c in contexts:
        if c.dim != dim:
            raise ValueError(f"context {c.label!r} has dimension {c.dim}, expected {dim}")
        if not validate_context(c).passed:
            raise ValueError(f"context {c.label!r} is not orthogonal and complete")


# -- psi-complete model ---------------------------------------------------------

def build_bb_model(
    dim: int,
    state_list: Sequence[Ket],
    context_list: Sequence[ProjectiveContext] = (),
) -> OntologicalModel:
    """Ontic points are the listed rays (plus every ray of ``context_list``)."""
    if dim < 2:
        raise ValueError("dim must be at least 2")
    if not state_list:
        raise ValueError("the bb model needs a nonempty state list")
    for s in state_list:
        if s.dim != dim:
            raise ValueError(f"state of dimension {s.dim} given for dim={dim}")
    _check_contexts(dim, context_list)
    points = _rays_with(state_list, context_list)
    space = OnticSpace(tuple(f"k{i}" for i in range(len(points))), np.ones(len(points)))
    index = {k.key: i for i, k in enumerate(points)}
    amps = np.array([k.amplitudes for k in points])

    def rho(state: Ket, prep: str) -> np.ndarray:
        i = index.get(state.key)
        if i is None:
            raise MissingEntryError(f"{state!r} is not an ontic point of this bb model")
        d = np.zeros(len(points))
        d[i] = 1.0
        return d

    def xi(effect: Effect, measurement: Measurement) -> ResponseFunction:
        _effect_index(effect, measurement)
        # <lambda|E|lambda> for every ontic ray at once
        table = np.real(np.einsum("ni,ij,nj->n", amps.conj(), effect.matrix, amps))
        return ResponseFunction(effect, measurement.label, np.clip(table, 0.0, 1.0))

    meta = ModelMetadata(
        name="bb",
        claims_deterministic=False,
        claims_lambda_sufficient=True,
        claims_contextual=False,
        born_tolerance=1e-9,
        context_tolerance=1e-9,
        extra={"model_id": "bb"},
    )
    return OntologicalModel(
        dim, space, meta,
        epistemic_rule=rho, response_rule=xi,
        states=points, contexts=tuple(context_list),
    )


# -- Kochen-Specker qubit model -----------------------------------------------------

def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` equal-area points on S^2 as an (n, 3) array.

    Heights are the cell centres z_i = 1 - (2i + 1)/n, so an odd ``n`` puts
    one point exactly on the equator.
    """
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = 2.0 * np.pi * i / GOLDEN
    return np.column_stack((r * np.cos(phi), r * np.sin(phi), z))


def bloch_vector(ket: Ket) -> np.ndarray:
    if ket.dim != 2:
        raise ValueError("Bloch vectors are defined for qubits only")
    a, b = ket.amplitudes
    ab = np.conj(a) * b
    return np.array([2.0 * ab.real, 2.0 * ab.imag, abs(a) ** 2 - abs(b) ** 2])


def _lexicographically_positive(n: np.ndarray) -> bool:
    for c in n:
        if abs(c) > 1e-9:
            return bool(c > 0)
    return True


def hemisphere_indicator(points: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """1 where points . direction >= 0.

    Points on the boundary circle go to whichever of +direction/-direction is
    lexicographically positive, so a pair of antipodal effects partitions the
    lattice exactly.
    """
    dots = points @ direction
    tie = np.abs(dots) <= HEMISPHERE_TIE
    out = (dots > 0) & ~tie
    if _lexicographically_positive(direction):
        out |= tie
    return out.astype(float)


def build_ks_qubit_model(
    n_points: int,
    seed: int,
    state_list: Sequence[Ket] = (),
    context_list: Sequence[ProjectiveContext] = (),
    n_states: int = 2,
    n_contexts: int = 1,
) -> OntologicalModel:
    """Fibonacci-lattice discretization with ``n_points`` cells of measure 4*pi/N.

    ``seed`` only drives the probe states and contexts attached to the model
    when ``state_list`` / ``context_list`` are not given.
    """
    ZooSpec("ks_qubit", 2, n_points=n_points, seed=seed)
    _check_contexts(2, context_list)
    lattice = fibonacci_sphere(n_points)
    measure = 4.0 * np.pi / n_points
    space = OnticSpace(tuple(f"s{i}" for i in range(n_points)), np.full(n_points, measure))

    def rho(state: Ket, prep: str) -> np.ndarray:
        c = lattice @ bloch_vector(state)
        d = np.where(c > 0.0, c / np.pi, 0.0)
        # renormalize on the lattice so sum rho * mu == 1 up to round-off
        return d / (np.sum(d) * measure)

    def xi(effect: Effect, measurement: Measurement) -> ResponseFunction:
        _effect_index(effect, measurement)
        if effect.rank1_ray is None or effect.dim != 2:
            raise MissingEntryError("ks_qubit responds to rank-1 qubit projectors only")
        table = hemisphere_indicator(lattice, bloch_vector(effect.rank1_ray))
        return ResponseFunction(effect, measurement.label, table)

    probe_states = list(state_list) or [random_ket(2, make_rng(seed, 0, i)) for i in range(n_states)]
    probe_contexts = list(context_list) or [
        random_context(2, make_rng(seed, 1, i), label=f"ks-ctx-{i}") for i in range(n_contexts)
    ]
    meta = ModelMetadata(
        name="ks_qubit",
        claims_deterministic=True,
        claims_lambda_sufficient=True,
        claims_contextual=False,
        born_tolerance=3.0 / np.sqrt(n_points),
        context_tolerance=1e-9,
        extra={"model_id": "ks_qubit", "n_points": n_points, "seed": seed},
    )
    return OntologicalModel(
        2, space, meta,
        epistemic_rule=rho, response_rule=xi,
        states=_rays_with(probe_states, probe_contexts), contexts=tuple(probe_contexts),
    )


# -- Bell's model ------------------------------------------------------------------

def bell_outcomes(state: Ket, measurement: Measurement, midpoints: np.ndarray) -> np.ndarray:
    """Outcome index per cell: min{j : sum_{i<=j} <psi|E_i|psi> >= tau}."""
    cum = np.cumsum([born_probability(state, e) for e in measurement.effects])
    k = np.searchsorted(cum, midpoints, side="left")
    return np.minimum(k, len(measurement.effects) - 1)


def build_bell_model(
    dim: int,
    n_grid: int,
    context_list: Sequence[ProjectiveContext] | None = None,
    state_list: Sequence[Ket] = (),
) -> OntologicalModel:
    """``n_grid`` equal cells of [0, 1] with a uniform distribution for every state."""
    ZooSpec("bell", dim, n_grid=n_grid)
    contexts = tuple(context_list) if context_list else (canonical_context(dim),)
    _check_contexts(dim, contexts)
    for s in state_list:
        if s.dim != dim:
            raise ValueError(f"state of dimension {s.dim} given for dim={dim}")
    space = OnticSpace(tuple(f"c{i}" for i in range(n_grid)), np.full(n_grid, 1.0 / n_grid))
    midpoints = (np.arange(n_grid) + 0.5) / n_grid

    def rho(state: Ket, prep: str) -> np.ndarray:
        return np.ones(n_grid)

    def xi(effect: Effect, measurement: Measurement) -> ResponseFunction:
        k = _effect_index(effect, measurement)

        def table(state: Ket) -> np.ndarray:
            return (bell_outcomes(state, measurement, midpoints) == k).astype(float)

        return ResponseFunction(effect, measurement.label, None, None, table)

    meta = ModelMetadata(
        name="bell",
        claims_deterministic=True,
        claims_lambda_sufficient=False,
        claims_contextual=True,
        born_tolerance=1.0 / n_grid,
        context_tolerance=2.0 / n_grid,
        extra={"model_id": "bell", "n_grid": n_grid},
    )
    return OntologicalModel(
        dim, space, meta,
        epistemic_rule=rho, response_rule=xi,
        states=_rays_with(state_list, contexts), contexts=contexts,
    )


def build_model(
    spec: ZooSpec,
    states: Sequence[Ket] = (),
    contexts: Sequence[ProjectiveContext] = (),
) -> OntologicalModel:
    if spec.model_id == "bb":
        return build_bb_model(spec.dim, states, contexts)
    if spec.model_id == "ks_qubit":
        if spec.seed is None:
            raise ValueError("ks_qubit needs a seed for its probe states")
        return build_ks_qubit_model(spec.n_points, spec.seed, states, contexts)
    return build_bell_model(spec.dim, spec.n_grid, contexts or None, states)
