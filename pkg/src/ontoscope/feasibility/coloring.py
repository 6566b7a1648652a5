"""Noncontextual {0, 1} value assignments on ray sets (BKS colorability)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Sequence

import numpy as np

from ..quantum import EPS_NORM, Ket, ProjectiveContext

RAY_IDENTITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class RaySet:
    dim: int
    rays: tuple[Ket, ...]
    contexts: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rays = tuple(self.rays)
        contexts = tuple(tuple(int(i) for i in c) for c in self.contexts)
        for r in rays:
            if r.dim != self.dim:
                raise ValueError(f"ray of dimension {r.dim} in a dim={self.dim} ray set")
        for c in contexts:
            if len(c) != self.dim:
                raise ValueError(f"context {c} does not name {self.dim} rays")
            if len(set(c)) != len(c):
                raise ValueError(f"context {c} repeats a ray")
            if any(i < 0 or i >= len(rays) for i in c):
                raise ValueError(f"context {c} references a missing ray")
            for a in range(len(c)):
                for b in range(a + 1, len(c)):
                    if abs(rays[c[a]].overlap(rays[c[b]])) > EPS_NORM:
                        raise ValueError(f"rays {c[a]} and {c[b]} of context {c} are not orthogonal")
        object.__setattr__(self, "rays", rays)
        object.__setattr__(self, "contexts", contexts)

    def membership(self) -> list[int]:
        """Number of contexts each ray belongs to."""
        counts = [0] * len(self.rays)
        for c in self.contexts:
            for i in c:
                counts[i] += 1
        return counts

    def to_json(self) -> dict[str, Any]:
        return {
            "dim": self.dim,
            "rays": [[[float(x) for x in r.amplitudes.real], [float(x) for x in r.amplitudes.imag]]
                     for r in self.rays],
            "contexts": [list(c) for c in self.contexts],
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "RaySet":
        dim = int(obj["dim"])
        rays = []
        for r in obj["rays"]:
            # either [re, im] pairs or a bare real vector (fixtures use integers)
            if len(r) == 2 and isinstance(r[0], list):
                vec = np.asarray(r[0], dtype=float) + 1j * np.asarray(r[1], dtype=float)
            else:
                vec = np.asarray(r, dtype=float)
            rays.append(Ket.normalized(vec))
        return cls(dim, tuple(rays), tuple(tuple(c) for c in obj["contexts"]))


def rays_from_contexts(context_list: Sequence[ProjectiveContext]) -> RaySet:
    """Deduplicate rays (up to phase) across contexts and index the contexts."""
    if not context_list:
        raise ValueError("no contexts given")
    dim = context_list[0].dim
    rays: list[Ket] = []
    tuples = []
    for ctx in context_list:
        if ctx.dim != dim:
            raise ValueError("contexts of different dimensions")
        idx = []
        for r in ctx.rays:
            for j, known in enumerate(rays):
                if abs(known.overlap(r)) > 1.0 - RAY_IDENTITY_TOL:
                    idx.append(j)
                    break
            else:
                rays.append(r)
                idx.append(len(rays) - 1)
        tuples.append(tuple(idx))
    return RaySet(dim, tuple(rays), tuple(tuples))


def load_fixture(name: str = "ks18") -> RaySet:
    text = resources.files("ontoscope").joinpath("data").joinpath(f"{name}.json").read_text()
    return RaySet.from_json(json.loads(text))


@dataclass
class ColoringResult:
    feasible: bool
    assignment: tuple[int, ...] | None
    nodes: int
    ray_order: tuple[int, ...]
    certificate: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {"feasible": self.feasible, "certificate": self.certificate}


def _ray_order(rayset: RaySet) -> list[int]:
    order, seen = [], set()
    for c in rayset.contexts:
        for i in c:
            if i not in seen:
                seen.add(i)
                order.append(i)
    order.extend(i for i in range(len(rayset.rays)) if i not in seen)
    return order


class _Search:
    def __init__(self, rayset: RaySet, count_all: bool = False):
        self.contexts = rayset.contexts
        self.n = len(rayset.rays)
        self.by_ray: list[list[int]] = [[] for _ in range(self.n)]
        for k, c in enumerate(self.contexts):
            for i in c:
                self.by_ray[i].append(k)
        self.order = _ray_order(rayset)
        self.nodes = 0
        self.count_all = count_all
        self.solutions = 0
        self.first: list[int] | None = None

    def _propagate(self, values: list[int], queue: list[int]) -> bool:
        """Unit propagation; False on conflict.  Mutates ``values``."""
        while queue:
            k = queue.pop()
            ctx = self.contexts[k]
            ones = [i for i in ctx if values[i] == 1]
            free = [i for i in ctx if values[i] < 0]
            if len(ones) > 1:
                return False
            if len(ones) == 1:
                forced = [(i, 0) for i in free]
            elif not free:
                return False
            elif len(free) == 1:
                forced = [(free[0], 1)]
            else:
                forced = []
            for i, v in forced:
                values[i] = v
                queue.extend(self.by_ray[i])
        return True

    def run(self, values: list[int]) -> bool:
        self.nodes += 1
        nxt = next((i for i in self.order if values[i] < 0), None)
        if nxt is None:
            self.solutions += 1
            if self.first is None:
                self.first = list(values)
            return not self.count_all
        for v in (1, 0):
            trial = list(values)
            trial[nxt] = v
            if self._propagate(trial, list(self.by_ray[nxt])) and self.run(trial):
                return True
        return False


def ks_colorable(rayset: RaySet) -> ColoringResult:
    """Complete backtracking search for a {0,1} assignment with exactly one 1
    per context.  Returns the assignment or an exhaustion certificate with the
    number of search nodes visited."""
    search = _Search(rayset)
    values = [-1] * search.n
    ok = search._propagate(values, list(range(len(rayset.contexts)))) and search.run(values)
    if ok:
        assignment = tuple(int(v) if v >= 0 else 0 for v in search.first)  # type: ignore[union-attr]
        # rays outside every context are unconstrained; 0 is as good as 1
        for c in rayset.contexts:
            if sum(assignment[i] for i in c) != 1:
                raise AssertionError("search returned an invalid assignment")
        cert = {"type": "assignment", "values": list(assignment), "nodes": search.nodes}
        return ColoringResult(True, assignment, search.nodes, tuple(search.order), cert)
    cert = {"type": "exhaustion", "nodes": search.nodes, "ray_order": list(search.order),
            "n_rays": search.n, "n_contexts": len(rayset.contexts)}
    return ColoringResult(False, None, search.nodes, tuple(search.order), cert)


def count_assignments(rayset: RaySet) -> int:
    """Number of valid {0,1} assignments of the rays that appear in some context."""
    search = _Search(rayset, count_all=True)
    used = {i for c in rayset.contexts for i in c}
    values = [-1 if i in used else 0 for i in range(search.n)]
    if search._propagate(values, list(range(len(rayset.contexts)))):
        search.run(values)
    return search.solutions
