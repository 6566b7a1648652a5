"""Finite-dimensional pure states, effects and measurement contexts.

Everything here is dense linear algebra on small complex matrices
(d <= 8 is the intended range).  Values are immutable once built.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

EPS_NORM = 1e-9
# Gram-Schmidt candidates with a smaller residual are treated as dependent.
GS_SKIP = 1e-6
RAY_KEY_DIGITS = 10


def make_rng(seed: int | np.random.Generator | None, *stream: int) -> np.random.Generator:
    """Return a generator for ``seed`` split along the integer ``stream`` path.

    Passing a Generator returns it unchanged, so callers can thread one
    generator through a loop.  Integer seeds are split with SeedSequence
    spawn keys, which makes every (seed, stream) pair an independent,
    reproducible source.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(stream)))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _canon_float(x: float) -> float:
    r = round(float(x), RAY_KEY_DIGITS)
    return 0.0 if r == 0 else r


@dataclass(frozen=True, eq=False)
class Ket:
    """Normalized pure state |psi> in C^dim."""

    amplitudes: np.ndarray
    label: str | None = None

    def __post_init__(self):
        amps = _frozen(np.asarray(self.amplitudes).reshape(-1))
        if amps.size < 1:
            raise ValueError("a ket needs at least one amplitude")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > EPS_NORM:
            raise ValueError(f"ket is not normalized (|psi|^2 = {norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, vec, label: str | None = None) -> "Ket":
        v = np.asarray(vec, dtype=complex).reshape(-1)
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(v / n, label)

    @classmethod
    def basis(cls, dim: int, index: int) -> "Ket":
        v = np.zeros(dim, dtype=complex)
        v[index] = 1.0
        return cls(v, f"e{index}")

    @property
    def dim(self) -> int:
        return int(self.amplitudes.size)

    def overlap(self, other: "Ket") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def phase_fixed(self) -> np.ndarray:
        """Amplitudes with the global phase chosen so the first
        non-negligible entry is real and positive."""
        a = self.amplitudes
        nz = np.flatnonzero(np.abs(a) > EPS_NORM)
        if nz.size == 0:
            return a.copy()
        first = a[nz[0]]
        return a * (abs(first) / first)

    @property
    def key(self) -> str:
        """Phase-invariant identifier of the ray, used as a dictionary key."""
        a = self.phase_fixed()
        parts = [f"{_canon_float(z.real)!r},{_canon_float(z.imag)!r}" for z in a]
        return "ray[" + ";".join(parts) + "]"

    def same_ray(self, other: "Ket", tol: float = EPS_NORM) -> bool:
        return self.dim == other.dim and abs(self.overlap(other)) > 1.0 - tol

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "dim": self.dim,
            "re": [float(x) for x in self.amplitudes.real],
            "im": [float(x) for x in self.amplitudes.imag],
        }
        if self.label is not None:
            out["label"] = self.label
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Ket":
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", [0.0] * len(re)), dtype=float)
        if "dim" in obj and int(obj["dim"]) != re.size:
            raise ValueError("ket 'dim' does not match amplitude count")
        if re.shape != im.shape:
            raise ValueError("ket 're' and 'im' differ in length")
        return cls(re + 1j * im, obj.get("label"))

    def __repr__(self) -> str:
        tag = f" {self.label!r}" if self.label else ""
        return f"Ket({np.array2string(self.amplitudes, precision=4)}{tag})"


@dataclass(frozen=True, eq=False)
class Effect:
    """Positive operator 0 <= E <= 1, optionally tagged as a rank-1 projector."""

    matrix: np.ndarray
    rank1_ray: Ket | None = None

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("effect matrix must be square")
        if np.max(np.abs(m - m.conj().T)) > EPS_NORM:
            raise ValueError("effect matrix is not Hermitian")
        ev = np.linalg.eigvalsh(m)
        if ev[0] < -EPS_NORM or ev[-1] > 1.0 + EPS_NORM:
            raise ValueError(f"effect eigenvalues outside [0, 1]: {ev}")
        if self.rank1_ray is not None:
            if self.rank1_ray.dim != m.shape[0]:
                raise ValueError("rank-1 ray dimension mismatch")
            if np.max(np.abs(m - self.rank1_ray.projector())) > EPS_NORM:
                raise ValueError("matrix is not the projector onto rank1_ray")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def projector(cls, ket: Ket) -> "Effect":
        return cls(ket.projector(), ket)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def is_rank1(self) -> bool:
        return self.rank1_ray is not None

    @property
    def key(self) -> str:
        if self.rank1_ray is not None:
            return "P:" + self.rank1_ray.key
        flat = np.concatenate([self.matrix.real.ravel(), self.matrix.imag.ravel()])
        text = ",".join(repr(_canon_float(x)) for x in flat)
        return "E:" + hashlib.sha1(text.encode()).hexdigest()[:16]

    def close_to(self, other: "Effect", tol: float = EPS_NORM) -> bool:
        return self.dim == other.dim and float(np.max(np.abs(self.matrix - other.matrix))) <= tol

    def to_json(self) -> dict[str, Any]:
        if self.rank1_ray is not None:
            return {"ray": self.rank1_ray.to_json()}
        return {
            "matrix": {
                "re": self.matrix.real.tolist(),
                "im": self.matrix.imag.tolist(),
            }
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Effect":
        if "ray" in obj:
            return cls.projector(Ket.from_json(obj["ray"]))
        m = obj["matrix"]
        return cls(np.asarray(m["re"], dtype=float) + 1j * np.asarray(m["im"], dtype=float))

    def __repr__(self) -> str:
        if self.rank1_ray is not None:
            return f"Effect(|{self.rank1_ray!r}><.|)"
        return f"Effect(dim={self.dim})"


def _default_label(prefix: str, effects: Sequence[Effect]) -> str:
    text = "|".join(e.key for e in effects)
    return f"{prefix}-{hashlib.sha1(text.encode()).hexdigest()[:10]}"


@dataclass(frozen=True, eq=False)
class ProjectiveContext:
    """An ordered set of rank-1 projectors measured jointly (a setting M).

    Orthogonality and completeness are *not* enforced here so that broken
    contexts can still be built and reported on by :func:`validate_context`.
    """

    effects: tuple[Effect, ...]
    label: str = ""

    def __post_init__(self):
        effects = tuple(self.effects)
        if not effects:
            raise ValueError("a context needs at least one effect")
        dims = {e.dim for e in effects}
        if len(dims) != 1:
            raise ValueError("context effects have mixed dimensions")
        for e in effects:
            if not e.is_rank1:
                raise ValueError("projective contexts hold rank-1 effects only")
        object.__setattr__(self, "effects", effects)
        if not self.label:
            object.__setattr__(self, "label", _default_label("ctx", effects))

    @classmethod
    def from_rays(cls, rays: Sequence[Ket], label: str = "") -> "ProjectiveContext":
        return cls(tuple(Effect.projector(r) for r in rays), label)

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    @property
    def rays(self) -> tuple[Ket, ...]:
        return tuple(e.rank1_ray for e in self.effects)  # type: ignore[misc]

    def index_of(self, effect: Effect, tol: float = EPS_NORM) -> int:
        """Position of ``effect`` in this context; ValueError if absent."""
        for i, e in enumerate(self.effects):
            if e.close_to(effect, tol):
                return i
        raise ValueError(f"effect {effect!r} not in context {self.label!r}")

    def contains(self, effect: Effect, tol: float = EPS_NORM) -> bool:
        return any(e.close_to(effect, tol) for e in self.effects)

    def reordered(self, order: Sequence[int], label: str = "") -> "ProjectiveContext":
        if sorted(order) != list(range(len(self.effects))):
            raise ValueError("order must be a permutation of effect indices")
        return ProjectiveContext(tuple(self.effects[i] for i in order), label)

    def to_json(self) -> dict[str, Any]:
        return {"label": self.label, "rays": [r.to_json() for r in self.rays]}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "ProjectiveContext":
        return cls.from_rays([Ket.from_json(r) for r in obj["rays"]], obj.get("label", ""))

    def __repr__(self) -> str:
        return f"ProjectiveContext({self.label!r}, d={self.dim})"


@dataclass(frozen=True, eq=False)
class Povm:
    """General measurement: effects summing to the identity."""

    effects: tuple[Effect, ...]
    label: str = ""

    def __post_init__(self):
        effects = tuple(self.effects)
        if not effects:
            raise ValueError("a POVM needs at least one effect")
        dims = {e.dim for e in effects}
        if len(dims) != 1:
            raise ValueError("POVM effects have mixed dimensions")
        total = sum(e.matrix for e in effects)
        dev = float(np.max(np.abs(total - np.eye(effects[0].dim))))
        if dev > EPS_NORM:
            raise ValueError(f"POVM effects do not sum to identity (defect {dev:.3g})")
        object.__setattr__(self, "effects", effects)
        if not self.label:
            object.__setattr__(self, "label", _default_label("povm", effects))

    @classmethod
    def from_context(cls, ctx: ProjectiveContext) -> "Povm":
        return cls(ctx.effects, ctx.label)

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    def index_of(self, effect: Effect, tol: float = EPS_NORM) -> int:
        for i, e in enumerate(self.effects):
            if e.close_to(effect, tol):
                return i
        raise ValueError(f"effect {effect!r} not in POVM {self.label!r}")

    def to_json(self) -> dict[str, Any]:
        return {"label": self.label, "effects": [e.to_json() for e in self.effects]}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Povm":
        return cls(tuple(Effect.from_json(e) for e in obj["effects"]), obj.get("label", ""))


def born_probability(state: Ket, effect: Effect) -> float:
    """<psi|E|psi>, with sub-tolerance round-off clamped into [0, 1]."""
    if state.dim != effect.dim:
        raise ValueError(f"dimension mismatch: state {state.dim}, effect {effect.dim}")
    psi = state.amplitudes
    p = float(np.real(np.vdot(psi, effect.matrix @ psi)))
    if p < 0.0:
        if p < -EPS_NORM:
            raise ValueError(f"negative Born probability {p!r}")
        return 0.0
    if p > 1.0 and p <= 1.0 + EPS_NORM:
        return 1.0
    return p


def _check_orthonormal(vectors: Sequence[np.ndarray]) -> None:
    if not vectors:
        return
    g = np.array([[np.vdot(u, v) for v in vectors] for u in vectors])
    dev = float(np.max(np.abs(g - np.eye(len(vectors)))))
    if dev > EPS_NORM:
        raise ValueError(f"input rays are not orthonormal (Gram defect {dev:.3g})")


def complete_basis(partial: Sequence[Ket], dim: int, label: str = "") -> ProjectiveContext:
    """Extend orthonormal rays to a full context.

    The given rays come first, in order.  Missing directions are filled by
    Gram-Schmidt over the canonical basis vectors e_0, e_1, ... in index order.
    """
    if len(partial) > dim:
        raise ValueError("more rays than the dimension")
    for k in partial:
        if k.dim != dim:
            raise ValueError(f"ray of dimension {k.dim} given for dim={dim}")
    vecs = [k.amplitudes.copy() for k in partial]
    _check_orthonormal(vecs)
    kets = list(partial)
    for i in range(dim):
        if len(vecs) == dim:
            break
        c = np.zeros(dim, dtype=complex)
        c[i] = 1.0
        # two passes of classical GS keep the residual orthogonal to ~1e-16
        for _ in range(2):
            for v in vecs:
                c = c - np.vdot(v, c) * v
        n = np.linalg.norm(c)
        if n < GS_SKIP:
            continue
        c = c / n
        vecs.append(c)
        kets.append(Ket(c))
    if len(vecs) != dim:
        raise ValueError("could not complete the basis")
    return ProjectiveContext.from_rays(kets, label)


def canonical_context(dim: int, label: str = "") -> ProjectiveContext:
    return complete_basis([], dim, label or f"canonical-{dim}")


def random_ket(dim: int, seed: int | np.random.Generator) -> Ket:
    """Haar-random pure state: normalized complex Gaussian vector."""
    if dim < 2:
        raise ValueError("dim must be at least 2")
    rng = make_rng(seed)
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return Ket(z / np.linalg.norm(z))


def random_context(
    dim: int,
    seed: int | np.random.Generator,
    fixed: Sequence[Ket] = (),
    label: str = "",
) -> ProjectiveContext:
    """A context whose leading rays are ``fixed`` and whose remaining rays are
    Haar-random in the orthogonal complement (last one via complete_basis)."""
    rng = make_rng(seed)
    rays = list(fixed)
    while len(rays) < dim - 1:
        z = random_ket(dim, rng).amplitudes
        for _ in range(2):
            for r in rays:
                z = z - np.vdot(r.amplitudes, z) * r.amplitudes
        n = np.linalg.norm(z)
        if n < GS_SKIP:
            continue
        rays.append(Ket(z / n))
    return complete_basis(rays, dim, label)


def shared_ray_family(
    shared: Ket,
    n: int,
    seed: int | np.random.Generator,
    prefix: str = "fam",
) -> list[ProjectiveContext]:
    """``n`` contexts that all start with ``shared``: the canonical completion
    followed by n-1 Haar-random completions (streams ``seed``/4/i)."""
    if n < 1:
        raise ValueError("a family needs at least one context")
    out = [complete_basis([shared], shared.dim, label=f"{prefix}-0")]
    for i in range(1, n):
        rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, 4, i)
        out.append(random_context(shared.dim, rng, fixed=[shared], label=f"{prefix}-{i}"))
    return out


@dataclass(frozen=True)
class ContextVerdict:
    passed: bool
    orthogonality_defect: float
    completeness_defect: float
    tolerance: float = field(default=EPS_NORM)


def validate_context(ctx: ProjectiveContext, tol: float = EPS_NORM) -> ContextVerdict:
    """Max-entry defects of P_i P_j = 0 (i != j) and sum_i P_i = 1."""
    mats = [e.matrix for e in ctx.effects]
    orth = 0.0
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            orth = max(orth, float(np.max(np.abs(mats[i] @ mats[j]))))
    comp = float(np.max(np.abs(sum(mats) - np.eye(ctx.dim))))
    return ContextVerdict(orth <= tol and comp <= tol, orth, comp, tol)
