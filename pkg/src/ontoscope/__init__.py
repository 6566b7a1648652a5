"""Discrete ontological models of finite-dimensional quantum systems and
checks of their support structure, contextuality and lambda-sufficiency."""

from .quantum import (
    EPS_NORM,
    Effect,
    Ket,
    Povm,
    ProjectiveContext,
    born_probability,
    canonical_context,
    complete_basis,
    random_context,
    random_ket,
    shared_ray_family,
    validate_context,
)
from .ontic import (
    DEFAULT_PREP,
    DELTA_SUPP,
    EpistemicState,
    MissingEntryError,
    OnticSpace,
    OntologicalModel,
    ResponseFunction,
    is_outcome_deterministic,
    predicted_probability,
    support,
    validate_model,
)
from .zoo import ZooSpec, build_bb_model, build_bell_model, build_ks_qubit_model, build_model

__version__ = "0.1.0"
