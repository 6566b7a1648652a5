import numpy as np
import pytest
from scipy.integrate import quad

from ontoscope.ontic import MissingEntryError, is_outcome_deterministic, predicted_probability, support
from ontoscope.quantum import Ket, canonical_context, complete_basis, random_context
from ontoscope.zoo import (
    ZooSpec,
    bell_outcomes,
    build_bb_model,
    build_bell_model,
    build_ks_qubit_model,
    build_model,
    fibonacci_sphere,
    hemisphere_indicator,
)

from conftest import KET0, PLUS, haar_states, qubit_at


def hemisphere_oracle(alpha: float) -> float:
    """Continuum prediction of the hemisphere model for Bloch angle ``alpha``.

    Integrates rho = cos(t)/pi over the upper hemisphere, restricted to the
    azimuths where the point also lies in the hemisphere around the measured
    direction.
    """
    def integrand(t):
        s, c = np.sin(t), np.cos(t)
        if s < 1e-15:
            return 0.0
        if abs(np.sin(alpha)) < 1e-15:
            width = 2 * np.pi if np.cos(alpha) * c >= 0 else 0.0
        else:
            width = 2 * np.arccos(np.clip(-np.cos(alpha) * c / (np.sin(alpha) * s), -1, 1))
        return c / np.pi * s * width

    return quad(integrand, 0, np.pi / 2, limit=200, epsabs=1e-13)[0]


# frozen from hemisphere_oracle
ORACLE_PI_3 = 0.75
ORACLE_2PI_3 = 0.25


def test_oracle_frozen_values():
    assert hemisphere_oracle(np.pi / 3) == pytest.approx(ORACLE_PI_3, abs=1e-9)
    assert hemisphere_oracle(2 * np.pi / 3) == pytest.approx(ORACLE_2PI_3, abs=1e-9)


def ks_predict(model, alpha):
    ctx = complete_basis([qubit_at(alpha)], 2)
    return predicted_probability(model, KET0, "P0", ctx.effects[0], ctx)


def test_ks_full_overlap(ks_big):
    assert ks_predict(ks_big, 0.0) == pytest.approx(1.0, abs=1e-3)


def test_ks_bloch_pi_over_3(ks_big):
    assert ks_predict(ks_big, np.pi / 3) == pytest.approx(ORACLE_PI_3, abs=1e-3)


def test_ks_bloch_two_pi_over_3(ks_big):
    assert ks_predict(ks_big, 2 * np.pi / 3) == pytest.approx(ORACLE_2PI_3, abs=1e-3)


def test_ks_complementary_effects_partition(ks_big):
    ctx = random_context(2, 17)
    a, b = (ks_big.response(e, ctx) for e in ctx.effects)
    assert np.array_equal(a + b, np.ones_like(a))
    psi = haar_states(2, 1, 3)[0]
    total = sum(predicted_probability(ks_big, psi, "P0", e, ctx) for e in ctx.effects)
    assert abs(total - 1.0) < 1e-12


def test_ks_tie_break_on_equator():
    # odd N puts one lattice point on the equator
    pts = fibonacci_sphere(1001)
    assert np.sum(np.abs(pts[:, 2]) < 1e-15) == 1
    up = hemisphere_indicator(pts, np.array([0.0, 0.0, 1.0]))
    down = hemisphere_indicator(pts, np.array([0.0, 0.0, -1.0]))
    assert np.array_equal(up + down, np.ones(1001))


def test_ks_rejects_small_lattice():
    with pytest.raises(ValueError):
        build_ks_qubit_model(10, 1)


def test_bb_plus_on_zero():
    m = build_bb_model(2, [KET0, PLUS])
    ctx = canonical_context(2)
    assert predicted_probability(m, PLUS, "P0", ctx.effects[0], ctx) == pytest.approx(0.5, abs=1e-12)


def test_bb_deficiency_supports():
    m = build_bb_model(2, [KET0, PLUS])
    ctx = canonical_context(2)
    s_rho = support(m.density(KET0))
    s_xi = support(m.response(ctx.effects[0], ctx))
    assert s_rho < s_xi
    assert len(s_rho) == 1 and len(s_xi) == 2


def test_bb_not_deterministic():
    m = build_bb_model(2, [KET0, PLUS], [canonical_context(2)])
    assert not is_outcome_deterministic(m)[0]


def test_bb_needs_states():
    with pytest.raises(ValueError):
        build_model(ZooSpec("bb", dim=3))


def test_bb_unknown_state():
    m = build_bb_model(2, [KET0])
    with pytest.raises(MissingEntryError):
        m.density(PLUS)


def test_bell_uniform_partition():
    n = 10_000
    psi = Ket.normalized(np.ones(3))
    mids = (np.arange(n) + 0.5) / n
    k = bell_outcomes(psi, canonical_context(3), mids)
    counts = np.bincount(k, minlength=3)
    assert all(abs(c - n // 3) <= 1 for c in counts)
    m = build_bell_model(3, n)
    ctx = m.contexts[0]
    for e in ctx.effects:
        assert abs(predicted_probability(m, psi, "P0", e, ctx) - 1 / 3) <= 1 / n


def test_bell_reversed_order_contextual():
    n = 3000
    psi = Ket.normalized(np.ones(3))
    ctx = canonical_context(3)
    rev = ctx.reordered([2, 1, 0], label="reversed")
    m = build_bell_model(3, n, [ctx, rev])
    e0 = ctx.effects[0]
    a = m.response(e0, ctx, psi)
    b = m.response(rev.effects[2], rev, psi)
    # oracle: direct evaluation of both interval orderings
    mids = (np.arange(n) + 0.5) / n
    assert np.array_equal(a, (mids <= 1 / 3 + 1e-15).astype(float))
    assert np.array_equal(b, (mids > 2 / 3 - 1e-15).astype(float))
    assert not np.array_equal(a, b)
    pa = predicted_probability(m, psi, "P0", e0, ctx)
    pb = predicted_probability(m, psi, "P0", rev.effects[2], rev)
    assert abs(pa - pb) <= 1 / n


def test_bell_eigenstate_all_cells():
    m = build_bell_model(3, 1000)
    ctx = m.contexts[0]
    e1 = Ket.basis(3, 0)
    assert np.all(m.response(ctx.effects[0], ctx, e1) == 1.0)
    assert predicted_probability(m, e1, "P0", ctx.effects[0], ctx) == 1.0


def test_zoo_spec_validation():
    with pytest.raises(ValueError):
        ZooSpec("nosuch")
    with pytest.raises(ValueError):
        ZooSpec("ks_qubit", dim=3)
    with pytest.raises(ValueError):
        ZooSpec("bell", dim=3, n_grid=10)


def test_ks_seed_drives_probes():
    a = build_ks_qubit_model(1000, 5)
    b = build_ks_qubit_model(1000, 5)
    c = build_ks_qubit_model(1000, 6)
    assert [s.key for s in a.states] == [s.key for s in b.states]
    assert [s.key for s in a.states] != [s.key for s in c.states]
