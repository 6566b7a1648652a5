"""Acceptance suite: one test per criterion, each recording a pass/fail line.

Run with ``pytest tests/test_acceptance.py`` (the lines appear in the
terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""

import json
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from ontoscope.feasibility import FeasibilityProblem, ks_colorable, load_fixture, lp_feasible, rays_from_contexts
from ontoscope.feasibility.lp import TOL_LP, assemble, solution_model, solve_system
from ontoscope.ontic import predicted_probability
from ontoscope.quantum import Ket, canonical_context, make_rng, random_context, shared_ray_family
from ontoscope.verifier import (
    ContextFamily,
    check_born_agreement,
    check_cross_context,
    check_deficiency,
    check_lambda_sufficiency,
    check_support_invariance,
    check_basis_exclusion,
    check_outcome_exclusion,
    check_support_lemmas,
    replay_witness,
)
from ontoscope.zoo import build_bb_model, build_bell_model, build_ks_qubit_model

from conftest import ACCEPTANCE_LINES, HADAMARD, KET0, KET1, PLUS, haar_states
from test_feasibility import conflicting_problem, naive_count, random_rayset

SEED = 20240611


def record(n: int, name: str, ok: bool, elapsed: float, budget: float, detail: str) -> None:
    status = "PASS" if ok and elapsed < budget else "FAIL"
    ACCEPTANCE_LINES.append(f"[{status}] {n}. {name}: {detail} ({elapsed:.2f}s / {budget:.0f}s)")
    print(ACCEPTANCE_LINES[-1])
    assert ok, detail
    assert elapsed < budget, f"runtime {elapsed:.2f}s over budget {budget}s"


def sound(model, verdict) -> bool:
    return bool(verdict.witnesses) and all(
        abs(replay_witness(model, w) - w.defect) <= 1e-12 for w in verdict.witnesses
    )


def test_1_born_agreement():
    t0 = time.perf_counter()
    states = haar_states(3, 100, SEED)
    ctxs = [random_context(3, make_rng(SEED, 1, i), label=f"c{i}") for i in range(10)]
    bb = build_bb_model(3, states, ctxs)
    v_bb = check_born_agreement(bb, states, ctxs, tol=1e-12)
    n = 10_000
    bell = build_bell_model(3, n, ctxs)
    v_bell = check_born_agreement(bell, states, ctxs, tol=1 / n)
    N = 100_000
    ks = build_ks_qubit_model(N, SEED)
    psis = haar_states(2, 100, SEED + 1)
    phis = [random_context(2, make_rng(SEED, 2, i), label=f"k{i}") for i in range(100)]
    v_ks = check_born_agreement(ks, psis, phis, tol=1e-2, paired=True)
    elapsed = time.perf_counter() - t0
    ok = v_bb.passed and v_bell.passed and v_ks.passed
    record(1, "Born agreement", ok, elapsed, 60,
           f"bb max {v_bb.max_defect:.1e} <= 1e-12, bell max {v_bell.max_defect:.1e} <= 1e-4, "
           f"ks max {v_ks.max_defect:.1e} <= 1e-2")


def test_2_support_structure():
    t0 = time.perf_counter()
    states = haar_states(3, 5, SEED)
    bell = build_bell_model(3, 2000, [canonical_context(3), random_context(3, SEED, label="r")])
    ks = build_ks_qubit_model(10_000, SEED, context_list=[canonical_context(2), HADAMARD])
    bb = build_bb_model(2, [KET0, KET1, PLUS], [canonical_context(2), HADAMARD])
    verdicts = {}
    for name, m, st in (("bell", bell, states), ("ks_qubit", ks, ()), ("bb", bb, ())):
        verdicts[name] = check_support_lemmas(m, list(m.contexts), list(m.contexts), states=st)
    clean = all(v.passed for out in verdicts.values() for v in out.values())
    applicable = all(v.applicable for k in ("bell", "ks_qubit") for v in verdicts[k].values())
    bb_na = not verdicts["bb"]["outcome_exclusion"].applicable

    ctx = bell.contexts[0]
    zeroed = bell.with_response(ctx, ctx.effects[0], np.zeros(len(bell.ontic)))
    m1 = check_support_invariance(zeroed, list(zeroed.contexts), states)
    ks_ctx = ks.contexts[0]
    spread = ks.with_epistemic(KET1, np.full(len(ks.ontic), 1 / (4 * np.pi)))
    m2 = check_basis_exclusion(spread, [ks_ctx])
    doubled = ks.with_response(ks_ctx, ks_ctx.effects[1], np.ones(len(ks.ontic)))
    m3 = check_outcome_exclusion(doubled, [ks_ctx])
    caught = (not m1.passed and sound(zeroed, m1)) and (not m2.passed and sound(spread, m2)) \
        and (not m3.passed and sound(doubled, m3))
    elapsed = time.perf_counter() - t0
    record(2, "Support-structure suite", clean and applicable and bb_na and caught, elapsed, 10,
           f"zoo clean={clean and applicable}, bb outcome_exclusion n/a={bb_na}, mutations caught "
           f"({m1.n_witnesses}/{m2.n_witnesses}/{m3.n_witnesses} sound witnesses)={caught}")


def test_3_deficiency():
    t0 = time.perf_counter()
    ctxs = [random_context(3, make_rng(SEED, 5, i), label=f"c{i}") for i in range(5)]
    states = haar_states(3, 10, SEED)
    bb = build_bb_model(3, states, ctxs)
    results = [check_deficiency(bb, r, "P0", c, ctxs) for c in ctxs for r in c.rays]
    all_deficient = all(r.deficient and r.included for r in results)

    fam = shared_ray_family(Ket.basis(3, 0), 6, SEED)
    fam[2] = fam[2].reordered([1, 0, 2], label="fam-2-moved")
    bell = build_bell_model(3, 2000, fam)
    stats = [check_deficiency(bell, r, "P0", c, fam) for c in fam for r in c.rays]
    reported = all(s.multi_varying is not None for s in stats)
    n_holds = sum(bool(s.multi_varying) for s in stats)
    elapsed = time.perf_counter() - t0
    record(3, "Deficiency", all_deficient and reported, elapsed, 5,
           f"bb deficient at {sum(r.deficient for r in results)}/{len(results)} states; "
           f"bell varying-effect statistic reported for {len(stats)} states (holds at {n_holds})")


def test_4_cross_context():
    t0 = time.perf_counter()
    n = 10_000
    tol = 2 / n
    E1 = Ket.basis(3, 0)
    states = haar_states(3, 50, SEED)
    fam = shared_ray_family(E1, 20, SEED)
    bell = build_bell_model(3, n, fam)
    v = check_cross_context(bell, ContextFamily(fam[0].effects[0], fam), states, tol=tol)
    literal_ok = v.passed and v.max_defect <= tol and v.details["interstitial_disjoint"]

    # same family with the shared effect moved to the end of one member
    moved = list(fam)
    moved[7] = moved[7].reordered([1, 2, 0], label="fam-7-last")
    bell_m = build_bell_model(3, n, moved)
    vm = check_cross_context(bell_m, ContextFamily(fam[0].effects[0], moved), states, tol=tol)
    moved_ok = vm.passed and vm.max_defect <= tol and vm.details["interstitial_disjoint"]
    nonempty = vm.details["pairs_with_lambda_c"] >= 1

    bad = bell.with_response(fam[1], fam[1].effects[0], np.ones(n))
    vb = check_cross_context(bad, ContextFamily(fam[0].effects[0], fam[:4]), states[:10], tol=tol)
    violated = not vb.passed and sound(bad, vb)
    elapsed = time.perf_counter() - t0
    record(4, "Cross-context constraint", literal_ok and moved_ok and nonempty and violated, elapsed, 30,
           f"max delta {max(v.max_defect, vm.max_defect):.1e} <= {tol:.0e}; lambda_c nonempty for "
           f"{vm.details['pairs_with_lambda_c']} pairs (E1 first everywhere: "
           f"{v.details['pairs_with_lambda_c']}); interstitial disjoint; violation caught={violated}")


def test_5_lambda_sufficiency():
    t0 = time.perf_counter()
    bb = build_bb_model(2, [KET0, KET1, PLUS], [canonical_context(2), HADAMARD])
    ks = build_ks_qubit_model(10_000, SEED)
    bell = build_bell_model(3, 1000)
    v_bb = check_lambda_sufficiency(bb)
    v_ks = check_lambda_sufficiency(ks)
    v_bell = check_lambda_sufficiency(bell, haar_states(3, 4, SEED))
    ok = v_bb.passed and v_ks.passed and not v_bell.passed and sound(bell, v_bell)
    elapsed = time.perf_counter() - t0
    record(5, "Lambda-sufficiency verdicts", ok, elapsed, 5,
           f"bb pass={v_bb.passed}, ks pass={v_ks.passed}, bell fail with "
           f"{v_bell.n_witnesses} witnesses={not v_bell.passed}")


def test_6_bks_obstruction():
    t0 = time.perf_counter()
    res = ks_colorable(load_fixture("ks18"))
    t_fix = time.perf_counter() - t0
    fixture_ok = not res.feasible and res.certificate["type"] == "exhaustion" and res.certificate["nodes"] > 0
    two_ok = True
    for i in range(200):
        a = random_context(3, make_rng(SEED, 6, i))
        shared = [a.rays[i % 3]] if i % 2 else []
        b = random_context(3, make_rng(SEED, 7, i), fixed=shared)
        two_ok &= ks_colorable(rays_from_contexts([a, b])).feasible
    agree = all(ks_colorable(rs).feasible == (naive_count(rs) > 0)
                for rs in (random_rayset(s) for s in range(50)))
    elapsed = time.perf_counter() - t0
    record(6, "BKS obstruction", fixture_ok and t_fix < 5 and two_ok and agree, elapsed, 60,
           f"18-ray fixture infeasible in {t_fix:.3f}s ({res.certificate['nodes']} nodes); "
           f"200 two-context sets feasible={two_ok}; enumeration agreement on 50 sets={agree}")


def test_7_lp_feasibility():
    t0 = time.perf_counter()
    ctxs = [canonical_context(2), HADAMARD]
    states = [KET0, KET1, PLUS]
    bb = build_bb_model(2, states, ctxs)
    p1 = FeasibilityProblem.from_model("fix_rho_solve_xi", bb, states, ctxs)
    r1 = lp_feasible(p1)
    model = solution_model(p1, r1)
    replay = max(abs(predicted_probability(model, s, "P0", e, c, clamp=False) - p1.targets[i][j][k])
                 for i, s in enumerate(states) for j, c in enumerate(ctxs) for k, e in enumerate(c.effects))
    ok1 = r1.feasible and r1.residual <= TOL_LP and replay <= TOL_LP

    p2 = conflicting_problem()
    r2 = lp_feasible(p2)
    ok2 = not r2.feasible and r2.certificate["verified"]

    n = 300
    bell = build_bell_model(3, n)
    psi = Ket.normalized(np.ones(3))
    p3 = FeasibilityProblem.from_model("fix_xi_solve_rho", bell, [psi], bell.contexts)
    r3 = lp_feasible(p3)
    ok3 = r3.feasible and r3.residual <= TOL_LP

    system = assemble(p2)
    rows = [i for i, lab in enumerate(system.row_labels) if lab.startswith("born")]
    rng = make_rng(SEED, 8)
    stable = True
    for i in rows:
        for _ in range(3):
            f = Fraction(int(rng.integers(1, 10_000)), int(rng.integers(1, 10_000)))
            scaled = system.scaled(i, f)
            stable &= not solve_system(scaled, exact=True).feasible
            stable &= not solve_system(scaled, exact=False).feasible
    elapsed = time.perf_counter() - t0
    record(7, "LP feasibility", ok1 and ok2 and ok3 and stable, elapsed, 60,
           f"bb witness feasible (residual {r1.residual:.1e}, replay {replay:.1e}); conflicting targets "
           f"infeasible with verified Farkas={ok2}; bell xi feasible (residual {r3.residual:.1e}); "
           f"row scaling stable={stable}")


def _run(args, cwd):
    return subprocess.run([sys.executable, "-m", "ontoscope.cli", *args], cwd=cwd,
                          capture_output=True, text=True)


def test_8_reproducibility(tmp_path):
    t0 = time.perf_counter()
    (tmp_path / "ctx.json").write_text(json.dumps([
        {"label": "A", "rays": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]},
        {"label": "B", "rays": [[1, 0, 0], [0, 1, 1], [0, 1, -1]]},
    ]))
    (tmp_path / "states.json").write_text(json.dumps([[1, 0, 0], [0, 1, 0], [1, 1, 1]]))
    (tmp_path / "rays.json").write_text(json.dumps(load_fixture("ks18").to_json()))
    (tmp_path / "problem.json").write_text(json.dumps(conflicting_problem().to_json()))
    commands = {
        "zoo-ks": ["zoo", "--model", "ks_qubit", "--n", "100000", "--seed", "7", "--out", "{o}"],
        "zoo-bell": ["zoo", "--model", "bell", "--dim", "3", "--grid", "10000", "--contexts", "ctx.json",
                     "--out", "{o}"],
        "zoo-bb": ["zoo", "--model", "bb", "--dim", "3", "--states", "states.json", "--contexts", "ctx.json",
                   "--out", "{o}"],
        "verify": ["verify", "--model", "bell.json", "--seed", "11", "--random-states", "5", "--out", "{o}"],
        "color": ["feasibility", "color", "--rays", "rays.json", "--out", "{o}"],
        "color-fixture": ["feasibility", "color", "--fixture", "ks18", "--out", "{o}"],
        "lp": ["feasibility", "lp", "--problem", "problem.json", "--out", "{o}"],
    }
    assert _run(["zoo", "--model", "bell", "--dim", "3", "--grid", "2000", "--contexts", "ctx.json",
                 "--out", "bell.json"], tmp_path).returncode == 0
    identical = {}
    for name, args in commands.items():
        blobs = []
        for run in range(2):
            out = f"{name}-{run}.json"
            proc = _run([a.replace("{o}", out) for a in args], tmp_path)
            assert proc.returncode in (0, 2, 3), proc.stderr
            blobs.append((tmp_path / out).read_bytes())
        identical[name] = blobs[0] == blobs[1]
    elapsed = time.perf_counter() - t0
    record(8, "Reproducibility", all(identical.values()), elapsed, 120,
           f"byte-identical reruns for {sum(identical.values())}/{len(identical)} commands")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
