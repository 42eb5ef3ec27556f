"""Acceptance suite: every primary criterion at its stated tolerance.

Each test prints one "ACCEPTANCE <criterion>: PASS/FAIL" line (run with -s to
see them as they go). The heavy Monte Carlo studies run once per session via
module-scoped fixtures; expect several minutes of total runtime on a desktop.
"""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from titeprog.config import build_manifest
from titeprog.core import DesignConfig, Observation, build_skeleton, posterior_beta_mean
from titeprog.engine import EventKind, Strategy, finalize_trial
from titeprog.eventlog import replay
from titeprog.presets import reference_design
from titeprog.scenarios import find_scenario, make_scenario, scenario_library
from titeprog.simulate import (
    StudyConfig,
    compare_strategies,
    run_replicate,
    replicate_seed,
    run_study,
    simulate_trial,
)

SEED = 20170816
SD = math.sqrt(1.34)


def report(name, passed, detail):
    line = f"ACCEPTANCE {name}: {'PASS' if passed else 'FAIL'} ({detail})"
    print(line, flush=True)
    assert passed, line


# --- heavy studies, computed once -------------------------------------------

@pytest.fixture(scope="module")
def table_cell_study():
    """N=24, phi=0.5, strategy C, tox3-const60 at 10000 replicates."""
    return run_study(StudyConfig(
        design=reference_design(24, 0.5),
        scenarios=(find_scenario("tox3-const60"),),
        strategies=("C",),
        replicates=10000,
        base_seed=SEED,
        round_to_week=True,
        workers=2,
    ))


@pytest.fixture(scope="module")
def reference_row_study():
    """N=24, zero progression, toxicity (25,40,55,65,70), all strategies."""
    return run_study(StudyConfig(
        design=reference_design(24, 0.5),
        scenarios=(find_scenario("tox5-const00"),),
        strategies=("A", "B", "C"),
        replicates=10000,
        base_seed=SEED,
        round_to_week=True,
        workers=2,
    ))


@pytest.fixture(scope="module")
def ordering_study():
    """All 55 scenarios x A/B/C at N=24, phi=0.5, 2000 replicates (desk scale)."""
    return run_study(StudyConfig(
        design=reference_design(24, 0.5),
        scenarios=tuple(scenario_library()),
        strategies=("A", "B", "C"),
        replicates=2000,
        base_seed=SEED,
        round_to_week=True,
        workers=2,
    ))


@pytest.fixture(scope="module")
def phi_between_study():
    """tox3-const60 with phi in {0.25, 0.5} for the convergence check."""
    return run_study(StudyConfig(
        design=reference_design(24, 0.5),
        scenarios=(find_scenario("tox3-const60"),),
        strategies=("A", "B", "C"),
        phis=(0.25, 0.5),
        replicates=2000,
        base_seed=SEED,
        round_to_week=True,
        workers=2,
    ))


@pytest.fixture(scope="module")
def phi_high_study():
    """tox3 row, every nonzero progression curve, phi in {0.5, 0.75}."""
    labels = [f"tox3-{p}" for p in (
        "const20", "const40", "const60", "const80", "decreasing",
        "step2", "step3", "step4", "step5", "ushape",
    )]
    return run_study(StudyConfig(
        design=reference_design(24, 0.5),
        scenarios=tuple(find_scenario(l) for l in labels),
        strategies=("B", "C"),
        phis=(0.5, 0.75),
        replicates=2000,
        base_seed=SEED,
        round_to_week=True,
        workers=2,
    ))


# --- criteria ----------------------------------------------------------------

def test_table_row_reproduction(table_cell_study):
    oc = table_cell_study.summary("tox3-const60", "C", 0.5)
    ok = (
        abs(oc.pcs - 61.9) <= 3.0
        and abs(oc.pos - 18.4) <= 3.0
        and abs(oc.mean_added - 6.5) <= 0.7
    )
    manifest = build_manifest(table_cell_study.config, {})
    design = manifest["study"]["design"]
    recorded = all(
        k in design for k in ("start_dose", "prior_sd", "prior_mtd")
    ) and manifest["study"]["round_to_week"] is not None
    report(
        "table-row-reproduction",
        ok and recorded,
        f"PCS {oc.pcs:.1f} (61.9±3), POS {oc.pos:.1f} (18.4±3), "
        f"+N {oc.mean_added:.2f} (6.5±0.7); manifest records start_dose="
        f"{design['start_dose']}, prior_sd={design['prior_sd']:.4f}, "
        f"nu={design['prior_mtd']}, weekly={manifest['study']['round_to_week']}",
    )


def test_reference_row_reproduction(reference_row_study):
    ocs = {s: reference_row_study.summary("tox5-const00", s, 0.5) for s in "ABC"}
    identical = (
        ocs["A"].selection_pct == ocs["B"].selection_pct == ocs["C"].selection_pct
        and ocs["A"].pcs == ocs["B"].pcs == ocs["C"].pcs
    )
    zero_added = all(oc.mean_added == 0.0 for oc in ocs.values())
    close = abs(ocs["A"].pcs - 68.5) <= 3.0
    report(
        "reference-row-reproduction",
        identical and zero_added and close,
        f"PCS {ocs['A'].pcs:.1f} (68.5±3), +N exactly 0: {zero_added}, "
        f"strategies identical: {identical}",
    )


def test_strategy_overdose_ordering(ordering_study):
    checks = compare_strategies(ordering_study, z=3.0)
    violations = [
        (c.label, c.pos_a, c.pos_b, c.pos_c)
        for c in checks
        if c.violates_c_le_b or c.violates_b_le_a
    ]
    report(
        "strategy-ordering",
        not violations,
        f"POS_C <= POS_B <= POS_A within 3 matched SE in {len(checks)} cells"
        + (f"; violations: {violations}" if violations else ""),
    )


def test_phi_zero_reduces_to_strategy_a():
    design = reference_design(24, 0.0)
    scn = find_scenario("tox3-const60")
    identical = True
    for rep in range(200):
        seed = replicate_seed(SEED, 0, rep)
        results = [
            run_replicate(design, scn, s, seed, True, collect_events=True)
            for s in Strategy
        ]
        if not (results[0] == results[1] == results[2]):
            identical = False
            break
    report(
        "phi-zero-reduction",
        identical,
        "B and C event traces bit-identical to A on 200 matched replicates",
    )


def test_phi_quarter_converges_toward_a(phi_between_study):
    failures = []
    for strategy in ("B", "C"):
        a = phi_between_study.summary("tox3-const60", "A", 0.5)
        mid = phi_between_study.summary("tox3-const60", strategy, 0.5)
        low = phi_between_study.summary("tox3-const60", strategy, 0.25)
        for metric, se in (("pcs", "mc_se_pcs"), ("pos", "mc_se_pos")):
            av, mv, lv = (getattr(x, metric) for x in (a, mid, low))
            cushion = 3.0 * math.sqrt(
                getattr(a, se) ** 2 + getattr(low, se) ** 2
            )
            lo, hi = min(av, mv) - cushion, max(av, mv) + cushion
            if not lo <= lv <= hi:
                failures.append((strategy, metric, av, lv, mv))
    report(
        "phi-quarter-between",
        not failures,
        "phi=0.25 PCS/POS lie between strategy A and phi=0.5 values"
        + (f"; failures: {failures}" if failures else ""),
    )


def test_phi_high_increases_replacements(phi_high_study):
    failures = []
    for scn in phi_high_study.config.scenarios:
        for strategy in ("B", "C"):
            lo = phi_high_study.summary(scn.label, strategy, 0.5).mean_added
            hi = phi_high_study.summary(scn.label, strategy, 0.75).mean_added
            if not hi > lo:
                failures.append((scn.label, strategy, lo, hi))
    report(
        "phi-high-added-patients",
        not failures,
        "+N(0.75) > +N(0.5) in all 10 progression cells for B and C"
        + (f"; failures: {failures}" if failures else ""),
    )


def test_skeleton_indifference_oracle():
    theta, delta = 0.25, 0.10
    sk = build_skeleton(theta, delta, 3, 5)
    worst = 0.0
    for k in range(4):
        b_up = brentq(
            lambda b: sk.probs[k] ** math.exp(b) - (theta - delta), -10, 10,
            xtol=1e-14,
        )
        worst = max(worst, abs(sk.probs[k + 1] ** math.exp(b_up) - (theta + delta)))
        b_dn = brentq(
            lambda b: sk.probs[k + 1] ** math.exp(b) - (theta + delta), -10, 10,
            xtol=1e-14,
        )
        worst = max(worst, abs(sk.probs[k] ** math.exp(b_dn) - (theta - delta)))
    monotone = all(a < b for a, b in zip(sk.probs, sk.probs[1:]))
    anchored = sk.probs[2] == 0.25
    report(
        "skeleton-oracle",
        worst < 1e-10 and monotone and anchored,
        f"max indifference residual {worst:.2e} (<1e-10), monotone, anchor exact",
    )


def test_posterior_quadrature_oracle():
    sk = build_skeleton(0.25, 0.10, 3, 5)
    probs = np.asarray(sk.probs)
    beta = np.linspace(-10.0, 10.0, 2**20)
    base = -0.5 * (beta / SD) ** 2
    rng = np.random.default_rng(424242)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(0, 13))
        obs = []
        for _ in range(n):
            dose = int(rng.integers(1, 6))
            tox = bool(rng.random() < 0.3)
            w = 1.0 if tox else float(rng.uniform(0.05, 1.0))
            obs.append(Observation(dose, tox, w))
        log_post = base.copy()
        for o in obs:
            x = o.weight * probs[o.dose - 1] ** np.exp(beta)
            x = np.clip(x, 1e-12, 1.0 - 1e-12)
            log_post += np.log(x) if o.tox else np.log1p(-x)
        g = np.exp(log_post - log_post.max())
        oracle = float(np.trapezoid(beta * g, beta) / np.trapezoid(g, beta))
        worst = max(worst, abs(posterior_beta_mean(obs, sk, SD) - oracle))
    report(
        "posterior-oracle",
        worst < 1e-8,
        f"max |quadrature - dense grid| = {worst:.2e} over 50 sets (<1e-8)",
    )


def test_analytic_replacement_oracle():
    # Single-dose design, continuous detection: per-enrollment unevaluability
    # probability is q*(phi - r*phi^2/2) = 0.28125 for q=.6, r=.25, phi=.5.
    q, r, phi = 0.6, 0.25, 0.5
    expected = q * (phi - r * phi**2 / 2.0)
    assert expected == 0.28125
    design = DesignConfig(
        num_doses=1, target=0.25, window=8.0, sample_size=24, phi=phi,
        start_dose=1, prior_sd=SD, halfwidth=0.10, prior_mtd=1,
        accrual_interval=4.0,
    )
    scn = make_scenario((r,), (q,), 0.25)
    total_enrolled = 0
    total_unevaluable = 0
    rep = 0
    while total_enrolled < 10**5:
        result = run_replicate(design, scn, Strategy.C, replicate_seed(SEED, 0, rep),
                               round_to_week=False)
        total_enrolled += result.enrolled
        total_unevaluable += result.added
        rep += 1
    frequency = total_unevaluable / total_enrolled
    se = math.sqrt(expected * (1.0 - expected) / total_enrolled)
    report(
        "analytic-replacement-oracle",
        abs(frequency - expected) < 3 * se,
        f"unevaluable frequency {frequency:.5f} vs 0.28125 "
        f"over {total_enrolled} enrollments (3SE={3*se:.5f})",
    )


def test_replay_determinism():
    design = reference_design(24, 0.5)
    skeleton = build_skeleton(0.25, 0.10, 3, 5)
    ok = True
    for label in ("tox3-const60", "tox1-const80", "tox5-decreasing"):
        scn = find_scenario(label)
        for strategy in Strategy:
            for rep in range(5):
                r = run_replicate(design, scn, strategy, replicate_seed(SEED, 1, rep),
                                  True, collect_events=True)
                state = replay(design, skeleton, strategy, r.events)
                mtd, metrics = finalize_trial(state)
                if (mtd, metrics.enrolled, metrics.duration) != (
                    r.mtd, r.enrolled, r.duration,
                ):
                    ok = False
    report(
        "replay-determinism",
        ok,
        "re-folded simulator logs reproduce MTD, enrollment and duration "
        "exactly (45 trials)",
    )


def test_service_restart_recovery(tmp_path):
    from fastapi.testclient import TestClient

    from titeprog.service import TrialStore, create_app

    store_dir = tmp_path / "store"
    with TestClient(create_app(TrialStore(store_dir))) as client:
        created = client.post(
            "/trials",
            json={"design": {"sample_size": 18, "phi": 0.5}, "strategy": "C"},
        ).json()
        trial_id = created["trial_id"]
        client.post(f"/trials/{trial_id}/patients", json={"time": 0.0})
        client.post(f"/trials/{trial_id}/patients", json={"time": 4.0})
        client.post(
            f"/trials/{trial_id}/events",
            json={"time": 5.0, "patient_id": 1, "kind": "progression"},
        )
        before_state = client.get(f"/trials/{trial_id}/state").json()
        before_rec = client.get(f"/trials/{trial_id}/recommendation").json()
    with TestClient(create_app(TrialStore(store_dir))) as client:
        after_state = client.get(f"/trials/{trial_id}/state").json()
        after_rec = client.get(f"/trials/{trial_id}/recommendation").json()
    report(
        "service-restart-recovery",
        before_state == after_state and before_rec == after_rec,
        "state and recommendation identical after kill-and-restart",
    )


# Primitive rows (tox presence, tox time, prog presence, prog time uniforms)
# reproducing the sample-trial structure: N=18, phi=0.5, progression curve
# (60,60,40,40,40), toxicity row (05,10,25,40,55).
SAMPLE_TRIAL_PRIMITIVES = [
    [0.8332436956043608, 0.2754755142577935, 0.32506610602288877, 0.2833159252222528],
    [0.03293461321459812, 0.41983802910374823, 0.536211814620913, 0.8675738540242116],
    [0.0462920262546449, 0.361193204918415, 0.8157926319302019, 0.5723815076292973],
    [0.06647351106105015, 0.6216181757799417, 0.8741445334069854, 0.32713168525515013],
    [0.20165325097896436, 0.29272783424869075, 0.30121722931495365, 0.294432406444473],
    [0.0747353703073319, 0.47191017044869676, 0.2078803399934066, 0.9352454327515206],
    [0.4620197386164331, 0.384119316649544, 0.17338804259180762, 0.4322051628352006],
    [0.7032848038301683, 0.011037173229943797, 0.8818838946911836, 0.863464744432315],
    [0.6630284158499024, 0.6689243352934643, 0.08036839151307762, 0.454711968216024],
    [0.6027992132481976, 0.5327435976940681, 0.05943902016562108, 0.5641273323169131],
    [0.38478182136809225, 0.3613955353124285, 0.7682334460228196, 0.5557987309129935],
    [0.6210310499584892, 0.4692494929850145, 0.2336547809435534, 0.7465981247433892],
    [0.19721046499414618, 0.03844835508776745, 0.5316112024340895, 0.4855053023540973],
    [0.8334962421250864, 0.14033681077512805, 0.2564099867855102, 0.5924391087621637],
    [0.976323076286154, 0.9563161872862428, 0.8648526172296652, 0.7932279132068152],
    [0.31030387662652115, 0.8499034174951005, 0.7927922795559161, 0.4899144909850217],
    [0.20381844219658307, 0.8502085805075965, 0.09072807934140392, 0.4574061662217497],
    [0.8940766257757824, 0.18542263909115242, 0.5520807722481841, 0.8506600917725349],
    [0.7141549907782062, 0.11428882076938407, 0.32275767868835326, 0.8408650273183522],
    [0.823425480907712, 0.21334912343593726, 0.5325037442911936, 0.16232867131006057],
    [0.6957341049579896, 0.699780116824502, 0.7883040413655518, 0.7901052867453581],
    [0.6457336753664233, 0.7406670766770718, 0.40327619495056133, 0.3954267561236071],
    [0.5979747730673702, 0.664411401126877, 0.4782806319811138, 0.10955575049678312],
    [0.12796190411079622, 0.9991048191283687, 0.3464725665923276, 0.8697176168842208],
    [0.5283888593819731, 0.5970645818055753, 0.264177905124783, 0.860961907393541],
    [0.16881243358188602, 0.8897440786772651, 0.5980222417434576, 0.87128257069229],
]


class _FrozenPrimitives:
    def __init__(self, rows):
        self._rows = np.asarray(rows)

    def row(self, index):
        return self._rows[index]


def test_sample_trial_structure():
    design = reference_design(18, 0.5)  # N=18 pairs with halfwidth 0.09
    skeleton = build_skeleton(design.target, design.halfwidth, design.prior_mtd,
                              design.num_doses)
    scn = find_scenario("tox3-step3")  # progression (60,60,40,40,40)
    results = {}
    doses = {}
    for strategy in Strategy:
        r = simulate_trial(
            design, skeleton, scn, strategy,
            _FrozenPrimitives(SAMPLE_TRIAL_PRIMITIVES),
            round_to_week=True, collect_events=True,
        )
        results[strategy] = r
        doses[strategy] = [e.dose for e in r.events if e.kind is EventKind.ENROLLED]
    b_total = results[Strategy.B].enrolled
    c_total = results[Strategy.C].enrolled
    dose14_b = doses[Strategy.B][13]
    dose14_c = doses[Strategy.C][13]
    ok = (
        b_total == 18 + 4
        and c_total == 18 + 5
        and dose14_c <= dose14_b
    )
    report(
        "sample-trial-structure",
        ok,
        f"B enrolls {b_total} (=N+4), C enrolls {c_total} (=N+5), "
        f"patient #14 dose C={dose14_c} <= B={dose14_b}",
    )
