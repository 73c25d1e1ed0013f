"""Ground-truth summaries computed from simulated cohorts."""

from __future__ import annotations

import pytest

from cutoffbounds import (
    DGPConfig,
    REGIMES,
    detect_umas,
    extract_cutoffs,
    generate_economy,
    observe_outcomes,
    run_da,
    select_local_sample,
)
from cutoffbounds.oracle import OracleError, oracle_truth, qset_coverage


def test_coverage_is_total_on_golden(golden):
    eco, cuts = golden.economy, golden.cutoffs
    loc = select_local_sample(eco, cuts, 4, golden.bandwidth)
    rel = detect_umas(eco, cuts)
    for regime in REGIMES:
        rep = qset_coverage(eco, cuts, loc, regime,
                            umas=rel if regime.umas else None)
        assert rep.n == 10
        assert rep.rate == 1.0
        assert rep.regime == regime.label


def test_coverage_on_exhaustive_truthful_cohorts():
    # lists that carry every acceptable school keep realized assignments
    # equal to the best truly-affordable option, and then candidate sets
    # must cover the true pair everywhere
    for seed in range(6):
        eco = generate_economy(DGPConfig(n_students=300, n_schools=4,
                                         max_acceptable=3, seed=500 + seed))
        m = run_da(eco)
        cuts = extract_cutoffs(m, eco)
        eco = observe_outcomes(eco, m.assignment)
        rel = detect_umas(eco, cuts)
        for j in range(1, 5):
            c = cuts.cutoff(j)
            if not (c != cuts.floor and c != float("inf")):
                continue
            loc = select_local_sample(eco, cuts, j, 50.0)
            for regime in REGIMES:
                rep = qset_coverage(eco, cuts, loc, regime,
                                    umas=rel if regime.umas else None)
                assert rep.n_covered == rep.n


def test_coverage_conditional_on_consistent_assignment():
    # with more acceptable schools than list slots, a student whose listed
    # schools all fall out of reach lands outside while truly preferring an
    # unlisted affordable school; the framework excludes such students, and
    # every coverage miss must be of exactly that kind
    from cutoffbounds.localpref import best_true, budget_set, local_pair
    from cutoffbounds.qsets import qset_for_student

    n_checked = n_incons = 0
    for seed in range(6):
        eco = generate_economy(DGPConfig(n_students=300, n_schools=4,
                                         seed=500 + seed))
        m = run_da(eco)
        cuts = extract_cutoffs(m, eco)
        eco = observe_outcomes(eco, m.assignment)
        rel = detect_umas(eco, cuts)
        for j in range(1, 5):
            c = cuts.cutoff(j)
            if not (c != cuts.floor and c != float("inf")):
                continue
            loc = select_local_sample(eco, cuts, j, 50.0)
            for i in (*loc.plus_ids, *loc.minus_ids):
                consistent = m.assignment[i] == best_true(
                    eco.truth.pref_orders[i], budget_set(eco, cuts, i))
                n_checked += 1
                n_incons += not consistent
                if not consistent:
                    continue
                true_pair = local_pair(eco, cuts, i, j, use="true")
                for regime in REGIMES:
                    q = qset_for_student(eco, cuts, i, j, regime,
                                         umas=rel if regime.umas else None)
                    assert true_pair in q, (seed, j, i, regime.label)
    assert n_checked > 500
    assert n_incons < 0.05 * n_checked


def test_oracle_truth_golden(golden):
    eco, cuts = golden.economy, golden.cutoffs
    loc = select_local_sample(eco, cuts, 4, golden.bandwidth)
    ot = oracle_truth(eco, cuts, loc, (4, 2), REGIMES[3],
                      umas=detect_umas(eco, cuts))
    assert ot.n_pair_plus == 7 and ot.n_pair_minus == 0
    assert ot.share_plus == pytest.approx(0.7)
    assert ot.share_minus == 0.0
    # every window student got their true first choice, so observed
    # outcomes and the admitted-side mean are one
    assert ot.mean_plus == 1.0
    assert ot.mean_minus is None and ot.jump is None
    assert ot.ate_local == pytest.approx(1.0)
    assert ot.delta_plus == 1.0
    assert ot.delta_minus is None


def test_oracle_requires_truth_and_outcomes(golden, build_sd_economy):
    eco = build_sd_economy([90.0, 80.0], [(1,), (1,)], [2])
    from cutoffbounds.mechanism import CutoffProfile
    cuts = CutoffProfile(values=(79.0,), floor=79.0)
    loc = select_local_sample(eco, cuts, 1, 30.0)
    with pytest.raises(OracleError):
        qset_coverage(eco, cuts, loc, REGIMES[0])
    with pytest.raises(OracleError):
        oracle_truth(eco, cuts, loc, (1, 0), REGIMES[0])


def test_empty_coverage_report_rate():
    from cutoffbounds.oracle import CoverageReport
    assert CoverageReport(school=1, regime="wpo", n=0, n_covered=0).rate == 1.0
    assert CoverageReport(school=1, regime="wpo", n=4, n_covered=3).rate == 0.75
