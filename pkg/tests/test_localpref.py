"""Budget sets, counterfactual pairs, and window selection."""

from __future__ import annotations

import numpy as np
import pytest

from cutoffbounds import (
    find_comparable_pairs,
    local_pair,
    select_local_sample,
)
from cutoffbounds.localpref import (
    LocalPrefError,
    best_reported,
    best_true,
    budget_set,
    counterfactual_sets,
    twin_schools,
)
from cutoffbounds.mechanism import CutoffProfile


def test_budget_set_thresholds(golden):
    eco, cuts = golden.economy, golden.cutoffs
    scores = eco.score_cols[:, 0]
    top = int(scores.argmax())          # score 809: clears everything
    assert budget_set(eco, cuts, top) == frozenset({0, 1, 2, 3, 4})
    mid = int(np.nonzero(scores == 602.0)[0][0])
    assert budget_set(eco, cuts, mid) == frozenset({0, 1, 2, 3})
    low = int(np.nonzero(scores == 101.0)[0][0])
    assert budget_set(eco, cuts, low) == frozenset({0})


def test_at_cutoff_score_is_affordable(golden):
    eco, cuts = golden.economy, golden.cutoffs
    i = int(np.nonzero(eco.score_cols[:, 0] == 800.0)[0][0])
    assert 4 in budget_set(eco, cuts, i)


def test_counterfactual_sets_differ_by_the_school(golden):
    eco, cuts = golden.economy, golden.cutoffs
    top = int(eco.score_cols[:, 0].argmax())
    below, above = counterfactual_sets(eco, cuts, top, 4)
    assert below == frozenset({0, 1, 2, 3})
    assert above == frozenset({0, 1, 2, 3, 4})


def test_twin_schools_same_column_same_cutoff(build_sd_economy):
    eco = build_sd_economy(
        scores=[90.0, 80.0, 70.0, 60.0],
        reports=[(1, 2), (2, 1), (3, 1), (1, 3)],
        capacities=[1, 1, 2])
    cuts = CutoffProfile(values=(80.0, 80.0, 59.0), floor=59.0)
    assert twin_schools(eco, cuts, 1) == frozenset({1, 2})
    assert twin_schools(eco, cuts, 2) == frozenset({1, 2})
    assert twin_schools(eco, cuts, 3) == frozenset({3})
    # twins enter and leave the counterfactual sets together
    below, above = counterfactual_sets(eco, cuts, 2, 1)
    assert 2 not in below and 1 not in below
    assert 2 in above and 1 in above


def test_best_true_and_best_reported():
    order = np.array([3, 1, 0, 2])
    assert best_true(order, frozenset({0, 1, 2, 3})) == 3
    assert best_true(order, frozenset({0, 1, 2})) == 1
    assert best_true(order, frozenset({0, 2})) == 0   # 2 is unacceptable
    assert best_reported((3, 1), frozenset({0, 1})) == 1
    assert best_reported((3, 1), frozenset({0, 2})) == 0


def test_local_pair_golden_values(golden):
    eco, cuts = golden.economy, golden.cutoffs
    scores = eco.score_cols[:, 0]
    lead = int(np.nonzero(scores == 809.0)[0][0])     # lists (4, 2, 3)
    assert local_pair(eco, cuts, lead, 4) == (4, 2)
    alt = int(np.nonzero(scores == 807.0)[0][0])      # lists (4, 3, 2)
    assert local_pair(eco, cuts, alt, 4) == (4, 3)
    far = int(np.nonzero(scores == 101.0)[0][0])      # lists school 1 only
    assert local_pair(eco, cuts, far, 4) == (0, 0)    # clears nothing near 4
    assert local_pair(eco, cuts, far, 1) == (1, 0)    # school 1 is the margin


def test_local_pair_needs_lists_or_truth(build_sd_economy):
    eco = build_sd_economy([90.0, 80.0], [(1,), (1,)], [1])
    cuts = CutoffProfile(values=(80.0,), floor=79.0)
    with pytest.raises(LocalPrefError):
        local_pair(eco, cuts, 0, 1, use="true")       # no ground truth here
    with pytest.raises(LocalPrefError):
        local_pair(eco, cuts, 0, 1, use="scores")


def test_select_local_sample_golden(golden):
    eco, cuts = golden.economy, golden.cutoffs
    loc = select_local_sample(eco, cuts, 4, golden.bandwidth)
    assert (loc.h_minus, loc.h_plus) == (30.0, 30.0)
    assert loc.n_plus == 10 and loc.n_minus == 0
    i_at = int(np.nonzero(eco.score_cols[:, 0] == 800.0)[0][0])
    assert i_at in loc.plus_ids


def test_window_shrinks_at_neighboring_cutoffs(golden):
    eco, cuts = golden.economy, golden.cutoffs
    loc = select_local_sample(eco, cuts, 4, 250.0)
    assert loc.h_minus == 200.0         # school 3 sits at 600
    assert loc.h_plus == 250.0          # nothing above
    loc3 = select_local_sample(eco, cuts, 3, 250.0)
    assert loc3.h_minus == 200.0        # school 2 at 400
    assert loc3.h_plus == 200.0         # school 4 at 800


def test_select_local_sample_rejects_unattainable_cutoff(rigged):
    eco, cuts = rigged.economy, rigged.cutoffs
    assert cuts.cutoff(1) == float("inf")
    with pytest.raises(LocalPrefError):
        select_local_sample(eco, cuts, 1, 30.0)


def test_comparable_pairs_golden(golden):
    eco, cuts = golden.economy, golden.cutoffs
    got = find_comparable_pairs(eco, cuts, bandwidth=golden.bandwidth,
                                min_local_n=golden.min_local_n)
    assert [(p.school, p.fallback) for p in got] == [(4, 2)]
    assert got[0].n_plus == 7 and got[0].n_minus == 0

    wide = find_comparable_pairs(eco, cuts, bandwidth=golden.bandwidth,
                                 min_local_n=3)
    assert [(p.school, p.fallback) for p in wide] == [(4, 2), (4, 3)]
    assert wide[1].n_plus == 3


def test_comparable_pairs_never_pair_a_school_with_itself_or_outside(golden):
    eco, cuts = golden.economy, golden.cutoffs
    got = find_comparable_pairs(eco, cuts, bandwidth=golden.bandwidth,
                                min_local_n=1)
    for p in got:
        assert p.fallback not in (0, p.school)


def test_comparable_pairs_respect_the_size_floor(golden):
    eco, cuts = golden.economy, golden.cutoffs
    assert find_comparable_pairs(eco, cuts, bandwidth=golden.bandwidth,
                                 min_local_n=10 ** 6) == []
