"""Ground-truth summaries for generated cohorts.

Simulated students carry their full preference orders and potential
outcomes, so every partially identified object has a directly computable
realized value: the pair shares on each side of a cutoff, the subgroup
outcome jump, the subgroup fraction within the students whose candidate
set allows the pair, and whether each candidate set covers the truth.
Tests lean on these to certify that bounds cover and that deductions
never exclude a true pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .economy import Economy
from .localpref import LocalSample, local_pair
from .mechanism import CutoffProfile
from .qsets import Pair, Regime, UmasRelation, qset_for_student


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class CoverageReport:
    """How often constructed candidate sets contain the true local pair."""

    school: int
    regime: str
    n: int
    n_covered: int

    @property
    def rate(self) -> float:
        return self.n_covered / self.n if self.n else 1.0


def qset_coverage(eco: Economy, cutoffs: CutoffProfile, sample: LocalSample,
                  regime: Regime,
                  umas: UmasRelation | None = None) -> CoverageReport:
    if eco.truth is None:
        raise OracleError("economy carries no ground truth")
    n = n_cov = 0
    for i in (*sample.plus_ids, *sample.minus_ids):
        true_pair = local_pair(eco, cutoffs, i, sample.school, use="true")
        qset = qset_for_student(eco, cutoffs, i, sample.school, regime, umas)
        n += 1
        n_cov += true_pair in qset
    return CoverageReport(school=sample.school, regime=regime.label,
                          n=n, n_covered=n_cov)


@dataclass(frozen=True)
class OracleTruth:
    """Realized values the identification machinery only ever bounds."""

    pair: Pair
    share_plus: float
    share_minus: float
    n_pair_plus: int
    n_pair_minus: int
    mean_plus: float | None
    mean_minus: float | None
    jump: float | None
    ate_local: float | None
    delta_plus: float | None
    delta_minus: float | None


def oracle_truth(eco: Economy, cutoffs: CutoffProfile, sample: LocalSample,
                 pair: Pair, regime: Regime,
                 umas: UmasRelation | None = None) -> OracleTruth:
    if eco.truth is None:
        raise OracleError("economy carries no ground truth")
    if eco.y_observed is None:
        raise OracleError("economy has no observed outcomes")
    j, k = pair
    shares, counts, means, deltas = {}, {}, {}, {}
    pooled: list[int] = []
    for side, ids in (("plus", sample.plus_ids), ("minus", sample.minus_ids)):
        n_allow = 0
        pair_ids = []
        for i in ids:
            if local_pair(eco, cutoffs, i, sample.school, use="true") == pair:
                pair_ids.append(i)
            if pair in qset_for_student(eco, cutoffs, i, sample.school,
                                        regime, umas):
                n_allow += 1
        pooled.extend(pair_ids)
        shares[side] = len(pair_ids) / len(ids) if ids else 0.0
        counts[side] = len(pair_ids)
        means[side] = (float(np.mean([eco.y_observed[i] for i in pair_ids]))
                       if pair_ids else None)
        deltas[side] = len(pair_ids) / n_allow if n_allow else None
    jump = None
    if means["plus"] is not None and means["minus"] is not None:
        jump = means["plus"] - means["minus"]
    ate = None
    if pooled:
        pot = eco.truth.potential
        ate = float(np.mean([pot[i, j] - pot[i, k] for i in pooled]))
    return OracleTruth(pair=pair, share_plus=shares["plus"],
                       share_minus=shares["minus"],
                       n_pair_plus=counts["plus"],
                       n_pair_minus=counts["minus"],
                       mean_plus=means["plus"], mean_minus=means["minus"],
                       jump=jump, ate_local=ate,
                       delta_plus=deltas["plus"],
                       delta_minus=deltas["minus"])
