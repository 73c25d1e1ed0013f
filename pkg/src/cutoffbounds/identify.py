"""Partial identification of the local-pair distribution at a cutoff.

Each student near a cutoff contributes a candidate set of true local pairs.
The distribution of the *true* pair at the cutoff must put at least as much
mass on any union of observed candidate sets as the frequency of candidate
sets contained in that union, on either side.  Those containment
inequalities plus the simplex constraint carve out a polytope; linear
programs over it give sharp bounds on the probability of any pair event,
and an infeasible polytope or a partition whose lower bounds sum above one
falsifies the assumed reporting discipline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .localpref import local_pair
from .qsets import Pair, PairSet, Regime, UmasRelation, qset_for_student
from .simplex import SimplexError, solve_lp


class IdentifyError(ValueError):
    pass


class ClosureCapError(IdentifyError):
    """The union closure outgrew the configured cap."""


class FalsificationSignal(RuntimeError):
    """Raised when observed behavior contradicts the assumed discipline."""


class InfeasiblePolytopeError(FalsificationSignal):
    """No pair distribution satisfies all containment inequalities."""


# ---------------------------------------------------------------------------
# local observations


@dataclass(frozen=True)
class LocalObs:
    """One observation near a cutoff: candidate set, outcome, weight.

    Weights let the same code run on raw students (weight 1 each) and on
    exact population mixtures (weights sum to the side mass).  The reported
    pair feeds the naive contrast; the true pair is oracle-only.
    """

    qset: PairSet
    y: float
    weight: float = 1.0
    reported_pair: Pair | None = None
    true_pair: Pair | None = None


def total_weight(obs: Sequence[LocalObs]) -> float:
    return float(sum(o.weight for o in obs))


def event_prob(obs: Sequence[LocalObs], pair: Pair) -> float:
    """Share of local mass whose candidate set can contain ``pair``."""
    tot = total_weight(obs)
    if tot <= 0:
        raise IdentifyError("empty side")
    hit = sum(o.weight for o in obs if pair in o.qset)
    return float(hit / tot)


def collect_local_obs(eco, cutoffs, sample, regime: Regime,
                      umas: UmasRelation | None = None,
                      ) -> tuple[list[LocalObs], list[LocalObs]]:
    """Window students as local records, one list per side of the cutoff."""
    if eco.y_observed is None:
        raise IdentifyError("economy has no observed outcomes")
    out: tuple[list[LocalObs], list[LocalObs]] = ([], [])
    for store, ids in zip(out, (sample.plus_ids, sample.minus_ids)):
        for i in ids:
            qset = qset_for_student(eco, cutoffs, i, sample.school, regime, umas)
            rep = local_pair(eco, cutoffs, i, sample.school, use="reported")
            true = (local_pair(eco, cutoffs, i, sample.school, use="true")
                    if eco.truth is not None else None)
            store.append(LocalObs(qset=qset, y=float(eco.y_observed[i]),
                                  reported_pair=rep, true_pair=true))
    return out


# ---------------------------------------------------------------------------
# support families


def _canon(sets: Iterable[PairSet]) -> tuple[PairSet, ...]:
    return tuple(sorted(sets, key=lambda s: (len(s), sorted(s))))


def union_closure(members: Iterable[PairSet], cap: int = 4096) -> tuple[PairSet, ...]:
    """Close a family of sets under pairwise union (hence all finite unions).

    Growth past ``cap`` raises rather than silently truncating, since a
    truncated closure would drop binding inequalities.
    """
    closed: set[PairSet] = set(members)
    frontier = set(closed)
    if len(closed) > cap:
        raise ClosureCapError(f"{len(closed)} support sets exceed cap {cap}")
    while frontier:
        new: set[PairSet] = set()
        for a in frontier:
            for b in closed:
                u = a | b
                if u not in closed and u not in new:
                    new.add(u)
                    if len(closed) + len(new) > cap:
                        raise ClosureCapError(
                            f"union closure exceeds cap {cap}")
        closed |= new
        frontier = new
    return _canon(closed)


@dataclass(frozen=True)
class SupportFamily:
    """Distinct candidate sets seen on one side, with their union closure."""

    side: str
    members: tuple[PairSet, ...]
    closure: tuple[PairSet, ...]

    def __contains__(self, a: PairSet) -> bool:
        return a in set(self.closure)


def support_family(obs: Sequence[LocalObs], side: str,
                   cap: int = 4096) -> SupportFamily:
    if not obs:
        raise IdentifyError("empty side")
    members = _canon({o.qset for o in obs})
    for s in members:
        if not s:
            raise IdentifyError("empty candidate set in support")
    return SupportFamily(side=side, members=members,
                         closure=union_closure(members, cap=cap))


@dataclass(frozen=True)
class ContainmentStats:
    """Containment frequencies of candidate sets within closure members."""

    side: str
    n_obs: int
    total: float
    family: SupportFamily
    containment: Mapping[PairSet, float]

    def prob(self, a: PairSet) -> float:
        return self.containment[a]


def containment_stats(obs: Sequence[LocalObs], side: str,
                      cap: int = 4096) -> ContainmentStats:
    """Empirical (or exact, if weighted) containment probabilities."""
    fam = support_family(obs, side, cap=cap)
    tot = total_weight(obs)
    if tot <= 0:
        raise IdentifyError("empty side")
    probs: dict[PairSet, float] = {}
    for a in fam.closure:
        hit = sum(o.weight for o in obs if o.qset <= a)
        probs[a] = float(hit / tot)
    return ContainmentStats(side=side, n_obs=len(obs), total=tot,
                            family=fam, containment=probs)


# ---------------------------------------------------------------------------
# the distribution polytope


@dataclass(frozen=True)
class DistPolytope:
    """Mass-per-pair variables, one residual for off-support mass, and
    lower-bound rows ``sum of masses over A >= bound``."""

    atoms: tuple[Pair, ...]
    rows: tuple[tuple[PairSet, float], ...]

    @property
    def n_vars(self) -> int:
        return len(self.atoms) + 1          # + residual


def build_polytope(stats_plus: ContainmentStats | None,
                   stats_minus: ContainmentStats | None) -> DistPolytope:
    """Combine both sides' containment rows over a shared atom list.

    A set lying in both closures gets the larger of the two frequencies as
    its lower bound; a one-sided set gets that side's frequency.  Either
    side may be absent (one-sided designs), not both.
    """
    if stats_plus is None and stats_minus is None:
        raise IdentifyError("no side data at all")
    closures: dict[PairSet, float] = {}
    for stats in (stats_plus, stats_minus):
        if stats is None:
            continue
        for a in stats.family.closure:
            p = stats.prob(a)
            if a in closures:
                closures[a] = max(closures[a], p)
            else:
                closures[a] = p
    atoms: set[Pair] = set()
    for a in closures:
        atoms |= a
    rows = tuple((a, closures[a]) for a in _canon(closures))
    return DistPolytope(atoms=tuple(sorted(atoms)), rows=rows)


def _polytope_constraints(poly: DistPolytope):
    n = poly.n_vars
    idx = {p: k for k, p in enumerate(poly.atoms)}
    A_ub, b_ub = [], []
    for a, bound in poly.rows:
        row = np.zeros(n)
        for p in a:
            if p in idx:
                row[idx[p]] = -1.0
        A_ub.append(row)
        b_ub.append(-bound)
    A_eq = [np.ones(n)]
    b_eq = [1.0]
    return np.array(A_ub), np.array(b_ub), np.array(A_eq), np.array(b_eq)


def solve_bounds_on_event(poly: DistPolytope,
                          event: Iterable[Pair]) -> tuple[float, float]:
    """Sharp [min, max] probability of a pair event over the polytope.

    The event is read over the support atoms; residual off-support mass
    never counts toward it.  An infeasible polytope is a falsification
    signal and raises.
    """
    event = set(event)
    n = poly.n_vars
    c = np.zeros(n)
    for k, p in enumerate(poly.atoms):
        if p in event:
            c[k] = 1.0
    A_ub, b_ub, A_eq, b_eq = _polytope_constraints(poly)
    lo = solve_lp(c, A_ub, b_ub, A_eq, b_eq)
    if lo.status == "infeasible":
        raise InfeasiblePolytopeError("containment inequalities admit no distribution")
    hi = solve_lp(c, A_ub, b_ub, A_eq, b_eq, maximize=True)
    if not (lo.ok and hi.ok):
        raise SimplexError(f"unexpected LP status {lo.status}/{hi.status}")
    return float(lo.value), float(hi.value)


# ---------------------------------------------------------------------------
# trimming shares


@dataclass(frozen=True)
class DeltaBounds:
    """Worst-case share of the pair subgroup on each side.

    ``p_lower`` is the sharp lower bound on the pair's mass at the cutoff;
    dividing by the side share of students whose candidate set allows the
    pair gives the least possible subgroup fraction, which drives the
    outcome trimming.  A side with no allowing students has no ratio.
    """

    pair: Pair
    p_lower: float
    p_upper: float
    denom_plus: float | None
    denom_minus: float | None
    delta_plus: float | None
    delta_minus: float | None


def delta_bounds(poly: DistPolytope, pair: Pair,
                 obs_plus: Sequence[LocalObs] | None,
                 obs_minus: Sequence[LocalObs] | None) -> DeltaBounds:
    p_lo, p_hi = solve_bounds_on_event(poly, [pair])

    def side_ratio(obs):
        if not obs:
            return None, None
        denom = event_prob(obs, pair)
        if denom <= 0.0:
            return 0.0, None
        return denom, min(1.0, p_lo / denom)

    denom_p, delta_p = side_ratio(obs_plus)
    denom_m, delta_m = side_ratio(obs_minus)
    return DeltaBounds(pair=pair, p_lower=p_lo, p_upper=p_hi,
                       denom_plus=denom_p, denom_minus=denom_m,
                       delta_plus=delta_p, delta_minus=delta_m)


# ---------------------------------------------------------------------------
# falsification


@dataclass(frozen=True)
class PartitionCheck:
    name: str
    statistic: float
    limit: float
    passed: bool


@dataclass(frozen=True)
class FalsificationReport:
    checks: tuple[PartitionCheck, ...]
    passed: bool


def all_pairs(n_schools: int) -> tuple[Pair, ...]:
    opts = range(n_schools + 1)
    return tuple((x, z) for x in opts for z in opts)


def default_partitions(stats_plus: ContainmentStats | None,
                       stats_minus: ContainmentStats | None,
                       n_schools: int,
                       pair: Pair | None = None) -> list[tuple[str, tuple[PairSet, ...]]]:
    """The stock partitions: support atoms plus remainder, and (optionally)
    the queried pair against everything else."""
    universe = frozenset(all_pairs(n_schools))
    atoms: set[Pair] = set()
    for stats in (stats_plus, stats_minus):
        if stats is None:
            continue
        for a in stats.family.members:
            atoms |= a
    cells = [frozenset({p}) for p in sorted(atoms)]
    rest = universe - atoms
    if rest:
        cells.append(frozenset(rest))
    out = [("support-atoms", tuple(cells))]
    if pair is not None:
        two = (frozenset({pair}), frozenset(universe - {pair}))
        out.append((f"pair-{pair[0]}-{pair[1]}", two))
    return out


def _cell_lower_bound(cell: PairSet, stats_plus: ContainmentStats | None,
                      stats_minus: ContainmentStats | None) -> float:
    vals = []
    for stats in (stats_plus, stats_minus):
        if stats is not None and cell in stats.family:
            vals.append(stats.prob(cell))
    return max(vals) if vals else 0.0


def falsification_test(stats_plus: ContainmentStats | None,
                       stats_minus: ContainmentStats | None,
                       n_schools: int,
                       pair: Pair | None = None,
                       partitions: Sequence[tuple[str, tuple[PairSet, ...]]] | None = None,
                       tol: float = 1e-9,
                       allowance: float = 0.0) -> FalsificationReport:
    """Sum, over each partition of the pair space, the implied lower bounds.

    A sum above ``1 + tol + allowance`` means no single distribution can
    satisfy every containment inequality: the assumed discipline is
    falsified.  ``allowance`` absorbs sampling noise in finite samples and
    defaults to zero (exact, appropriate at population scale).
    """
    if partitions is None:
        partitions = default_partitions(stats_plus, stats_minus, n_schools, pair)
    limit = 1.0 + tol + allowance
    checks = []
    for name, cells in partitions:
        covered: set[Pair] = set()
        for cell in cells:
            if covered & cell:
                raise IdentifyError(f"partition {name!r} has overlapping cells")
            covered |= cell
        if covered != set(all_pairs(n_schools)):
            raise IdentifyError(f"partition {name!r} does not cover the pair space")
        stat = sum(_cell_lower_bound(cell, stats_plus, stats_minus)
                   for cell in cells)
        checks.append(PartitionCheck(name=name, statistic=float(stat),
                                     limit=limit, passed=stat <= limit))
    return FalsificationReport(checks=tuple(checks),
                               passed=all(c.passed for c in checks))
