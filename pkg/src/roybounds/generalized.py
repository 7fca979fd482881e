"""Sharp bounds for the generalized binary Roy model with an instrument.

Selection is unrestricted; only exclusion of the instrument from
potential outcomes is maintained.  The joint identified set is the
intersection over z of six linear conditions, and every derived bound
(marginals, benefit, regret, mobility, sector-conditional gains) is a
closed form in the instrument envelopes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundsCross,
    DegenerateDenominator,
    InfeasibleModel,
    ZeroConditioningCell,
    ZeroSectorProbability,
)
from .probability import (
    P00,
    P01,
    P10,
    P11,
    InstrumentTable,
    IntervalBound,
    SimplexPolytope,
    unit,
)


@dataclass(frozen=True)
class InstrumentEnvelopes:
    """Infima/suprema over Supp(Z) of the identified cell combinations."""

    inf_y1: float        # inf_z P(Y=1|z)
    inf_y0: float        # inf_z P(Y=0|z)
    inf_10_01: float     # inf_z [q10(z) + q01(z)]
    inf_00_11: float     # inf_z [q00(z) + q11(z)]
    sup_q10: float
    sup_q00: float
    sup_q11: float
    sup_q01: float


def envelopes(t: InstrumentTable) -> InstrumentEnvelopes:
    """Componentwise min/max of the cell combinations over the support of z."""
    qs = [q for _, q, _ in t.points]
    return InstrumentEnvelopes(
        inf_y1=min(q.p_y1 for q in qs),
        inf_y0=min(q.p_y0 for q in qs),
        inf_10_01=min(q.q10 + q.q01 for q in qs),
        inf_00_11=min(q.q00 + q.q11 for q in qs),
        sup_q10=max(q.q10 for q in qs),
        sup_q00=max(q.q00 for q in qs),
        sup_q11=max(q.q11 for q in qs),
        sup_q01=max(q.q01 for q in qs),
    )


def joint_polytope(t: InstrumentTable) -> SimplexPolytope:
    """Identified set for (p00, p01, p10, p11): six conditions per z."""
    rows = []
    for _, q, _ in t.points:
        rows += [
            (tuple(unit(P11)), q.p_y1),
            (tuple(unit(P00)), q.p_y0),
            (tuple(unit(P10)), q.q10 + q.q01),
            (tuple(unit(P01)), q.q00 + q.q11),
            (tuple(unit(P10) + unit(P11)), 1.0 - q.q00),
            (tuple(-(unit(P10) + unit(P11))), -q.q10),
            (tuple(unit(P01) + unit(P11)), 1.0 - q.q01),
            (tuple(-(unit(P01) + unit(P11))), -q.q11),
        ]
    poly = SimplexPolytope.from_rows(rows)
    if not poly.is_feasible():
        raise InfeasibleModel("instrument table inconsistent with the generalized model")
    return poly


def bp_marginal_bounds(
    e: InstrumentEnvelopes, strict: bool = False
) -> tuple[IntervalBound, IntervalBound, IntervalBound]:
    """Sharp bounds for the pair (EY0, EY1) and their difference.

    Specializes to the classic two-point-instrument treatment-effect
    bounds when z takes two values.  Crossing rejects the model.
    """
    ey0 = IntervalBound(
        max(e.sup_q10, 1.0 - e.inf_y0 - e.inf_00_11),
        min(1.0 - e.sup_q00, e.inf_y1 + e.inf_10_01),
        sharp=True,
        label="EY0",
    )
    ey1 = IntervalBound(
        max(e.sup_q11, 1.0 - e.inf_y0 - e.inf_10_01),
        min(1.0 - e.sup_q01, e.inf_y1 + e.inf_00_11),
        sharp=True,
        label="EY1",
    )
    if strict and (ey0.crossed or ey1.crossed):
        raise BoundsCross("marginal bounds cross: model rejected")
    ate = IntervalBound(ey1.lo - ey0.hi, ey1.hi - ey0.lo, sharp=True, label="E(Y1-Y0)")
    return ey0.clamp(), ey1.clamp(), ate.clamp(-1.0, 1.0)


def _strict_benefit_lower(e: InstrumentEnvelopes) -> float:
    return max(
        0.0,
        1.0 - e.inf_y1 - e.inf_10_01 - e.inf_y0,
        e.sup_q00 - e.inf_y0,
        e.sup_q11 - e.inf_y1,
    )


def benefit_bounds(e: InstrumentEnvelopes) -> tuple[IntervalBound, IntervalBound]:
    """Bounds on P(Y1 > Y0) and P(Y1 >= Y0).

    The weak bound comes from the mirror-image bound on P(Y0 > Y1) and
    complementation.
    """
    strict = IntervalBound(
        _strict_benefit_lower(e), e.inf_00_11, sharp=True, label="P(Y1>Y0)"
    ).clamp()
    # Mirror image: swap sectors (q10 <-> q11, q00 <-> q01) to bound p10.
    p10_lower = max(
        0.0,
        1.0 - e.inf_y1 - e.inf_00_11 - e.inf_y0,
        e.sup_q01 - e.inf_y0,
        e.sup_q10 - e.inf_y1,
    )
    weak = IntervalBound(
        1.0 - e.inf_10_01, 1.0 - p10_lower, sharp=True, label="P(Y1>=Y0)"
    ).clamp()
    return strict, weak


def regret_bound(t: InstrumentTable, z) -> float:
    """Upper bound on P(Y1=1 | Y0=0, D=0, Z=z), clamped to [0, 1]."""
    q = t.cells(z)
    if q.q00 <= 1e-12:
        raise ZeroConditioningCell(f"P(Y=0,D=0|z={z!r}) is zero")
    e = envelopes(t)
    return min(1.0, e.inf_00_11 / q.q00)


def mobility_bounds(e: InstrumentEnvelopes) -> IntervalBound:
    """Bounds on P(Y1=1 | Y0=0), clamped to [0, 1]."""
    ey0, _, _ = bp_marginal_bounds(e)
    denom_hi = 1.0 - ey0.hi
    denom_lo = 1.0 - ey0.lo
    if denom_hi <= 1e-9:
        raise DegenerateDenominator("P(Y0=0) upper bound is zero")
    lower = _strict_benefit_lower(e) / denom_lo if denom_lo > 1e-9 else 1.0
    upper = e.inf_00_11 / denom_hi
    return IntervalBound(lower, upper, sharp=True, label="P(Y1=1|Y0=0)").clamp()


def att_bounds(t: InstrumentTable) -> tuple[IntervalBound, IntervalBound]:
    """Bounds on E(Y1-Y0 | D=1) and E(Y0-Y1 | D=0) via marginal plug-ins."""
    e = envelopes(t)
    ey0, ey1, _ = bp_marginal_bounds(e)

    def averaged(counterfactual: IntervalBound, d: int, label: str) -> IntervalBound:
        los, his = [], []
        for _, q, w in t.points:
            p_d = q.p_d1 if d == 1 else q.p_d0
            if p_d <= 1e-12:
                raise ZeroSectorProbability(f"P(D={d}|z) is zero at some z")
            los.append(w * (q.p_y1 - counterfactual.hi) / p_d)
            his.append(w * (q.p_y1 - counterfactual.lo) / p_d)
        return IntervalBound(sum(los), sum(his), sharp=False, label=label).clamp(-1.0, 1.0)

    att1 = averaged(ey0, 1, "E(Y1-Y0|D=1)")
    att0 = averaged(ey1, 0, "E(Y0-Y1|D=0)")
    return att1, att0


def roy_selection_test(t: InstrumentTable) -> dict:
    """Diagnostics for the Roy selection mechanism.

    Checks P(Y1>Y0) lower <= P(D=1|z) <= P(Y1>=Y0) upper at every z, and
    reports the largest deviation of P(Y=1|z) from its pooled value.
    """
    e = envelopes(t)
    strict, weak = benefit_bounds(e)
    pooled_y1 = t.pooled().p_y1
    violations = []
    for z, q, _ in t.points:
        p_d1 = q.p_d1
        if p_d1 < strict.lo - 1e-12 or p_d1 > weak.hi + 1e-12:
            violations.append(
                {"z": z, "p_d1": p_d1, "strict_lo": strict.lo, "weak_hi": weak.hi}
            )
    y_z_dep = max(abs(q.p_y1 - pooled_y1) for _, q, _ in t.points)
    return {
        "violations": violations,
        "n_violations": len(violations),
        "benefit_strict": strict.to_dict(),
        "benefit_weak": weak.to_dict(),
        "max_outcome_instrument_dependence": y_z_dep,
    }


@dataclass(frozen=True)
class GeneralizedBounds:
    """All generalized-model bounds for one instrument table."""

    polytope: SimplexPolytope
    ey0: IntervalBound
    ey1: IntervalBound
    ate: IntervalBound
    benefit_strict: IntervalBound
    benefit_weak: IntervalBound
    mobility: IntervalBound
    att1: IntervalBound
    att0: IntervalBound
    regret_by_z: tuple[tuple[object, float], ...]

    @property
    def crossed(self) -> bool:
        return self.ey0.crossed or self.ey1.crossed

    def to_dict(self) -> dict:
        return {
            "ey0": self.ey0.to_dict(),
            "ey1": self.ey1.to_dict(),
            "ate": self.ate.to_dict(),
            "benefit_strict": self.benefit_strict.to_dict(),
            "benefit_weak": self.benefit_weak.to_dict(),
            "mobility": self.mobility.to_dict(),
            "att1": self.att1.to_dict(),
            "att0": self.att0.to_dict(),
            "regret_by_z": {str(z): r for z, r in self.regret_by_z},
            "crossed": self.crossed,
        }


def compute_all(t: InstrumentTable) -> GeneralizedBounds:
    """Assemble every generalized-model bound for one table."""
    e = envelopes(t)
    poly = joint_polytope(t)
    ey0, ey1, ate = bp_marginal_bounds(e)
    strict, weak = benefit_bounds(e)
    regrets = []
    for z, q, _ in t.points:
        if q.q00 > 1e-12:
            regrets.append((z, regret_bound(t, z)))
        else:
            regrets.append((z, np.nan))
    return GeneralizedBounds(
        polytope=poly,
        ey0=ey0,
        ey1=ey1,
        ate=ate,
        benefit_strict=strict,
        benefit_weak=weak,
        mobility=mobility_bounds(e),
        att1=att_bounds(t)[0],
        att0=att_bounds(t)[1],
        regret_by_z=tuple(regrets),
    )
