"""Closed-form sharp bounds for the binary Roy model.

Covers the no-instrument case, instrument-sharpened bounds, marginal
bounds with sector-specific covariates, and conditional-distribution
bounds.  All outputs carry the polytope over (p00, p01, p10, p11) so
results can be cross-checked against enumeration oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import (
    DegenerateConditioning,
    MissingCell,
    OutcomeInstrumentDependence,
)
from .probability import (
    P00,
    P01,
    P10,
    CellProbs,
    InstrumentTable,
    IntervalBound,
    SimplexPolytope,
    unit,
)


@dataclass(frozen=True)
class BinaryRoyBounds:
    """Sharp bounds on the joint and marginal potential-success probabilities."""

    p00_value: float
    p10_bound: IntervalBound
    p01_bound: IntervalBound
    ey0_bound: IntervalBound
    ey1_bound: IntervalBound
    ate_bound: IntervalBound
    polytope: SimplexPolytope

    def to_dict(self) -> dict:
        return {
            "p00": self.p00_value,
            "p10": self.p10_bound.to_dict(),
            "p01": self.p01_bound.to_dict(),
            "ey0": self.ey0_bound.to_dict(),
            "ey1": self.ey1_bound.to_dict(),
            "ate": self.ate_bound.to_dict(),
        }


def _roy_polytope(p00: float, p10_cap: float, p01_cap: float) -> SimplexPolytope:
    # p00 is identified: encode the equality as paired inequalities.
    rows = [
        (tuple(unit(P10)), p10_cap),
        (tuple(unit(P01)), p01_cap),
        (tuple(unit(P00)), p00),
        (tuple(-unit(P00)), -p00),
    ]
    return SimplexPolytope.from_rows(rows)


def manski_bounds(q: CellProbs) -> tuple[IntervalBound, IntervalBound, IntervalBound]:
    """Worst-case bounds on (EY0, EY1) and the average sector difference."""
    ey0 = IntervalBound(q.q10, q.p_y1, sharp=True, label="EY0 (no instrument)")
    ey1 = IntervalBound(q.q11, q.p_y1, sharp=True, label="EY1 (no instrument)")
    ate = IntervalBound(-q.q10, q.q11, sharp=True, label="E(Y1-Y0)")
    return ey0, ey1, ate


def sharp_bounds(q: CellProbs) -> BinaryRoyBounds:
    """Sharp joint bounds: p00 identified, p10 <= q10, p01 <= q11."""
    ey0, ey1, ate = manski_bounds(q)
    return BinaryRoyBounds(
        p00_value=q.p_y0,
        p10_bound=IntervalBound(0.0, q.q10, sharp=True, label="p10"),
        p01_bound=IntervalBound(0.0, q.q11, sharp=True, label="p01"),
        ey0_bound=ey0,
        ey1_bound=ey1,
        ate_bound=ate,
        polytope=_roy_polytope(q.p_y0, q.q10, q.q11),
    )


def sharp_bounds_with_instrument(
    t: InstrumentTable, tau_y: float = 0.0
) -> BinaryRoyBounds:
    """Instrument-sharpened bounds; requires Y independent of Z within tau_y.

    The joint caps intersect over z (infima); the marginal lower bounds
    are suprema over z.  Pooled quantities use the instrument weights.
    """
    pooled = t.pooled()
    p_y1 = pooled.p_y1
    dev = max(abs(q.p_y1 - p_y1) for _, q, _ in t.points)
    if dev > tau_y + 1e-12:
        raise OutcomeInstrumentDependence(
            f"max_z |P(Y=1|z) - P(Y=1)| = {dev:.6g} exceeds tolerance {tau_y:.6g}"
        )
    q10s = [q.q10 for _, q, _ in t.points]
    q11s = [q.q11 for _, q, _ in t.points]
    lo10, hi10 = min(q10s), max(q10s)
    lo11, hi11 = min(q11s), max(q11s)
    return BinaryRoyBounds(
        p00_value=pooled.p_y0,
        p10_bound=IntervalBound(0.0, lo10, sharp=True, label="p10 (instrument)"),
        p01_bound=IntervalBound(0.0, lo11, sharp=True, label="p01 (instrument)"),
        ey0_bound=IntervalBound(hi10, p_y1, sharp=True, label="EY0 (instrument)"),
        ey1_bound=IntervalBound(hi11, p_y1, sharp=True, label="EY1 (instrument)"),
        ate_bound=IntervalBound(-lo10, lo11, sharp=True, label="E(Y1-Y0) (instrument)"),
        polytope=_roy_polytope(pooled.p_y0, lo10, lo11),
    )


@dataclass(frozen=True)
class CovariateGrid:
    """Cell probabilities indexed by sector-specific covariate pairs (x0, x1).

    Supports default to all pairs present in the mapping; pass explicit
    supports to restrict Supp(X1|X0=x0) / Supp(X0|X1=x1).
    """

    cells: tuple[tuple[tuple[object, object], CellProbs], ...]
    supp_x1: tuple[tuple[object, tuple], ...] = ()
    supp_x0: tuple[tuple[object, tuple], ...] = ()

    @classmethod
    def from_dict(cls, mapping: dict, supp_x1: dict | None = None, supp_x0: dict | None = None):
        return cls(
            cells=tuple(sorted(mapping.items(), key=lambda kv: (str(kv[0][0]), str(kv[0][1])))),
            supp_x1=tuple(sorted((k, tuple(v)) for k, v in (supp_x1 or {}).items())),
            supp_x0=tuple(sorted((k, tuple(v)) for k, v in (supp_x0 or {}).items())),
        )

    def cell(self, x0, x1) -> CellProbs:
        for (a, b), q in self.cells:
            if a == x0 and b == x1:
                return q
        raise MissingCell(f"no cells for (x0, x1) = ({x0!r}, {x1!r})")

    def x1_support(self, x0) -> list:
        for k, v in self.supp_x1:
            if k == x0:
                return list(v)
        vals = [b for (a, b), _ in self.cells if a == x0]
        if not vals:
            raise MissingCell(f"x0 = {x0!r} not in grid")
        return vals

    def x0_support(self, x1) -> list:
        for k, v in self.supp_x0:
            if k == x1:
                return list(v)
        vals = [a for (a, b), _ in self.cells if b == x1]
        if not vals:
            raise MissingCell(f"x1 = {x1!r} not in grid")
        return vals


def marginal_bounds_with_covariates(
    g: CovariateGrid, x0, x1
) -> tuple[IntervalBound, IntervalBound, bool]:
    """Intersection bounds on (E(Y0|x0), E(Y1|x1)) over excluded covariates.

    Crossing (empty interval) rejects the binary Roy model and is flagged,
    not raised.
    """
    cells0 = [g.cell(x0, t1) for t1 in g.x1_support(x0)]
    cells1 = [g.cell(t0, x1) for t0 in g.x0_support(x1)]
    ey0 = IntervalBound(
        max(q.q10 for q in cells0),
        min(q.p_y1 for q in cells0),
        sharp=True,
        label=f"E(Y0|x0={x0!r})",
    )
    ey1 = IntervalBound(
        max(q.q11 for q in cells1),
        min(q.p_y1 for q in cells1),
        sharp=True,
        label=f"E(Y1|x1={x1!r})",
    )
    return ey0, ey1, ey0.crossed or ey1.crossed


def conditional_bounds(
    g: CovariateGrid, x0, x1
) -> tuple[IntervalBound, IntervalBound]:
    """Sharp bounds on P(Y1=1|Y0=0,.) and P(Y0=1|Y1=0,.).

    The success probability c=P(Y=1|x0,x1) is reduced by the admissible
    range of the counterfactual mean a, then rescaled by 1-a; the bounds
    are the two extreme a values.
    """
    c = g.cell(x0, x1).p_y1

    def interval(a_lo: float, a_hi: float, label: str) -> IntervalBound:
        if a_hi >= 1.0 - 1e-9:
            raise DegenerateConditioning(f"conditioning mass 1-a vanishes for {label}")
        return IntervalBound(
            (c - a_hi) / (1.0 - a_hi), (c - a_lo) / (1.0 - a_lo), sharp=True, label=label
        ).clamp()

    a_cells = [g.cell(x0, t1) for t1 in g.x1_support(x0)]
    b_cells = [g.cell(t0, x1) for t0 in g.x0_support(x1)]
    p_y1_given_y0zero = interval(
        max(q.q10 for q in a_cells),
        min(q.p_y1 for q in a_cells),
        "P(Y1=1|Y0=0)",
    )
    p_y0_given_y1zero = interval(
        max(q.q11 for q in b_cells),
        min(q.p_y1 for q in b_cells),
        "P(Y0=1|Y1=0)",
    )
    return p_y1_given_y0zero, p_y0_given_y1zero
