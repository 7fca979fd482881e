"""Functional bounds for continuous or mixed outcomes under Roy selection.

Everything is built from three empirical step functions: the outcome cdf
F, the sector sub-cdfs F_lo_d(y) = P(Y<=y, D=d), and their Peterson
envelopes F_hi_d = F_lo_d + P(D=1-d).  Bounds on the counterfactual
distributions, on probabilities of rectangles in the (y0, y1) plane, and
on interquantile ranges all reduce to evaluations and generalized
inverses of these step functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BadInterval,
    DegenerateDenominator,
    EmptySample,
    EmptySector,
    QuantileOutOfRange,
)
from .probability import IntervalBound

_TOL = 1e-12


@dataclass(frozen=True)
class OutcomeSample:
    """Weighted records (y, d, w) with weights normalized to sum to one.

    An optional instrument column z rides along untouched; the step
    functions below pool over it, and callers subset by z themselves.
    """

    y: np.ndarray
    d: np.ndarray
    w: np.ndarray
    z: np.ndarray | None = None

    @classmethod
    def from_records(cls, records) -> "OutcomeSample":
        records = list(records)
        if not records:
            raise EmptySample("outcome sample is empty")
        y = np.array([r[0] for r in records], dtype=float)
        d = np.array([r[1] for r in records], dtype=int)
        w = np.array([r[2] if len(r) > 2 else 1.0 for r in records], dtype=float)
        return cls.from_arrays(y, d, w)

    @classmethod
    def from_arrays(cls, y, d, w=None, z=None) -> "OutcomeSample":
        y = np.asarray(y, dtype=float)
        d = np.asarray(d, dtype=int)
        if y.size == 0:
            raise EmptySample("outcome sample is empty")
        if not np.all(np.isfinite(y)):
            raise BadInterval("outcomes must be finite")
        if not np.all((d == 0) | (d == 1)):
            raise BadInterval("sector must be 0 or 1")
        w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
        if np.any(w <= 0):
            raise BadInterval("weights must be positive")
        if z is not None:
            z = np.asarray(z, dtype=object)
        return cls(y=y, d=d, w=w / w.sum(), z=z)

    def subset(self, mask: np.ndarray) -> "OutcomeSample":
        z = self.z[mask] if self.z is not None else None
        return OutcomeSample.from_arrays(self.y[mask], self.d[mask], self.w[mask], z=z)

    @property
    def n(self) -> int:
        return len(self.y)


class StepFn:
    """Right-continuous nondecreasing step function with finite jumps.

    Value is `base` left of the first jump; after jump i it is vals[i].
    The generalized inverse uses the weak convention
    inv(u) = inf{y : value(y) >= u}, returning -inf when u never exceeds
    the base value and +inf when u exceeds the terminal value.
    """

    def __init__(self, xs: np.ndarray, vals: np.ndarray, base: float = 0.0):
        self.xs = np.asarray(xs, dtype=float)
        self.vals = np.asarray(vals, dtype=float)
        self.base = float(base)

    def __call__(self, y):
        idx = np.searchsorted(self.xs, y, side="right")
        out = np.where(idx > 0, self.vals[np.maximum(idx - 1, 0)], self.base)
        return float(out) if np.isscalar(y) else out

    def inverse(self, u: float) -> float:
        if u <= self.base + _TOL:
            return -np.inf
        if u > self.vals[-1] + _TOL:
            return np.inf
        idx = int(np.searchsorted(self.vals, u - _TOL, side="left"))
        return float(self.xs[idx])

    def inverse_many(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        idx = np.searchsorted(self.vals, u - _TOL, side="left")
        out = np.where(
            idx < len(self.xs), self.xs[np.minimum(idx, len(self.xs) - 1)], np.inf
        )
        return np.where(u <= self.base + _TOL, -np.inf, out)

    @property
    def terminal(self) -> float:
        return float(self.vals[-1]) if len(self.vals) else self.base


class SubCdf:
    """Empirical cdf, sub-cdfs and envelopes of a weighted (Y, D) sample."""

    def __init__(self, sample: OutcomeSample):
        order = np.argsort(sample.y, kind="stable")
        ys = sample.y[order]
        ws = sample.w[order]
        ds = sample.d[order]
        uniq, inv = np.unique(ys, return_inverse=True)
        w0 = np.bincount(inv, weights=ws * (ds == 0), minlength=len(uniq))
        w1 = np.bincount(inv, weights=ws * (ds == 1), minlength=len(uniq))
        self.jumps = uniq
        self.p_d0 = float(w0.sum())
        self.p_d1 = float(w1.sum())
        c0 = np.cumsum(w0)
        c1 = np.cumsum(w1)
        self._cdf = StepFn(uniq, c0 + c1)
        self._sub = (StepFn(uniq, c0), StepFn(uniq, c1))
        self._bar = (
            StepFn(uniq, c0 + self.p_d1, base=self.p_d1),
            StepFn(uniq, c1 + self.p_d0, base=self.p_d0),
        )
        self._w_by_d = (w0, w1)

    def p_d(self, d: int) -> float:
        return self.p_d1 if d == 1 else self.p_d0

    def cdf(self, y):
        """F(y) = P(Y <= y)."""
        return self._cdf(y)

    def sub(self, d: int, y):
        """P(Y <= y, D = d)."""
        return self._sub[d](y)

    def bar(self, d: int, y):
        """Peterson envelope P(Y <= y, D = d) + P(D = 1-d)."""
        return self._bar[d](y)

    def inv_cdf(self, u: float) -> float:
        return self._cdf.inverse(u)

    def inv_sub(self, d: int, u: float) -> float:
        return self._sub[d].inverse(u)

    def inv_bar(self, d: int, u: float) -> float:
        return self._bar[d].inverse(u)

    def mass(self, iv, d=None) -> float:
        """Weight of {y in iv, D=d} for an Interval; d=None pools sectors."""
        if iv is None or iv.is_empty:
            return 0.0
        if d is None:
            w = self._w_by_d[0] + self._w_by_d[1]
        else:
            w = self._w_by_d[d]
        lo_side = "right" if iv.lo_open else "left"
        hi_side = "left" if iv.hi_open else "right"
        i0 = np.searchsorted(self.jumps, iv.lo, side=lo_side)
        i1 = np.searchsorted(self.jumps, iv.hi, side=hi_side)
        return float(w[i0:i1].sum())


def build_subcdf(s: OutcomeSample) -> SubCdf:
    """Construct the empirical step functions of a weighted sample."""
    return SubCdf(s)


@dataclass(frozen=True)
class Interval:
    """Extended-real interval with open/closed endpoint flags.

    The default flags give the half-open form (lo, hi] that every bound
    in this module consumes; (-inf, hi] needs no special casing because
    no sample point sits at -inf.
    """

    lo: float
    hi: float
    lo_open: bool = True
    hi_open: bool = False

    @property
    def is_empty(self) -> bool:
        if self.lo > self.hi:
            return True
        if self.lo == self.hi:
            return self.lo_open or self.hi_open
        return False

    def intersect(self, other: "Interval") -> "Interval":
        if self.lo > other.lo or (self.lo == other.lo and self.lo_open):
            lo, lo_open = self.lo, self.lo_open
        else:
            lo, lo_open = other.lo, other.lo_open
        if self.hi < other.hi or (self.hi == other.hi and self.hi_open):
            hi, hi_open = self.hi, self.hi_open
        else:
            hi, hi_open = other.hi, other.hi_open
        return Interval(lo, hi, lo_open, hi_open)


@dataclass(frozen=True)
class IntervalUnion:
    """Disjoint sorted union of Intervals."""

    parts: tuple[Interval, ...]

    @classmethod
    def of(cls, intervals) -> "IntervalUnion":
        ivs = sorted((i for i in intervals if not i.is_empty), key=lambda i: (i.lo, i.hi))
        merged: list[Interval] = []
        for iv in ivs:
            if merged:
                last = merged[-1]
                touching = iv.lo < last.hi or (
                    iv.lo == last.hi and not (iv.lo_open and last.hi_open)
                )
                if touching:
                    if (iv.hi, not iv.hi_open) > (last.hi, not last.hi_open):
                        merged[-1] = Interval(last.lo, iv.hi, last.lo_open, iv.hi_open)
                    continue
            merged.append(iv)
        return cls(parts=tuple(merged))

    @property
    def is_empty(self) -> bool:
        return not self.parts


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle I0 x I1 in the (y0, y1) plane."""

    i0: Interval
    i1: Interval

    @property
    def is_empty(self) -> bool:
        return self.i0.is_empty or self.i1.is_empty


@dataclass(frozen=True)
class RectUnion:
    """Finite union of rectangles; the Borel sets this module bounds."""

    rects: tuple[Rect, ...]

    @classmethod
    def of(cls, rects) -> "RectUnion":
        return cls(rects=tuple(r for r in rects if not r.is_empty))

    @classmethod
    def lower_quadrant(cls, y0: float, y1: float) -> "RectUnion":
        return cls.of([Rect(Interval(-np.inf, y0), Interval(-np.inf, y1))])


def _rect_upper(i_own: Interval, i_other: Interval) -> Interval:
    # Half-line through y in the own coordinate hits the rectangle iff
    # y is in the own interval and some point <= y is in the other one.
    reach = Interval(i_other.lo, np.inf, i_other.lo_open, True)
    return i_own.intersect(reach)


def _rect_lower(i_own: Interval, i_other: Interval) -> Interval:
    # Half-line containment requires the other interval to reach -inf.
    if np.isfinite(i_other.lo):
        return Interval(0.0, -1.0)
    cap = Interval(-np.inf, i_other.hi, True, i_other.hi_open)
    return i_own.intersect(cap)


def upper_lower_sets(a: RectUnion):
    """Upper/lower set calculus for a rectangle union.

    Returns (U0, U1, L0, L1): the sets of y whose sector-d half-line
    ({y} paired with all values <= y in the other coordinate) meets,
    respectively lies inside, the set a.
    """
    u0, u1, l0, l1 = [], [], [], []
    for r in a.rects:
        u1.append(_rect_upper(r.i1, r.i0))
        u0.append(_rect_upper(r.i0, r.i1))
        l1.append(_rect_lower(r.i1, r.i0))
        l0.append(_rect_lower(r.i0, r.i1))
    return (
        IntervalUnion.of(u0),
        IntervalUnion.of(u1),
        IntervalUnion.of(l0),
        IntervalUnion.of(l1),
    )


def _union_mass(c: SubCdf, u: IntervalUnion, d: int) -> float:
    return sum(c.mass(iv, d) for iv in u.parts)


def peterson_bounds(c: SubCdf, d: int, y: float) -> IntervalBound:
    """Pointwise envelope [F(y), F_lo_d(y) + P(D=1-d)] for F_d(y)."""
    return IntervalBound(c.cdf(y), c.bar(d, y), sharp=True, label=f"F_{d}({y})")


def interval_lower_bound(c: SubCdf, d: int, y1: float, y2: float) -> float:
    """Sharp lower bound on P(y1 < Y_d <= y2)."""
    if y1 >= y2:
        raise BadInterval(f"need y1 < y2, got ({y1}, {y2})")
    base = c.sub(d, y2) - (c.sub(d, y1) if np.isfinite(y1) else 0.0)
    if y1 == -np.inf:
        base += c.sub(1 - d, y2)
    return float(base)


def joint_set_bounds(c: SubCdf, a: RectUnion) -> IntervalBound:
    """Sharp bounds on P((Y0, Y1) in a) for a rectangle union."""
    u0, u1, l0, l1 = upper_lower_sets(a)
    lo = _union_mass(c, l0, 0) + _union_mass(c, l1, 1)
    hi = _union_mass(c, u0, 0) + _union_mass(c, u1, 1)
    return IntervalBound(lo, hi, sharp=True, label="P((Y0,Y1) in A)")


def mobility_upper(c: SubCdf, y: float) -> float:
    """Upper bound on P(Y1 > y | Y0 <= y), clamped to [0, 1]."""
    denom = c.bar(0, y)
    if denom <= _TOL:
        raise DegenerateDenominator("upper envelope of P(Y0<=y) is zero")
    num = c.p_d1 - c.sub(1, y)
    return min(1.0, max(0.0, num / denom))


def iqr_bounds(c: SubCdf, d: int, q1: float, q2: float) -> IntervalBound:
    """Sharp bounds on the (q1, q2) interquantile range of Y_d.

    The upper endpoint is +inf when the data admit counterfactual
    distributions with unboundedly spread quantiles (in particular when
    q1 does not exceed P(D=1-d)); this is reported, not raised.
    """
    if not (0.0 < q1 < q2 < 1.0):
        raise QuantileOutOfRange(f"need 0 < q1 < q2 < 1, got ({q1}, {q2})")
    lower = max(0.0, c.inv_bar(d, q2) - c.inv_cdf(q1))
    y_lo = c.inv_bar(d, q1)
    y_hi = c.inv_cdf(q1)
    if y_lo == -np.inf:
        return IntervalBound(lower, np.inf, sharp=True, label=f"IQR_{d}({q1},{q2})")
    cand = [y for y in c.jumps if y_lo <= y <= y_hi]
    cand += [y_lo, y_hi]
    inv_q2 = c.inv_cdf(q2)
    best = 0.0
    for y in cand:
        slope_term = c.inv_sub(d, q2 - q1 + c.sub(d, y)) - y
        best = max(best, min(inv_q2 - y, slope_term))
    return IntervalBound(lower, max(lower, best), sharp=True, label=f"IQR_{d}({q1},{q2})")


def _sector_quantile(c: SubCdf, d: int, q: float) -> float:
    p = c.p_d(d)
    return c.inv_sub(d, q * p)


def proposition1_check(c: SubCdf, d: int, q1: float, q2: float) -> dict:
    """Compare observed sector-d inequality with the identified bounds.

    The observed interquantile range is guaranteed inside the bounds on
    the potential one when the counterfactual sector's observed outcomes
    first-order dominate the studied sector's; without that dominance the
    observed range can strictly exceed the identified upper bound, in
    which case selection overstates sector-d inequality.
    """
    if c.p_d(d) <= _TOL:
        raise EmptySector(f"no observations with D={d}")
    bounds = iqr_bounds(c, d, q1, q2)
    observed = _sector_quantile(c, d, q2) - _sector_quantile(c, d, q1)
    p_d, p_o = c.p_d(d), c.p_d(1 - d)
    cond_d = np.array([c.sub(d, y) for y in c.jumps]) / p_d
    if p_o > _TOL:
        cond_o = np.array([c.sub(1 - d, y) for y in c.jumps]) / p_o
    else:
        cond_o = np.zeros_like(cond_d)
    dominance_other_over_d = bool(np.all(cond_o <= cond_d + 1e-9))
    dominance_d_over_other = bool(np.all(cond_d <= cond_o + 1e-9))
    exceeds = observed > bounds.hi + 1e-9
    return {
        "observed_iqr": float(observed),
        "potential_iqr": bounds.to_dict(),
        "counterfactual_dominates_sector": dominance_other_over_d,
        "sector_dominates_counterfactual": dominance_d_over_other,
        "observed_exceeds_upper": bool(exceeds),
        "verdict": (
            "selection inflates observed sector inequality"
            if exceeds
            else "observed inequality consistent with potential-outcome bounds"
        ),
    }
