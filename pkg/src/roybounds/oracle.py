"""Brute-force oracles and simulators.

Nothing here is needed to compute bounds; these are independent routes
to the same objects, used to verify the closed forms: exhaustive
subset-inequality enumeration for the binary identified sets, a linear
program over response types for the instrument case, explicit coupling
constructions that attain bound endpoints, and seeded data generators.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.stats import norm

from .errors import BoundsViolated, InfeasibleLP, OutOfRange
from .functional import OutcomeSample, StepFn, SubCdf
from .probability import (
    CellProbs,
    InstrumentTable,
    IntervalBound,
    PotentialJoint,
    SimplexPolytope,
)

ROY = "roy"
GENERALIZED = "generalized"

# Potential-outcome pairs in coordinate order (p00, p01, p10, p11).
_PAIRS = ((0, 0), (0, 1), (1, 0), (1, 1))
_PAIR_INDEX = {pair: i for i, pair in enumerate(_PAIRS)}

# Admissible (y0, y1) pairs for each observed (y, d) cell.
_G = {
    ROY: {
        (1, 1): {(1, 1), (0, 1)},
        (1, 0): {(1, 1), (1, 0)},
        (0, 1): {(0, 0)},
        (0, 0): {(0, 0)},
    },
    GENERALIZED: {
        (1, 1): {(1, 1), (0, 1)},
        (1, 0): {(1, 1), (1, 0)},
        (0, 1): {(1, 0), (0, 0)},
        (0, 0): {(0, 1), (0, 0)},
    },
}


def make_rng(seed: int, *stream) -> np.random.Generator:
    """Counter-based generator; extra ints select independent streams."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *stream])))


def artstein_set(q: CellProbs, variant: str = ROY) -> SimplexPolytope:
    """All 14 subset inequalities of the selection correspondence.

    For every nonempty proper subset A of the four potential-outcome
    pairs, the mass of A is at most the probability that the observed
    cell's admissible set meets A.
    """
    g = _G[variant]
    cell_probs = {
        (0, 0): q.q00,
        (0, 1): q.q01,
        (1, 0): q.q10,
        (1, 1): q.q11,
    }
    rows = []
    for r in range(1, 4):
        for subset in itertools.combinations(_PAIRS, r):
            a = np.zeros(4)
            for pair in subset:
                a[_PAIR_INDEX[pair]] = 1.0
            rhs = sum(
                p for cell, p in cell_probs.items() if g[cell] & set(subset)
            )
            rows.append((tuple(a), rhs))
    return SimplexPolytope.from_rows(rows)


def enumerate_response_types(k: int):
    """All (y0, y1, selection map) triples over a size-k instrument support."""
    if k > 6:
        raise OutOfRange(f"instrument support {k} exceeds the cap of 6")
    sels = list(itertools.product((0, 1), repeat=k))
    return [(y0, y1, sel) for y0, y1 in _PAIRS for sel in sels]


def response_type_lp(t: InstrumentTable, objective) -> IntervalBound:
    """Extrema of a linear functional of (p00, p01, p10, p11) over all
    response-type distributions reproducing the observed tables.

    Exhausts the 4 * 2^k response types (potential outcomes plus a full
    selection map over the instrument support) and solves two LPs.
    """
    k = len(t.points)
    types = enumerate_response_types(k)
    c = np.asarray(objective, dtype=float)
    obj = np.array([c[_PAIR_INDEX[(y0, y1)]] for y0, y1, _ in types])
    a_eq = []
    b_eq = []
    for zi, (_, q, _) in enumerate(t.points):
        cells = {(0, 0): q.q00, (0, 1): q.q01, (1, 0): q.q10, (1, 1): q.q11}
        for (y, d), prob in cells.items():
            row = np.array(
                [
                    1.0 if (sel[zi] == d and (y1 if d else y0) == y) else 0.0
                    for y0, y1, sel in types
                ]
            )
            a_eq.append(row)
            b_eq.append(prob)
    a_eq.append(np.ones(len(types)))
    b_eq.append(1.0)
    a_eq = np.array(a_eq)
    b_eq = np.array(b_eq)
    out = []
    for sign in (1.0, -1.0):
        res = linprog(sign * obj, A_eq=a_eq, b_eq=b_eq, bounds=(0, 1), method="highs")
        if res.status != 0:
            raise InfeasibleLP("no response-type distribution matches the tables")
        out.append(sign * res.fun)
    return IntervalBound(out[0], out[1], sharp=True, label="response-type LP")


def random_type_table(k: int, rng: np.random.Generator):
    """Feasible instrument table generated forward from a random type law.

    Returns (table, truth joint): by construction the table is exactly
    consistent with the generalized model, so LP oracles never reject it.
    """
    types = enumerate_response_types(k)
    weights = rng.dirichlet(np.ones(len(types)))
    cells = {}
    for zi in range(k):
        q = np.zeros(4)
        for w, (y0, y1, sel) in zip(weights, types):
            d = sel[zi]
            y = y1 if d else y0
            q[2 * y + d] += w
        cells[f"z{zi}"] = CellProbs(q00=q[0], q01=q[1], q10=q[2], q11=q[3])
    p = np.zeros(4)
    for w, (y0, y1, _) in zip(weights, types):
        p[_PAIR_INDEX[(y0, y1)]] += w
    table = InstrumentTable.from_cells(cells)
    return table, PotentialJoint(*p)


def roy_cells(p: PotentialJoint, pi: float = 0.5) -> CellProbs:
    """Exact observed cells induced by Roy selection with tie-break pi."""
    if not 0.0 <= pi <= 1.0:
        raise OutOfRange(f"tie-break probability {pi} outside [0, 1]")
    return CellProbs(
        q00=p.p00 * (1.0 - pi),
        q01=p.p00 * pi,
        q10=p.p10 + p.p11 * (1.0 - pi),
        q11=p.p01 + p.p11 * pi,
    )


@dataclass(frozen=True)
class BinaryCouplingWitness:
    """Explicit (Y0, Y1, Y, D) law hitting chosen marginal-mean targets.

    Segments of a uniform variable are mapped simultaneously to the
    potential pair and the observed cell, so Roy selection holds draw by
    draw while E(Y0) = a and E(Y1) = b.
    """

    segments: tuple[tuple[float, int, int, int, int], ...]  # (prob, y0, y1, y, d)

    def sample(self, n: int, rng: np.random.Generator):
        probs = np.array([s[0] for s in self.segments])
        idx = rng.choice(len(self.segments), size=n, p=probs / probs.sum())
        cols = np.array([s[1:] for s in self.segments])
        y0, y1, y, d = cols[idx].T
        return y0, y1, y, d


def coupling_witness_binary(g, x0, x1, a: float, b: float) -> BinaryCouplingWitness:
    """Witness for the covariate marginal bounds at target means (a, b)."""
    from .binary import marginal_bounds_with_covariates

    ey0, ey1, _ = marginal_bounds_with_covariates(g, x0, x1)
    tol = 1e-9
    if not (ey0.lo - tol <= a <= ey0.hi + tol):
        raise OutOfRange(f"a={a} outside admissible range [{ey0.lo}, {ey0.hi}]")
    if not (ey1.lo - tol <= b <= ey1.hi + tol):
        raise OutOfRange(f"b={b} outside admissible range [{ey1.lo}, {ey1.hi}]")
    q = g.cell(x0, x1)
    c = q.p_y1
    segs = [
        (q.q00, 0, 0, 0, 0),
        (q.q01, 0, 0, 0, 1),
        (c - a, 0, 1, 1, 1),       # strict benefit, chooses 1
        (c - b, 1, 0, 1, 0),       # strict loss from 1, chooses 0
        (b - q.q11, 1, 1, 1, 0),   # ties split to match the observed cells
        (a - q.q10, 1, 1, 1, 1),
    ]
    segs = [(max(p, 0.0), *rest) for p, *rest in segs]
    return BinaryCouplingWitness(segments=tuple(segs))


def _difference_stepfn(f_cand: StepFn, f_sub: StepFn) -> StepFn:
    grid = np.unique(np.concatenate([f_cand.xs, f_sub.xs]))
    vals = np.maximum.accumulate(f_cand(grid) - f_sub(grid))
    return StepFn(grid, vals, base=f_cand.base - f_sub.base)


@dataclass(frozen=True)
class ContinuousCouplingWitness:
    """Quantile coupling realizing candidate marginals (F0, F1).

    A single uniform drives sector choice and both potential outcomes;
    values in the censored region come out as -inf sentinels, which is
    consistent with the envelope case where a counterfactual outcome is
    only known to lie below the whole sample.
    """

    p_d1: float
    sub0: StepFn
    sub1: StepFn
    rest0: StepFn
    rest1: StepFn

    def sample(self, n: int, rng: np.random.Generator):
        u = rng.random(n)
        d = (u < self.p_d1).astype(int)
        y0 = np.empty(n)
        y1 = np.empty(n)
        sel = d == 1
        y1[sel] = self.sub1.inverse_many(u[sel])
        y0[sel] = self.rest0.inverse_many(u[sel])
        y0[~sel] = self.sub0.inverse_many(u[~sel] - self.p_d1)
        y1[~sel] = self.rest1.inverse_many(u[~sel] - self.p_d1)
        y = np.where(sel, y1, y0)
        return y0, y1, y, d


def coupling_witness_continuous(c: SubCdf, f0: StepFn, f1: StepFn) -> ContinuousCouplingWitness:
    """Witness coupling for candidate marginal cdfs inside the envelopes."""
    grid = c.jumps
    for d, f in ((0, f0), (1, f1)):
        lo = np.asarray(c.cdf(grid))
        hi = np.asarray(c.bar(d, grid))
        vals = np.asarray(f(grid))
        if np.any(vals < lo - 1e-9) or np.any(vals > hi + 1e-9):
            raise BoundsViolated(f"candidate marginal {d} escapes the envelopes")
        if abs(f.terminal - 1.0) > 1e-9:
            raise BoundsViolated(f"candidate marginal {d} does not reach 1")
    rest0 = _difference_stepfn(f0, c._sub[0])
    rest1 = _difference_stepfn(f1, c._sub[1])
    return ContinuousCouplingWitness(
        p_d1=c.p_d1,
        sub0=c._sub[0],
        sub1=c._sub[1],
        rest0=rest0,
        rest1=rest1,
    )


@dataclass(frozen=True)
class DiscreteJoint:
    """Discrete joint law of (Y0, Y1) on listed support points."""

    support: tuple[tuple[float, float], ...]
    probs: tuple[float, ...]

    def draw(self, n: int, rng: np.random.Generator):
        p = np.asarray(self.probs, dtype=float)
        idx = rng.choice(len(p), size=n, p=p / p.sum())
        pts = np.asarray(self.support, dtype=float)
        return pts[idx, 0], pts[idx, 1]

    def cdf(self, d: int, y: float) -> float:
        pts = np.asarray(self.support, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        return float(p[pts[:, d] <= y].sum() / p.sum())


@dataclass(frozen=True)
class GaussianCopulaJoint:
    """Bivariate Gaussian dependence with normal marginals."""

    mu0: float = 0.0
    sd0: float = 1.0
    mu1: float = 0.0
    sd1: float = 1.0
    rho: float = 0.0

    def draw(self, n: int, rng: np.random.Generator):
        z0 = rng.standard_normal(n)
        e = rng.standard_normal(n)
        z1 = self.rho * z0 + np.sqrt(1.0 - self.rho**2) * e
        return self.mu0 + self.sd0 * z0, self.mu1 + self.sd1 * z1

    def cdf(self, d: int, y: float) -> float:
        mu = self.mu1 if d else self.mu0
        sd = self.sd1 if d else self.sd0
        return float(norm.cdf((y - mu) / sd))


@dataclass(frozen=True)
class SimDesign:
    """Seeded data-generating design.

    selection_rule, when given, receives (y0, y1, z_index, noise) arrays
    and returns the sector array; the default is Roy selection with
    tie-break probability pi.
    """

    joint: object
    n: int
    seed: int
    pi: float = 0.5
    z_labels: tuple = ()
    z_weights: tuple = ()
    selection_rule: object = None
    label: str = ""


def simulate(design: SimDesign):
    """Draw a sample from the design; returns (sample, truth record)."""
    if not 0.0 <= design.pi <= 1.0:
        raise OutOfRange(f"tie-break probability {design.pi} outside [0, 1]")
    rng = make_rng(design.seed)
    y0, y1 = design.joint.draw(design.n, rng)
    if design.z_labels:
        w = np.asarray(
            design.z_weights or [1.0 / len(design.z_labels)] * len(design.z_labels),
            dtype=float,
        )
        zi = rng.choice(len(design.z_labels), size=design.n, p=w / w.sum())
        z = np.asarray(design.z_labels, dtype=object)[zi]
    else:
        zi = np.zeros(design.n, dtype=int)
        z = None
    noise = rng.random(design.n)
    if design.selection_rule is not None:
        d = np.asarray(design.selection_rule(y0, y1, zi, noise), dtype=int)
    else:
        d = np.where(y1 > y0, 1, np.where(y1 < y0, 0, (noise < design.pi).astype(int)))
    y = np.where(d == 1, y1, y0)
    sample = OutcomeSample.from_arrays(y, d, z=z)
    truth = {
        "y0": y0,
        "y1": y1,
        "d": d,
        "z_index": zi,
        "design": design,
        "seed": design.seed,
    }
    return sample, truth
