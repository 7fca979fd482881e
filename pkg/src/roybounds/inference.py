"""Estimation and intersection-bounds inference for the instrument case.

The identified bounds are intersections over the instrument support of
estimable cell combinations.  A single bootstrap critical value k for
the studentized max deviation inflates every infimum and deflates every
supremum before the closed forms are re-applied, so the resulting
intervals cover the identified set at the stated level.  ATT and
interquantile-range inference bootstrap the plug-in estimators directly.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyInstrumentCell,
    InputError,
    QuantileOutOfRange,
    ZeroSectorProbability,
)
from .functional import OutcomeSample
from .oracle import make_rng
from .probability import IntervalBound

_SE_FLOOR = 1e-6
_CHUNK = 128

# Stream tags keep the independent bootstrap passes on disjoint
# counter-based RNG streams for a single user seed.
_STREAM_K = 1
_STREAM_ATT = 2
_STREAM_IQR = 3


def _n_threads() -> int:
    try:
        return max(1, int(os.environ.get("ROY_THREADS", "1")))
    except ValueError:
        return 1


def _bootstrap_counts(probs: np.ndarray, n: int, b: int, seed: int, *tag) -> np.ndarray:
    """(b, len(probs)) multinomial count draws, chunked on fixed RNG streams.

    Chunk boundaries and per-chunk streams do not depend on the thread
    count, so output is identical for any ROY_THREADS.
    """
    chunks = [(i, min(_CHUNK, b - i * _CHUNK)) for i in range((b + _CHUNK - 1) // _CHUNK)]

    def draw(chunk):
        i, size = chunk
        rng = make_rng(seed, *tag, i)
        return rng.multinomial(n, probs, size=size)

    workers = _n_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(draw, chunks))
    else:
        parts = [draw(c) for c in chunks]
    return np.concatenate(parts, axis=0)


@dataclass(frozen=True)
class ThetaVector:
    """Per-z estimates and standard errors of the eight cell combinations.

    Columns: P(Y=1|z), P(Y=0|z), q10+q01, q00+q11, q10, q00, q11, q01.
    """

    labels: tuple
    est: np.ndarray        # (K, 8)
    se: np.ndarray         # (K, 8)
    cell_counts: np.ndarray  # (K, 4) weighted counts in q00,q01,q10,q11 order
    n: int

    @property
    def k_support(self) -> int:
        return len(self.labels)

    def z_weights(self) -> np.ndarray:
        totals = self.cell_counts.sum(axis=1)
        return totals / totals.sum()


_COMBO = np.array(
    [
        [0, 0, 1, 1],   # P(Y=1|z)
        [1, 1, 0, 0],   # P(Y=0|z)
        [0, 1, 1, 0],   # q10 + q01
        [1, 0, 0, 1],   # q00 + q11
        [0, 0, 1, 0],   # q10
        [1, 0, 0, 0],   # q00
        [0, 0, 0, 1],   # q11
        [0, 1, 0, 0],   # q01
    ],
    dtype=float,
)


def _theta_from_cells(cells: np.ndarray) -> np.ndarray:
    """Map per-z cell probabilities (…, 4) to the eight combinations."""
    return cells @ _COMBO.T


def estimate_theta(data: OutcomeSample) -> ThetaVector:
    """Weighted cell proportions per instrument point with multinomial SEs."""
    if data.z is None:
        raise InputError("instrument column required for inference")
    if not np.all((data.y == 0) | (data.y == 1)):
        raise InputError("binary-outcome inference requires y in {0, 1}")
    labels = sorted(set(data.z.tolist()), key=str)
    est = np.zeros((len(labels), 8))
    se = np.zeros((len(labels), 8))
    counts = np.zeros((len(labels), 4))
    n_total = data.n
    for i, z in enumerate(labels):
        mask = data.z == z
        if not mask.any():
            raise EmptyInstrumentCell(f"no observations at z={z!r}")
        w = data.w[mask]
        y = data.y[mask].astype(int)
        d = data.d[mask]
        cell = 2 * y + d  # 0:q00 1:q01 2:q10 3:q11
        for c in range(4):
            counts[i, c] = w[cell == c].sum()
        probs = counts[i] / counts[i].sum()
        theta = _theta_from_cells(probs)
        n_eff = w.sum() ** 2 / (w**2).sum()
        est[i] = theta
        se[i] = np.maximum(np.sqrt(theta * (1.0 - theta) / n_eff), _SE_FLOOR)
    # Rescale weighted counts so they sum to the raw sample size.
    counts *= n_total / counts.sum()
    return ThetaVector(labels=tuple(labels), est=est, se=se, cell_counts=counts, n=n_total)


@dataclass(frozen=True)
class CriticalValue:
    k: float
    level: float
    b: int
    seed: int
    method: str = "studentized max-statistic bootstrap"


def _bootstrap_cells(theta: ThetaVector, b: int, seed: int, tag: int) -> np.ndarray:
    """(b, K, 4) bootstrap cell probabilities, resampling z jointly."""
    k = theta.k_support
    probs = (theta.cell_counts / theta.cell_counts.sum()).ravel()
    n = theta.n
    counts = _bootstrap_counts(probs, n, b, seed, tag).reshape(b, k, 4)
    totals = counts.sum(axis=2, keepdims=True)
    safe = np.maximum(totals, 1)
    cells = counts / safe
    # An empty bootstrap z-cell contributes the point estimate (no signal).
    point = theta.cell_counts / theta.cell_counts.sum(axis=1, keepdims=True)
    cells = np.where(totals == 0, point[None, :, :], cells)
    return cells


def critical_value(
    data: OutcomeSample, level: float = 0.95, b: int = 999, seed: int = 0
) -> CriticalValue:
    """Level-quantile of the bootstrap max studentized theta deviation."""
    if b < 100:
        raise InputError("need at least 100 bootstrap replications")
    theta = estimate_theta(data)
    cells = _bootstrap_cells(theta, b, seed, _STREAM_K)
    theta_star = _theta_from_cells(cells)          # (b, K, 8)
    dev = np.abs(theta_star - theta.est[None]) / theta.se[None]
    stat = dev.reshape(b, -1).max(axis=1)
    k = float(np.quantile(np.sort(stat), level, method="higher"))
    return CriticalValue(k=k, level=level, b=b, seed=seed)


@dataclass(frozen=True)
class CiReport:
    """Confidence intervals for the generalized-model bounds."""

    ey0: IntervalBound
    ey1: IntervalBound
    ate: IntervalBound
    benefit_strict: IntervalBound
    mobility: IntervalBound
    att1: IntervalBound | None
    att0: IntervalBound | None
    iqr: IntervalBound | None
    level: float
    b: int
    seed: int

    def to_dict(self) -> dict:
        out = {
            "ey0": self.ey0.to_dict(),
            "ey1": self.ey1.to_dict(),
            "ate": self.ate.to_dict(),
            "benefit_strict": self.benefit_strict.to_dict(),
            "mobility": self.mobility.to_dict(),
            "level": self.level,
            "bootstrap": self.b,
            "seed": self.seed,
        }
        for name in ("att1", "att0", "iqr"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val.to_dict()
        return out


def _q_bars(theta: ThetaVector, k: float):
    lo_env = (theta.est + k * theta.se).min(axis=0)   # inflated infima, i = 1..4
    hi_env = (theta.est - k * theta.se).max(axis=0)   # deflated suprema, i = 5..8
    q_lo = lo_env[:4]
    q_hi = hi_env[4:]
    return q_lo, q_hi


def assemble_cis(
    theta: ThetaVector, k: float, level: float = 0.95, b: int = 0, seed: int = 0
) -> CiReport:
    """Closed-form bounds re-applied to the k-inflated envelopes."""
    (q1, q0, q1001, q0011) = _q_bars(theta, k)[0]
    (s10, s00, s11, s01) = _q_bars(theta, k)[1]
    ey0 = IntervalBound(
        max(s10, 1.0 - q0 - q0011), min(1.0 - s00, q1 + q1001), label="EY0 CI"
    ).clamp()
    ey1 = IntervalBound(
        max(s11, 1.0 - q0 - q1001), min(1.0 - s01, q1 + q0011), label="EY1 CI"
    ).clamp()
    ate = IntervalBound(ey1.lo - ey0.hi, ey1.hi - ey0.lo, label="ATE CI").clamp(-1.0, 1.0)
    benefit = IntervalBound(
        max(0.0, 1.0 - q1 - q1001 - q0, s00 - q0, s11 - q1),
        q0011,
        label="P(Y1>Y0) CI",
    ).clamp()
    denom_lo = 1.0 - ey0.lo
    denom_hi = 1.0 - ey0.hi
    mob_lo = benefit.lo / denom_lo if denom_lo > 1e-9 else 1.0
    mob_hi = q0011 / denom_hi if denom_hi > 1e-9 else 1.0
    mobility = IntervalBound(mob_lo, mob_hi, label="P(Y1=1|Y0=0) CI").clamp()
    att1, att0 = _att_plugin(theta, ey0, ey1)
    return CiReport(
        ey0=ey0,
        ey1=ey1,
        ate=ate,
        benefit_strict=benefit,
        mobility=mobility,
        att1=att1,
        att0=att0,
        iqr=None,
        level=level,
        b=b,
        seed=seed,
    )


def _att_plugin(theta: ThetaVector, ey0: IntervalBound, ey1: IntervalBound):
    w = theta.z_weights()
    p_y1 = theta.est[:, 0]
    p_d1 = theta.cell_counts[:, [1, 3]].sum(axis=1) / theta.cell_counts.sum(axis=1)
    p_d0 = 1.0 - p_d1
    if np.any(p_d1 <= 1e-12) or np.any(p_d0 <= 1e-12):
        return None, None
    att1 = IntervalBound(
        float((w * (p_y1 - ey0.hi) / p_d1).sum()),
        float((w * (p_y1 - ey0.lo) / p_d1).sum()),
        label="E(Y1-Y0|D=1) CI",
    ).clamp(-1.0, 1.0)
    att0 = IntervalBound(
        float((w * ((1.0 - p_y1) - (1.0 - ey1.lo)) / p_d0).sum()),
        float((w * ((1.0 - p_y1) - (1.0 - ey1.hi)) / p_d0).sum()),
        label="E(Y0-Y1|D=0) CI",
    ).clamp(-1.0, 1.0)
    return att1, att0


def infer_bounds(
    data: OutcomeSample, level: float = 0.95, b: int = 999, seed: int = 0
) -> CiReport:
    """One-call pipeline: theta, critical value, assembled intervals."""
    theta = estimate_theta(data)
    cv = critical_value(data, level=level, b=b, seed=seed)
    return assemble_cis(theta, cv.k, level=level, b=b, seed=seed)


def att_ci(
    data: OutcomeSample, level: float = 0.95, b: int = 999, seed: int = 0, which: int = 1
) -> IntervalBound:
    """Bootstrap outer envelope of the sector-gain plug-in estimators.

    The counterfactual-mean confidence endpoints (with the critical value
    held fixed) are plugged into the ratio at every bootstrap table; the
    interval spans the outer quantiles of the resulting lower and upper
    plug-in draws.
    """
    theta = estimate_theta(data)
    cv = critical_value(data, level=level, b=b, seed=seed)
    cells = _bootstrap_cells(theta, b, seed, _STREAM_ATT)  # (b, K, 4)
    theta_star = _theta_from_cells(cells)
    lo_env = (theta_star + cv.k * theta.se[None]).min(axis=1)
    hi_env = (theta_star - cv.k * theta.se[None]).max(axis=1)
    q1, q0 = lo_env[:, 0], lo_env[:, 1]
    q1001, q0011 = lo_env[:, 2], lo_env[:, 3]
    s10, s00, s11, s01 = hi_env[:, 4], hi_env[:, 5], hi_env[:, 6], hi_env[:, 7]
    if which == 1:
        cf_lo = np.clip(np.maximum(s10, 1.0 - q0 - q0011), 0.0, 1.0)
        cf_hi = np.clip(np.minimum(1.0 - s00, q1 + q1001), 0.0, 1.0)
    else:
        cf_lo = np.clip(np.maximum(s11, 1.0 - q0 - q1001), 0.0, 1.0)
        cf_hi = np.clip(np.minimum(1.0 - s01, q1 + q0011), 0.0, 1.0)
    p_y = theta_star[:, :, 0] if which == 1 else theta_star[:, :, 1]
    d_col = [1, 3] if which == 1 else [0, 2]
    p_d = cells[:, :, d_col].sum(axis=2)
    if np.any(theta.cell_counts[:, d_col].sum(axis=1) <= 0):
        raise ZeroSectorProbability(f"no observations with D={which} at some z")
    p_d = np.maximum(p_d, 1.0 / theta.n)
    w = cells.sum(axis=2)
    w = w / w.sum(axis=1, keepdims=True)
    if which == 1:
        low_star = (w * (p_y - cf_hi[:, None]) / p_d).sum(axis=1)
        high_star = (w * (p_y - cf_lo[:, None]) / p_d).sum(axis=1)
    else:
        low_star = (w * (p_y - (1.0 - cf_lo)[:, None]) / p_d).sum(axis=1)
        high_star = (w * (p_y - (1.0 - cf_hi)[:, None]) / p_d).sum(axis=1)
    alpha = 1.0 - level
    lo = float(np.quantile(np.sort(low_star), alpha / 2, method="lower"))
    hi = float(np.quantile(np.sort(high_star), 1.0 - alpha / 2, method="higher"))
    label = "E(Y1-Y0|D=1) CI" if which == 1 else "E(Y0-Y1|D=0) CI"
    return IntervalBound(lo, hi, sharp=False, label=label).clamp(-1.0, 1.0)


def _row_inverse(vals: np.ndarray, targets, xs: np.ndarray, hi_sentinel=np.inf):
    """Per-row weak generalized inverse of nondecreasing rows of vals.

    targets may be a scalar or one value per row; returns xs at the first
    index where the row reaches the target, +inf when it never does and
    -inf for nonpositive targets.
    """
    t = np.broadcast_to(np.asarray(targets, dtype=float)[..., None], vals.shape)
    idx = (vals < t[..., 0][..., None] - 1e-12).sum(axis=1)
    out = np.where(idx < len(xs), xs[np.minimum(idx, len(xs) - 1)], hi_sentinel)
    out = np.where(np.asarray(targets, dtype=float) <= 1e-12, -np.inf, out)
    return out


def iqr_ci(
    data: OutcomeSample,
    d: int,
    q1: float,
    q2: float,
    level: float = 0.95,
    b: int = 999,
    seed: int = 0,
    lln_scale: float = 1.0,
    grid_cap: int = 512,
) -> IntervalBound:
    """Confidence interval for the sector-d interquantile-range bounds.

    Lower endpoint: bootstrap lower confidence limit of the closed-form
    lower bound, floored at zero.  Upper endpoint: the step-function
    upper-bound objective maximized over a jump-point grid widened by a
    sqrt(lnln n / n) margin, inflated by a critical value taken from the
    bootstrap law of the studentized objective.
    """
    if not (0.0 < q1 < q2 < 1.0):
        raise QuantileOutOfRange(f"need 0 < q1 < q2 < 1, got ({q1}, {q2})")
    n = data.n
    ys = data.y
    order = np.argsort(ys, kind="stable")
    ys_s = ys[order]
    ds_s = data.d[order]
    ws_s = data.w[order]
    xs, inv = np.unique(ys_s, return_inverse=True)
    m = len(xs)
    w_d = np.bincount(inv, weights=ws_s * (ds_s == d), minlength=m)
    w_o = np.bincount(inv, weights=ws_s * (ds_s != d), minlength=m)
    point_probs = np.concatenate([w_d, w_o])
    counts = _bootstrap_counts(point_probs / point_probs.sum(), n, b, seed, _STREAM_IQR)
    wd_star = counts[:, :m] / n
    wo_star = counts[:, m:] / n
    c_d = np.cumsum(wd_star, axis=1)
    c_o = np.cumsum(wo_star, axis=1)
    f_star = c_d + c_o
    p_other = c_o[:, -1]

    # Point-estimate versions on the same grid.
    cd0 = np.cumsum(w_d)[None, :]
    co0 = np.cumsum(w_o)[None, :]
    f0 = cd0 + co0
    p_other0 = float(co0[0, -1])

    # Lower endpoint.
    t_star = _row_inverse(c_d, q2 - p_other, xs) - _row_inverse(f_star, q1, xs)
    t_star = np.where(np.isnan(t_star), -np.inf, t_star)
    alpha = 1.0 - level
    finite = np.isfinite(t_star)
    if finite.any():
        t_sorted = np.sort(np.where(finite, t_star, np.min(t_star[finite])))
        lower = max(0.0, float(np.quantile(t_sorted, alpha / 2, method="lower")))
    else:
        lower = 0.0

    # Upper endpoint: grid of jump points in the widened admissible range.
    inv_bar_q1 = float(_row_inverse(cd0, q1 - p_other0, xs)[0])
    inv_f_q1 = float(_row_inverse(f0, q1, xs)[0])
    if inv_bar_q1 == -np.inf:
        return IntervalBound(lower, np.inf, sharp=False, label=f"IQR_{d} CI")
    spread = float(np.std(ys)) if n > 1 else 1.0
    lln = lln_scale * np.sqrt(np.log(np.log(max(n, 3))) / n) * spread
    g_lo, g_hi = inv_bar_q1 - lln, inv_f_q1 + lln
    grid = xs[(xs >= g_lo) & (xs <= g_hi)]
    grid = np.concatenate([[g_lo], grid, [g_hi]])
    if len(grid) > grid_cap:
        grid = np.quantile(grid, np.linspace(0, 1, grid_cap), method="nearest")
    grid = np.unique(grid)

    def objective(cd, f, xv):
        """Rows: bootstrap draws; columns: grid points."""
        pos = np.searchsorted(xs, xv, side="right") - 1
        fd_at = np.where(pos[None, :] >= 0, cd[:, np.maximum(pos, 0)], 0.0)
        inv_f2 = _row_inverse(f, q2, xs)
        left = inv_f2[:, None] - xv[None, :]
        tt = q2 - q1 + fd_at
        right = np.empty_like(fd_at)
        for j in range(len(xv)):
            right[:, j] = _row_inverse(cd, tt[:, j], xs) - xv[j]
        return np.minimum(left, right)

    obj0 = objective(cd0, f0, grid)[0]
    obj_star = objective(c_d, f_star, grid)
    finite_cols = np.isfinite(obj0) & np.all(np.isfinite(obj_star), axis=0)
    if not finite_cols.any():
        return IntervalBound(lower, np.inf, sharp=False, label=f"IQR_{d} CI")
    g0 = obj0[finite_cols]
    gs = obj_star[:, finite_cols]
    sd = np.maximum(gs.std(axis=0, ddof=1), 1e-9 * max(spread, 1e-12))
    stud = (gs - g0[None, :]) / sd[None, :]
    c_alpha = float(np.quantile(np.sort(stud.max(axis=1)), level, method="higher"))
    upper = float(np.max(g0 + c_alpha * sd))
    return IntervalBound(lower, max(lower, upper), sharp=False, label=f"IQR_{d} CI")
