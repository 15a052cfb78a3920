"""Univariable two-sample MR estimators.

All estimators consume harmonized exposure/outcome pairs and return
:class:`MrEstimate` values whose p-value always equals the two-sided normal
tail of z = estimate / se. Dropped pairs are ignored; instrument-count
checks apply to the usable pairs only.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import kernels
from .errors import (
    DegenerateDesign,
    EmptyInstrumentSet,
    TooFewInstruments,
    ZeroExposureEffect,
)
from .sumstats import HarmonizedPair

P_CONSISTENCY_TOL = 1e-10


class Method(str, enum.Enum):
    WALD_RATIO = "wald_ratio"
    IVW = "ivw"
    EGGER_SLOPE = "egger_slope"
    EGGER_INTERCEPT = "egger_intercept"
    WEIGHTED_MEDIAN = "weighted_median"


def normal_pvalue(estimate: float, se: float) -> float:
    """Two-sided p-value for z = estimate / se under the standard normal."""
    return float(2.0 * stats.norm.sf(abs(estimate / se)))


@dataclass(frozen=True)
class MrEstimate:
    """One causal-effect estimate.

    ``pvalue`` may be omitted, in which case it is computed from the z
    statistic; a supplied value must agree with that computation to 1e-10.
    """

    method: Method
    estimate: float
    se: float
    n_snps: int
    pvalue: Optional[float] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.estimate):
            raise ValueError(f"estimate must be finite, got {self.estimate!r}")
        if not (self.se > 0.0) or not math.isfinite(self.se):
            raise ValueError(f"se must be finite and > 0, got {self.se!r}")
        if self.n_snps < 1:
            raise ValueError(f"n_snps must be >= 1, got {self.n_snps}")
        expected = normal_pvalue(self.estimate, self.se)
        if self.pvalue is None:
            object.__setattr__(self, "pvalue", expected)
        elif abs(self.pvalue - expected) > P_CONSISTENCY_TOL:
            raise ValueError(
                f"pvalue {self.pvalue!r} inconsistent with z-based value "
                f"{expected!r}")

    @property
    def zscore(self) -> float:
        return self.estimate / self.se

    def ci(self, level: float = 0.95) -> tuple:
        q = stats.norm.ppf(0.5 + level / 2.0)
        return (self.estimate - q * self.se, self.estimate + q * self.se)


@dataclass(frozen=True)
class EggerResult:
    """MR-Egger slope and intercept, plus the residual scale factor.

    ``scale`` is the multiplicative random-effects factor max(1, sigma_hat)
    already applied to both standard errors. Unpacks as
    ``slope, intercept = egger(pairs)``.
    """

    slope: MrEstimate
    intercept: MrEstimate
    scale: float

    def __iter__(self):
        return iter((self.slope, self.intercept))

    @property
    def n_snps(self) -> int:
        return self.slope.n_snps


def _usable_arrays(pairs: Sequence[HarmonizedPair], minimum: int, what: str):
    kept = [p for p in pairs if p.usable]
    if not kept:
        raise EmptyInstrumentSet(f"{what}: no usable instruments")
    if len(kept) < minimum:
        raise TooFewInstruments(
            f"{what} needs at least {minimum} instruments, got {len(kept)}")
    bx = np.array([p.beta_exposure for p in kept], dtype=float)
    sx = np.array([p.se_exposure for p in kept], dtype=float)
    by = np.array([p.beta_outcome for p in kept], dtype=float)
    sy = np.array([p.se_outcome for p in kept], dtype=float)
    return kept, bx, sx, by, sy


def wald_ratio(pair: HarmonizedPair, second_order: bool = False) -> MrEstimate:
    """Single-instrument ratio estimate beta_Y / beta_X.

    The default (first-order) standard error is |se_Y / beta_X|; the
    second-order form adds the exposure-uncertainty term
    beta_Y^2 se_X^2 / beta_X^4.
    """
    if not pair.usable:
        raise EmptyInstrumentSet(
            f"instrument {pair.rsid} was dropped during harmonization")
    bx, sx = pair.beta_exposure, pair.se_exposure
    by, sy = pair.beta_outcome, pair.se_outcome
    if bx == 0.0:
        raise ZeroExposureEffect(
            f"instrument {pair.rsid} has a zero exposure effect")
    est = by / bx
    if second_order:
        se = math.sqrt(sy**2 / bx**2 + by**2 * sx**2 / bx**4)
    else:
        se = abs(sy / bx)
    return MrEstimate(Method.WALD_RATIO, est, se, n_snps=1)


def ivw(pairs: Sequence[HarmonizedPair], random_effects: bool = False) -> MrEstimate:
    """Inverse-variance-weighted estimate.

    Fixed-effect by default; ``random_effects`` applies the multiplicative
    model, scaling the standard error by max(1, sqrt(Q / (m - 1))) where Q
    is the weighted residual sum of squares. A single instrument reproduces
    the Wald ratio exactly.
    """
    _, bx, _, by, sy = _usable_arrays(pairs, 1, "IVW")
    if len(bx) == 1:
        # one-term sums collapse to the plain ratio; evaluate it directly
        # so the equality with wald_ratio is exact, not just to rounding
        if bx[0] == 0.0:
            raise ZeroExposureEffect("IVW: the only exposure effect is zero")
        return MrEstimate(Method.IVW, float(by[0] / bx[0]),
                          abs(float(sy[0] / bx[0])), n_snps=1)
    w = bx**2 / sy**2
    denom = float(np.sum(w))
    if denom <= 0.0:
        raise ZeroExposureEffect("IVW: all exposure effects are zero")
    est = float(np.sum(bx * by / sy**2)) / denom
    se = 1.0 / math.sqrt(denom)
    if random_effects:
        q = float(np.sum(((by - est * bx) / sy) ** 2))
        se *= max(1.0, math.sqrt(q / (len(bx) - 1)))
    return MrEstimate(Method.IVW, est, se, n_snps=len(bx))


def egger(pairs: Sequence[HarmonizedPair]) -> EggerResult:
    """MR-Egger regression: weighted regression of outcome on exposure
    effects with a free intercept.

    Exposure effects are oriented non-negative first (flipping the outcome
    alongside); weights are 1 / se_Y^2 and standard errors carry the
    multiplicative random-effects factor max(1, sigma_hat).
    """
    _, bx, _, by, sy = _usable_arrays(pairs, 3, "MR-Egger")
    flip = np.where(bx < 0.0, -1.0, 1.0)
    bx = bx * flip
    by = by * flip

    w = 1.0 / sy**2
    m = len(bx)
    sw = float(np.sum(w))
    swx = float(np.sum(w * bx))
    swxx = float(np.sum(w * bx * bx))
    det = sw * swxx - swx * swx
    scale_ref = sw * max(float(np.max(bx * bx)), 1e-300)
    if det <= 1e-12 * scale_ref:
        raise DegenerateDesign(
            "MR-Egger: exposure effects show no variation after orientation")
    swy = float(np.sum(w * by))
    swxy = float(np.sum(w * bx * by))
    intercept = (swxx * swy - swx * swxy) / det
    slope = (sw * swxy - swx * swy) / det

    resid = by - intercept - slope * bx
    rss = float(np.sum(w * resid**2))
    sigma2 = max(1.0, rss / (m - 2))
    se_slope = math.sqrt(sigma2 * sw / det)
    se_intercept = math.sqrt(sigma2 * swxx / det)

    return EggerResult(
        slope=MrEstimate(Method.EGGER_SLOPE, slope, se_slope, n_snps=m),
        intercept=MrEstimate(Method.EGGER_INTERCEPT, intercept, se_intercept,
                             n_snps=m),
        scale=math.sqrt(sigma2),
    )


def weighted_median(pairs: Sequence[HarmonizedPair], n_boot: int = 1000,
                    seed: int = 0) -> MrEstimate:
    """Weighted-median estimate with a parametric-bootstrap standard error.

    Per-SNP ratios theta_j = beta_Yj / beta_Xj carry weights
    beta_Xj^2 / se_Yj^2; the estimate interpolates the weight-percentile
    curve at 0.5. The bootstrap redraws beta_X and beta_Y from their normal
    sampling distributions while keeping the weights fixed, and the standard
    error is the sample standard deviation of the bootstrap medians.
    """
    _, bx, sx, by, sy = _usable_arrays(pairs, 3, "weighted median")
    if np.any(bx == 0.0):
        zero = [p.rsid for p in pairs if p.usable and p.beta_exposure == 0.0]
        raise ZeroExposureEffect(
            f"weighted median: zero exposure effect for {', '.join(zero)}")
    theta = by / bx
    w = bx**2 / sy**2

    order = np.argsort(theta, kind="stable")
    est = float(kernels.weighted_median_sorted(
        np.ascontiguousarray(theta[order]), np.ascontiguousarray(w[order])))

    rng = np.random.default_rng(seed)
    m = len(bx)
    bx_draw = bx + sx * rng.standard_normal((n_boot, m))
    by_draw = by + sy * rng.standard_normal((n_boot, m))
    theta_draw = np.ascontiguousarray(by_draw / bx_draw)
    medians = kernels.wm_bootstrap(theta_draw, np.ascontiguousarray(w))
    se = float(np.std(medians, ddof=1))
    if not se > 0.0:
        raise DegenerateDesign(
            "weighted median: bootstrap produced a zero standard error")
    return MrEstimate(Method.WEIGHTED_MEDIAN, est, se, n_snps=m)


def mr_all(pairs: Sequence[HarmonizedPair], n_boot: int = 1000,
           seed: int = 0) -> list:
    """Every estimator applicable to the number of usable instruments.

    One instrument gives the Wald ratio; two or more add IVW; three or more
    add MR-Egger (slope and intercept rows) and the weighted median.
    """
    kept = [p for p in pairs if p.usable]
    if not kept:
        raise EmptyInstrumentSet("no usable instruments after harmonization")
    results = []
    if len(kept) == 1:
        results.append(wald_ratio(kept[0]))
        return results
    results.append(ivw(kept))
    if len(kept) >= 3:
        eg = egger(kept)
        results.extend([eg.slope, eg.intercept])
        results.append(weighted_median(kept, n_boot=n_boot, seed=seed))
    return results
