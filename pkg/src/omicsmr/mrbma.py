"""Bayesian model averaging over subsets of correlated exposures.

Each candidate model S (a subset of exposures) gets a closed-form log
marginal likelihood under independent N(0, prior_sigma^2) priors on the
included causal effects and unit residual variance on the weighted scale:

    log_ml(S) = -1/2 [ n log 2pi + logdet(I + s^2 X_S X_S')
                       + y' (I + s^2 X_S X_S')^-1 y ]

computed through the |S|-dimensional determinant/solve identities. Models
are explored exhaustively (kmin == kmax) or by shotgun stochastic search
over the add/delete/swap neighborhood, with every subset scored at most
once. Posteriors are normalized over the scored models; reports carry the
marginal inclusion probability (MIP) and model-averaged causal estimate
(MACE) per exposure.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import (
    DimensionMismatch,
    InvalidSizes,
    InvalidValue,
    MissingColumn,
    NoOverlap,
    NumericalOverflow,
    OutOfRange,
)
from .sumstats import _data_lines

KMAX_GUIDANCE = 12


@dataclass(frozen=True)
class BmaInput:
    """SNP-exposure effects, SNP-outcome effects, and outcome SEs."""

    beta_x: np.ndarray
    beta_y: np.ndarray
    se_y: np.ndarray
    snps: tuple
    exposures: tuple
    outcome: str = "outcome"

    def __post_init__(self) -> None:
        bx = np.ascontiguousarray(self.beta_x, dtype=float)
        by = np.ascontiguousarray(self.beta_y, dtype=float)
        sy = np.ascontiguousarray(self.se_y, dtype=float)
        object.__setattr__(self, "snps", tuple(self.snps))
        object.__setattr__(self, "exposures", tuple(self.exposures))
        n, k = len(self.snps), len(self.exposures)
        if bx.shape != (n, k):
            raise DimensionMismatch(
                f"beta_x has shape {bx.shape}, expected ({n}, {k})")
        if by.shape != (n,) or sy.shape != (n,):
            raise DimensionMismatch(
                f"beta_y/se_y must have length {n}, got "
                f"{by.shape[0]} and {sy.shape[0]}")
        if np.any(sy <= 0.0) or not np.all(np.isfinite(sy)):
            bad = int(np.argmin(sy))
            raise OutOfRange(
                f"se_y must be strictly positive; row {bad} "
                f"({self.snps[bad]}) has {sy[bad]!r}")
        for name, arr in (("beta_x", bx), ("beta_y", by)):
            if not np.all(np.isfinite(arr)):
                raise OutOfRange(f"{name} contains non-finite values")
        for arr in (bx, by, sy):
            arr.setflags(write=False)
        object.__setattr__(self, "beta_x", bx)
        object.__setattr__(self, "beta_y", by)
        object.__setattr__(self, "se_y", sy)

    @property
    def n_snps(self) -> int:
        return len(self.snps)

    @property
    def n_exposures(self) -> int:
        return len(self.exposures)


@dataclass(frozen=True)
class BmaParams:
    """Search-space and prior settings.

    Defaults follow the worked configuration: prior_prob 0.1, prior_sigma
    0.5, max_iter 100000, model sizes 1..12. Sizes above 12 draw a warning
    because the model space grows combinatorially beyond that.
    """

    kmin: int = 1
    kmax: int = 12
    prior_prob: float = 0.1
    prior_sigma: float = 0.5
    max_iter: int = 100_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kmin < 0:
            raise InvalidSizes(f"kmin must be >= 0, got {self.kmin}")
        if self.kmin > self.kmax:
            raise InvalidSizes(
                f"kmin ({self.kmin}) exceeds kmax ({self.kmax})")
        if not 0.0 < self.prior_prob < 1.0:
            raise OutOfRange(
                f"prior_prob must be in (0, 1), got {self.prior_prob}")
        if not self.prior_sigma > 0.0:
            raise OutOfRange(
                f"prior_sigma must be > 0, got {self.prior_sigma}")
        if self.max_iter < 1:
            raise InvalidSizes(f"max_iter must be >= 1, got {self.max_iter}")
        if self.kmax > KMAX_GUIDANCE:
            warnings.warn(
                f"kmax = {self.kmax} exceeds the recommended maximum of "
                f"{KMAX_GUIDANCE}; reduce kmax to a value at or below "
                f"{KMAX_GUIDANCE} unless the model space is known to be "
                "small", UserWarning, stacklevel=2)


def prior_expected_size(k: int, prior_prob: float) -> float:
    """Prior expected model size k * prior_prob.

    Evaluated in decimal so that round numbers come out exact (k = 30 with
    prior_prob = 0.1 gives 3.0, not 3.0000000000000004).
    """
    return float(Decimal(repr(prior_prob)) * k)


@dataclass(frozen=True)
class ModelScore:
    """One scored model; ``posterior`` is filled in by the search."""

    members: tuple
    log_ml: float
    log_prior: float
    theta: tuple
    posterior: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "theta", tuple(self.theta))
        if len(self.theta) != len(self.members):
            raise DimensionMismatch(
                f"theta has {len(self.theta)} entries for "
                f"{len(self.members)} members")
        if self.posterior is not None and not 0.0 <= self.posterior <= 1.0:
            raise OutOfRange(
                f"posterior must be in [0, 1], got {self.posterior}")

    @property
    def score(self) -> float:
        return self.log_ml + self.log_prior

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class BmaReport:
    """Search output: every scored model plus per-exposure summaries.

    ``models`` is posterior-descending over all scored models; posteriors
    are normalized over exactly those models ("normalized over n_scored
    models" in stochastic mode, exact in exhaustive mode).
    ``mip_visit_freq`` is the visit-frequency alternative to the
    cache-renormalized MIP, present only for stochastic searches.
    """

    exposures: tuple
    models: tuple
    mip: np.ndarray
    mace: np.ndarray
    mode: str
    n_scored: int
    n_score_requests: int
    mip_visit_freq: Optional[np.ndarray] = None

    @property
    def top_models(self) -> tuple:
        return self.models

    @property
    def cache_hit_rate(self) -> float:
        if self.n_score_requests == 0:
            return 0.0
        return 1.0 - self.n_scored / self.n_score_requests


def weight_input(raw: BmaInput, enabled: bool = True):
    """Divide both effect matrices by the outcome SEs, row-wise.

    Returns the weighted design (X, y); ``enabled=False`` passes the raw
    values through for pre-standardized inputs.
    """
    if not enabled:
        return np.array(raw.beta_x), np.array(raw.beta_y)
    x = raw.beta_x / raw.se_y[:, None]
    y = raw.beta_y / raw.se_y
    return x, y


class _Scorer:
    """Closed-form model scoring with the Gram matrix precomputed."""

    def __init__(self, x: np.ndarray, y: np.ndarray, params: BmaParams):
        self.n, self.k = x.shape
        self.gram = x.T @ x
        self.xty = x.T @ y
        self.yty = float(y @ y)
        self.sigma2 = params.prior_sigma**2
        self.log_p = math.log(params.prior_prob)
        self.log_1mp = math.log1p(-params.prior_prob)
        self.base = -0.5 * self.n * math.log(2.0 * math.pi)
        self.n_evaluations = 0

    def log_prior(self, size: int) -> float:
        return size * self.log_p + (self.k - size) * self.log_1mp

    def log_ml_theta(self, members: tuple):
        self.n_evaluations += 1
        s = len(members)
        if s == 0:
            return self.base - 0.5 * self.yty, ()
        idx = np.fromiter(members, dtype=np.intp, count=s)
        b = self.sigma2 * self.gram[np.ix_(idx, idx)]
        b[np.diag_indices(s)] += 1.0
        c = self.xty[idx]
        sign, logdet = np.linalg.slogdet(b)
        if sign <= 0 or not math.isfinite(logdet):
            raise NumericalOverflow(
                f"ill-conditioned model {members}: logdet sign {sign}")
        theta = self.sigma2 * np.linalg.solve(b, c)
        quad = self.yty - float(c @ theta)
        log_ml = self.base - 0.5 * (logdet + quad)
        if not math.isfinite(log_ml):
            raise NumericalOverflow(
                f"non-finite marginal likelihood for model {members}")
        return log_ml, tuple(float(t) for t in theta)


def score_model(x: np.ndarray, y: np.ndarray, members, params: BmaParams) -> ModelScore:
    """Score one model on the weighted design; posterior left unnormalized
    (None) because normalization needs the full cache."""
    scorer = _Scorer(np.asarray(x, float), np.asarray(y, float), params)
    members = tuple(sorted(int(i) for i in members))
    log_ml, theta = scorer.log_ml_theta(members)
    return ModelScore(members=members, log_ml=log_ml,
                      log_prior=scorer.log_prior(len(members)), theta=theta)


def _mask_members(mask: int, k: int) -> tuple:
    return tuple(i for i in range(k) if mask >> i & 1)


def search(x: np.ndarray, y: np.ndarray, params: BmaParams,
           exposures: Optional[Sequence[str]] = None) -> BmaReport:
    """Explore the model space and report normalized posteriors.

    kmin == kmax enumerates every model of that size (deterministic,
    seed-independent). kmin < kmax runs the shotgun stochastic chain for
    max_iter moves from a random size-kmin start, sampling each move from
    the add/delete/swap neighborhood proportionally to exp(log posterior).
    Every model is scored exactly once; posteriors, MIP and MACE are
    computed over the scored cache.
    """
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise DimensionMismatch(
            f"design shapes disagree: X {x.shape}, y {y.shape}")
    n, k = x.shape
    if params.kmax > k:
        raise InvalidSizes(
            f"kmax ({params.kmax}) exceeds the number of exposures ({k})")
    if exposures is None:
        exposures = tuple(f"x{i + 1}" for i in range(k))
    else:
        exposures = tuple(exposures)
        if len(exposures) != k:
            raise DimensionMismatch(
                f"{len(exposures)} exposure names for {k} columns")

    scorer = _Scorer(x, y, params)
    detail: dict = {}
    score_cache: dict = {}

    def score_fn(mask: int) -> float:
        members = _mask_members(mask, k)
        log_ml, theta = scorer.log_ml_theta(members)
        detail[mask] = (log_ml, theta)
        return log_ml + scorer.log_prior(len(members))

    visits: dict = {}
    hood_cache: dict = {}
    if params.kmin == params.kmax:
        mode = "exhaustive"
        for comb in itertools.combinations(range(k), params.kmin):
            mask = 0
            for i in comb:
                mask |= 1 << i
            score_cache[mask] = score_fn(mask)
        n_requests = len(score_cache)
    else:
        mode = "stochastic"
        rng = np.random.default_rng(params.seed)
        start = 0
        if params.kmin > 0:
            for i in rng.choice(k, size=params.kmin, replace=False):
                start |= 1 << int(i)
        uniforms = rng.random(params.max_iter)
        kernels.sss_chain(start, k, params.kmin, params.kmax, uniforms,
                          score_fn, score_cache, visits,
                          hood_cache=hood_cache)
        n_requests = 1 + sum(len(h[0]) for h in hood_cache.values())

    masks = sorted(score_cache)
    scores = np.array([score_cache[m] for m in masks])
    rel = np.exp(scores - scores.max())
    posterior = rel / rel.sum()

    mip = np.zeros(k)
    mace = np.zeros(k)
    models = []
    for mask, post in zip(masks, posterior):
        members = _mask_members(mask, k)
        log_ml, theta = detail[mask]
        models.append(ModelScore(
            members=members, log_ml=log_ml,
            log_prior=scorer.log_prior(len(members)),
            theta=theta, posterior=float(post)))
        for local, member in enumerate(members):
            mip[member] += post
            mace[member] += post * theta[local]
    mip = np.clip(mip, 0.0, 1.0)
    models.sort(key=lambda s: (-s.posterior, s.size, s.members))

    mip_freq = None
    if mode == "stochastic" and visits:
        total = sum(visits.values())
        mip_freq = np.zeros(k)
        for mask, count in visits.items():
            for i in _mask_members(mask, k):
                mip_freq[i] += count / total
        mip_freq = np.clip(mip_freq, 0.0, 1.0)

    return BmaReport(
        exposures=exposures,
        models=tuple(models),
        mip=mip,
        mace=mace,
        mode=mode,
        n_scored=scorer.n_evaluations,
        n_score_requests=n_requests,
        mip_visit_freq=mip_freq,
    )


def analyze(raw: BmaInput, params: BmaParams, weighted: bool = True) -> BmaReport:
    """Weight the input and run the search; the usual entry point."""
    x, y = weight_input(raw, enabled=weighted)
    return search(x, y, params, exposures=raw.exposures)


def report_best_models(report: BmaReport, top: int = 10):
    """The ``top`` highest-posterior models plus the MIP/MACE table.

    ``top`` is clamped to the number of scored models. Returns
    (models, rows) where rows are (exposure, mip, mace) triples.
    """
    if top < 1:
        raise InvalidSizes(f"top must be >= 1, got {top}")
    best = list(report.models[:min(top, len(report.models))])
    table = [
        (name, float(report.mip[i]), float(report.mace[i]))
        for i, name in enumerate(report.exposures)
    ]
    return best, table


# ---------------------------------------------------------------------------
# File loading
# ---------------------------------------------------------------------------

def _read_tsv(path):
    path = Path(path)
    lines = _data_lines(path)
    try:
        _, header = next(lines)
    except StopIteration:
        raise MissingColumn(f"{path}: file is empty") from None
    columns = header.split("\t") if "\t" in header else header.split()
    rows = []
    for row_number, (lineno, line) in enumerate(lines, start=1):
        fields = line.split("\t") if "\t" in line else line.split()
        if len(fields) != len(columns):
            raise InvalidValue(
                row_number, "row",
                f"{path}, line {lineno}: expected {len(columns)} fields, "
                f"got {len(fields)}")
        rows.append((row_number, fields))
    return columns, rows


def _parse_float(path, row_number, field, token):
    try:
        return float(token)
    except ValueError:
        raise InvalidValue(
            row_number, field, f"{path}: cannot parse {token!r}") from None


def load_bma_combined(path) -> BmaInput:
    """One-file input: columns rsid, <exposures...>, beta_y, se_y."""
    columns, rows = _read_tsv(path)
    lowered = [c.lower() for c in columns]
    if len(columns) < 4 or lowered[-2] != "beta_y" or lowered[-1] != "se_y":
        raise MissingColumn(
            f"{path}: combined input needs trailing columns beta_y, se_y")
    exposures = tuple(columns[1:-2])
    snps, bx, by, sy = [], [], [], []
    for row_number, fields in rows:
        snps.append(fields[0])
        bx.append([_parse_float(path, row_number, columns[j], fields[j])
                   for j in range(1, len(columns) - 2)])
        by.append(_parse_float(path, row_number, "beta_y", fields[-2]))
        sy.append(_parse_float(path, row_number, "se_y", fields[-1]))
    return BmaInput(
        beta_x=np.array(bx, dtype=float),
        beta_y=np.array(by, dtype=float),
        se_y=np.array(sy, dtype=float),
        snps=tuple(snps),
        exposures=exposures,
        outcome=Path(path).stem,
    )


def load_bma_files(beta_x_path, beta_y_path) -> BmaInput:
    """Two-file input: an exposure-effect table (rsid + one column per
    exposure) and an outcome table with columns rsid, beta, se.

    Rows are matched by rsid and kept in the exposure file's order; SNPs
    missing from the outcome table are dropped.
    """
    x_cols, x_rows = _read_tsv(beta_x_path)
    if len(x_cols) < 2:
        raise MissingColumn(
            f"{beta_x_path}: need an rsid column plus exposure columns")
    exposures = tuple(x_cols[1:])

    y_cols, y_rows = _read_tsv(beta_y_path)
    lowered = [c.lower() for c in y_cols]
    try:
        y_beta_idx = lowered.index("beta")
    except ValueError:
        try:
            y_beta_idx = lowered.index("beta_y")
        except ValueError:
            raise MissingColumn(
                f"{beta_y_path}: no beta/beta_y column") from None
    try:
        y_se_idx = lowered.index("se")
    except ValueError:
        try:
            y_se_idx = lowered.index("se_y")
        except ValueError:
            raise MissingColumn(f"{beta_y_path}: no se/se_y column") from None

    outcome_map = {}
    for row_number, fields in y_rows:
        outcome_map[fields[0]] = (
            _parse_float(beta_y_path, row_number, "beta", fields[y_beta_idx]),
            _parse_float(beta_y_path, row_number, "se", fields[y_se_idx]),
        )

    snps, bx, by, sy = [], [], [], []
    for row_number, fields in x_rows:
        rsid = fields[0]
        if rsid not in outcome_map:
            continue
        snps.append(rsid)
        bx.append([_parse_float(beta_x_path, row_number, x_cols[j], fields[j])
                   for j in range(1, len(x_cols))])
        beta, se = outcome_map[rsid]
        by.append(beta)
        sy.append(se)
    if not snps:
        raise NoOverlap(
            f"no shared rsids between {beta_x_path} and {beta_y_path}")
    return BmaInput(
        beta_x=np.array(bx, dtype=float),
        beta_y=np.array(by, dtype=float),
        se_y=np.array(sy, dtype=float),
        snps=tuple(snps),
        exposures=exposures,
        outcome=Path(beta_y_path).stem,
    )
