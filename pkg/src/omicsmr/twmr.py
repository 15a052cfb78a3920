"""Multivariable transcriptome-wide MR.

Jointly estimates the causal effects of k gene expressions on an outcome
from an n x k eQTL effect matrix E, the GWAS effect vector gamma, and the
instrument LD matrix C, by generalized least squares:

    alpha_hat = (E' C^-1 E)^-1 E' C^-1 gamma

Standard errors come from a first-order delta method that propagates the
sampling noise of both gamma (covariance C / n_gwas) and every column of E
(covariance C / n_qtl), assuming standardized effect sizes. The instrument
and gene selection routine walks outward from a seed gene, pulling in
co-regulated genes and their private eQTLs before a final clumping pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import (
    DimensionMismatch,
    InvalidSizes,
    NoSignificantEqtls,
    SingularDesign,
    UnknownProtein,
)
from .ld import ClumpParams, LdMatrix, clump, parse_ld_file
from .sumstats import AssocTable, EffectMatrix, parse_matrix_file

#: Regularization added to C when its smallest eigenvalue drops below
#: EIG_FLOOR; finite reference panels routinely produce near-singular LD.
RIDGE_LAMBDA = 1e-6
EIG_FLOOR = 1e-8
#: Condition-number ceiling for E' C^-1 E beyond which the design is
#: declared unidentifiable (one exposure a linear combination of others).
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class TwmrInput:
    """Everything the estimator needs: effects, LD, and both sample sizes."""

    effects: EffectMatrix
    ld: LdMatrix
    n_gwas: float
    n_qtl: float

    def __post_init__(self) -> None:
        if not self.n_gwas > 0:
            raise InvalidSizes(f"n_gwas must be > 0, got {self.n_gwas}")
        if not self.n_qtl > 0:
            raise InvalidSizes(f"n_qtl must be > 0, got {self.n_qtl}")
        if self.ld.n != self.effects.n_snps:
            raise DimensionMismatch(
                f"effect matrix has {self.effects.n_snps} SNPs but the LD "
                f"matrix has {self.ld.n} rows")
        if self.ld.snps is not None and tuple(self.ld.snps) != self.effects.snps:
            raise DimensionMismatch(
                "SNP order differs between the effect matrix and LD matrix")


@dataclass(frozen=True)
class TwmrResult:
    """One gene's causal-effect row, mirroring the `.alpha` columns."""

    gene: str
    alpha: float
    se: float
    p: float
    nsnps: int
    ngene: int


@dataclass(frozen=True)
class TwmrFit:
    """Full estimation output: per-gene rows plus the joint covariance."""

    results: tuple
    alpha: np.ndarray
    cov: np.ndarray
    lambda_used: float
    condition: float


def _regularize(c: np.ndarray) -> tuple:
    lam = 0.0
    eigmin = float(np.linalg.eigvalsh(c)[0])
    if eigmin < EIG_FLOOR:
        lam = RIDGE_LAMBDA
        c = c + lam * np.eye(c.shape[0])
    return c, lam


def _gls(e: np.ndarray, c: np.ndarray, gamma: np.ndarray):
    """Solve the GLS normal equations; returns intermediates reused by the
    delta method. C must already be regularized."""
    ce = np.linalg.solve(c, e)            # C^-1 E
    cg = np.linalg.solve(c, gamma)        # C^-1 gamma
    a = e.T @ ce                          # E' C^-1 E
    condition = float(np.linalg.cond(a))
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise SingularDesign(
            f"E' C^-1 E has condition number {condition:.3e} "
            f"(limit {CONDITION_LIMIT:.0e}); one exposure's genetic "
            "associations are a linear combination of the others")
    b = e.T @ cg
    alpha = np.linalg.solve(a, b)
    return alpha, a, ce, cg, condition


def delta_jacobians(e: np.ndarray, c: np.ndarray, gamma: np.ndarray):
    """Analytic first-order Jacobians of alpha_hat at the GLS solution.

    Returns (H, J) where H = d alpha / d gamma (k x n) and J[m] =
    d alpha / d E[:, m] (k x n each). C must be the regularized matrix.
    """
    alpha, a, ce, cg, _ = _gls(e, c, gamma)
    k = e.shape[1]
    a_inv = np.linalg.inv(a)
    h = a_inv @ ce.T                      # (E'C^-1E)^-1 E'C^-1
    resid = cg - ce @ alpha               # C^-1 (gamma - E alpha)
    j = np.empty((k, k, e.shape[0]))
    for m in range(k):
        j[m] = np.outer(a_inv[:, m], resid) - alpha[m] * h
    return h, j


def twmr_fit(inp: TwmrInput) -> TwmrFit:
    """GLS point estimates with delta-method covariance.

    Cov(alpha_hat) = H (C/n_gwas) H' + sum_m J_m (C/n_qtl) J_m', treating
    gamma and each E column as independently sampled with LD-structured
    noise. Requires k <= n instruments.
    """
    e = inp.effects.beta
    gamma = inp.effects.outcome_beta
    n, k = e.shape
    if k > n:
        raise SingularDesign(
            f"{k} exposures cannot be identified from {n} instruments")
    c, lam = _regularize(np.asarray(inp.ld.r, dtype=float))

    alpha, a, ce, cg, condition = _gls(e, c, gamma)
    a_inv = np.linalg.inv(a)
    h = a_inv @ ce.T
    resid = cg - ce @ alpha

    c_gwas = c / float(inp.n_gwas)
    c_qtl = c / float(inp.n_qtl)
    cov = h @ c_gwas @ h.T
    for m in range(k):
        jm = np.outer(a_inv[:, m], resid) - alpha[m] * h
        cov = cov + jm @ c_qtl @ jm.T
    cov = (cov + cov.T) / 2.0

    diag = np.diag(cov)
    if np.any(diag <= 0.0):
        bad = inp.effects.traits[int(np.argmin(diag))]
        raise SingularDesign(
            f"nonpositive variance estimate for gene {bad}")
    se = np.sqrt(diag)
    pvals = 2.0 * stats.norm.sf(np.abs(alpha / se))

    results = tuple(
        TwmrResult(
            gene=inp.effects.traits[m],
            alpha=float(alpha[m]),
            se=float(se[m]),
            p=float(pvals[m]),
            nsnps=n,
            ngene=k,
        )
        for m in range(k)
    )
    return TwmrFit(results=results, alpha=alpha, cov=cov,
                   lambda_used=lam, condition=condition)


def twmr_estimate(inp: TwmrInput) -> list:
    """Per-gene causal-effect estimates; see :func:`twmr_fit` for details."""
    return list(twmr_fit(inp).results)


ALPHA_HEADER = ("gene", "alpha", "SE", "P", "Nsnps", "Ngene")


def write_alpha_file(results: Sequence[TwmrResult], path,
                     float_format: str = "%.10g",
                     metadata: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in metadata:
            fh.write(f"# {line}\n")
        fh.write("\t".join(ALPHA_HEADER) + "\n")
        for row in results:
            fh.write("\t".join([
                row.gene,
                float_format % row.alpha,
                float_format % row.se,
                float_format % row.p,
                str(row.nsnps),
                str(row.ngene),
            ]) + "\n")


def twmr_run_files(stem, n_gwas: float, n_qtl: float,
                   out: Optional[str] = None, ld_is_r2: bool = False,
                   metadata: Sequence[str] = ()) -> Path:
    """Stem-based batch entry point: reads ``stem.matrix`` and ``stem.ld``,
    writes ``stem.alpha``.

    ``ld_is_r2`` declares that the `.ld` file stores squared correlations;
    they are square-rooted (signs are unavailable in that encoding). All
    validation happens before the output file is opened, so a failing run
    leaves no partial `.alpha`.
    """
    stem = Path(stem)
    matrix_path = stem.parent / (stem.name + ".matrix")
    ld_path = stem.parent / (stem.name + ".ld")
    matrix = parse_matrix_file(matrix_path)
    try:
        ld = parse_ld_file(ld_path, snps=matrix.snps)
    except DimensionMismatch as exc:
        raise DimensionMismatch(
            f"{matrix_path} and {ld_path} disagree: {exc}") from None
    if ld_is_r2:
        ld = LdMatrix(np.sqrt(np.clip(ld.r, 0.0, 1.0)), ld.snps)

    fit = twmr_fit(TwmrInput(matrix, ld, n_gwas, n_qtl))
    out_path = (Path(out) if out is not None
                else stem.parent / (stem.name + ".alpha"))
    meta = list(metadata)
    if fit.lambda_used:
        meta.append(f"ld_regularization_lambda={fit.lambda_used!r}")
    write_alpha_file(fit.results, out_path, metadata=meta)
    return out_path


# ---------------------------------------------------------------------------
# Instrument and gene selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwmrSelection:
    """Outcome of the five-step selection walk around a seed gene.

    ``gene_steps`` and ``snp_steps`` record which step admitted each item
    (genes: 1 for the seed, 3 for co-regulated; SNPs: 2 for the seed gene's
    independent eQTLs, 4 for private eQTLs of co-regulated genes). ``snps``
    holds the final post-clumping instruments in discovery order.
    """

    seed_gene: str
    genes: tuple
    snps: tuple
    gene_steps: Mapping[str, int] = field(default_factory=dict)
    snp_steps: Mapping[str, int] = field(default_factory=dict)
    clumps: tuple = field(default_factory=tuple)


def _significant_rsids(table: AssocTable, p_threshold: float) -> set:
    return {rec.rsid for rec in table if rec.pvalue <= p_threshold}


def select_instruments_twmr(
    seed_gene: str,
    eqtl: Mapping[str, AssocTable],
    ld: LdMatrix,
    params: Optional[ClumpParams] = None,
    eqtl_p: Optional[float] = None,
    strict_step4: bool = True,
) -> TwmrSelection:
    """Select the instrument SNPs and gene set for one TWMR locus.

    Starting from ``seed_gene``: clump its significant eQTLs to independent
    index SNPs; add every gene those SNPs are eQTLs for; add every SNP that
    is an eQTL only for genes in that set (``strict_step4=False`` relaxes
    this to any SNP hitting at least one retained gene); clump the combined
    set, scoring each SNP by its smallest p-value across retained genes.

    ``eqtl_p`` is the significance threshold defining "is an eQTL"
    elsewhere than clumping; it defaults to ``params.clump_p1``.
    """
    if params is None:
        params = ClumpParams()
    if eqtl_p is None:
        eqtl_p = params.clump_p1
    if seed_gene not in eqtl:
        raise UnknownProtein(f"gene {seed_gene!r} not present in the eQTL map")

    seed_clumps = clump(eqtl[seed_gene], ld, params)
    if not seed_clumps:
        raise NoSignificantEqtls(
            f"gene {seed_gene!r} has no significant independent eQTLs at "
            f"p <= {params.clump_p1:g}")
    step2_snps = [c.index.rsid for c in seed_clumps]

    gene_steps = {seed_gene: 1}
    sig_cache = {g: _significant_rsids(t, eqtl_p) for g, t in eqtl.items()}
    for gene in sorted(eqtl):
        if gene in gene_steps:
            continue
        if any(s in sig_cache[gene] for s in step2_snps):
            gene_steps[gene] = 3
    genes = tuple(sorted(gene_steps, key=lambda g: (gene_steps[g], g)))

    retained = set(genes)
    snp_steps = {s: 2 for s in step2_snps}
    candidate_rsids = set()
    for gene in genes:
        candidate_rsids |= sig_cache[gene]
    for rsid in sorted(candidate_rsids):
        if rsid in snp_steps:
            continue
        hit_genes = {g for g in eqtl if rsid in sig_cache[g]}
        if not hit_genes:
            continue
        if strict_step4 and not hit_genes <= retained:
            continue
        if not strict_step4 and not (hit_genes & retained):
            continue
        snp_steps[rsid] = 4

    # Step 5 clumps the union; each SNP is scored by its best (smallest)
    # p-value over the retained genes, taking that gene's record
    best: dict = {}
    for gene in genes:
        for rec in eqtl[gene]:
            if rec.rsid not in snp_steps:
                continue
            cur = best.get(rec.rsid)
            if cur is None or rec.pvalue < cur.pvalue:
                best[rec.rsid] = rec
    pooled = AssocTable(
        trait_name=f"{seed_gene}:pooled",
        records=tuple(best[r] for r in sorted(best)),
    )
    final_clumps = clump(pooled, ld, params)
    final_snps = tuple(c.index.rsid for c in final_clumps)

    return TwmrSelection(
        seed_gene=seed_gene,
        genes=genes,
        snps=final_snps,
        gene_steps=gene_steps,
        snp_steps=snp_steps,
        clumps=tuple(final_clumps),
    )


def effect_matrix_from_selection(
    selection: TwmrSelection,
    eqtl: Mapping[str, AssocTable],
    outcome: AssocTable,
    eqtl_p: Optional[float] = None,
    params: Optional[ClumpParams] = None,
) -> EffectMatrix:
    """Assemble the TWMR effect matrix for a completed selection.

    beta[snp, gene] is the eQTL effect when that association is significant
    and exactly 0 otherwise (the file-format convention for "not an eQTL");
    the outcome column comes from the GWAS table. Every selected SNP must
    be present in the outcome table.
    """
    if eqtl_p is None:
        eqtl_p = (params or ClumpParams()).clump_p1
    missing = [s for s in selection.snps if outcome.get(s) is None]
    if missing:
        raise DimensionMismatch(
            f"outcome table lacks {len(missing)} selected SNP(s), "
            f"first: {missing[0]}")
    beta = np.zeros((len(selection.snps), len(selection.genes)))
    for gi, gene in enumerate(selection.genes):
        table = eqtl[gene]
        for si, rsid in enumerate(selection.snps):
            rec = table.get(rsid)
            if rec is not None and rec.pvalue <= eqtl_p:
                beta[si, gi] = rec.beta
    outcome_beta = np.array([outcome.get(s).beta for s in selection.snps])
    return EffectMatrix(
        snps=selection.snps,
        traits=selection.genes,
        beta=beta,
        outcome_beta=outcome_beta,
    )
