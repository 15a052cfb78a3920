"""Synthetic summary-statistics generator with known ground truth.

Instruments sit on one chromosome with AR(1) LD (r_ij = rho^|i-j|). True
per-SNP exposure effects are standard normal; observed effects add
LD-structured sampling noise with covariance C/n_qtl per exposure column,
and the outcome vector is E_true @ alpha plus optional direct (pleiotropic)
SNP effects plus noise with covariance C/n_gwas. Everything is driven by
one seed, so replicates are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import stats

from .errors import ConfigError, InvalidSizes
from .ld import LdMatrix, serialize_ld_file
from .sumstats import (
    AssocTable,
    EffectMatrix,
    SnpRecord,
    TraitKind,
    serialize_matrix_file,
)

#: Base-pair spacing between adjacent simulated SNPs.
POSITION_STEP = 10_000
POSITION_START = 1_000_000
SIM_CHROM = "1"


@dataclass(frozen=True)
class SimSpec:
    """Ground-truth configuration for one synthetic instance."""

    n_snps: int
    k_exposures: int
    true_alpha: tuple
    ld_rho: float = 0.0
    n_gwas: float = 1e5
    n_qtl: float = 1e5
    pleiotropy_sd: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "true_alpha",
                           tuple(float(a) for a in self.true_alpha))
        if self.n_snps < 1 or self.k_exposures < 1:
            raise InvalidSizes(
                f"need n_snps >= 1 and k_exposures >= 1, got "
                f"{self.n_snps} and {self.k_exposures}")
        if len(self.true_alpha) != self.k_exposures:
            raise InvalidSizes(
                f"true_alpha has {len(self.true_alpha)} entries for "
                f"{self.k_exposures} exposures")
        if not abs(self.ld_rho) < 1.0:
            raise ConfigError(f"|ld_rho| must be < 1, got {self.ld_rho}")
        if not (self.n_gwas > 0 and self.n_qtl > 0):
            raise InvalidSizes("sample sizes must be > 0")
        if self.pleiotropy_sd < 0:
            raise ConfigError(
                f"pleiotropy_sd must be >= 0, got {self.pleiotropy_sd}")


@dataclass(frozen=True)
class SimResult:
    """Generated instance plus the hidden truth used to make it."""

    spec: SimSpec
    matrix: EffectMatrix
    ld: LdMatrix
    exposures: Mapping[str, AssocTable]
    outcome: AssocTable
    e_true: np.ndarray


def _assoc_from_effects(trait: str, kind: TraitKind, snps, beta: np.ndarray,
                        se: float, n: int) -> AssocTable:
    pvals = 2.0 * stats.norm.sf(np.abs(beta) / se)
    records = []
    for i, rsid in enumerate(snps):
        records.append(SnpRecord(
            rsid=rsid,
            chrom=SIM_CHROM,
            pos=POSITION_START + i * POSITION_STEP,
            effect_allele="A",
            other_allele="G",
            beta=float(beta[i]),
            se=se,
            pvalue=float(pvals[i]),
            n=n,
        ))
    return AssocTable(trait, tuple(records), kind)


def generate(spec: SimSpec) -> SimResult:
    """Draw one instance; fixed draw order keeps seeds comparable."""
    rng = np.random.default_rng(spec.seed)
    n, k = spec.n_snps, spec.k_exposures
    snps = tuple(f"rs{i + 1}" for i in range(n))
    genes = tuple(f"gene{j + 1}" for j in range(k))

    ld = LdMatrix.ar1(n, spec.ld_rho, snps)
    chol = np.linalg.cholesky(ld.r)
    alpha = np.array(spec.true_alpha)

    e_true = rng.standard_normal((n, k))
    e_obs = e_true + (chol @ rng.standard_normal((n, k))) / math.sqrt(spec.n_qtl)
    pleio = spec.pleiotropy_sd * rng.standard_normal(n)
    gamma = (e_true @ alpha + pleio
             + (chol @ rng.standard_normal(n)) / math.sqrt(spec.n_gwas))

    matrix = EffectMatrix(snps=snps, traits=genes, beta=e_obs,
                          outcome_beta=gamma)
    se_qtl = 1.0 / math.sqrt(spec.n_qtl)
    se_gwas = 1.0 / math.sqrt(spec.n_gwas)
    exposures = {
        gene: _assoc_from_effects(gene, TraitKind.EQTL, snps, e_obs[:, j],
                                  se_qtl, int(spec.n_qtl))
        for j, gene in enumerate(genes)
    }
    outcome = _assoc_from_effects("outcome", TraitKind.GWAS_OUTCOME, snps,
                                  gamma, se_gwas, int(spec.n_gwas))
    return SimResult(spec=spec, matrix=matrix, ld=ld, exposures=exposures,
                     outcome=outcome, e_true=e_true)


def write_files(result: SimResult, stem) -> dict:
    """Emit stem.matrix, stem.ld and a stem.simmeta parameter sidecar.

    The sidecar keeps the `.matrix` format untouched (bit-compatible with
    the documented layout) while still recording every generation
    parameter; all three files are deterministic for a fixed spec.
    """
    stem = Path(stem)
    paths = {
        "matrix": stem.parent / (stem.name + ".matrix"),
        "ld": stem.parent / (stem.name + ".ld"),
        "meta": stem.parent / (stem.name + ".simmeta"),
    }
    serialize_matrix_file(result.matrix, paths["matrix"])
    serialize_ld_file(result.ld, paths["ld"])
    spec = result.spec
    with open(paths["meta"], "w", encoding="utf-8") as fh:
        fh.write("# synthetic instance parameters\n")
        for key, value in (
            ("n_snps", spec.n_snps),
            ("k_exposures", spec.k_exposures),
            ("true_alpha", ",".join(repr(a) for a in spec.true_alpha)),
            ("ld_rho", repr(spec.ld_rho)),
            ("n_gwas", repr(spec.n_gwas)),
            ("n_qtl", repr(spec.n_qtl)),
            ("pleiotropy_sd", repr(spec.pleiotropy_sd)),
            ("seed", spec.seed),
        ):
            fh.write(f"{key}={value}\n")
    return paths
