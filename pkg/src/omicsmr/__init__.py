"""Mendelian-randomization workflows over multi-omics summary statistics.

The package covers univariable two-sample MR (Wald ratio, IVW, MR-Egger,
weighted median), multivariable transcriptome-wide MR with LD-aware GLS
and delta-method standard errors, Bayesian model averaging over candidate
exposures, a proteome-wide pQTL screening pipeline, two-step epigenetic
mediation, LD clumping, and a synthetic-data generator. Hot kernels run
on a compiled Cython backend when available, with a pure-Python fallback
selected automatically at import (``OMICSMR_PURE_PYTHON=1`` forces the
fallback).
"""

from __future__ import annotations

__version__ = "0.1.0"

from . import errors, kernels, ld, mrbma, pipelines, simgen, sumstats, twmr, uni_mr
from .errors import OmicsMrError
from .ld import ClumpParams, LdMatrix, clump, parse_ld_file, serialize_ld_file
from .mrbma import BmaParams, BmaReport, analyze, search
from .pipelines import run_pqtl_pipeline, two_step_mediation
from .simgen import SimSpec, generate
from .sumstats import (
    AssocTable,
    EffectMatrix,
    HarmonizedPair,
    SnpRecord,
    harmonize,
    parse_assoc_table,
    parse_matrix_file,
    serialize_matrix_file,
)
from .twmr import (
    TwmrInput,
    TwmrResult,
    select_instruments_twmr,
    twmr_estimate,
    twmr_fit,
    twmr_run_files,
)
from .uni_mr import (
    Method,
    MrEstimate,
    egger,
    ivw,
    mr_all,
    wald_ratio,
    weighted_median,
)

__all__ = [
    "__version__",
    "errors", "kernels", "ld", "mrbma", "pipelines", "simgen",
    "sumstats", "twmr", "uni_mr",
    "OmicsMrError",
    "ClumpParams", "LdMatrix", "clump", "parse_ld_file", "serialize_ld_file",
    "BmaParams", "BmaReport", "analyze", "search",
    "run_pqtl_pipeline", "two_step_mediation",
    "SimSpec", "generate",
    "AssocTable", "EffectMatrix", "HarmonizedPair", "SnpRecord",
    "harmonize", "parse_assoc_table", "parse_matrix_file",
    "serialize_matrix_file",
    "TwmrInput", "TwmrResult", "select_instruments_twmr",
    "twmr_estimate", "twmr_fit", "twmr_run_files",
    "Method", "MrEstimate", "egger", "ivw", "mr_all", "wald_ratio",
    "weighted_median",
]
