"""Command-line front end.

Subcommands map one-to-one onto the library workflows: ``twmr`` (stem-based
multivariable MR), ``mr`` (univariable estimators), ``bma`` (Bayesian model
averaging), ``clump`` (LD clumping), ``pqtl-pipeline`` (the proteomics
workflow), ``mediate`` (two-step mediation) and ``simulate`` (synthetic
data). Options resolve as command line > config file > built-in default;
the config file is plain ``key=value`` lines. Every output starts with a
``#`` metadata header (version, seed, parameters) sufficient to reproduce
it bit for bit, and error classes map to distinct exit codes:
1 config, 2 parse, 3 dimensions, 4 numerics, 5 insufficient instruments.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, kernels, mrbma, pipelines, simgen
from .errors import ConfigError, OmicsMrError
from .ld import ClumpParams, LdMatrix, clump, parse_ld_file
from .sumstats import (
    PalindromePolicy,
    TraitKind,
    harmonize,
    parse_assoc_table,
)
from .twmr import twmr_run_files
from .uni_mr import egger, ivw, wald_ratio, weighted_median, mr_all

MR_METHODS = ("wald_ratio", "ivw", "egger", "weighted_median")

_HARD_DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "n_boot": 1000,
    "methods": "all",
    "palindrome_policy": "infer",
    "clump_p1": 5e-8,
    "clump_p2": 5e-8,
    "clump_r2": 0.01,
    "clump_kb": 1000.0,
    "kmin": 1,
    "kmax": 12,
    "prior_prob": 0.1,
    "prior_sigma": 0.5,
    "max_iter": 100_000,
    "top": 10,
    "alpha": 0.05,
    "ld_rho": 0.0,
    "n_gwas": 1e5,
    "n_qtl": 1e5,
    "pleiotropy_sd": 0.0,
}


def _read_config(path: str) -> dict:
    cfg = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                if "=" not in stripped:
                    raise ConfigError(
                        f"{path}, line {lineno}: expected key=value, "
                        f"got {stripped!r}")
                key, value = stripped.split("=", 1)
                cfg[key.strip().replace("-", "_")] = value.strip()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    unknown = set(cfg) - set(_HARD_DEFAULTS)
    if unknown:
        raise ConfigError(
            f"unknown config key(s): {', '.join(sorted(unknown))}")
    return cfg


class _Resolver:
    """CLI > config > hard default, with type conversion for config text."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self.args = args
        self.config = config

    def get(self, name: str, conv=str):
        cli_value = getattr(self.args, name, None)
        if cli_value is not None:
            return cli_value
        if name in self.config:
            raw = self.config[name]
            if conv is bool:
                return raw.strip().lower() in ("1", "true", "yes", "on")
            try:
                return conv(raw)
            except ValueError:
                raise ConfigError(
                    f"config key {name}: cannot convert {raw!r}") from None
        if name in _HARD_DEFAULTS:
            return _HARD_DEFAULTS[name]
        return None


def _metadata(command: str, resolver: _Resolver, **params) -> list:
    lines = [f"omicsmr={__version__}", f"command={command}",
             f"backend={kernels.BACKEND}"]
    seed = resolver.get("seed", int)
    if seed is not None:
        lines.append(f"seed={seed}")
    for key in sorted(params):
        lines.append(f"{key}={params[key]}")
    return lines


def _write_tsv(path, header, rows, metadata) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in metadata:
            fh.write(f"# {line}\n")
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(row) + "\n")


def _parse_colmap(text: Optional[str]) -> Optional[dict]:
    if not text:
        return None
    out = {}
    for item in text.split(","):
        if "=" not in item:
            raise ConfigError(
                f"column mapping entries need canonical=actual, got {item!r}")
        canon, actual = item.split("=", 1)
        out[canon.strip()] = actual.strip()
    return out


def _load_ld_for(assoc, ld_path, snps_path: Optional[str]) -> LdMatrix:
    """LD panel either named via a SNP-list file or positional against the
    association table's row order."""
    if snps_path:
        with open(snps_path, encoding="utf-8") as fh:
            snps = tuple(line.strip() for line in fh if line.strip())
        return parse_ld_file(ld_path, snps=snps)
    return parse_ld_file(ld_path, snps=tuple(assoc.rsids))


F = "%.10g"


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_twmr(args, resolver: _Resolver) -> int:
    n_gwas = resolver.get("n_gwas", float)
    n_qtl = resolver.get("n_qtl", float)
    meta = _metadata("twmr", resolver, stem=args.stem, n_gwas=n_gwas,
                     n_qtl=n_qtl, ld_is_r2=bool(args.ld_is_r2))
    out = twmr_run_files(args.stem, n_gwas, n_qtl, out=args.out,
                         ld_is_r2=bool(args.ld_is_r2), metadata=meta)
    print(f"wrote {out}")
    return 0


def _list_methods() -> int:
    for name in MR_METHODS:
        print(name)
    return 0


def _cmd_mr(args, resolver: _Resolver) -> int:
    if args.list_methods:
        return _list_methods()
    if not args.exposure or not args.outcome:
        raise ConfigError("mr requires --exposure and --outcome")
    policy = PalindromePolicy(resolver.get("palindrome_policy"))
    exposure = parse_assoc_table(
        args.exposure, column_map=_parse_colmap(args.exposure_columns),
        trait_kind=TraitKind.EXPOSURE)
    outcome = parse_assoc_table(
        args.outcome, column_map=_parse_colmap(args.outcome_columns),
        trait_kind=TraitKind.GWAS_OUTCOME)
    pairs = harmonize(exposure, outcome, palindrome_policy=policy)
    kept = [p for p in pairs if p.usable]

    seed = resolver.get("seed", int)
    n_boot = resolver.get("n_boot", int)
    methods = resolver.get("methods")
    estimates = []
    if methods == "all":
        estimates = mr_all(pairs, n_boot=n_boot, seed=seed)
    else:
        for name in (m.strip() for m in methods.split(",")):
            if name not in MR_METHODS:
                raise ConfigError(
                    f"unknown method {name!r}; choices: "
                    f"{', '.join(MR_METHODS)} or all")
            if name == "wald_ratio":
                estimates.extend(wald_ratio(p) for p in kept)
            elif name == "ivw":
                estimates.append(ivw(kept))
            elif name == "egger":
                slope, intercept = egger(kept)
                estimates.extend([slope, intercept])
            else:
                estimates.append(weighted_median(kept, n_boot=n_boot,
                                                 seed=seed))

    meta = _metadata("mr", resolver, exposure=args.exposure,
                     outcome=args.outcome, methods=methods,
                     n_boot=n_boot, palindrome_policy=policy.value,
                     n_harmonized=len(pairs), n_usable=len(kept))
    rows = [
        (e.method.value, F % e.estimate, F % e.se, F % e.pvalue,
         str(e.n_snps))
        for e in estimates
    ]
    _write_tsv(args.out, ("method", "estimate", "se", "pvalue", "n_snps"),
               rows, meta)
    print(f"wrote {args.out}")
    return 0


def _cmd_bma(args, resolver: _Resolver) -> int:
    if args.input:
        raw = mrbma.load_bma_combined(args.input)
    elif args.beta_x and args.beta_y:
        raw = mrbma.load_bma_files(args.beta_x, args.beta_y)
    else:
        raise ConfigError(
            "bma requires --input or both --beta-x and --beta-y")
    params = mrbma.BmaParams(
        kmin=resolver.get("kmin", int),
        kmax=resolver.get("kmax", int),
        prior_prob=resolver.get("prior_prob", float),
        prior_sigma=resolver.get("prior_sigma", float),
        max_iter=resolver.get("max_iter", int),
        seed=resolver.get("seed", int),
    )
    report = mrbma.analyze(raw, params, weighted=not args.no_weighting)
    top = resolver.get("top", int)
    best, table = mrbma.report_best_models(report, top=top)

    meta = _metadata(
        "bma", resolver, kmin=params.kmin, kmax=params.kmax,
        prior_prob=params.prior_prob, prior_sigma=params.prior_sigma,
        max_iter=params.max_iter, mode=report.mode,
        n_scored=report.n_scored, weighted=not args.no_weighting,
        normalization=f"over {report.n_scored} scored models")
    model_rows = []
    for rank, score in enumerate(best, start=1):
        names = ",".join(report.exposures[i] for i in score.members) or "NULL"
        theta = ",".join(F % t for t in score.theta) or "."
        model_rows.append((
            str(rank), names, str(score.size), F % score.log_ml,
            F % score.log_prior, F % score.posterior, theta))
    _write_tsv(args.out_models,
               ("rank", "members", "size", "log_ml", "log_prior",
                "posterior", "theta"),
               model_rows, meta)

    has_freq = report.mip_visit_freq is not None
    header = ["exposure", "mip", "mace"]
    if has_freq:
        header.append("mip_visit_freq")
    mip_rows = []
    for i, (name, mip, mace) in enumerate(table):
        row = [name, F % mip, F % mace]
        if has_freq:
            row.append(F % report.mip_visit_freq[i])
        mip_rows.append(tuple(row))
    _write_tsv(args.out_mip, tuple(header), mip_rows, meta)
    print(f"wrote {args.out_models} and {args.out_mip}")
    return 0


def _cmd_clump(args, resolver: _Resolver) -> int:
    assoc = parse_assoc_table(
        args.assoc, column_map=_parse_colmap(args.columns))
    ld = _load_ld_for(assoc, args.ld, args.ld_snps)
    params = ClumpParams(
        clump_p1=resolver.get("clump_p1", float),
        clump_p2=resolver.get("clump_p2", float),
        clump_r2=resolver.get("clump_r2", float),
        clump_kb=resolver.get("clump_kb", float),
    )
    clumps = clump(assoc, ld, params)
    meta = _metadata("clump", resolver, assoc=args.assoc, ld=args.ld,
                     clump_p1=params.clump_p1, clump_p2=params.clump_p2,
                     clump_r2=params.clump_r2, clump_kb=params.clump_kb,
                     n_input=len(assoc), n_clumps=len(clumps))
    rows = []
    for c in clumps:
        members = ",".join(c.member_rsids) or "."
        rows.append((c.index.rsid, c.index.chrom, str(c.index.pos),
                     F % c.index.pvalue, str(len(c.members)), members))
    _write_tsv(args.out,
               ("index_rsid", "chrom", "pos", "pvalue", "n_members",
                "members"),
               rows, meta)
    print(f"wrote {args.out}")
    return 0


def _cmd_pqtl_pipeline(args, resolver: _Resolver) -> int:
    if not args.pqtl:
        raise ConfigError("pqtl-pipeline requires at least one --pqtl "
                          "PROTEIN=PATH")
    tables = {}
    for item in args.pqtl:
        if "=" not in item:
            raise ConfigError(
                f"--pqtl entries need PROTEIN=PATH, got {item!r}")
        protein, path = item.split("=", 1)
        tables[protein.strip()] = parse_assoc_table(
            path.strip(), trait_name=protein.strip(),
            trait_kind=TraitKind.PQTL)
    outcome = parse_assoc_table(args.outcome,
                                trait_kind=TraitKind.GWAS_OUTCOME)
    annotation = pipelines.load_annotation(args.annotation)
    groups = pipelines.load_groups(args.groups) if args.groups else None
    if not args.ld_snps:
        raise ConfigError(
            "pqtl-pipeline requires --ld-snps naming the LD panel rows")
    ld = _load_ld_for(None, args.ld, args.ld_snps)
    params = ClumpParams(
        clump_p1=resolver.get("clump_p1", float),
        clump_p2=resolver.get("clump_p2", float),
        clump_r2=resolver.get("clump_r2", float),
        clump_kb=resolver.get("clump_kb", float),
    )
    alpha = resolver.get("alpha", float)
    result = pipelines.run_pqtl_pipeline(
        tables, outcome, annotation, ld, groups=groups, params=params,
        alpha=alpha, bonferroni_m=args.bonferroni_m,
        n_boot=resolver.get("n_boot", int),
        seed=resolver.get("seed", int),
        jobs=resolver.get("jobs", int),
    )
    meta = _metadata("pqtl-pipeline", resolver, alpha=alpha,
                     bonferroni_p=repr(result.bonferroni_p),
                     clump_r2=params.clump_r2, clump_kb=params.clump_kb,
                     proteins=",".join(sorted(tables)))
    pipelines.write_pipeline_report(result, args.out, metadata=meta)
    print(f"wrote {args.out}")
    return 0


def _cmd_mediate(args, resolver: _Resolver) -> int:
    policy = PalindromePolicy(resolver.get("palindrome_policy"))
    exp1 = parse_assoc_table(args.step1_exposure,
                             trait_kind=TraitKind.EXPOSURE)
    med1 = parse_assoc_table(args.step1_mediator,
                             trait_kind=TraitKind.METHYLATION)
    med2 = parse_assoc_table(args.step2_mediator,
                             trait_kind=TraitKind.METHYLATION)
    out2 = parse_assoc_table(args.step2_outcome,
                             trait_kind=TraitKind.GWAS_OUTCOME)
    step1 = harmonize(exp1, med1, palindrome_policy=policy)
    step2 = harmonize(med2, out2, palindrome_policy=policy)
    alpha = resolver.get("alpha", float)
    result = pipelines.two_step_mediation(
        step1, step2, alpha=alpha,
        exposure=args.exposure_name, cpg_site=args.cpg,
        outcome=args.outcome_name)
    meta = _metadata("mediate", resolver, alpha=alpha,
                     step1_exposure=args.step1_exposure,
                     step1_mediator=args.step1_mediator,
                     step2_mediator=args.step2_mediator,
                     step2_outcome=args.step2_outcome)
    row = (
        result.exposure, result.cpg_site, result.outcome,
        result.step1.method.value, F % result.step1.estimate,
        F % result.step1.se, F % result.step1.pvalue,
        result.step2.method.value, F % result.step2.estimate,
        F % result.step2.se, F % result.step2.pvalue,
        F % result.indirect_effect.estimate, F % result.indirect_effect.se,
        str(result.is_mediator).lower(),
        str(result.instruments_overlap).lower(),
    )
    _write_tsv(args.out,
               ("exposure", "cpg_site", "outcome",
                "step1_method", "step1_estimate", "step1_se", "step1_pvalue",
                "step2_method", "step2_estimate", "step2_se", "step2_pvalue",
                "indirect_estimate", "indirect_se", "is_mediator",
                "instruments_overlap"),
               [row], meta)
    print(f"wrote {args.out}")
    return 0


def _cmd_simulate(args, resolver: _Resolver) -> int:
    alpha = tuple(float(a) for a in args.true_alpha.split(","))
    spec = simgen.SimSpec(
        n_snps=args.n_snps,
        k_exposures=len(alpha),
        true_alpha=alpha,
        ld_rho=resolver.get("ld_rho", float),
        n_gwas=resolver.get("n_gwas", float),
        n_qtl=resolver.get("n_qtl", float),
        pleiotropy_sd=resolver.get("pleiotropy_sd", float),
        seed=resolver.get("seed", int),
    )
    result = simgen.generate(spec)
    paths = simgen.write_files(result, args.stem)
    print(f"wrote {paths['matrix']}, {paths['ld']} and {paths['meta']}")
    return 0


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    # SUPPRESS keeps a main-parser value from being clobbered by the
    # subparser default when the flag is given before the subcommand.
    p.add_argument("--config", default=argparse.SUPPRESS,
                   help="key=value config file; command-line flags "
                        "override it")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help="random seed (default 0)")
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                   help="parallel workers for batch analyses")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="omicsmr",
        description="Mendelian-randomization workflows over multi-omics "
                    "summary statistics.")
    parser.add_argument("--version", action="version",
                        version=f"omicsmr {__version__}")
    parser.add_argument("--config", help="key=value config file; command-"
                                         "line flags override it")
    parser.add_argument("--seed", type=int, help="random seed (default 0)")
    parser.add_argument("--jobs", type=int,
                        help="parallel workers for batch analyses")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("twmr", help="multivariable MR from stem.matrix + "
                                    "stem.ld")
    p.add_argument("stem", help="path stem; reads stem.matrix and stem.ld")
    p.add_argument("--n-gwas", dest="n_gwas", type=float,
                   help="GWAS sample size")
    p.add_argument("--n-qtl", dest="n_qtl", type=float,
                   help="QTL-study sample size")
    p.add_argument("--out", help="output path (default stem.alpha)")
    p.add_argument("--ld-is-r2", action="store_true", default=False,
                   help="the .ld file stores squared correlations")
    _add_common(p)
    p.set_defaults(handler=_cmd_twmr)

    p = sub.add_parser("mr", help="univariable MR estimators")
    p.add_argument("--exposure", help="exposure summary-statistics TSV")
    p.add_argument("--outcome", help="outcome summary-statistics TSV")
    p.add_argument("--methods",
                   help="comma list from wald_ratio,ivw,egger,"
                        "weighted_median, or 'all' (default)")
    p.add_argument("--exposure-columns", help="canonical=actual column "
                                              "mapping for the exposure file")
    p.add_argument("--outcome-columns", help="same for the outcome file")
    p.add_argument("--palindrome-policy", dest="palindrome_policy",
                   choices=("infer", "drop", "keep"))
    p.add_argument("--n-boot", dest="n_boot", type=int)
    p.add_argument("--out", default="mr_report.tsv")
    p.add_argument("--list-methods", action="store_true", default=False,
                   help="print available methods and exit")
    _add_common(p)
    p.set_defaults(handler=_cmd_mr)

    p = sub.add_parser("bma", help="Bayesian model averaging over exposures")
    p.add_argument("--input", help="combined TSV: rsid, exposures..., "
                                   "beta_y, se_y")
    p.add_argument("--beta-x", dest="beta_x", help="exposure-effect TSV")
    p.add_argument("--beta-y", dest="beta_y", help="outcome TSV with "
                                                   "beta/se columns")
    p.add_argument("--kmin", type=int)
    p.add_argument("--kmax", type=int)
    p.add_argument("--prior-prob", dest="prior_prob", type=float)
    p.add_argument("--prior-sigma", dest="prior_sigma", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--top", type=int)
    p.add_argument("--no-weighting", action="store_true", default=False,
                   help="skip the inverse-SE weighting step")
    p.add_argument("--out-models", dest="out_models",
                   default="bma_models.tsv")
    p.add_argument("--out-mip", dest="out_mip", default="bma_mip.tsv")
    _add_common(p)
    p.set_defaults(handler=_cmd_bma)

    p = sub.add_parser("clump", help="greedy LD clumping")
    p.add_argument("--assoc", required=True,
                   help="association TSV to clump")
    p.add_argument("--ld", required=True, help=".ld matrix file")
    p.add_argument("--ld-snps", dest="ld_snps",
                   help="file listing the LD panel's rsids, one per line "
                        "(default: rows align with the association file)")
    p.add_argument("--columns", help="canonical=actual column mapping")
    p.add_argument("--clump-p1", dest="clump_p1", type=float)
    p.add_argument("--clump-p2", dest="clump_p2", type=float)
    p.add_argument("--clump-r2", dest="clump_r2", type=float)
    p.add_argument("--clump-kb", dest="clump_kb", type=float)
    p.add_argument("--out", default="clumps.tsv")
    _add_common(p)
    p.set_defaults(handler=_cmd_clump)

    p = sub.add_parser("pqtl-pipeline", help="proteome-wide MR workflow")
    p.add_argument("--pqtl", action="append",
                   help="PROTEIN=PATH pQTL table; repeatable")
    p.add_argument("--outcome", required=True)
    p.add_argument("--annotation", required=True,
                   help="TSV: gene, chrom, tss, protein")
    p.add_argument("--groups", help="pathway groups file")
    p.add_argument("--ld", required=True)
    p.add_argument("--ld-snps", dest="ld_snps",
                   help="file listing the LD panel's rsids")
    p.add_argument("--alpha", type=float)
    p.add_argument("--bonferroni-m", dest="bonferroni_m", type=int,
                   help="Bonferroni denominator (default: total "
                        "SNP-protein associations)")
    p.add_argument("--clump-p1", dest="clump_p1", type=float)
    p.add_argument("--clump-p2", dest="clump_p2", type=float)
    p.add_argument("--clump-r2", dest="clump_r2", type=float)
    p.add_argument("--clump-kb", dest="clump_kb", type=float)
    p.add_argument("--n-boot", dest="n_boot", type=int)
    p.add_argument("--out", default="pqtl_report.tsv")
    _add_common(p)
    p.set_defaults(handler=_cmd_pqtl_pipeline)

    p = sub.add_parser("mediate", help="two-step epigenetic mediation")
    p.add_argument("--step1-exposure", dest="step1_exposure", required=True)
    p.add_argument("--step1-mediator", dest="step1_mediator", required=True)
    p.add_argument("--step2-mediator", dest="step2_mediator", required=True)
    p.add_argument("--step2-outcome", dest="step2_outcome", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--palindrome-policy", dest="palindrome_policy",
                   choices=("infer", "drop", "keep"))
    p.add_argument("--exposure-name", dest="exposure_name",
                   default="exposure")
    p.add_argument("--cpg", default="cpg")
    p.add_argument("--outcome-name", dest="outcome_name", default="outcome")
    p.add_argument("--out", default="mediation.tsv")
    _add_common(p)
    p.set_defaults(handler=_cmd_mediate)

    p = sub.add_parser("simulate", help="generate a synthetic instance")
    p.add_argument("--n-snps", dest="n_snps", type=int, required=True)
    p.add_argument("--true-alpha", dest="true_alpha", required=True,
                   help="comma-separated causal effects, one per exposure")
    p.add_argument("--ld-rho", dest="ld_rho", type=float)
    p.add_argument("--n-gwas", dest="n_gwas", type=float)
    p.add_argument("--n-qtl", dest="n_qtl", type=float)
    p.add_argument("--pleiotropy-sd", dest="pleiotropy_sd", type=float)
    p.add_argument("--stem", required=True, help="output path stem")
    _add_common(p)
    p.set_defaults(handler=_cmd_simulate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _read_config(args.config) if args.config else {}
        resolver = _Resolver(args, config)
        return args.handler(args, resolver)
    except OmicsMrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
