"""Proteome-wide MR pipeline and two-step epigenetic mediation.

The pQTL workflow: Bonferroni-filter and clump each protein's pQTLs,
drop the MHC region, label instruments cis or trans against the encoding
gene's transcription start site, screen out horizontally pleiotropic SNPs,
run per-protein MR under cis-only / cis+trans / trans-only instrument
modes, and check sign consistency across the modes.

The mediation workflow runs two MR steps (exposure -> methylation,
methylation -> outcome) and declares a CpG site a mediator when both are
significant (joint significance test). The indirect effect is the product
of the two estimates with a Sobel-type delta-method SE.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .errors import (
    ConfigError,
    InvalidValue,
    MissingColumn,
    NoInstruments,
    UnknownProtein,
)
from .ld import ClumpParams, LdMatrix, clump
from .sumstats import (
    AssocTable,
    SnpRecord,
    TraitKind,
    _data_lines,
    harmonize,
    normalize_chrom,
)
from .uni_mr import MrEstimate, ivw, mr_all, wald_ratio

CIS_WINDOW_BP = 500_000
MHC_CHROM = "6"
MHC_START = 26_000_000
MHC_END = 34_000_000
PLEIOTROPY_MAX_PROTEINS = 5


class CisTrans(str, enum.Enum):
    CIS = "cis"
    TRANS = "trans"


class AnalysisMode(str, enum.Enum):
    CIS_ONLY = "cis_only"
    CIS_PLUS_TRANS = "cis_plus_trans"
    TRANS_ONLY = "trans_only"


@dataclass(frozen=True)
class GeneAnnotation:
    """Where a protein's encoding gene starts, for the cis window."""

    gene: str
    chrom: str
    tss: int
    protein: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "chrom", normalize_chrom(self.chrom))
        if self.tss < 1:
            raise InvalidValue(0, "tss", f"tss must be >= 1, got {self.tss}")


@dataclass(frozen=True)
class Instrument:
    """One selected pQTL with its cis/trans label and filter audit trail."""

    record: SnpRecord
    label: CisTrans
    provenance: tuple = ()


@dataclass(frozen=True)
class InstrumentSet:
    protein: str
    instruments: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "instruments", tuple(self.instruments))

    def __len__(self) -> int:
        return len(self.instruments)

    def subset(self, mode: AnalysisMode) -> tuple:
        if mode is AnalysisMode.CIS_ONLY:
            return tuple(i for i in self.instruments if i.label is CisTrans.CIS)
        if mode is AnalysisMode.TRANS_ONLY:
            return tuple(i for i in self.instruments if i.label is CisTrans.TRANS)
        return self.instruments


@dataclass(frozen=True)
class PathwayGroups:
    """Named protein sets from pathway / interaction-network exports."""

    groups: Mapping[str, frozenset]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "groups",
            {name: frozenset(members) for name, members in self.groups.items()})

    def covering_group(self, proteins: Iterable[str],
                       require_all: bool = True) -> Optional[str]:
        """Name of a group containing the proteins, or None.

        ``require_all=True`` demands every protein inside one group;
        False relaxes to a strict majority.
        """
        proteins = set(proteins)
        if not proteins:
            return None
        for name in sorted(self.groups):
            members = self.groups[name]
            if require_all:
                if proteins <= members:
                    return name
            elif len(proteins & members) * 2 > len(proteins):
                return name
        return None


@dataclass(frozen=True)
class IndirectEffect:
    estimate: float
    se: float


@dataclass(frozen=True)
class MediationResult:
    """Joint-significance mediation verdict for one CpG site."""

    exposure: str
    cpg_site: str
    outcome: str
    step1: MrEstimate
    step2: MrEstimate
    alpha: float
    is_mediator: bool
    indirect_effect: IndirectEffect
    instruments_overlap: bool = False

    def __post_init__(self) -> None:
        expected = (self.step1.pvalue <= self.alpha
                    and self.step2.pvalue <= self.alpha)
        if self.is_mediator != expected:
            raise InvalidValue(
                0, "is_mediator",
                "is_mediator contradicts the joint significance rule")


# ---------------------------------------------------------------------------
# Individual filters
# ---------------------------------------------------------------------------

def classify_cis_trans(snp: SnpRecord, ann: Optional[GeneAnnotation],
                       window_bp: int = CIS_WINDOW_BP,
                       anchor_pos: Optional[int] = None) -> CisTrans:
    """cis iff the SNP lies on the annotated chromosome within ``window_bp``
    (inclusive) of the anchor, which defaults to the gene's TSS."""
    if ann is None:
        raise UnknownProtein("no gene annotation supplied for this protein")
    anchor = ann.tss if anchor_pos is None else anchor_pos
    if snp.chrom == ann.chrom and abs(snp.pos - anchor) <= window_bp:
        return CisTrans.CIS
    return CisTrans.TRANS


def in_mhc(snp: SnpRecord) -> bool:
    return snp.chrom == MHC_CHROM and MHC_START <= snp.pos <= MHC_END


def mhc_filter(snps: Sequence[SnpRecord]) -> list:
    """Drop variants inside the MHC region (chr6, 26-34 Mb inclusive)."""
    return [s for s in snps if not in_mhc(s)]


def pleiotropy_filter(
    pqtl_map: Mapping[str, Iterable[str]],
    groups: Optional[PathwayGroups] = None,
    max_proteins: int = PLEIOTROPY_MAX_PROTEINS,
    require_all: bool = True,
):
    """Screen SNPs by protein-association count.

    SNPs associated with fewer than ``max_proteins`` proteins pass; SNPs at
    or above the threshold pass only when one pathway group covers all
    their proteins (vertical pleiotropy). Returns (retained rsids, audit)
    where audit maps every rsid to the deciding rule.
    """
    retained = []
    audit = {}
    for rsid, proteins in pqtl_map.items():
        proteins = set(proteins)
        if len(proteins) < max_proteins:
            retained.append(rsid)
            audit[rsid] = f"retained: {len(proteins)} protein(s), below threshold"
            continue
        cover = groups.covering_group(proteins, require_all) if groups else None
        if cover is not None:
            retained.append(rsid)
            audit[rsid] = (
                f"retained: {len(proteins)} proteins covered by group "
                f"{cover!r} (vertical pleiotropy)")
        else:
            audit[rsid] = (
                f"excluded: {len(proteins)} proteins with no covering group "
                "(horizontal pleiotropy)")
    return retained, audit


# ---------------------------------------------------------------------------
# Per-protein MR and consistency
# ---------------------------------------------------------------------------

def protein_mr(protein: str, instruments: InstrumentSet, outcome: AssocTable,
               mode: AnalysisMode = AnalysisMode.CIS_PLUS_TRANS,
               n_boot: int = 1000, seed: int = 0) -> list:
    """Harmonize the mode's instruments against the outcome and estimate.

    One usable instrument gives the Wald ratio; two give IVW; three or more
    add MR-Egger and the weighted median as sensitivity rows.
    """
    chosen = instruments.subset(mode)
    if not chosen:
        raise NoInstruments(
            f"protein {protein!r}: mode {mode.value} selects no instruments")
    exposure = AssocTable(
        trait_name=protein,
        records=tuple(i.record for i in chosen),
        trait_kind=TraitKind.PQTL,
    )
    pairs = harmonize(exposure, outcome)
    return mr_all(pairs, n_boot=n_boot, seed=seed)


def direction_consistency(results: Mapping[AnalysisMode, MrEstimate]) -> bool:
    """True iff every mode's point estimate has the same strict sign.

    A zero estimate is sign-indeterminate and makes the flag false.
    """
    if len(results) < 2:
        raise ConfigError(
            "direction consistency needs estimates from at least two modes")
    signs = {math.copysign(1.0, r.estimate) if r.estimate != 0.0 else 0.0
             for r in results.values()}
    return len(signs) == 1 and 0.0 not in signs


# ---------------------------------------------------------------------------
# Two-step mediation
# ---------------------------------------------------------------------------

def _primary_estimate(pairs) -> MrEstimate:
    kept = [p for p in pairs if p.usable]
    if len(kept) == 1:
        return wald_ratio(kept[0])
    return ivw(kept)


def two_step_mediation(step1_pairs, step2_pairs, alpha: float = 0.05,
                       exposure: str = "exposure", cpg_site: str = "cpg",
                       outcome: str = "outcome") -> MediationResult:
    """Joint-significance mediation across the two MR steps.

    Step 1 estimates exposure -> methylation, step 2 methylation ->
    outcome; each uses the Wald ratio for a single instrument and IVW
    otherwise. The indirect effect is theta1 * theta2 with
    se = sqrt(theta1^2 se2^2 + theta2^2 se1^2). Shared instruments between
    the steps do not stop the analysis but are flagged.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    est1 = _primary_estimate(step1_pairs)
    est2 = _primary_estimate(step2_pairs)

    rs1 = {p.rsid for p in step1_pairs if p.usable}
    rs2 = {p.rsid for p in step2_pairs if p.usable}
    overlap = bool(rs1 & rs2)

    t1, t2 = est1.estimate, est2.estimate
    se = math.sqrt(t1**2 * est2.se**2 + t2**2 * est1.se**2)
    return MediationResult(
        exposure=exposure,
        cpg_site=cpg_site,
        outcome=outcome,
        step1=est1,
        step2=est2,
        alpha=alpha,
        is_mediator=(est1.pvalue <= alpha and est2.pvalue <= alpha),
        indirect_effect=IndirectEffect(t1 * t2, se),
        instruments_overlap=overlap,
    )


# ---------------------------------------------------------------------------
# Full pQTL pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineRow:
    protein: str
    mode: AnalysisMode
    method: str
    estimate: float
    se: float
    pvalue: float
    n_snps: int
    consistent: Optional[bool] = None


@dataclass(frozen=True)
class PipelineResult:
    rows: tuple
    instruments: Mapping[str, InstrumentSet]
    consistency: Mapping[str, Optional[bool]]
    pleiotropy_audit: Mapping[str, str]
    bonferroni_p: float


def run_pqtl_pipeline(
    pqtl: Mapping[str, AssocTable],
    outcome: AssocTable,
    annotation: Mapping[str, GeneAnnotation],
    ld: LdMatrix,
    groups: Optional[PathwayGroups] = None,
    params: Optional[ClumpParams] = None,
    alpha: float = 0.05,
    bonferroni_m: Optional[int] = None,
    n_boot: int = 1000,
    seed: int = 0,
    jobs: int = 1,
) -> PipelineResult:
    """The full proteomics workflow over a panel of proteins.

    Selection per protein: significance at the Bonferroni level
    alpha / m (m defaults to the total SNP-protein association count in
    the panel), MHC exclusion, LD clumping to index SNPs, cis/trans
    labelling against the annotation, then the pleiotropy screen across
    the whole panel. MR runs per protein under all three instrument modes;
    modes without instruments are skipped. Consistency compares the
    primary (Wald/IVW) estimate signs across the modes that produced one.
    """
    if params is None:
        params = ClumpParams()
    if bonferroni_m is None:
        bonferroni_m = sum(len(t) for t in pqtl.values())
    if bonferroni_m < 1:
        raise ConfigError("no SNP-protein associations in the input panel")
    bonf_p = alpha / bonferroni_m
    eff_params = ClumpParams(
        clump_p1=bonf_p, clump_p2=bonf_p,
        clump_r2=params.clump_r2, clump_kb=params.clump_kb)

    # panel-wide significant-association map for the pleiotropy screen
    snp_proteins: dict = {}
    for protein in sorted(pqtl):
        for rec in pqtl[protein]:
            if rec.pvalue <= bonf_p:
                snp_proteins.setdefault(rec.rsid, set()).add(protein)
    _, audit = pleiotropy_filter(snp_proteins, groups)
    passed_pleiotropy = {r for r, note in audit.items()
                         if note.startswith("retained")}

    instrument_sets: dict = {}
    for protein in sorted(pqtl):
        ann = annotation.get(protein)
        if ann is None:
            raise UnknownProtein(
                f"protein {protein!r} missing from the gene annotation")
        survivors = mhc_filter([rec for rec in pqtl[protein]
                                if rec.pvalue <= bonf_p])
        table = AssocTable(protein, tuple(survivors), TraitKind.PQTL)
        chosen = []
        for cl in clump(table, ld, eff_params):
            rec = cl.index
            if rec.rsid not in passed_pleiotropy:
                continue
            label = classify_cis_trans(rec, ann)
            chosen.append(Instrument(
                record=rec,
                label=label,
                provenance=("bonferroni", "non_mhc", "clump_index",
                            "pleiotropy_ok", label.value),
            ))
        instrument_sets[protein] = InstrumentSet(protein, tuple(chosen))

    def analyze_protein(protein: str):
        iset = instrument_sets[protein]
        primary: dict = {}
        per_mode_rows: list = []
        for mode in AnalysisMode:
            try:
                estimates = protein_mr(protein, iset, outcome, mode,
                                       n_boot=n_boot, seed=seed)
            except NoInstruments:
                continue
            primary[mode] = estimates[0]
            for est in estimates:
                per_mode_rows.append((mode, est))
        flag = direction_consistency(primary) if len(primary) >= 2 else None
        return flag, per_mode_rows

    ordered = sorted(pqtl)
    if jobs > 1 and len(ordered) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(analyze_protein, ordered))
    else:
        outcomes = [analyze_protein(p) for p in ordered]

    # assembly stays in sorted-protein order, so results are identical
    # whatever the worker count
    rows: list = []
    consistency: dict = {}
    for protein, (flag, per_mode_rows) in zip(ordered, outcomes):
        consistency[protein] = flag
        for mode, est in per_mode_rows:
            rows.append(PipelineRow(
                protein=protein,
                mode=mode,
                method=est.method.value,
                estimate=est.estimate,
                se=est.se,
                pvalue=est.pvalue,
                n_snps=est.n_snps,
                consistent=flag,
            ))

    return PipelineResult(
        rows=tuple(rows),
        instruments=instrument_sets,
        consistency=consistency,
        pleiotropy_audit=audit,
        bonferroni_p=bonf_p,
    )


REPORT_HEADER = ("protein", "mode", "method", "estimate", "se", "pvalue",
                 "n_snps", "consistent")


def write_pipeline_report(result: PipelineResult, path,
                          float_format: str = "%.10g",
                          metadata: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in metadata:
            fh.write(f"# {line}\n")
        fh.write("\t".join(REPORT_HEADER) + "\n")
        for row in result.rows:
            flag = "NA" if row.consistent is None else str(row.consistent).lower()
            fh.write("\t".join([
                row.protein,
                row.mode.value,
                row.method,
                float_format % row.estimate,
                float_format % row.se,
                float_format % row.pvalue,
                str(row.n_snps),
                flag,
            ]) + "\n")


# ---------------------------------------------------------------------------
# Input loaders
# ---------------------------------------------------------------------------

def load_annotation(path) -> dict:
    """Annotation TSV with columns gene, chrom, tss, protein.

    Returns a protein -> GeneAnnotation map; duplicate proteins are
    rejected.
    """
    path = Path(path)
    lines = _data_lines(path)
    try:
        _, header = next(lines)
    except StopIteration:
        raise MissingColumn(f"{path}: file is empty") from None
    columns = header.split("\t") if "\t" in header else header.split()
    required = ("gene", "chrom", "tss", "protein")
    idx = {}
    for name in required:
        if name not in columns:
            raise MissingColumn(f"{path}: missing column {name!r}")
        idx[name] = columns.index(name)

    out: dict = {}
    for row_number, (lineno, line) in enumerate(lines, start=1):
        fields = line.split("\t") if "\t" in line else line.split()
        if len(fields) != len(columns):
            raise InvalidValue(row_number, "row",
                               f"{path}, line {lineno}: wrong field count")
        try:
            tss = int(float(fields[idx["tss"]]))
        except ValueError:
            raise InvalidValue(row_number, "tss",
                               f"cannot parse {fields[idx['tss']]!r}") from None
        ann = GeneAnnotation(
            gene=fields[idx["gene"]],
            chrom=fields[idx["chrom"]],
            tss=tss,
            protein=fields[idx["protein"]],
        )
        if ann.protein in out:
            raise InvalidValue(row_number, "protein",
                               f"duplicate protein {ann.protein!r}")
        out[ann.protein] = ann
    return out


def load_groups(path) -> PathwayGroups:
    """Groups file: one group per line, ``name<TAB>protein1,protein2,...``."""
    groups: dict = {}
    for lineno, line in _data_lines(Path(path)):
        if "\t" not in line:
            raise InvalidValue(lineno, "group",
                               f"line {lineno}: expected name<TAB>members")
        name, members = line.split("\t", 1)
        groups[name.strip()] = frozenset(
            m.strip() for m in members.split(",") if m.strip())
    return PathwayGroups(groups)
