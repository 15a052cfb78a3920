"""Data model, parsers and allele harmonization for summary statistics.

The two file formats handled here are the gene-effect matrix (``.matrix``,
header ``GENES <trait1> ... <traitk> BETA_GWAS``, one row per SNP) and
generic per-SNP summary-statistics tables with configurable column names.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from .errors import (
    BadHeader,
    DimensionMismatch,
    DuplicateSnp,
    EmptyMatrix,
    InvalidValue,
    MissingColumn,
    NoOverlap,
    RowWidthMismatch,
)

VALID_CHROMS = frozenset([str(i) for i in range(1, 23)] + ["X", "Y", "MT"])
SNP_BASES = frozenset("ACGT")
_COMPLEMENT = {"A": "T", "T": "A", "C": "G", "G": "C"}

#: Canonical column names understood by :func:`parse_assoc_table`.
REQUIRED_COLUMNS = (
    "rsid", "chrom", "pos", "effect_allele", "other_allele",
    "beta", "se", "pvalue",
)
OPTIONAL_COLUMNS = ("n", "eaf")

_MISSING_TOKENS = frozenset(["", ".", "NA", "NAN", "NONE"])


class TraitKind(str, enum.Enum):
    GWAS_OUTCOME = "gwas_outcome"
    EQTL = "eqtl"
    PQTL = "pqtl"
    MQTL = "mqtl"
    METHYLATION = "methylation"
    EXPOSURE = "exposure"


class Action(str, enum.Enum):
    """What harmonization did with one exposure/outcome SNP pair."""

    KEPT = "kept"
    SIGN_FLIPPED = "sign_flipped"
    DROPPED_PALINDROMIC = "dropped_palindromic"
    DROPPED_ALLELE_MISMATCH = "dropped_allele_mismatch"


class PalindromePolicy(str, enum.Enum):
    """How to treat palindromic (A/T, G/C) SNPs during harmonization.

    INFER drops the SNP when either side's allele frequency is missing or
    ambiguous (in [0.42, 0.58]) and otherwise uses the frequencies to decide
    the strand. DROP always drops. KEEP trusts the reported alleles.
    """

    INFER = "infer"
    DROP = "drop"
    KEEP = "keep"


AMBIGUOUS_EAF_LOW = 0.42
AMBIGUOUS_EAF_HIGH = 0.58


def normalize_chrom(raw: str) -> str:
    chrom = raw.strip().upper()
    if chrom.startswith("CHR"):
        chrom = chrom[3:]
    if chrom == "M":
        chrom = "MT"
    return chrom


def _check_record_fields(rsid, chrom, pos, effect_allele, other_allele,
                         beta, se, pvalue, n, eaf):
    """Yield (field, message) for every invariant violation."""
    if not rsid:
        yield "rsid", "empty identifier"
    if chrom not in VALID_CHROMS:
        yield "chrom", f"unknown chromosome label {chrom!r}"
    if pos < 1:
        yield "pos", f"position must be >= 1, got {pos}"
    if not effect_allele or not other_allele:
        yield "effect_allele", "empty allele string"
    elif effect_allele == other_allele:
        yield "other_allele", "effect and other allele are identical"
    if not math.isfinite(beta):
        yield "beta", f"non-finite effect size {beta!r}"
    if not (se > 0) or not math.isfinite(se):
        yield "se", f"standard error must be > 0, got {se!r}"
    if not (0.0 <= pvalue <= 1.0):
        yield "pvalue", f"p-value must lie in [0, 1], got {pvalue!r}"
    if n is not None and n <= 0:
        yield "n", f"sample size must be > 0, got {n!r}"
    if eaf is not None and not (0.0 <= eaf <= 1.0):
        yield "eaf", f"allele frequency must lie in [0, 1], got {eaf!r}"


@dataclass(frozen=True)
class SnpRecord:
    """Per-SNP summary statistics for one trait.

    Alleles are uppercased and the chromosome label normalized ("chr6" ->
    "6") on construction; invariant violations raise ``ValueError``.
    """

    rsid: str
    chrom: str
    pos: int
    effect_allele: str
    other_allele: str
    beta: float
    se: float
    pvalue: float
    n: Optional[int] = None
    eaf: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "chrom", normalize_chrom(self.chrom))
        object.__setattr__(self, "effect_allele", self.effect_allele.strip().upper())
        object.__setattr__(self, "other_allele", self.other_allele.strip().upper())
        problems = list(_check_record_fields(
            self.rsid, self.chrom, self.pos, self.effect_allele,
            self.other_allele, self.beta, self.se, self.pvalue, self.n, self.eaf))
        if problems:
            raise ValueError("; ".join(f"{f}: {m}" for f, m in problems))

    @property
    def is_palindromic(self) -> bool:
        pair = {self.effect_allele, self.other_allele}
        return pair == {"A", "T"} or pair == {"C", "G"}

    @property
    def is_snp(self) -> bool:
        return (self.effect_allele in SNP_BASES
                and self.other_allele in SNP_BASES)


@dataclass(frozen=True)
class AssocTable:
    """One trait's summary statistics; rsids are unique within a table."""

    trait_name: str
    records: tuple
    trait_kind: TraitKind = TraitKind.GWAS_OUTCOME
    _index: Mapping[str, SnpRecord] = field(
        init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        index = {}
        for rec in self.records:
            if rec.rsid in index:
                raise DuplicateSnp(
                    f"rsid {rec.rsid!r} appears more than once in table "
                    f"{self.trait_name!r}")
            index[rec.rsid] = rec
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[SnpRecord]:
        return iter(self.records)

    def __contains__(self, rsid: str) -> bool:
        return rsid in self._index

    def get(self, rsid: str) -> Optional[SnpRecord]:
        return self._index.get(rsid)

    @property
    def rsids(self) -> tuple:
        return tuple(r.rsid for r in self.records)


@dataclass(frozen=True)
class EffectMatrix:
    """n x k exposure-effect matrix plus the outcome-effect vector.

    A zero entry in ``beta`` means "this SNP is not a QTL for this trait"
    and is treated as a literal zero downstream.
    """

    snps: tuple
    traits: tuple
    beta: np.ndarray
    outcome_beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "snps", tuple(self.snps))
        object.__setattr__(self, "traits", tuple(self.traits))
        beta = np.ascontiguousarray(self.beta, dtype=float)
        outcome = np.ascontiguousarray(self.outcome_beta, dtype=float)
        if beta.ndim != 2 or beta.shape != (len(self.snps), len(self.traits)):
            raise DimensionMismatch(
                f"beta has shape {beta.shape}, expected "
                f"({len(self.snps)}, {len(self.traits)})")
        if outcome.shape != (len(self.snps),):
            raise DimensionMismatch(
                f"outcome_beta has length {outcome.shape[0]}, expected "
                f"{len(self.snps)}")
        if len(set(self.snps)) != len(self.snps):
            raise DuplicateSnp("duplicate rsids in effect matrix")
        beta.flags.writeable = False
        outcome.flags.writeable = False
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "outcome_beta", outcome)

    @property
    def n_snps(self) -> int:
        return len(self.snps)

    @property
    def n_traits(self) -> int:
        return len(self.traits)


@dataclass(frozen=True)
class HarmonizedPair:
    """One SNP's aligned exposure/outcome effects.

    Sign flips are applied to the outcome side only; dropped SNPs keep
    their original (unflipped) values so the reason can be audited.
    """

    rsid: str
    beta_exposure: float
    se_exposure: float
    beta_outcome: float
    se_outcome: float
    action_taken: Action

    @property
    def usable(self) -> bool:
        return self.action_taken in (Action.KEPT, Action.SIGN_FLIPPED)


def kept_pairs(pairs: Iterable[HarmonizedPair]) -> list:
    """Pairs that survived harmonization (kept or sign-flipped)."""
    return [p for p in pairs if p.usable]


# ---------------------------------------------------------------------------
# .matrix parsing / serialization
# ---------------------------------------------------------------------------

def _data_lines(path: Path):
    """Non-empty, non-comment lines with their 1-based file line numbers."""
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            yield lineno, stripped


def parse_matrix_file(path) -> EffectMatrix:
    """Parse a ``.matrix`` file (whitespace-delimited, Table-style layout).

    Raises BadHeader, RowWidthMismatch, DuplicateSnp or EmptyMatrix; float
    fields may raise InvalidValue.
    """
    path = Path(path)
    lines = _data_lines(path)
    try:
        _, header = next(lines)
    except StopIteration:
        raise EmptyMatrix(f"{path}: file is empty") from None
    tokens = header.split()
    if len(tokens) < 3 or tokens[0] != "GENES" or tokens[-1] != "BETA_GWAS":
        raise BadHeader(
            f"{path}: expected header 'GENES <trait...> BETA_GWAS', "
            f"got {header!r}")
    traits = tokens[1:-1]
    width = len(traits) + 2

    snps = []
    seen = set()
    beta_rows = []
    outcome = []
    for row_number, (lineno, line) in enumerate(lines, start=1):
        fields = line.split()
        if len(fields) != width:
            raise RowWidthMismatch(
                f"{path}, line {lineno}: expected {width} fields, "
                f"got {len(fields)}")
        rsid = fields[0]
        if rsid in seen:
            raise DuplicateSnp(f"{path}, line {lineno}: duplicate rsid {rsid!r}")
        seen.add(rsid)
        values = []
        for colname, token in zip(traits + ["BETA_GWAS"], fields[1:]):
            try:
                values.append(float(token))
            except ValueError:
                raise InvalidValue(
                    row_number, colname,
                    f"{path}, line {lineno}: not a number: {token!r}") from None
        snps.append(rsid)
        beta_rows.append(values[:-1])
        outcome.append(values[-1])

    if not snps:
        raise EmptyMatrix(f"{path}: no data rows")
    return EffectMatrix(
        snps=tuple(snps),
        traits=tuple(traits),
        beta=np.array(beta_rows, dtype=float),
        outcome_beta=np.array(outcome, dtype=float),
    )


def serialize_matrix_file(matrix: EffectMatrix, path, float_format: str = "%.3E") -> None:
    """Write a ``.matrix`` file; the default format matches the canonical
    4-significant-digit scientific notation, so parse/serialize round-trips
    preserve the printed values."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("\t".join(["GENES", *matrix.traits, "BETA_GWAS"]) + "\n")
        for i, rsid in enumerate(matrix.snps):
            row = [float_format % v for v in matrix.beta[i]]
            row.append(float_format % matrix.outcome_beta[i])
            fh.write("\t".join([rsid, *row]) + "\n")


# ---------------------------------------------------------------------------
# Generic summary-statistics tables
# ---------------------------------------------------------------------------

def _parse_optional_int(token: str):
    if token.strip().upper() in _MISSING_TOKENS:
        return None
    return int(float(token))


def _parse_optional_float(token: str):
    if token.strip().upper() in _MISSING_TOKENS:
        return None
    return float(token)


def parse_assoc_table(
    path,
    column_map: Optional[Mapping[str, str]] = None,
    trait_name: Optional[str] = None,
    trait_kind: TraitKind = TraitKind.GWAS_OUTCOME,
    sep: Optional[str] = "\t",
) -> AssocTable:
    """Parse a delimited summary-statistics file into an AssocTable.

    Parameters
    ----------
    column_map:
        Maps canonical names (rsid, chrom, pos, effect_allele, other_allele,
        beta, se, pvalue, n, eaf) to the file's column names. Unmapped names
        default to themselves; n and eaf are optional.
    sep:
        Field delimiter; None splits on any whitespace.

    Rows violating a record invariant raise InvalidValue with the 1-based
    data row number and field name.
    """
    path = Path(path)
    cmap = {name: name for name in REQUIRED_COLUMNS + OPTIONAL_COLUMNS}
    if column_map:
        unknown = set(column_map) - set(cmap)
        if unknown:
            raise MissingColumn(
                f"unknown canonical column name(s): {sorted(unknown)}")
        cmap.update(column_map)

    lines = _data_lines(path)
    try:
        _, header = next(lines)
    except StopIteration:
        raise BadHeader(f"{path}: file is empty") from None
    columns = header.split(sep) if sep else header.split()
    col_idx = {name: i for i, name in enumerate(columns)}

    missing = [cmap[c] for c in REQUIRED_COLUMNS if cmap[c] not in col_idx]
    if missing:
        raise MissingColumn(f"{path}: missing required column(s) {missing}")
    idx = {c: col_idx[cmap[c]] for c in REQUIRED_COLUMNS}
    for c in OPTIONAL_COLUMNS:
        if cmap[c] in col_idx:
            idx[c] = col_idx[cmap[c]]

    records = []
    for row_number, (lineno, line) in enumerate(lines, start=1):
        fields = line.split(sep) if sep else line.split()
        if len(fields) != len(columns):
            raise RowWidthMismatch(
                f"{path}, line {lineno}: expected {len(columns)} fields, "
                f"got {len(fields)}")

        def grab(canon, conv):
            token = fields[idx[canon]]
            try:
                return conv(token)
            except (ValueError, TypeError):
                raise InvalidValue(
                    row_number, canon, f"cannot parse {token!r}") from None

        rsid = fields[idx["rsid"]].strip()
        chrom = normalize_chrom(fields[idx["chrom"]])
        pos = grab("pos", lambda t: int(float(t)))
        ea = fields[idx["effect_allele"]].strip().upper()
        oa = fields[idx["other_allele"]].strip().upper()
        beta = grab("beta", float)
        se = grab("se", float)
        pvalue = grab("pvalue", float)
        n = grab("n", _parse_optional_int) if "n" in idx else None
        eaf = grab("eaf", _parse_optional_float) if "eaf" in idx else None

        for fieldname, message in _check_record_fields(
                rsid, chrom, pos, ea, oa, beta, se, pvalue, n, eaf):
            raise InvalidValue(row_number, fieldname, message)
        records.append(SnpRecord(rsid, chrom, pos, ea, oa, beta, se,
                                 pvalue, n=n, eaf=eaf))

    return AssocTable(
        trait_name=trait_name if trait_name is not None else path.stem,
        records=tuple(records),
        trait_kind=trait_kind,
    )


def write_assoc_table(table: AssocTable, path) -> None:
    """Write an AssocTable as a TSV with the canonical column names."""
    with open(path, "w") as fh:
        fh.write("\t".join(REQUIRED_COLUMNS + OPTIONAL_COLUMNS) + "\n")
        for rec in table.records:
            fh.write("\t".join([
                rec.rsid, rec.chrom, str(rec.pos),
                rec.effect_allele, rec.other_allele,
                repr(rec.beta), repr(rec.se), repr(rec.pvalue),
                "NA" if rec.n is None else str(rec.n),
                "NA" if rec.eaf is None else repr(rec.eaf),
            ]) + "\n")


# ---------------------------------------------------------------------------
# Harmonization
# ---------------------------------------------------------------------------

def _complement(allele: str) -> Optional[str]:
    if allele in _COMPLEMENT:
        return _COMPLEMENT[allele]
    return None


def _eaf_ambiguous(eaf: Optional[float]) -> bool:
    return eaf is None or AMBIGUOUS_EAF_LOW <= eaf <= AMBIGUOUS_EAF_HIGH


def _match_alleles(exp: SnpRecord, out: SnpRecord):
    """Return 'same', 'swap' or None for the outcome's allele orientation.

    Complementary-strand encodings of non-palindromic SNPs are treated as
    matches; for palindromic SNPs the two strands are indistinguishable so
    only the nominal orientation is reported.
    """
    e_ea, e_oa = exp.effect_allele, exp.other_allele
    o_ea, o_oa = out.effect_allele, out.other_allele
    if (o_ea, o_oa) == (e_ea, e_oa):
        return "same"
    if (o_ea, o_oa) == (e_oa, e_ea):
        return "swap"
    if exp.is_snp and out.is_snp and not exp.is_palindromic:
        c_ea, c_oa = _complement(e_ea), _complement(e_oa)
        if (o_ea, o_oa) == (c_ea, c_oa):
            return "same"
        if (o_ea, o_oa) == (c_oa, c_ea):
            return "swap"
    return None


def _harmonize_one(exp: SnpRecord, out: SnpRecord,
                   policy: PalindromePolicy) -> HarmonizedPair:
    orientation = _match_alleles(exp, out)
    if orientation is None:
        return HarmonizedPair(exp.rsid, exp.beta, exp.se, out.beta, out.se,
                              Action.DROPPED_ALLELE_MISMATCH)

    flip = orientation == "swap"
    if exp.is_palindromic:
        if policy is PalindromePolicy.DROP:
            return HarmonizedPair(exp.rsid, exp.beta, exp.se, out.beta,
                                  out.se, Action.DROPPED_PALINDROMIC)
        if policy is PalindromePolicy.INFER:
            out_eaf = out.eaf
            if flip and out_eaf is not None:
                out_eaf = 1.0 - out_eaf
            if _eaf_ambiguous(exp.eaf) or _eaf_ambiguous(out_eaf):
                return HarmonizedPair(exp.rsid, exp.beta, exp.se, out.beta,
                                      out.se, Action.DROPPED_PALINDROMIC)
            # opposite frequency sides mean the outcome reports the other
            # strand, which for a palindrome is the opposite allele
            if (exp.eaf < 0.5) != (out_eaf < 0.5):
                flip = not flip
        # PalindromePolicy.KEEP trusts the nominal orientation

    beta_out = -out.beta if flip else out.beta
    action = Action.SIGN_FLIPPED if flip else Action.KEPT
    return HarmonizedPair(exp.rsid, exp.beta, exp.se, beta_out, out.se, action)


def harmonize(
    exposure: AssocTable,
    outcome: AssocTable,
    palindrome_policy: PalindromePolicy = PalindromePolicy.INFER,
) -> list:
    """Align outcome effect alleles to the exposure's.

    Returns one HarmonizedPair per shared rsid, in exposure order, including
    dropped SNPs with their drop reason. Raises NoOverlap when the tables
    share no rsids.
    """
    pairs = []
    for exp_rec in exposure:
        out_rec = outcome.get(exp_rec.rsid)
        if out_rec is None:
            continue
        pairs.append(_harmonize_one(exp_rec, out_rec, palindrome_policy))
    if not pairs:
        raise NoOverlap(
            f"no shared rsids between {exposure.trait_name!r} and "
            f"{outcome.trait_name!r}")
    return pairs
