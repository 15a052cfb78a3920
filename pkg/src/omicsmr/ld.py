"""Linkage-disequilibrium matrices and greedy clumping.

An :class:`LdMatrix` stores signed correlations r between variants; squares
are taken where a threshold is defined on r2. Clumping reduces an
association table to approximately independent index SNPs, greedily from
the smallest p-value outward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    DimensionMismatch,
    EmptyMatrix,
    InvalidValue,
    MissingLd,
    NotSymmetric,
    OutOfRange,
    RowWidthMismatch,
)
from .sumstats import AssocTable, SnpRecord, _data_lines

SYMMETRY_TOL = 1e-8
DIAG_TOL = 1e-8
RANGE_TOL = 1e-8


@dataclass(frozen=True)
class LdMatrix:
    """Square matrix of signed LD correlations r.

    ``snps`` names the rows; when None the matrix is positional and callers
    must supply variants in the same order. Validation enforces symmetry,
    a unit diagonal, and entries in [-1, 1], each to 1e-8; entries within
    tolerance of the bounds are clamped onto them.
    """

    r: np.ndarray
    snps: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        vals = np.asarray(self.r, dtype=float)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise DimensionMismatch(
                f"LD matrix must be square, got shape {vals.shape}"
            )
        if vals.shape[0] == 0:
            raise EmptyMatrix("LD matrix has no rows")
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(vals))[0]
            raise OutOfRange(
                f"non-finite LD value at row {bad[0]}, column {bad[1]}"
            )
        asym = np.max(np.abs(vals - vals.T)) if vals.size else 0.0
        if asym > SYMMETRY_TOL:
            raise NotSymmetric(
                f"LD matrix asymmetry {asym:.3e} exceeds tolerance {SYMMETRY_TOL:.0e}"
            )
        vals = (vals + vals.T) / 2.0
        diag_err = np.max(np.abs(np.diag(vals) - 1.0))
        if diag_err > DIAG_TOL:
            raise OutOfRange(
                f"LD diagonal deviates from 1 by {diag_err:.3e} "
                f"(tolerance {DIAG_TOL:.0e})"
            )
        np.fill_diagonal(vals, 1.0)
        over = np.max(np.abs(vals)) - 1.0
        if over > RANGE_TOL:
            bad = np.argwhere(np.abs(vals) > 1.0 + RANGE_TOL)[0]
            raise OutOfRange(
                f"LD value {vals[bad[0], bad[1]]:.6f} at row {bad[0]}, "
                f"column {bad[1]} outside [-1, 1]"
            )
        vals = np.clip(vals, -1.0, 1.0)
        if self.snps is not None:
            names = tuple(self.snps)
            if len(names) != vals.shape[0]:
                raise DimensionMismatch(
                    f"{len(names)} SNP names for a {vals.shape[0]}-row LD matrix"
                )
            object.__setattr__(self, "snps", names)
        vals.setflags(write=False)
        object.__setattr__(self, "r", vals)

    @property
    def n(self) -> int:
        return self.r.shape[0]

    @property
    def r2(self) -> np.ndarray:
        return self.r**2

    def submatrix(self, rsids: tuple[str, ...] | list[str]) -> "LdMatrix":
        """Reorder and subset to the given rsids; requires named rows."""
        if self.snps is None:
            raise MissingLd("LD matrix has no SNP names to subset by")
        idx_of = {s: i for i, s in enumerate(self.snps)}
        missing = [name for name in rsids if name not in idx_of]
        if missing:
            shown = ", ".join(missing[:5])
            extra = f" (+{len(missing) - 5} more)" if len(missing) > 5 else ""
            raise MissingLd(f"SNPs absent from LD panel: {shown}{extra}")
        rows = np.array([idx_of[name] for name in rsids], dtype=np.intp)
        return LdMatrix(self.r[np.ix_(rows, rows)], tuple(rsids))

    @staticmethod
    def identity(n: int, snps: tuple[str, ...] | None = None) -> "LdMatrix":
        return LdMatrix(np.eye(n), snps)

    @staticmethod
    def ar1(n: int, rho: float, snps: tuple[str, ...] | None = None) -> "LdMatrix":
        """AR(1) structure: r_ij = rho ** |i - j|."""
        if not -1.0 < rho < 1.0:
            raise OutOfRange(f"AR(1) correlation must be in (-1, 1), got {rho}")
        idx = np.arange(n)
        return LdMatrix(rho ** np.abs(idx[:, None] - idx[None, :]), snps)


def parse_ld_file(path, snps: tuple[str, ...] | None = None) -> LdMatrix:
    """Read a whitespace-delimited square LD matrix.

    Blank lines and '#' comments are skipped. ``snps`` (for instance the
    row order of the paired effect matrix) becomes the row names.
    """
    rows: list[list[float]] = []
    width: int | None = None
    for lineno, line in _data_lines(path):
        tokens = line.split()
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise RowWidthMismatch(
                f"{path}: line {lineno} has {len(tokens)} values, "
                f"expected {width}"
            )
        try:
            rows.append([float(t) for t in tokens])
        except ValueError as exc:
            raise InvalidValue(lineno, "ld", f"{path}: {exc}") from None
    if not rows:
        raise EmptyMatrix(f"{path}: no LD rows found")
    vals = np.asarray(rows, dtype=float)
    if vals.shape[0] != vals.shape[1]:
        raise DimensionMismatch(
            f"{path}: LD matrix is {vals.shape[0]} x {vals.shape[1]}, must be square"
        )
    if snps is not None and len(snps) != vals.shape[0]:
        raise DimensionMismatch(
            f"{path}: {vals.shape[0]} LD rows but {len(snps)} SNPs expected"
        )
    return LdMatrix(vals, snps)


def serialize_ld_file(ld: LdMatrix, path, float_format: str = "%.17g") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in ld.r:
            fh.write("\t".join(float_format % v for v in row))
            fh.write("\n")


@dataclass(frozen=True)
class ClumpParams:
    """Greedy clumping thresholds.

    ``clump_p1`` gates index SNPs, ``clump_p2`` gates members, ``clump_r2``
    is the minimum squared correlation for absorption into a clump, and
    ``clump_kb`` the window half-width in kilobases around the index.
    clump_p1 <= clump_p2 is not required.
    """

    clump_p1: float = 5e-8
    clump_p2: float = 5e-8
    clump_r2: float = 0.01
    clump_kb: float = 1000.0

    def __post_init__(self) -> None:
        for name in ("clump_p1", "clump_p2"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise OutOfRange(f"{name} must be in (0, 1], got {v}")
        if not 0.0 < self.clump_r2 <= 1.0:
            raise OutOfRange(f"clump_r2 must be in (0, 1], got {self.clump_r2}")
        if self.clump_kb <= 0:
            raise OutOfRange(f"clump_kb must be positive, got {self.clump_kb}")

    @property
    def window_bp(self) -> int:
        return int(round(self.clump_kb * 1000.0))


@dataclass(frozen=True)
class Clump:
    """One clump: the index SNP plus every variant it absorbed."""

    index: SnpRecord
    members: tuple[SnpRecord, ...] = field(default_factory=tuple)

    @property
    def size(self) -> int:
        return 1 + len(self.members)

    @property
    def index_rsid(self) -> str:
        return self.index.rsid

    @property
    def member_rsids(self) -> tuple[str, ...]:
        return tuple(m.rsid for m in self.members)


def clump(assoc: AssocTable, ld: LdMatrix, params: ClumpParams | None = None) -> list[Clump]:
    """Greedy LD clumping of an association table.

    Repeatedly the smallest-p unclumped SNP with p <= p1 becomes an index
    and absorbs every unclumped SNP with p <= p2 on its chromosome within
    the window whose r2 with it is at or above the threshold. Ties on p
    break by position then rsid. Clumps come back in discovery order
    (ascending index p); SNPs above p2, or outside every index's reach,
    are left out.
    """
    if params is None:
        params = ClumpParams()
    recs = assoc.records
    if not recs:
        return []
    rsids = [rec.rsid for rec in recs]
    if ld.snps is not None:
        r = ld.submatrix(tuple(rsids)).r
    else:
        if ld.n != len(recs):
            raise DimensionMismatch(
                f"unnamed LD matrix has {ld.n} rows for {len(recs)} SNPs"
            )
        r = ld.r
    r2 = np.ascontiguousarray(r * r)

    p = np.array([rec.pvalue for rec in recs], dtype=float)
    pos = np.array([rec.pos for rec in recs], dtype=np.int64)
    chrom = np.unique([rec.chrom for rec in recs], return_inverse=True)[1].astype(np.int64)
    order = np.lexsort((np.array(rsids), pos, p)).astype(np.int64)

    index_ids, assign = kernels.clump_greedy(
        order, p, pos, chrom, r2,
        params.clump_p1, params.clump_p2, params.clump_r2,
        np.int64(params.window_bp),
    )

    clumps: list[Clump] = []
    for cid, i in enumerate(index_ids):
        member_ids = [j for j in np.nonzero(assign == cid)[0] if j != i]
        member_ids.sort(key=lambda j: (p[j], pos[j], rsids[j]))
        clumps.append(Clump(recs[int(i)], tuple(recs[int(j)] for j in member_ids)))
    return clumps


def index_table(clumps: list[Clump], source: AssocTable) -> AssocTable:
    """Association table holding only the index SNPs, in discovery order."""
    return AssocTable(
        trait_name=source.trait_name,
        records=tuple(c.index for c in clumps),
        trait_kind=source.trait_kind,
    )
