"""Exception classes shared across the toolkit.

Every error carries an ``exit_code`` so the CLI can map failure classes to
distinct shell exit statuses: 1 = configuration, 2 = parsing/input,
3 = dimension/structure, 4 = numerical, 5 = insufficient instruments.
"""


class OmicsMrError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(OmicsMrError):
    """Invalid run configuration (bad flag value, unknown config key, ...)."""

    exit_code = 1


class InvalidSizes(ConfigError):
    """Model-size bounds are inconsistent (kmin > kmax, or kmax > k)."""


# ---------------------------------------------------------------------------
# Parsing / input errors (exit code 2)
# ---------------------------------------------------------------------------

class ParseError(OmicsMrError):
    exit_code = 2


class BadHeader(ParseError):
    """Header line of an input file does not match the expected layout."""


class RowWidthMismatch(ParseError):
    """A data row has the wrong number of fields."""


class DuplicateSnp(ParseError):
    """The same rsid appears more than once in one table."""


class EmptyMatrix(ParseError):
    """An effect-size matrix file contains no data rows."""


class MissingColumn(ParseError):
    """A required column is absent from a delimited input file."""


class InvalidValue(ParseError):
    """A field value violates a record invariant.

    Carries the 1-based data row number and the offending field name.
    """

    def __init__(self, row, field, message):
        super().__init__(f"row {row}, field '{field}': {message}")
        self.row = row
        self.field = field


class UnknownProtein(ParseError):
    """No gene annotation is available for the requested protein."""


# ---------------------------------------------------------------------------
# Dimension / structure errors (exit code 3)
# ---------------------------------------------------------------------------

class StructureError(OmicsMrError):
    exit_code = 3


class DimensionMismatch(StructureError):
    """Companion inputs disagree on the number of SNPs."""


class NotSymmetric(StructureError):
    """An LD matrix is not symmetric within tolerance."""


class OutOfRange(StructureError):
    """A correlation entry lies outside [-1, 1]."""


class MissingLd(StructureError):
    """An rsid in the association table is absent from the LD matrix."""


# ---------------------------------------------------------------------------
# Numerical errors (exit code 4)
# ---------------------------------------------------------------------------

class NumericalError(OmicsMrError):
    exit_code = 4


class SingularDesign(NumericalError):
    """The multivariable design is rank deficient (one exposure's genetic
    associations are a linear combination of the others')."""


class DegenerateDesign(NumericalError):
    """Regression design has no spread (all exposure effects identical)."""


class NumericalOverflow(NumericalError):
    """A likelihood or determinant computation left the finite range."""


class ZeroExposureEffect(NumericalError):
    """Wald ratio requested for an instrument with zero exposure effect."""


# ---------------------------------------------------------------------------
# Insufficient-instrument errors (exit code 5)
# ---------------------------------------------------------------------------

class InstrumentError(OmicsMrError):
    exit_code = 5


class EmptyInstrumentSet(InstrumentError):
    """An estimator received no usable instruments."""


class TooFewInstruments(InstrumentError):
    """Fewer instruments than the method's minimum (3 for Egger/median)."""


class NoOverlap(InstrumentError):
    """Exposure and outcome tables share no rsids."""


class NoSignificantEqtls(InstrumentError):
    """Instrument selection found no significant, independent eQTLs."""


class NoInstruments(InstrumentError):
    """The requested analysis mode selects an empty instrument set."""
