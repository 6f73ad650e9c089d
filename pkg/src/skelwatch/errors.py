"""Exception hierarchy shared by all skelwatch modules.

The CLI maps these onto exit codes: anything data- or format-shaped exits 3,
numeric failures exit 4, usage problems exit 2.
"""


class SkelwatchError(Exception):
    """Base class for all errors raised by this package."""

    category = "data"


class DimensionError(SkelwatchError):
    """Tensor shapes are inconsistent; the message names the offending axis."""


class ContractError(SkelwatchError):
    """An operation was called outside its documented contract."""


class ValidationError(SkelwatchError):
    """Input values violate a documented precondition."""


class DegenerateBatchError(ValidationError):
    """Batch statistics were requested over fewer than two samples."""


class ParseError(SkelwatchError):
    """A structured text record could not be parsed."""


class SchemaError(ParseError):
    """A record parsed but does not match the documented schema."""


class FormatError(SkelwatchError):
    """A binary artifact file failed magic/version/checksum validation."""


class EvaluationError(SkelwatchError):
    """A metric is undefined on the given inputs (e.g. single-class ROC)."""


class IncompatibilityError(SkelwatchError):
    """A checkpoint's architecture does not match the requested use."""


class NumericError(SkelwatchError):
    """A numeric invariant failed at runtime (non-finite loss etc.)."""

    category = "numeric"
