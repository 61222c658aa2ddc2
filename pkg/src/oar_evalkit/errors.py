"""Exception hierarchy shared by all toolkit modules."""


class EvalkitError(Exception):
    """Base class for all toolkit errors."""


class FormatError(EvalkitError):
    """Malformed or truncated file (bad magic, short header, unknown datatype)."""


class UnsupportedRankError(FormatError):
    """Volume rank is not 3 and not reducible to 3 by dropping trailing singleton dims."""


class LabelFormatError(EvalkitError):
    """Float-stored label data with non-integer values, or negative label codes."""


class ValidationError(EvalkitError):
    """Invalid manifest, schema, or score records; carries per-record details."""

    def __init__(self, message, records=None):
        super().__init__(message)
        self.records = list(records) if records else []


class GeometryError(EvalkitError):
    """Operands do not share a voxel grid (dims, spacing, origin)."""


class OrientationError(GeometryError):
    """Operands do not share anatomical axis codes."""


class UnknownStructureError(EvalkitError):
    """Structure name not in the organ schema and not covered by a merge rule."""


class SchemaError(EvalkitError):
    """Organ schema violates its own invariants."""


class EmptyStructureError(EvalkitError):
    """Surface-distance computation requested against an empty mask."""


class InputError(EvalkitError):
    """Statistical routine called with unusable inputs (empty group, length mismatch)."""


class SplitError(EvalkitError):
    """Requested split ratio is infeasible for the given patient grouping."""
