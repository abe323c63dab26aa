"""Exception hierarchy shared across the toolkit.

Every domain error derives from :class:`VolsegError` so the CLI can map
"data problem" failures to a single exit code while genuine bugs
(ValueError, RuntimeError, ...) propagate normally.
"""


class VolsegError(Exception):
    """Base class for all domain errors raised by this package."""


# --- geometry / mask errors -------------------------------------------------

class GeometryMismatch(VolsegError):
    """Two volumes that must share a lattice have different dims or spacing."""


class EmptyMask(VolsegError):
    """An operation needing foreground voxels received an empty mask."""


class ShapeMismatch(VolsegError):
    """An array does not have the shape the network configuration demands."""


# --- NIfTI parsing errors ---------------------------------------------------

class BadMagic(VolsegError):
    """The magic bytes are neither 'n+1\\0' nor 'ni1\\0'."""


class BadHeader(VolsegError):
    """Header is structurally invalid (sizeof_hdr wrong, bad dims, ...)."""


class UnsupportedDatatype(VolsegError):
    """Datatype code outside the supported {2, 4, 8, 16, 64} set."""


class TruncatedData(VolsegError):
    """The voxel payload is shorter than the header's dims imply."""


# --- statistics errors ------------------------------------------------------

class DegenerateX(VolsegError):
    """Regression abscissa values are all equal; the slope is undefined."""


class TooFewPoints(VolsegError):
    """Fewer than two points were supplied to a regression."""


# --- manifest / cohort errors -----------------------------------------------

class SchemaError(VolsegError):
    """A manifest line or field does not match the expected schema."""


class DuplicateCaseId(VolsegError):
    """Two manifest entries share a case id."""


class MissingFile(VolsegError):
    """A path referenced by a manifest does not exist."""


class MissingPrediction(VolsegError):
    """An included case has no prediction for the requested model."""


# --- training errors ----------------------------------------------------------

class NonFiniteLoss(VolsegError):
    """Training produced a NaN/Inf loss or gradient."""
