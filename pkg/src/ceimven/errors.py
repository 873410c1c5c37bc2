"""Exception taxonomy shared across the package.

The CLI maps these onto its exit codes: data problems -> 3, numeric
failures -> 4, I/O failures -> 5 (plain OSError also maps to 5).
"""


class CeimvenError(Exception):
    """Base class for package-specific failures."""


class ShapeError(CeimvenError, ValueError):
    """Operands have incompatible shapes; message carries both shapes."""


class DataError(CeimvenError):
    """Dataset layout, decoding, or labeling problem."""


class NumericError(CeimvenError):
    """Non-finite value encountered where a finite one is required."""


class ArtifactError(CeimvenError):
    """Model artifact cannot be read."""


class ArtifactVersionError(ArtifactError):
    """Artifact format version is not supported."""


class ArtifactChecksumError(ArtifactError):
    """Artifact payload does not match its recorded checksum."""


class ArtifactTruncatedError(ArtifactError):
    """Artifact file ends before the declared payload does."""
