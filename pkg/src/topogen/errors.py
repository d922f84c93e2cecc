"""Exception types shared across the package."""


class TopogenError(Exception):
    """Base class for all package errors."""


class SingularSystem(TopogenError):
    """Constrained stiffness matrix is not positive definite (rigid modes remain)."""


class NonFiniteInput(TopogenError):
    """An input array contains NaN or infinity."""


class BisectionFailure(TopogenError):
    """The OC Lagrange-multiplier bisection could not reach the volume target."""


class InsufficientScenarios(TopogenError):
    """Fewer than five distinct BC scenarios present; cannot hold four out."""


class ShapeMismatch(TopogenError):
    """Array shapes do not agree with each other or with the domain grid."""


class UnknownCombo(TopogenError):
    """Field-combination id outside the supported 0..8 set."""


class BadMagic(TopogenError):
    """File does not start with the TOPO1 magic bytes."""


class VersionMismatch(TopogenError):
    """TOPO1 container version not supported by this reader."""


class TruncatedFile(TopogenError):
    """TOPO1 file ends before the declared payload is complete."""


class ChecksumMismatch(TopogenError):
    """TOPO1 trailing CRC32 does not match the payload."""


class DegenerateGroundTruth(TopogenError):
    """Ground-truth density has zero volume or non-positive compliance."""


class IdMismatch(TopogenError):
    """Prediction and ground-truth sample ids do not line up."""
