"""Exception hierarchy.

Every error carries a stable ``category`` token so the CLI can report
machine-readable failure classes.
"""


class CephaloQCError(Exception):
    """Base class for all package errors."""

    category = "error"


class InvalidDimensionError(CephaloQCError):
    category = "invalid-dimension"


class DegenerateFaceError(CephaloQCError):
    category = "degenerate-face"


class NonHomeomorphicMapError(CephaloQCError):
    """Raised when a map folds; ``face_ids`` lists the offending faces."""

    category = "non-homeomorphism"

    def __init__(self, message, face_ids=None):
        super().__init__(message)
        self.face_ids = [] if face_ids is None else list(face_ids)


class NotQuasiConformalError(CephaloQCError):
    category = "not-quasi-conformal"


class SolverFailureError(CephaloQCError):
    category = "solver-failure"


class InvalidConstraintError(CephaloQCError):
    category = "invalid-constraint"


class InvalidLandmarkError(CephaloQCError):
    category = "invalid-landmark"


class RegistrationFailureError(CephaloQCError):
    category = "registration-failure"


class InvalidWindowError(CephaloQCError):
    category = "invalid-window"


class DegenerateLandmarkError(CephaloQCError):
    category = "degenerate-landmark"


class NormalizationError(CephaloQCError):
    category = "normalization"


class InvalidSampleError(CephaloQCError):
    category = "invalid-sample"


class InvalidCohortError(CephaloQCError):
    category = "invalid-cohort"


class InvalidKError(CephaloQCError):
    category = "invalid-k"


class InvalidInputError(CephaloQCError):
    category = "invalid-input"


class StratificationError(CephaloQCError):
    category = "stratification"


class IngestionError(CephaloQCError):
    category = "ingestion"


class GenerationError(CephaloQCError):
    category = "generation"


class UsageError(CephaloQCError):
    category = "usage"
