"""Exception taxonomy shared by all voxelbench modules.

Every failure the toolkit can diagnose raises a subclass of
:class:`VoxelbenchError`, so callers (and the CLI) can distinguish data
problems from solver problems without string matching.
"""


class VoxelbenchError(Exception):
    """Base class for all toolkit errors."""


# --- volume I/O ---------------------------------------------------------


class VolumeError(VoxelbenchError):
    """Base class for volume parsing/writing failures."""


class BadMagic(VolumeError):
    pass


class UnsupportedDatatype(VolumeError):
    pass


class DimensionalityNot3D(VolumeError):
    pass


class TruncatedData(VolumeError):
    pass


class MalformedHeader(VolumeError):
    """Header field outside its legal range (pixdim, vox_offset, scaling)."""


class NonFiniteData(VolumeError):
    """Volume values must be finite; NaN/Inf rejected at I/O boundaries."""


class DimsMismatch(VoxelbenchError):
    pass


class LengthMismatch(VoxelbenchError):
    pass


# --- cohort curation ----------------------------------------------------


class MissingColumn(VoxelbenchError):
    def __init__(self, name: str):
        super().__init__(f"missing required column: {name!r}")
        self.name = name


class BadValue(VoxelbenchError):
    def __init__(self, row: int, column: str, detail: str = ""):
        msg = f"bad value at row {row}, column {column!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.row = row
        self.column = column


class DuplicateKey(VoxelbenchError):
    pass


class EmptyCandidates(VoxelbenchError):
    pass


class MixedKey(VoxelbenchError):
    pass


class NoBaseline(VoxelbenchError):
    pass


class MissingSource(VoxelbenchError):
    def __init__(self, path):
        super().__init__(f"source file not found: {path}")
        self.path = path


class CollisionAtDestination(VoxelbenchError):
    pass


class UnknownLabel(VoxelbenchError):
    pass


# --- feature extraction -------------------------------------------------


class EmptyReference(VoxelbenchError):
    pass


class NonpositiveReferenceMean(VoxelbenchError):
    pass


class EmptyCohort(VoxelbenchError):
    pass


# --- kernels ------------------------------------------------------------


class NonpositiveSigma(VoxelbenchError):
    pass


class TissueProbabilityOutOfRange(VoxelbenchError):
    pass


class StabilityViolated(VoxelbenchError):
    pass


class ShapeMismatch(VoxelbenchError):
    pass


class SubjectMismatch(VoxelbenchError):
    pass


class AlphaOutOfRange(VoxelbenchError):
    pass


# --- SVM ----------------------------------------------------------------


class SingleClass(VoxelbenchError):
    pass


class NotConverged(VoxelbenchError):
    def __init__(self, max_passes: int, gap: float):
        super().__init__(
            f"solver did not reach tolerance within {max_passes} pair updates "
            f"(remaining KKT gap {gap:.3e})"
        )
        self.max_passes = max_passes
        self.gap = gap


# --- evaluation ---------------------------------------------------------


class TooFewPerClass(VoxelbenchError):
    pass


class SingleClassTruth(VoxelbenchError):
    pass


class EmptyInput(VoxelbenchError):
    pass
