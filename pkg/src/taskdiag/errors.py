"""Exception hierarchy.

Every error raised on bad input derives from :class:`TaskDiagError` and from
``ValueError`` so callers can catch either.
"""


class TaskDiagError(ValueError):
    """Base class for all taskdiag input/validation errors."""


# stream ingestion
class EmptyFile(TaskDiagError):
    pass


class MalformedRow(TaskDiagError):
    pass


class NonMonotonicTime(TaskDiagError):
    pass


class IrregularStep(TaskDiagError):
    pass


class MissingValue(TaskDiagError):
    """Leading or trailing missing values that cannot be interpolated."""


class InvalidStream(TaskDiagError):
    pass


class UnknownChannel(TaskDiagError):
    pass


# taskifications
class InvalidTaskification(TaskDiagError):
    pass


class WindowTooLong(TaskDiagError):
    pass


class WindowTooShort(TaskDiagError):
    pass


class InvalidShift(TaskDiagError):
    pass


class NeighborhoodEmpty(TaskDiagError):
    pass


# distances
class EmptyInterval(TaskDiagError):
    pass


class EmptyDistribution(TaskDiagError):
    pass


class ChannelMismatch(TaskDiagError):
    pass


class Downsample(TaskDiagError):
    pass


class DimMismatch(TaskDiagError):
    pass


# profiles
class TooFewTasks(TaskDiagError):
    pass


class KindMismatch(TaskDiagError):
    pass


class EmptyProfile(TaskDiagError):
    pass


# synthetic
class InvalidSpec(TaskDiagError):
    pass


# cl metrics
class MissingEntry(TaskDiagError):
    pass


class TooFew(TaskDiagError):
    pass
