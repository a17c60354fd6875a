"""Exception hierarchy shared by every stage of the library."""


class LVLearnError(Exception):
    """Base class for all library errors."""


class DegenerateColumn(LVLearnError):
    pass


class DegenerateRow(LVLearnError):
    pass


class GenerationFailed(LVLearnError):
    pass


class NotStochastic(LVLearnError):
    pass


class InsufficientSamples(LVLearnError):
    pass


class NotAvailable(LVLearnError):
    pass


class NotPSD(LVLearnError):
    pass


class NotPD(LVLearnError):
    pass


class Infeasible(LVLearnError):
    pass


class NotConverged(LVLearnError):
    """Iteration budget exhausted; ``best`` holds the best iterate found."""

    def __init__(self, message, best=None, info=None):
        super().__init__(message)
        self.best = best
        self.info = info or {}


class TooLarge(LVLearnError):
    pass


class RecoveryFailed(LVLearnError):
    def __init__(self, message, achieved_rank=None):
        super().__init__(message)
        self.achieved_rank = achieved_rank


class IllConditionedPartition(LVLearnError):
    pass


class NoValidPartition(LVLearnError):
    pass


class RankDeficient(LVLearnError):
    pass


class RankConditionUnmet(LVLearnError):
    pass


class DegenerateSpectrum(LVLearnError):
    pass


class NotTriangulable(LVLearnError):
    pass


class ShapeError(LVLearnError):
    pass


class StageError(LVLearnError):
    """Wraps a failure raised inside a named pipeline stage."""

    def __init__(self, stage, cause, level=None):
        where = stage if level is None else f"{stage} (level {level})"
        super().__init__(f"{where}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.level = level
        self.cause = cause
