"""Exception hierarchy shared by every module."""


class OptBoostError(Exception):
    """Base class for all library errors."""


# dataset
class ParseError(OptBoostError):
    pass


class LabelError(OptBoostError):
    pass


class EmptyDataset(OptBoostError):
    pass


# hypothesis pools
class DegeneratePool(OptBoostError):
    pass


class ShapeError(OptBoostError):
    pass


class EntryError(OptBoostError):
    pass


# booster
class DomainError(OptBoostError, ValueError):
    pass


class HaltCondition(OptBoostError):
    """Raised by edge selection when the run cannot continue."""

    reason = "halt"

    def __init__(self, message, j=None, edge=None):
        super().__init__(message)
        self.j = j
        self.edge = edge


class WeakLearningViolation(HaltCondition):
    reason = "weak_learning_violation"


class PerfectHypothesis(HaltCondition):
    reason = "perfect_hypothesis"


class NumericalDrift(OptBoostError):
    pass


# analytics / verifier
class NotStarted(OptBoostError):
    pass


class InsufficientHistory(OptBoostError):
    pass


class DigestMismatch(OptBoostError):
    pass


class TruncatedTrace(OptBoostError):
    pass


class MalformedTrace(OptBoostError):
    pass
