"""Exception and warning types shared across the package."""


class PackscopeError(Exception):
    """Base class for every error raised by packscope."""


# parsing
class MalformedPe(PackscopeError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class UnmappedRva(PackscopeError):
    def __init__(self, rva: int):
        super().__init__(f"RVA {rva:#x} is not covered by headers or any section")
        self.rva = rva


# preprocessing
class DeletedFeature(PackscopeError):
    pass


class EmptyMatrix(PackscopeError):
    pass


class BadK(PackscopeError):
    pass


# labeling
class NoVotes(PackscopeError):
    pass


class DuplicateVote(PackscopeError):
    pass


# classifiers
class UnfittedModel(PackscopeError):
    pass


class NoSplit(PackscopeError):
    pass


class SingleClass(PackscopeError):
    pass


class UnsupportedFamily(PackscopeError):
    pass


class DimensionMismatch(PackscopeError):
    pass


class BadConfig(PackscopeError):
    pass


class NonConvergence(UserWarning):
    """Emitted when an iterative solver stops at its iteration cap."""

    def __init__(self, family: str, iterations: int):
        super().__init__(f"{family} did not converge after {iterations} iterations")
        self.family = family
        self.iterations = iterations


class OutOfGrid(UserWarning):
    pass


# feature analysis
class EmptySelection(PackscopeError):
    pass


class ZeroAccuracy(PackscopeError):
    pass


# evaluation
class LengthMismatch(PackscopeError):
    pass


class TimeOrder(PackscopeError):
    pass


class TooFewPoints(PackscopeError):
    pass


class ZeroTrainTime(PackscopeError):
    pass


# corpus / persistence
class BadProfile(PackscopeError):
    pass


class FormatVersionMismatch(PackscopeError):
    pass


class CorruptRow(PackscopeError):
    def __init__(self, line: int, reason: str = ""):
        super().__init__(f"line {line}: {reason}" if reason else f"line {line}")
        self.line = line
