"""Exception hierarchy shared across the toolkit.

Every module-specific error derives from :class:`StrandscapeError` so the CLI
can map "bad input" failures to exit code 1 in one place.
"""


class StrandscapeError(Exception):
    """Base class for all toolkit errors."""


# dp / structure errors


class UnbalancedParentheses(StrandscapeError):
    pass


class LengthMismatch(StrandscapeError):
    pass


class SeparatorCount(StrandscapeError):
    pass


class IllegalCharacter(StrandscapeError):
    pass


class DimensionMismatch(StrandscapeError):
    pass


# trajectory log errors


class MalformedRecord(StrandscapeError):
    pass


class NonMonotoneTime(StrandscapeError):
    pass


class EmptyLog(StrandscapeError):
    pass


class UnknownStrand(StrandscapeError):
    pass


# CTMC errors


class AsymmetricSupport(StrandscapeError):
    pass


class AbsorbingState(StrandscapeError):
    pass


class Unreachable(StrandscapeError):
    pass


# graph / feature errors


class IsolatedNode(StrandscapeError):
    pass


# embedding errors


class DegenerateKernel(StrandscapeError):
    pass


class MissingState(StrandscapeError):
    pass


class RankDeficient(StrandscapeError):
    pass


# evaluation errors


class ZeroDiameter(StrandscapeError):
    pass


# export / bundle errors


class SchemaMismatch(StrandscapeError):
    pass
