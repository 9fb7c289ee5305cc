"""Exception hierarchy shared by the whole package.

Library code raises these; the CLI maps them to exit codes
(HypothesisError -> 2, FormatError and bad usage -> 1).
"""


class SadicError(Exception):
    """Base class for all errors raised by this package."""


class HypothesisError(SadicError):
    """A mathematical precondition of an operation does not hold.

    The message names the violated hypothesis (e.g. "not letter-onto",
    "separation", "not everywhere growing") so callers can report it.
    """


class FormatError(SadicError):
    """Malformed textual input: morphism files, directive-sequence
    files, local-code files, or words that do not parse."""


class InsufficientDepthError(SadicError):
    """A directive sequence was consumed past its available depth.

    Finite sequences raise this at their last listed level; sequences
    with a repeat rule extend on demand up to their materialization cap.
    """
