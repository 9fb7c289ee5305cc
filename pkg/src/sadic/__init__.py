"""Combinatorics-on-words toolkit: periods and critical positions,
free-monoid morphisms and their elementary decompositions, language
generation for directive sequences, recognizability analysis,
return-word coding towers, and letter-to-letter factor maps.
"""

from .errors import (
    FormatError,
    HypothesisError,
    InsufficientDepthError,
    SadicError,
)

__all__ = [
    "FormatError",
    "HypothesisError",
    "InsufficientDepthError",
    "SadicError",
]

__version__ = "0.1.0"
