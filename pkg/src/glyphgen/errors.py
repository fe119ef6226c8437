"""Exception types shared across the package.

Every contract violation raises a named exception so callers can react to
specific failure modes instead of parsing messages.
"""


class GlyphGenError(Exception):
    """Base class for all package errors."""


# --- rendering / data generation ---

class NonEmptyWordRequired(GlyphGenError):
    pass


class UnsupportedGlyph(GlyphGenError):
    pass


class CanvasOverflow(GlyphGenError):
    pass


class EmptyMask(GlyphGenError):
    pass


class OverlapError(GlyphGenError):
    pass


class OutOfBounds(GlyphGenError):
    pass


class ExhaustedRetries(GlyphGenError):
    pass


# --- recognizer / CTC ---

class UnknownSymbol(GlyphGenError):
    pass


class InfeasibleTarget(GlyphGenError):
    pass


class UntrainedModel(GlyphGenError):
    pass


class CoverageError(GlyphGenError):
    pass


class Diverged(GlyphGenError):
    pass


# --- prompts / tokenization ---

class UnbalancedQuotes(GlyphGenError):
    pass


class SequenceTooLong(GlyphGenError):
    pass


# --- diffusion / losses ---

class ShapeMismatch(GlyphGenError):
    pass


class InvalidT(GlyphGenError):
    pass


class NumericalUnderflow(GlyphGenError):
    pass


class InvalidWeights(GlyphGenError):
    pass


class MissingMaps(GlyphGenError):
    pass


class AllMasksEmpty(GlyphGenError):
    pass


# --- training / config ---

class MissingOCR(GlyphGenError):
    pass


class ConfigError(GlyphGenError):
    pass
