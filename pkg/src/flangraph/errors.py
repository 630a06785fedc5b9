"""Exception types shared across the pipeline."""


class FlanError(Exception):
    """Base class for all library errors."""


class InvariantViolation(FlanError):
    """A domain-type invariant was violated at construction time."""


class ParseError(FlanError):
    """An input record could not be decoded."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedReference(FlanError):
    """A claim-reference pattern matched but does not name a valid earlier claim."""


class EmptySegment(FlanError):
    """Claim segmentation produced a zero-length component."""


class NoIdentity(FlanError):
    """No anchor phrase could be extracted from a segment."""


class MissingAncestor(FlanError):
    """A dependent claim references a claim with no available graph."""


class ShapeMismatch(FlanError):
    """Array shapes are inconsistent with the model configuration."""


class NonFiniteLoss(FlanError):
    """Training produced a NaN or infinite loss."""


class SingleClass(FlanError):
    """Ranking metrics need both labels present."""


class BadMagic(FlanError):
    """Embedding file does not start with the expected magic bytes."""


class DimMismatch(FlanError):
    """A vector's length disagrees with the declared dimension."""


class TruncatedFile(FlanError):
    """Binary payload ended before the declared record count."""


class DuplicateKey(FlanError):
    """The same key appeared twice in a keyed input."""


class MissingEmbedding(FlanError):
    """A node text has no entry in the embedding table."""

    def __init__(self, key: int, text: str):
        self.key = key
        self.text = text
        super().__init__(f"no embedding for key {key} (text {text[:60]!r})")


class EmptyInput(FlanError):
    """An operation that needs at least one record received none."""
