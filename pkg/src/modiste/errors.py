"""Exception hierarchy shared by every engine module."""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(EngineError):
    """Pixel planes that must share a size do not."""


class EmptyInputError(EngineError):
    """An operation that needs at least one operand received none."""


class ParameterError(EngineError):
    """A numeric or enum parameter is outside its allowed range."""


class UnknownLabelError(EngineError):
    """A label name is not part of the vocabulary in play."""


class RecipeError(EngineError):
    """A derived-semantic recipe references labels that are not available."""

    def __init__(self, message: str, missing: tuple[str, ...] = ()):
        super().__init__(message)
        self.missing = missing


class SourceNotFoundError(EngineError):
    """Neither the semantic map nor the open-vocabulary segmenter located the source item."""

    def __init__(self, term: str):
        super().__init__(f"could not locate {term!r} in the image")
        self.term = term


class EmptyMaskError(EngineError):
    """A mask that must be non-empty is all zeros."""


class DegenerateMaskError(EngineError):
    """The matte and the source mask do not overlap; the recolor region would be empty."""


class PlacementNotFoundError(EngineError):
    """No body region could be inferred to place the new item on."""


class BackendError(EngineError):
    """A model backend call failed after exhausting its retries."""

    def __init__(self, capability: str, detail: str):
        super().__init__(f"{capability} backend failed: {detail}")
        self.capability = capability
        self.detail = detail


class ProtocolError(EngineError):
    """A backend answered with a malformed or inconsistent payload."""


class ClassificationError(EngineError):
    """A requirement clause could not be mapped to an edit category."""

    def __init__(self, clause: str, reason: str = "unrecognized edit request"):
        super().__init__(f"{reason}: {clause!r}")
        self.clause = clause


class PipelineError(EngineError):
    """A generation job could not be assembled for its category."""


class CorpusError(EngineError):
    """An evaluation corpus file violates the case schema."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ImageRejectedError(EngineError):
    """An uploaded image cannot be used (undecodable or too small)."""


class NotFoundError(EngineError):
    """A session or artifact id does not resolve."""
