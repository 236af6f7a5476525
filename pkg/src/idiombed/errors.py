"""Exception hierarchy shared across the package."""


class IdiombedError(Exception):
    """Base class for all package errors."""


class InvalidMwe(IdiombedError):
    """Surface form does not qualify as a multi-word expression."""


class NameCollision(IdiombedError):
    """Two different surfaces normalize to the same token name."""


class MissingTokenId(IdiombedError):
    """Strict id conversion hit an entry that was never injected."""


class InvalidArgument(IdiombedError):
    """Argument violates an operation precondition."""


class CorpusIoError(IdiombedError):
    """Corpus or artifact file could not be read or written."""


class DanglingAnnotation(IdiombedError):
    """Annotation row references a record absent from the context set."""


class AnnotationParseError(IdiombedError):
    """Annotation row is not valid line-delimited JSON."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class NotCurated(IdiombedError):
    """Operation requires a curated set but rejected labels are present."""


class MatchLost(IdiombedError):
    """Target expression not found in the tokenized context."""


class NotMimickable(IdiombedError):
    """Training word is not a single token in the base encoder."""


class DimMismatch(IdiombedError):
    """Embedding dimension disagrees with the encoder."""


class AlreadyInjected(IdiombedError):
    """Token name already present in the encoder vocabulary."""


class UnregisteredMwe(IdiombedError):
    """Bundle entry has no matching registry entry."""


class DegenerateVector(IdiombedError):
    """Cosine similarity is undefined for a zero vector."""


class SettingViolation(IdiombedError):
    """Idiom-subset data reached a pretrain-regime training run."""


class LengthMismatch(IdiombedError):
    """Paired lists have different lengths."""


class UndefinedCorrelation(IdiombedError):
    """Rank correlation is undefined for a constant list."""


class MissingGrouping(IdiombedError):
    """Idiom-subset pair has no entry in the idiom grouping map."""


class DivisionContext(IdiombedError):
    """Rarity ratio has a zero-count constituent word."""

    def __init__(self, words):
        self.words = list(words)
        super().__init__(f"constituent words never occur: {', '.join(self.words)}")


class PipelineStageError(IdiombedError):
    """Error raised inside a pipeline stage, tagged with the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause
