"""Exception hierarchy shared across the package.

Every domain failure derives from SkillclfError so the command-line layer
can map any of them to a single non-zero exit code. Grouping bases exist
only where a caller plausibly catches the group.
"""


class SkillclfError(Exception):
    """Base class for all domain errors raised by this package."""


# --- corpus handling ---------------------------------------------------


class CorpusError(SkillclfError):
    """Base class for annotated-corpus failures."""


class MalformedLineError(CorpusError):
    """A corpus line does not match the ad_id/index/text/labels grammar."""


class InvalidLabelError(CorpusError):
    """A label token does not name a known class or subclass."""


class InvalidIndexError(CorpusError):
    """A sentence index is not a non-negative integer."""


class DuplicateRecordError(CorpusError):
    """Two records share the same (ad_id, sentence_index) key."""


class InvalidSpecError(CorpusError):
    """A synthetic-corpus recipe is inconsistent."""


# --- embedding files ---------------------------------------------------


class EmbeddingFormatError(SkillclfError):
    """Base class for embedding-file failures."""


class BadHeaderError(EmbeddingFormatError):
    """The header line is missing or does not declare dim/count/provider."""


class DimensionMismatchError(SkillclfError):
    """A vector's length does not match the declared dimension."""


class CountMismatchError(EmbeddingFormatError):
    """The number of data rows differs from the declared count."""


class DuplicateKeyError(EmbeddingFormatError):
    """Two rows share the same (ad_id, sentence_index) key."""


class UnparsableFloatError(EmbeddingFormatError):
    """A vector component is not a finite decimal float."""


class MissingKeyError(SkillclfError):
    """A lookup key is absent from the embedding table."""


# --- network construction and training ---------------------------------


class NetworkError(SkillclfError):
    """Base class for network-definition and training failures."""


class ArchitectureSyntaxError(NetworkError):
    """An architecture string does not match the layered notation."""


class UnknownActivationError(NetworkError):
    """An activation name is not one of sigmoid, tanh, elu, lrelu."""


class NonPositiveWidthError(NetworkError):
    """A layer width or input dimension is zero."""


class LengthMismatchError(SkillclfError):
    """Two sequences that must align have different lengths."""


class ShapeMismatchError(SkillclfError):
    """Two arrays that must align have different shapes."""


class EmptyDatasetError(SkillclfError):
    """A training or evaluation set contains no instances."""


class NonFiniteLossError(NetworkError):
    """Training produced a NaN or infinite loss."""


class BadFormatError(SkillclfError):
    """A serialized file is not valid for its declared format."""


class ArchitectureMismatchError(NetworkError):
    """Stored weights disagree with the declared architecture."""


# --- hierarchy assembly -------------------------------------------------


class MissingEmbeddingError(SkillclfError):
    """A corpus sentence has no vector in the embedding table."""


class NoPositivesError(SkillclfError):
    """A binary dataset contains no positive instances."""


class NoNegativesError(SkillclfError):
    """A binary dataset contains no negative instances."""


# --- evaluation ---------------------------------------------------------


class TooFewInstancesError(SkillclfError):
    """Fewer instances than folds requested."""
