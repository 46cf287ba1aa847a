"""Exception hierarchy shared by all normmap modules."""

from __future__ import annotations


class NormMapError(Exception):
    """Base class for all errors raised by this package."""


# --- dataset ingestion / canonical files ---

class UnknownColumnLayout(NormMapError):
    """Raw distribution file does not match the documented column layout."""


class ValueOutOfRange(NormMapError):
    """A feature value violates the dataset's value range."""


class DuplicateTriple(NormMapError):
    """The same (concept, feature) pair occurs more than once."""


class MalformedLine(NormMapError):
    """A canonical file line cannot be parsed; carries the line number."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


# --- embeddings ---

class MalformedHeader(NormMapError):
    """Embedding file header is missing or inconsistent with the body."""


class DimensionMismatch(NormMapError):
    """Vector or matrix dimensions do not agree."""


class DuplicateWord(NormMapError):
    """The same word occurs twice in an embedding file."""


class MissingEmbedding(NormMapError):
    """A concept has no embedding and the alignment policy is 'error'."""


class EmptyIntersection(NormMapError):
    """No concept of the norm has an embedding."""


# --- models ---

class DegenerateInput(NormMapError):
    """Training data carries no usable variance (e.g. constant columns)."""


class KTooLarge(NormMapError):
    """Requested latent dimension exceeds what the data supports."""


class NonFiniteLoss(NormMapError):
    """Training loss became NaN/inf; carries the epoch index."""

    def __init__(self, message: str, epoch: int):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


# --- evaluation ---

class EmptyGold(NormMapError):
    """Gold feature set is empty, so retrieval metrics are undefined."""


class LengthMismatch(NormMapError):
    """Paired per-concept vectors have different lengths."""


# --- ablation ---

class NotCategorical(NormMapError):
    """Operation requires a sparse categorical norm matrix."""


class MissingTaxonomyMeta(NormMapError):
    """Norm lacks the taxonomic feature tags this operation needs."""


# --- experiment / CLI ---

class ConfigInvalid(NormMapError):
    """Experiment configuration is invalid; carries the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ReportIOError(NormMapError):
    """A report could not be written."""
