"""Exception types shared across the package.

Every error raised on a contract violation is a subclass of
:class:`SourceQuoteError`, so callers can catch one base type at CLI and
service boundaries.
"""


class SourceQuoteError(Exception):
    pass


# corpus loading / validation

class SchemaError(SourceQuoteError):
    """A serialized record is missing a field or has one of the wrong type."""


class InvariantError(SourceQuoteError):
    """A structurally valid record violates a domain invariant."""


class EmptyCorpus(SourceQuoteError):
    pass


# construction pipeline

class UnsortedStream(SourceQuoteError):
    """Article stream handed to the de-duplicator was not chronological."""


class BoundaryError(SourceQuoteError):
    """A record's timestamp falls strictly between the split boundaries."""


# annotation

class UnbalancedQuotes(SourceQuoteError):
    pass


class SpanNotFound(SourceQuoteError):
    pass


class MissingPrediction(SourceQuoteError):
    pass


# indexing and retrieval

class DuplicateDocId(SourceQuoteError):
    pass


class EmptyQuery(SourceQuoteError):
    """Query produced no terms after tokenization."""


class BadMagic(SourceQuoteError):
    pass


class DimMismatch(SourceQuoteError):
    pass


class TruncatedFile(SourceQuoteError):
    pass


class NormalizationError(SourceQuoteError):
    """A zero vector cannot be L2-normalized."""


class EmptyStore(SourceQuoteError):
    pass


class ParameterError(SourceQuoteError):
    pass


class UnknownExpert(SourceQuoteError):
    pass


# recommendation

class EmptyField(SourceQuoteError):
    """The record field selected by the query spec is empty."""


class UnknownDocId(SourceQuoteError):
    pass


class IndexMissing(SourceQuoteError):
    """The index or statistics required by the requested method is not loaded."""


# evaluation

class TooFewSources(SourceQuoteError):
    pass


class UnknownQuery(SourceQuoteError):
    pass


class MissingClusterModel(SourceQuoteError):
    pass
