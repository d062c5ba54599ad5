"""Quote-source retrieval engine and expert recommender."""

from .analysis import TokenizerConfig, tokenize
from .errors import SourceQuoteError
from .records import Corpus, QuoteRecord, corpus_stats, load_corpus, parse_record
from .recommend import DocSpec, IndexSet, QuerySpec, recommend

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "DocSpec",
    "IndexSet",
    "QuerySpec",
    "QuoteRecord",
    "SourceQuoteError",
    "TokenizerConfig",
    "__version__",
    "corpus_stats",
    "load_corpus",
    "parse_record",
    "recommend",
    "tokenize",
]
