"""N-best reranking for named entity recognition with collapsed sentence patterns."""

__version__ = "0.1.0"
