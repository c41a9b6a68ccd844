"""Corpus-to-embedding-table exporter backed by pretrained sentence encoders."""

from .exporter import (
    DimensionMismatchError,
    ExportError,
    ExportJob,
    MalformedCorpusError,
    ModelLoadError,
    export_embeddings,
    read_corpus_sentences,
    render_table,
)

__all__ = [
    "DimensionMismatchError",
    "ExportError",
    "ExportJob",
    "MalformedCorpusError",
    "ModelLoadError",
    "export_embeddings",
    "read_corpus_sentences",
    "render_table",
]

__version__ = "0.1.0"
