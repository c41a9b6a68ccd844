"""Encode corpus sentences and render them as an embedding table.

The input is the annotated corpus format (one ``ad_id: idx; text;
labels`` record per line) and the output is the tab-separated embedding
table other tools in this toolchain consume: a ``#dim=...`` header line
followed by one quoted ``"ad_id:idx"`` key and its vector per row. Only
the key fields and the sentence text matter here; label tokens are
carried past without interpretation.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

DEFAULT_DIM = 768
DEFAULT_BATCH_SIZE = 64

# encode(texts) -> array of shape (len(texts), model_dim)
Encoder = Callable[[Sequence[str]], np.ndarray]


class ExportError(Exception):
    """Base class for exporter failures."""


class MalformedCorpusError(ExportError):
    """A corpus line does not follow the record grammar."""


class ModelLoadError(ExportError):
    """The sentence-embedding checkpoint could not be loaded."""


class DimensionMismatchError(ExportError):
    """The encoder's output width differs from the declared dimension."""


@dataclass(frozen=True)
class ExportJob:
    """One corpus-to-table run."""

    corpus_path: str
    model_id: str
    output_path: str
    dim: int = DEFAULT_DIM
    batch_size: int = DEFAULT_BATCH_SIZE

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise DimensionMismatchError(f"dim must be >= 1, got {self.dim}")
        if self.batch_size < 1:
            raise ExportError(f"batch size must be >= 1, got {self.batch_size}")


def read_corpus_sentences(text: str) -> list[tuple[str, int, str]]:
    """Extract (ad_id, sentence_index, sentence) triples from corpus text.

    Blank lines and '#' comments are skipped. The label field must be
    present but its content is not validated. Duplicate keys are
    rejected so the output rows biject with the corpus records.
    """
    rows: list[tuple[str, int, str]] = []
    seen: set[tuple[str, int]] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split(";")
        if len(parts) != 3:
            raise MalformedCorpusError(
                f"line {lineno}: expected 2 ';' delimiters, got {len(parts) - 1}"
            )
        head, sentence, labels = parts
        ad_id, colon, index_part = head.partition(":")
        ad_id = ad_id.strip()
        index_part = index_part.strip()
        if not colon or not ad_id:
            raise MalformedCorpusError(f"line {lineno}: expected 'ad_id: index' head")
        if not index_part.isdigit():
            raise MalformedCorpusError(
                f"line {lineno}: sentence index must be an integer, got {index_part!r}"
            )
        if not labels.strip():
            raise MalformedCorpusError(f"line {lineno}: empty label field")
        key = (ad_id, int(index_part))
        if key in seen:
            raise MalformedCorpusError(f"line {lineno}: duplicate record key {key}")
        seen.add(key)
        rows.append((ad_id, int(index_part), sentence.strip()))
    return rows


def build_encoder(model_id: str, batch_size: int) -> Encoder:
    """Load a pretrained checkpoint and wrap it as a plain callable."""
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise ModelLoadError(f"sentence-transformers is not installed: {exc}") from None
    try:
        model = SentenceTransformer(model_id)
    except Exception as exc:
        raise ModelLoadError(f"cannot load model {model_id!r}: {exc}") from None

    def encode(texts: Sequence[str]) -> np.ndarray:
        return np.asarray(
            model.encode(
                list(texts),
                batch_size=batch_size,
                show_progress_bar=False,
                convert_to_numpy=True,
            )
        )

    return encode


def _format_float(x: float) -> str:
    return f"{x:.9g}"


def render_table(
    keys: Sequence[tuple[str, int]],
    vectors: np.ndarray,
    dim: int,
    provider: str,
) -> str:
    """Render keys and row vectors in the embedding-table format."""
    if vectors.shape != (len(keys), dim):
        raise DimensionMismatchError(
            f"expected vectors of shape ({len(keys)}, {dim}), got {vectors.shape}"
        )
    order = sorted(range(len(keys)), key=lambda i: keys[i])
    lines = [f"#dim={dim}\tcount={len(keys)}\tprovider={provider}"]
    for i in order:
        ad_id, idx = keys[i]
        fields = "\t".join(_format_float(float(x)) for x in vectors[i])
        lines.append(f'"{ad_id}:{idx}"\t{fields}')
    return "\n".join(lines) + "\n"


def export_embeddings(job: ExportJob, encoder: Encoder | None = None) -> int:
    """Encode every corpus sentence and write the table to job.output_path.

    Returns the number of rows written. The encoder defaults to the
    checkpoint named by job.model_id; tests inject a deterministic one.
    """
    rows = read_corpus_sentences(Path(job.corpus_path).read_text(encoding="utf-8"))
    if encoder is None:
        encoder = build_encoder(job.model_id, job.batch_size)

    keys = [(ad_id, idx) for ad_id, idx, _ in rows]
    chunks: list[np.ndarray] = []
    for start in range(0, len(rows), job.batch_size):
        batch = [text for _, _, text in rows[start : start + job.batch_size]]
        out = np.asarray(encoder(batch), dtype=np.float64)
        if out.ndim != 2 or out.shape[0] != len(batch):
            raise DimensionMismatchError(
                f"encoder returned shape {out.shape} for a batch of {len(batch)}"
            )
        if out.shape[1] != job.dim:
            raise DimensionMismatchError(
                f"model produces {out.shape[1]}-dimensional vectors, "
                f"table is declared dim={job.dim}"
            )
        chunks.append(out)

    vectors = (
        np.concatenate(chunks) if chunks else np.empty((0, job.dim), dtype=np.float64)
    )
    text = render_table(keys, vectors, job.dim, job.model_id)
    out_path = Path(job.output_path)
    tmp = out_path.with_name(out_path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(out_path)
    return len(keys)
